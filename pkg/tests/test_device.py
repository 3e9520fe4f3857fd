import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tactopath.device import (DeviceState, EdgeKind, InteractionDetectorConfig,
                              InteractionSignal, SessionRecord, SwitchEvent,
                              detect_interaction, parse_event_script,
                              run_session, step_state)
from tactopath.phantoms import TactileFrame

IDLE = DeviceState.IDLE
WORKING = DeviceState.WORKING
POLYP = DeviceState.POLYP_INTERACTION


def _ev(kind, ts=0):
    return SwitchEvent(kind=kind, timestamp_us=ts)


# every defined transition plus every no-op pair: total function coverage
TRANSITION_TABLE = [
    (IDLE, _ev(EdgeKind.RISING), WORKING),
    (WORKING, _ev(EdgeKind.FALLING), IDLE),
    (WORKING, InteractionSignal.START, POLYP),
    (POLYP, InteractionSignal.END, WORKING),
    (POLYP, _ev(EdgeKind.FALLING), IDLE),
    (IDLE, _ev(EdgeKind.FALLING), IDLE),
    (IDLE, InteractionSignal.START, IDLE),
    (IDLE, InteractionSignal.END, IDLE),
    (WORKING, _ev(EdgeKind.RISING), WORKING),
    (WORKING, InteractionSignal.END, WORKING),
    (POLYP, _ev(EdgeKind.RISING), POLYP),
    (POLYP, InteractionSignal.START, POLYP),
]


@pytest.mark.parametrize("state,event,expected", TRANSITION_TABLE)
def test_transition_table(state, event, expected):
    assert step_state(state, event) == expected


def _flat_frame(level: int, ts=0, w=8, h=6) -> TactileFrame:
    return TactileFrame(width=w, height=h, rgb=bytes([level]) * (w * h * 3),
                        timestamp_us=ts, force_mN=0)


class TestDetector:
    CFG = InteractionDetectorConfig(diff_threshold=5.0, consecutive_frames=3,
                                    baseline_window=5)

    def test_identical_frames_no_signal(self):
        window = [_flat_frame(10)] * 8
        assert detect_interaction(window, self.CFG) is None

    def test_bright_blob_triggers_start(self):
        # baseline black, then 3 frames at level 10 -> mean diff 10 > 5
        window = [_flat_frame(0)] * 5 + [_flat_frame(10)] * 3
        assert detect_interaction(window, self.CFG) is InteractionSignal.START

    def test_single_spike_no_signal(self):
        window = [_flat_frame(0)] * 5 + [_flat_frame(0), _flat_frame(10), _flat_frame(0)]
        assert detect_interaction(window, self.CFG) is None

    def test_end_requires_active(self):
        quiet = [_flat_frame(0)] * 8
        assert detect_interaction(quiet, self.CFG, active=True) is InteractionSignal.END
        assert detect_interaction(quiet, self.CFG, active=False) is None

    def test_short_window_rejected(self):
        with pytest.raises(ValueError):
            detect_interaction([_flat_frame(0)] * 7, self.CFG)

    def test_mismatched_dims_rejected(self):
        window = [_flat_frame(0)] * 7 + [_flat_frame(0, w=4, h=3)]
        with pytest.raises(ValueError):
            detect_interaction(window, self.CFG)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            InteractionDetectorConfig(diff_threshold=0.0)


def _blank_source(frame_idx, ts):
    return _flat_frame(0, ts=ts)


class TestRunSession:
    def test_empty_script(self):
        rec = run_session(_blank_source, [])
        assert rec.frames == []
        assert [s for _, s in rec.state_trace] == [IDLE]

    def test_one_second_working(self):
        script = [_ev(EdgeKind.RISING, 0), _ev(EdgeKind.FALLING, 1_000_000)]
        rec = run_session(_blank_source, script, fps=10)
        assert len(rec.frames) == 10
        assert [s for _, s in rec.state_trace] == [IDLE, WORKING, IDLE]

    def test_blob_produces_interaction_states(self):
        def source(frame_idx, ts):
            level = 50 if 1_000_000 <= ts < 1_500_000 else 0
            return _flat_frame(level, ts=ts)

        script = [_ev(EdgeKind.RISING, 0), _ev(EdgeKind.FALLING, 2_000_000)]
        rec = run_session(source, script, fps=10)
        states = [s for _, s in rec.state_trace]
        assert POLYP in states
        i = states.index(POLYP)
        assert states[i - 1] == WORKING
        assert WORKING in states[i + 1 :]

    def test_source_exhaustion_ends_with_idle(self):
        frames = iter([_flat_frame(0)] * 3)

        def source(frame_idx, ts):
            return next(frames, None)

        script = [_ev(EdgeKind.RISING, 0), _ev(EdgeKind.FALLING, 5_000_000)]
        rec = run_session(source, script, fps=10)
        assert len(rec.frames) == 3
        assert rec.state_trace[-1][1] == IDLE

    def test_unsorted_script_rejected(self):
        script = [_ev(EdgeKind.RISING, 10), _ev(EdgeKind.FALLING, 5)]
        with pytest.raises(ValueError):
            run_session(_blank_source, script)

    def test_replay_determinism(self):
        script = [_ev(EdgeKind.RISING, 0), _ev(EdgeKind.FALLING, 700_000)]
        a = run_session(_blank_source, script, fps=10)
        b = run_session(_blank_source, script, fps=10)
        assert a.state_trace == b.state_trace
        assert [f.rgb for f in a.frames] == [f.rgb for f in b.frames]


def _active_intervals(trace, horizon):
    """(start, end) spans where the device is not Idle."""
    spans = []
    current_start = None
    for ts, state in trace:
        if state != IDLE and current_start is None:
            current_start = ts
        elif state == IDLE and current_start is not None:
            spans.append((current_start, ts))
            current_start = None
    if current_start is not None:
        spans.append((current_start, horizon))
    return spans


def test_no_frame_recorded_while_idle_over_random_scripts():
    rng = np.random.Generator(np.random.PCG64(7))
    for _ in range(100):
        n = int(rng.integers(0, 8))
        times = np.sort(rng.integers(0, 3_000_000, size=n))
        kinds = rng.integers(0, 2, size=n)
        script = [
            _ev(EdgeKind.RISING if k else EdgeKind.FALLING, int(t))
            for t, k in zip(times, kinds)
        ]
        rec = run_session(_blank_source, script, fps=20)
        spans = _active_intervals(rec.state_trace, horizon=10_000_000_000)
        for frame in rec.frames:
            assert any(s <= frame.timestamp_us < e for s, e in spans), (
                f"frame at {frame.timestamp_us} outside active spans {spans}")


class TestPersistence:
    def test_session_save_load_round_trip(self, tmp_path):
        script = [_ev(EdgeKind.RISING, 0), _ev(EdgeKind.FALLING, 500_000)]
        rec = run_session(_blank_source, script, fps=10, session_id=9)
        rec.save(tmp_path / "s")
        back = SessionRecord.load(tmp_path / "s")
        assert back.session_id == 9
        assert back.state_trace == rec.state_trace
        assert [f.rgb for f in back.frames] == [f.rgb for f in rec.frames]

    def test_parse_event_script(self):
        events = parse_event_script("# comment\n0 RISING\n1000 FALLING\n")
        assert events == [_ev(EdgeKind.RISING, 0), _ev(EdgeKind.FALLING, 1000)]

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_event_script("0 RISING EXTRA")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from([EdgeKind.RISING, EdgeKind.FALLING,
                                 InteractionSignal.START, InteractionSignal.END]),
                max_size=30))
def test_polyp_state_only_entered_from_working(inputs):
    state = IDLE
    for item in inputs:
        event = item if isinstance(item, InteractionSignal) else _ev(item)
        new = step_state(state, event)
        if new == POLYP and state != POLYP:
            assert state == WORKING
        state = new
