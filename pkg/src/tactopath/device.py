"""Edge-device behavior: three-status state machine, switch edge handling,
interaction detection by frame differencing, and session recording."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from .phantoms import TactileFrame


class DeviceState(Enum):
    IDLE = "Idle"
    WORKING = "Working"
    POLYP_INTERACTION = "PolypInteraction"


class EdgeKind(Enum):
    RISING = "RISING"
    FALLING = "FALLING"


@dataclass(frozen=True)
class SwitchEvent:
    kind: EdgeKind
    timestamp_us: int


class InteractionSignal(Enum):
    START = "InteractionStart"
    END = "InteractionEnd"


@dataclass(frozen=True)
class InteractionDetectorConfig:
    diff_threshold: float = 5.0  # mean abs per-pixel difference, 0..255 scale
    consecutive_frames: int = 3
    baseline_window: int = 5

    def __post_init__(self):
        if self.diff_threshold <= 0 or self.consecutive_frames < 1 or self.baseline_window < 1:
            raise ValueError("detector config values must be strictly positive")


def step_state(current: DeviceState, event) -> DeviceState:
    """Total transition function; unknown (state, input) pairs are no-ops."""
    if isinstance(event, SwitchEvent):
        kind = event.kind
        if current == DeviceState.IDLE and kind == EdgeKind.RISING:
            return DeviceState.WORKING
        if current in (DeviceState.WORKING, DeviceState.POLYP_INTERACTION) and kind == EdgeKind.FALLING:
            return DeviceState.IDLE
        return current
    if isinstance(event, InteractionSignal):
        if current == DeviceState.WORKING and event == InteractionSignal.START:
            return DeviceState.POLYP_INTERACTION
        if current == DeviceState.POLYP_INTERACTION and event == InteractionSignal.END:
            return DeviceState.WORKING
        return current
    return current


def _frame_array(frame: TactileFrame) -> np.ndarray:
    return frame.as_array().astype(np.float64)


def detect_interaction(
    window: list[TactileFrame],
    cfg: InteractionDetectorConfig,
    active: bool = False,
    baseline: Optional[np.ndarray] = None,
) -> Optional[InteractionSignal]:
    """Compare recent frames against a baseline.

    The baseline defaults to the mean of the window's first baseline_window
    frames; callers tracking an ongoing interaction pass the baseline frozen
    at interaction start so the contact itself cannot contaminate it. A START
    is emitted when the trailing consecutive_frames all exceed diff_threshold
    while inactive, an END when they all fall below it while active.
    """
    need = cfg.baseline_window + cfg.consecutive_frames
    if len(window) < need:
        raise ValueError(f"window needs >= {need} frames, got {len(window)}")
    dims = {(f.width, f.height) for f in window}
    if len(dims) != 1:
        raise ValueError(f"mismatched frame dimensions in window: {dims}")
    if baseline is None:
        baseline = np.mean([_frame_array(f) for f in window[: cfg.baseline_window]], axis=0)
    tail = window[-cfg.consecutive_frames :]
    diffs = [np.abs(_frame_array(f) - baseline).mean() for f in tail]
    if not active and all(d > cfg.diff_threshold for d in diffs):
        return InteractionSignal.START
    if active and all(d < cfg.diff_threshold for d in diffs):
        return InteractionSignal.END
    return None


@dataclass
class SessionRecord:
    session_id: int
    fps: int
    frames: list[TactileFrame] = field(default_factory=list)
    state_trace: list[tuple[int, DeviceState]] = field(default_factory=list)
    source: str = "Simulated"  # Simulated | FileReplay

    def save(self, out_dir: Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        dims = (self.frames[0].width, self.frames[0].height) if self.frames else (0, 0)
        meta = {
            "session_id": self.session_id,
            "fps": self.fps,
            "width": dims[0],
            "height": dims[1],
            "source": self.source,
            "state_trace": [[t, s.value] for t, s in self.state_trace],
            "frames": [
                {"file": f"frame_{i:06d}.rgb", "timestamp_us": f.timestamp_us,
                 "force_mN": f.force_mN}
                for i, f in enumerate(self.frames)
            ],
        }
        with open(out_dir / "meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        for i, f in enumerate(self.frames):
            (out_dir / f"frame_{i:06d}.rgb").write_bytes(f.rgb)

    @classmethod
    def load(cls, in_dir: Path) -> "SessionRecord":
        in_dir = Path(in_dir)
        with open(in_dir / "meta.json", encoding="utf-8") as fh:
            meta = json.load(fh)
        frames = [
            TactileFrame(
                width=meta["width"], height=meta["height"],
                rgb=(in_dir / fr["file"]).read_bytes(),
                timestamp_us=fr["timestamp_us"], force_mN=fr["force_mN"],
            )
            for fr in meta["frames"]
        ]
        return cls(
            session_id=meta["session_id"],
            fps=meta["fps"],
            frames=frames,
            state_trace=[(t, DeviceState(s)) for t, s in meta["state_trace"]],
            source=meta.get("source", "FileReplay"),
        )


def parse_event_script(text: str) -> list[SwitchEvent]:
    """One event per line: `<timestamp_us> <RISING|FALLING>`."""
    events = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected '<timestamp_us> <RISING|FALLING>'")
        events.append(SwitchEvent(kind=EdgeKind(parts[1].upper()), timestamp_us=int(parts[0])))
    return events


FrameSource = Callable[[int, int], Optional[TactileFrame]]
# (frame_index, timestamp_us) -> frame, or None when exhausted


def run_session(
    frame_source: FrameSource,
    event_script: Iterable[SwitchEvent],
    cfg: InteractionDetectorConfig | None = None,
    session_id: int = 0,
    fps: int = 10,
    source_label: str = "Simulated",
) -> SessionRecord:
    """Replay switch events against the state machine at a fixed frame rate.

    Frames are pulled from the source only while the device is not Idle; the
    interaction detector runs on the recorded stream and injects START/END
    signals. The trace always begins with Idle.
    """
    cfg = cfg or InteractionDetectorConfig()
    events = list(event_script)
    if any(events[i].timestamp_us > events[i + 1].timestamp_us for i in range(len(events) - 1)):
        raise ValueError("event script must be sorted by timestamp")

    state = DeviceState.IDLE
    record = SessionRecord(session_id=session_id, fps=fps, source=source_label)
    record.state_trace.append((events[0].timestamp_us if events else 0, state))

    period_us = 1_000_000 // fps
    frame_idx = 0
    window: list[TactileFrame] = []
    win_cap = cfg.baseline_window + cfg.consecutive_frames
    interacting = False
    frozen_baseline = None

    def transition(event, ts):
        nonlocal state, interacting, frozen_baseline
        new = step_state(state, event)
        if new != state:
            state = new
            record.state_trace.append((ts, state))
            if state == DeviceState.IDLE:
                interacting = False
                frozen_baseline = None

    ei = 0
    t = events[0].timestamp_us if events else 0
    end_ts = events[-1].timestamp_us if events else 0
    while True:
        # apply all switch events due at or before t
        while ei < len(events) and events[ei].timestamp_us <= t:
            transition(events[ei], events[ei].timestamp_us)
            ei += 1
        if state == DeviceState.IDLE:
            if ei >= len(events):
                break
            t = events[ei].timestamp_us
            continue
        frame = frame_source(frame_idx, t)
        if frame is None:
            # source exhausted while active: close the session cleanly
            transition(SwitchEvent(EdgeKind.FALLING, t), t)
            break
        record.frames.append(frame)
        frame_idx += 1
        window.append(frame)
        if len(window) > win_cap:
            window.pop(0)
        if len(window) == win_cap:
            sig = detect_interaction(window, cfg, active=interacting,
                                     baseline=frozen_baseline)
            if sig == InteractionSignal.START:
                interacting = True
                # freeze the pre-contact baseline for END detection
                frozen_baseline = np.mean(
                    [_frame_array(f) for f in window[: cfg.baseline_window]],
                    axis=0)
                transition(sig, t)
            elif sig == InteractionSignal.END:
                interacting = False
                frozen_baseline = None
                transition(sig, t)
        t += period_us
        if ei >= len(events) and t > end_ts:
            # script finished while still active; no further falling edge
            # means the session ends now
            transition(SwitchEvent(EdgeKind.FALLING, t), t)
            break
    if state != DeviceState.IDLE:
        record.state_trace.append((t, DeviceState.IDLE))
    return record
