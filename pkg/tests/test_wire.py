import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tactopath.device import SessionRecord
from tactopath.phantoms import TactileFrame
from tactopath.wire import (CHUNK_SIZE, HEADER_SIZE, MAX_PACKET_SIZE,
                            MSG_FRAME_CHUNK, FramePacket, ReassemblyBuffer,
                            SimulatedChannel, UdpTransport, encode_frame,
                            encode_session_end, encode_session_meta,
                            receive_session, stream_session)


def _frame(data: bytes, w: int, h: int, ts=0, force=100) -> TactileFrame:
    assert len(data) == w * h * 3
    return TactileFrame(width=w, height=h, rgb=data, timestamp_us=ts, force_mN=force)


def _random_frame(rng, w=20, h=15, ts=0) -> TactileFrame:
    return _frame(rng.bytes(w * h * 3), w, h, ts=ts)


class TestFraming:
    def test_header_and_packet_sizes(self):
        assert HEADER_SIZE == 30
        assert MAX_PACKET_SIZE == HEADER_SIZE + CHUNK_SIZE + 4

    def test_3000_byte_payload_chunks(self):
        frame = _frame(b"\x07" * 3000, 10, 100)
        pkts = encode_frame(frame, session_id=1, frame_id=1)
        assert [len(p.payload) for p in pkts] == [1200, 1200, 600]

    def test_chunk_order_concatenation_round_trip(self):
        rng = np.random.Generator(np.random.PCG64(0))
        frame = _random_frame(rng, 25, 20)
        pkts = encode_frame(frame, 1, 1)
        assert b"".join(p.payload for p in pkts) == frame.rgb

    def test_320x240_frame_is_192_chunks(self):
        frame = _frame(b"\x00" * (320 * 240 * 3), 320, 240)
        pkts = encode_frame(frame, 1, 1)
        assert len(pkts) == 192
        assert all(p.chunk_count == 192 for p in pkts)

    def test_packet_byte_round_trip(self):
        pkt = FramePacket(msg_type=MSG_FRAME_CHUNK, session_id=3, frame_id=9,
                          timestamp_us=123456, force_mN=700, chunk_idx=2,
                          chunk_count=5, payload=b"hello")
        assert FramePacket.parse(pkt.to_bytes()) == pkt

    def test_single_bit_flip_detected(self):
        pkt = FramePacket(msg_type=MSG_FRAME_CHUNK, session_id=1, frame_id=1,
                          timestamp_us=0, force_mN=0, chunk_idx=0,
                          chunk_count=1, payload=b"payload-bytes")
        raw = bytearray(pkt.to_bytes())
        raw[HEADER_SIZE + 3] ^= 0x10
        assert FramePacket.parse(bytes(raw)) is None

    def test_truncated_packet_rejected(self):
        assert FramePacket.parse(b"HY") is None


def _reassemble(buf: ReassemblyBuffer, packets) -> list[TactileFrame]:
    delivered = []
    for pkt in packets:
        frame = buf.ingest_packet(pkt.to_bytes())
        if frame is not None:
            delivered.append(frame)
    return delivered


class TestReassembly:
    W, H = 40, 30  # 3600 bytes -> 3 chunks per frame

    def _buf(self):
        buf = ReassemblyBuffer()
        buf.ingest_packet(encode_session_meta(1, self.W, self.H, 10).to_bytes())
        return buf

    def test_in_order_delivery_bit_exact(self, rng):
        frame = _random_frame(rng, self.W, self.H, ts=42)
        buf = self._buf()
        out = _reassemble(buf, encode_frame(frame, 1, 1))
        assert len(out) == 1
        assert out[0].rgb == frame.rgb
        assert out[0].timestamp_us == 42

    def test_reverse_order_delivery_bit_exact(self, rng):
        frame = _random_frame(rng, self.W, self.H)
        buf = self._buf()
        out = _reassemble(buf, list(reversed(encode_frame(frame, 1, 1))))
        assert len(out) == 1
        assert out[0].rgb == frame.rgb

    def test_incomplete_frame_dropped_when_newer_completes(self, rng):
        f7 = _random_frame(rng, self.W, self.H)
        f8 = _random_frame(rng, self.W, self.H)
        buf = self._buf()
        p7 = encode_frame(f7, 1, 7)
        p8 = encode_frame(f8, 1, 8)
        out = _reassemble(buf, [p7[0]] + p8)  # chunk 1 of frame 7 lost
        assert len(out) == 1
        assert out[0].rgb == f8.rgb
        assert buf.dropped_frames == 1
        assert buf.delivered_frames == 1

    def test_corrupted_packet_counted_not_delivered(self, rng):
        frame = _random_frame(rng, self.W, self.H)
        buf = self._buf()
        raws = [p.to_bytes() for p in encode_frame(frame, 1, 1)]
        corrupted = bytearray(raws[0])
        corrupted[-1] ^= 0xFF
        assert buf.ingest_packet(bytes(corrupted)) is None
        assert buf.bad_crc == 1
        assert buf.delivered_frames == 0

    def test_session_end_sets_flag_and_drops_pending(self, rng):
        frame = _random_frame(rng, self.W, self.H)
        buf = self._buf()
        buf.ingest_packet(encode_frame(frame, 1, 1)[0].to_bytes())
        buf.ingest_packet(encode_session_end(1).to_bytes())
        assert buf.ended
        assert buf.dropped_frames == 1


class TestLossyChannel:
    def test_lossless_fuzz_round_trip(self):
        rng = np.random.Generator(np.random.PCG64(5))
        buf = ReassemblyBuffer()
        delivered = []
        channel = SimulatedChannel(
            lambda raw: delivered.append(buf.ingest_packet(raw)), loss=0.0)
        frames = [_random_frame(rng, 8, 6, ts=i) for i in range(200)]
        channel.send(encode_session_meta(1, 8, 6, 10).to_bytes())
        for i, frame in enumerate(frames):
            for pkt in encode_frame(frame, 1, i + 1):
                channel.send(pkt.to_bytes())
        got = [f for f in delivered if f is not None]
        assert len(got) == 200
        assert all(g.rgb == f.rgb for g, f in zip(got, frames))

    def test_lossy_channel_conservation(self):
        rng = np.random.Generator(np.random.PCG64(11))
        buf = ReassemblyBuffer()
        channel = SimulatedChannel(lambda raw: buf.ingest_packet(raw),
                                   loss=0.10, reorder=0.05, seed=3)
        n = 100
        w, h = 40, 30  # 3 chunks per frame
        channel.send(encode_session_meta(1, w, h, 10).to_bytes())
        for i in range(n):
            for pkt in encode_frame(_random_frame(rng, w, h), 1, i + 1):
                channel.send(pkt.to_bytes())
        channel.flush()
        channel.sink(encode_session_end(1, n).to_bytes())
        assert buf.bad_crc == 0
        assert buf.delivered_frames + buf.dropped_frames == n
        assert buf.dropped_frames > 0  # 10% packet loss must cost frames

    def test_wholly_lost_frame_counted_via_gap(self, rng):
        # frame 2 never appears on the wire at all; delivering frame 3 must
        # account for it, and the end marker covers trailing losses
        buf = ReassemblyBuffer()
        buf.ingest_packet(encode_session_meta(1, 8, 6, 10).to_bytes())
        for fid in (1, 3):
            for pkt in encode_frame(_random_frame(rng, 8, 6), 1, fid):
                buf.ingest_packet(pkt.to_bytes())
        assert buf.delivered_frames == 2
        assert buf.dropped_frames == 1
        buf.ingest_packet(encode_session_end(1, 5).to_bytes())  # 4, 5 lost too
        assert buf.dropped_frames == 3
        assert buf.delivered_frames + buf.dropped_frames == 5

    def test_loss_probability_validated(self):
        with pytest.raises(ValueError):
            SimulatedChannel(lambda raw: None, loss=1.0)


class TestSocketPath:
    def test_loopback_session_round_trip(self, rng):
        record = SessionRecord(session_id=4, fps=10,
                               frames=[_random_frame(rng, 16, 12, ts=i * 1000)
                                       for i in range(10)])
        port = 47113
        result = {}

        def recv():
            result["record"], result["counters"] = receive_session(
                port, timeout_s=5.0)

        thread = threading.Thread(target=recv)
        thread.start()
        import time

        time.sleep(0.2)
        transport = UdpTransport(("127.0.0.1", port))
        stats = stream_session(record, transport, pace_s=0.001)
        transport.close()
        thread.join(timeout=10)
        assert not thread.is_alive()
        assert stats.frames_sent == 10
        got = result["record"]
        assert got.session_id == 4
        assert [f.rgb for f in got.frames] == [f.rgb for f in record.frames]
        assert result["counters"]["delivered_frames"] == 10


@settings(max_examples=30, deadline=None)
@given(
    session_id=st.integers(0, 2**32 - 1),
    frame_id=st.integers(0, 2**32 - 1),
    timestamp_us=st.integers(0, 2**64 - 1),
    force=st.integers(0, 13500),
    payload=st.binary(min_size=0, max_size=CHUNK_SIZE),
)
def test_packet_round_trip_property(session_id, frame_id, timestamp_us, force, payload):
    pkt = FramePacket(msg_type=MSG_FRAME_CHUNK, session_id=session_id,
                      frame_id=frame_id, timestamp_us=timestamp_us,
                      force_mN=force, chunk_idx=0, chunk_count=1,
                      payload=payload)
    assert FramePacket.parse(pkt.to_bytes()) == pkt


@settings(max_examples=30, deadline=None)
@given(st.binary(min_size=0, max_size=200))
def test_garbage_never_crashes_parser(raw):
    pkt = FramePacket.parse(raw)
    assert pkt is None or isinstance(pkt, FramePacket)
