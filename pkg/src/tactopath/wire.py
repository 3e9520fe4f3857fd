"""Datagram streaming protocol for tactile frames.

Frames are chunked into CRC-protected packets; the receiver reassembles and
delivers only byte-complete frames, silently dropping anything corrupted or
incomplete. One-way, no retransmission: live monitoring favors latency.
"""

from __future__ import annotations

import socket
import struct
import time
import zlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .device import SessionRecord
from .phantoms import TactileFrame

MAGIC = b"HYSE"
VERSION = 1

MSG_FRAME_CHUNK = 0
MSG_SESSION_META = 1
MSG_SESSION_END = 2

CHUNK_SIZE = 1200
INCOMPLETE_TIMEOUT_S = 0.200

# magic(4) version(1) msg_type(1) session_id(4) frame_id(4) timestamp_us(8)
# force_mN(2) chunk_idx(2) chunk_count(2) payload_len(2)
_HEADER = struct.Struct(">4sBBIIQHHHH")
HEADER_SIZE = _HEADER.size  # 30
MAX_PACKET_SIZE = HEADER_SIZE + CHUNK_SIZE + 4

_META = struct.Struct(">HHBB")  # width, height, channels, fps


@dataclass(frozen=True)
class FramePacket:
    msg_type: int
    session_id: int
    frame_id: int
    timestamp_us: int
    force_mN: int
    chunk_idx: int
    chunk_count: int
    payload: bytes

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(
            MAGIC, VERSION, self.msg_type, self.session_id, self.frame_id,
            self.timestamp_us, self.force_mN, self.chunk_idx, self.chunk_count,
            len(self.payload),
        )
        body = head + self.payload
        return body + struct.pack(">I", zlib.crc32(body))

    @classmethod
    def parse(cls, raw: bytes) -> Optional["FramePacket"]:
        """Parse and validate; returns None for anything malformed."""
        if len(raw) < HEADER_SIZE + 4:
            return None
        magic, version, msg_type, sid, fid, ts, force, cidx, ccount, plen = _HEADER.unpack_from(raw)
        if magic != MAGIC or version != VERSION:
            return None
        if len(raw) != HEADER_SIZE + plen + 4 or plen > CHUNK_SIZE:
            return None
        (crc,) = struct.unpack_from(">I", raw, HEADER_SIZE + plen)
        if crc != zlib.crc32(raw[: HEADER_SIZE + plen]):
            return None
        if msg_type == MSG_FRAME_CHUNK and cidx >= ccount:
            return None
        return cls(
            msg_type=msg_type, session_id=sid, frame_id=fid, timestamp_us=ts,
            force_mN=force, chunk_idx=cidx, chunk_count=ccount,
            payload=raw[HEADER_SIZE : HEADER_SIZE + plen],
        )


def encode_frame(frame: TactileFrame, session_id: int, frame_id: int) -> list[FramePacket]:
    payload = frame.rgb
    chunk_count = max(1, -(-len(payload) // CHUNK_SIZE))
    if chunk_count > 0xFFFF:
        raise ValueError(f"frame needs {chunk_count} chunks, max is 65535")
    return [
        FramePacket(
            msg_type=MSG_FRAME_CHUNK, session_id=session_id, frame_id=frame_id,
            timestamp_us=frame.timestamp_us, force_mN=frame.force_mN,
            chunk_idx=i, chunk_count=chunk_count,
            payload=payload[i * CHUNK_SIZE : (i + 1) * CHUNK_SIZE],
        )
        for i in range(chunk_count)
    ]


def encode_session_meta(session_id: int, width: int, height: int, fps: int) -> FramePacket:
    return FramePacket(
        msg_type=MSG_SESSION_META, session_id=session_id, frame_id=0,
        timestamp_us=0, force_mN=0, chunk_idx=0, chunk_count=1,
        payload=_META.pack(width, height, 3, fps),
    )


def encode_session_end(session_id: int, frame_count: int = 0) -> FramePacket:
    """End-of-session marker; frame_id carries the total frames sent (0 if
    unknown) so the receiver can account for frames lost in their entirety."""
    return FramePacket(
        msg_type=MSG_SESSION_END, session_id=session_id, frame_id=frame_count,
        timestamp_us=0, force_mN=0, chunk_idx=0, chunk_count=1, payload=b"",
    )


@dataclass
class _PendingFrame:
    chunk_count: int
    timestamp_us: int
    force_mN: int
    chunks: dict = field(default_factory=dict)
    first_seen: float = 0.0

    def complete(self) -> bool:
        return len(self.chunks) == self.chunk_count


@dataclass
class ReassemblyBuffer:
    """Single-consumer reassembly with drop-incomplete semantics."""

    clock: Callable[[], float] = time.monotonic
    width: int = 0
    height: int = 0
    fps: int = 0
    session_id: Optional[int] = None
    ended: bool = False
    bad_crc: int = 0
    dropped_frames: int = 0
    delivered_frames: int = 0
    last_frame_id: Optional[int] = None  # id of the most recently delivered frame
    _pending: dict = field(default_factory=dict)
    _delivered_ids: set = field(default_factory=set)
    _dropped_ids: set = field(default_factory=set)
    # every id <= watermark is accounted (delivered or dropped); None until
    # the first chunk fixes the numbering origin
    _watermark: Optional[int] = None

    def ingest_packet(self, raw: bytes) -> Optional[TactileFrame]:
        pkt = FramePacket.parse(raw)
        if pkt is None:
            self.bad_crc += 1
            return None
        if pkt.msg_type == MSG_SESSION_META:
            if len(pkt.payload) == _META.size:
                self.width, self.height, _, self.fps = _META.unpack(pkt.payload)
                self.session_id = pkt.session_id
            return None
        if pkt.msg_type == MSG_SESSION_END:
            self.ended = True
            self._expire(drop_all=True)
            if pkt.frame_id:
                self._account_missing(pkt.frame_id)
            return None
        if pkt.frame_id in self._delivered_ids:
            return None
        if self._watermark is None:
            self._watermark = pkt.frame_id - 1
        elif pkt.frame_id <= self._watermark:
            return None
        pending = self._pending.get(pkt.frame_id)
        if pending is None:
            pending = _PendingFrame(
                chunk_count=pkt.chunk_count, timestamp_us=pkt.timestamp_us,
                force_mN=pkt.force_mN, first_seen=self.clock(),
            )
            self._pending[pkt.frame_id] = pending
        pending.chunks[pkt.chunk_idx] = pkt.payload
        if pending.complete():
            del self._pending[pkt.frame_id]
            self._delivered_ids.add(pkt.frame_id)
            # a newly completed frame supersedes any older incomplete one,
            # and any older id never seen at all counts as dropped too
            self._expire(before=pkt.frame_id)
            self._account_missing(pkt.frame_id)
            data = b"".join(pending.chunks[i] for i in range(pending.chunk_count))
            if self.width and len(data) == self.width * self.height * 3:
                self.delivered_frames += 1
                self.last_frame_id = pkt.frame_id
                return TactileFrame(
                    width=self.width, height=self.height, rgb=data,
                    timestamp_us=pending.timestamp_us, force_mN=pending.force_mN,
                )
            self.dropped_frames += 1
            return None
        self._expire_stale()
        return None

    def _expire(self, before: Optional[int] = None, drop_all: bool = False) -> None:
        stale = [
            fid for fid in self._pending
            if drop_all or (before is not None and fid < before)
        ]
        for fid in stale:
            del self._pending[fid]
            self._dropped_ids.add(fid)
            self.dropped_frames += 1

    def _account_missing(self, up_to: int) -> None:
        """Count frame ids never seen on the wire (sequential numbering)."""
        start = 0 if self._watermark is None else self._watermark
        for fid in range(start + 1, up_to + 1):
            if (fid not in self._delivered_ids and fid not in self._dropped_ids
                    and fid not in self._pending):
                self._dropped_ids.add(fid)
                self.dropped_frames += 1
        self._watermark = max(start, up_to)

    def _expire_stale(self) -> None:
        now = self.clock()
        stale = [
            fid for fid, p in self._pending.items()
            if now - p.first_seen > INCOMPLETE_TIMEOUT_S
        ]
        for fid in stale:
            del self._pending[fid]
            self._dropped_ids.add(fid)
            self.dropped_frames += 1

    @property
    def counters(self) -> dict:
        return {
            "bad_crc": self.bad_crc,
            "dropped_frames": self.dropped_frames,
            "delivered_frames": self.delivered_frames,
        }


@dataclass
class TransmitStats:
    packets_sent: int = 0
    frames_sent: int = 0
    aborted: bool = False


class SimulatedChannel:
    """In-process lossy datagram channel with seeded drop and reorder."""

    def __init__(self, sink: Callable[[bytes], None], loss: float = 0.0,
                 reorder: float = 0.0, seed: int = 0):
        if not 0.0 <= loss < 1.0:
            raise ValueError("loss probability must be in [0, 1)")
        self.sink = sink
        self.loss = loss
        self.reorder = reorder
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self._held: Optional[bytes] = None

    def send(self, raw: bytes) -> None:
        if self.loss and self.rng.random() < self.loss:
            return
        if self.reorder and self._held is None and self.rng.random() < self.reorder:
            self._held = raw
            return
        self.sink(raw)
        if self._held is not None:
            held, self._held = self._held, None
            self.sink(held)

    def flush(self) -> None:
        if self._held is not None:
            self.sink(self._held)
            self._held = None


class UdpTransport:
    def __init__(self, dest: tuple[str, int]):
        self.dest = dest
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, raw: bytes) -> None:
        self.sock.sendto(raw, self.dest)

    def flush(self) -> None:
        pass

    def close(self) -> None:
        self.sock.close()


def stream_session(record: SessionRecord, transport, pace_s: float = 0.0) -> TransmitStats:
    """Send session_meta, every frame's chunks, then session_end."""
    stats = TransmitStats()
    if not record.frames:
        width = height = 0
    else:
        width, height = record.frames[0].width, record.frames[0].height
    try:
        transport.send(encode_session_meta(record.session_id, width, height, record.fps).to_bytes())
        stats.packets_sent += 1
        for frame_id, frame in enumerate(record.frames, start=1):
            for pkt in encode_frame(frame, record.session_id, frame_id):
                transport.send(pkt.to_bytes())
                stats.packets_sent += 1
            stats.frames_sent += 1
            if pace_s:
                time.sleep(pace_s)
        transport.send(encode_session_end(record.session_id, stats.frames_sent).to_bytes())
        stats.packets_sent += 1
        if hasattr(transport, "flush"):
            transport.flush()
    except OSError:
        stats.aborted = True
    return stats


def receive_session(
    listen_port: int,
    timeout_s: float = 5.0,
    session_id: int = 0,
    host: str = "127.0.0.1",
) -> tuple[SessionRecord, dict]:
    """Blocking UDP receiver: collects one session until session_end or timeout."""
    buf = ReassemblyBuffer()
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind((host, listen_port))
    sock.settimeout(timeout_s)
    frames = []
    try:
        while not buf.ended:
            try:
                raw, _ = sock.recvfrom(MAX_PACKET_SIZE + 64)
            except socket.timeout:
                break
            frame = buf.ingest_packet(raw)
            if frame is not None:
                frames.append(frame)
    finally:
        sock.close()
    record = SessionRecord(
        session_id=buf.session_id if buf.session_id is not None else session_id,
        fps=buf.fps or 10, frames=frames, source="FileReplay",
    )
    return record, buf.counters
