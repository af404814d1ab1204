"""
Wire Format - CTCP Frames
Big-endian, unpadded encoding of data packets, ACKs and the stream header
"""

import logging
import struct
from dataclasses import dataclass
from typing import Union

logger = logging.getLogger(__name__)

MAGIC = 0xC7

TYPE_DATA = 0
TYPE_ACK = 1
TYPE_STREAM = 2

FLAG_SYSTEMATIC = 0x01
NO_SYS_INDEX = 0xFFFF
# stream_length announcing a backlogged (unbounded) stream
UNBOUNDED_STREAM = 0xFFFFFFFFFFFFFFFF

# magic, type, block_no, seqno, seed, blk_len, flags, sys_index, payload_len
_DATA_HEADER = struct.Struct(">BBIIIHBHH")
# magic, type, ack_currblk, ack_currdof, ack_seqno
_ACK = struct.Struct(">BBIHI")
# magic, type, stream_length, payload_size, numblks
_STREAM = struct.Struct(">BBQHH")

DATA_HEADER_LEN = _DATA_HEADER.size
ACK_LEN = _ACK.size
STREAM_HEADER_LEN = _STREAM.size


class FrameError(ValueError):
    """Raised for frames that cannot be decoded."""


@dataclass(frozen=True)
class Packet:
    """A data packet: systematic (uncoded) or coded over its whole block."""
    block_no: int
    seqno: int
    seed: int
    blk_len: int
    flags: int
    sys_index: int
    payload: bytes

    @property
    def systematic(self) -> bool:
        return bool(self.flags & FLAG_SYSTEMATIC)

    @property
    def payload_len(self) -> int:
        return len(self.payload)

    @classmethod
    def uncoded(cls, block_no: int, seqno: int, blk_len: int, index: int, payload: bytes,
                seed: int = 0) -> "Packet":
        return cls(block_no, seqno, seed, blk_len, FLAG_SYSTEMATIC, index, payload)

    @classmethod
    def coded(cls, block_no: int, seqno: int, blk_len: int, seed: int, payload: bytes) -> "Packet":
        return cls(block_no, seqno, seed, blk_len, 0, NO_SYS_INDEX, payload)


@dataclass(frozen=True)
class Ack:
    """Per-packet acknowledgment: smallest undecoded block, its dofs, echoed seqno."""
    ack_currblk: int
    ack_currdof: int
    ack_seqno: int


@dataclass(frozen=True)
class StreamHeader:
    """One-time metadata frame sent at connection start."""
    stream_length: int
    payload_size: int
    numblks: int


# =============================================================================
# ENCODING
# =============================================================================

def encode_packet(p: Packet) -> bytes:
    if not 1 <= p.blk_len <= 0xFFFF:
        raise ValueError(f"blk_len {p.blk_len} does not fit u16")
    if p.systematic and not 0 <= p.sys_index < p.blk_len:
        raise ValueError(f"sys_index {p.sys_index} outside block of {p.blk_len}")
    if not p.systematic and p.sys_index != NO_SYS_INDEX:
        raise ValueError("coded packets carry sys_index 0xFFFF")
    if len(p.payload) > 0xFFFF:
        raise ValueError(f"payload of {len(p.payload)} bytes does not fit u16 length")
    try:
        header = _DATA_HEADER.pack(
            MAGIC, TYPE_DATA, p.block_no, p.seqno, p.seed,
            p.blk_len, p.flags, p.sys_index, len(p.payload)
        )
    except struct.error as e:
        raise ValueError(f"packet field out of range: {e}") from e
    return header + bytes(p.payload)


def encode_ack(a: Ack) -> bytes:
    try:
        return _ACK.pack(MAGIC, TYPE_ACK, a.ack_currblk, a.ack_currdof, a.ack_seqno)
    except struct.error as e:
        raise ValueError(f"ack field out of range: {e}") from e


def encode_stream_header(h: StreamHeader) -> bytes:
    try:
        return _STREAM.pack(MAGIC, TYPE_STREAM, h.stream_length, h.payload_size, h.numblks)
    except struct.error as e:
        raise ValueError(f"stream header field out of range: {e}") from e


# =============================================================================
# DECODING
# =============================================================================

def _check_prefix(buf: bytes, expected_type: int, minimum: int):
    if len(buf) < 2:
        raise FrameError(f"truncated frame: {len(buf)} bytes")
    if buf[0] != MAGIC:
        raise FrameError(f"bad magic 0x{buf[0]:02X}")
    if buf[1] != expected_type:
        raise FrameError(f"frame type {buf[1]}, expected {expected_type}")
    if len(buf) < minimum:
        raise FrameError(f"truncated frame: {len(buf)} of {minimum} bytes")


def decode_packet(buf: bytes) -> Packet:
    _check_prefix(buf, TYPE_DATA, DATA_HEADER_LEN)
    _, _, block_no, seqno, seed, blk_len, flags, sys_index, payload_len = \
        _DATA_HEADER.unpack_from(buf)
    end = DATA_HEADER_LEN + payload_len
    if end > len(buf):
        raise FrameError(f"payload_len {payload_len} exceeds buffer ({len(buf) - DATA_HEADER_LEN} bytes)")
    if end < len(buf):
        raise FrameError(f"{len(buf) - end} trailing bytes after payload")
    if flags & FLAG_SYSTEMATIC and sys_index >= blk_len:
        raise FrameError(f"sys_index {sys_index} outside block of {blk_len}")
    return Packet(block_no, seqno, seed, blk_len, flags, sys_index, bytes(buf[DATA_HEADER_LEN:end]))


def decode_ack(buf: bytes) -> Ack:
    _check_prefix(buf, TYPE_ACK, ACK_LEN)
    if len(buf) != ACK_LEN:
        raise FrameError(f"ack frame is {len(buf)} bytes, expected {ACK_LEN}")
    _, _, currblk, currdof, seqno = _ACK.unpack(buf)
    return Ack(currblk, currdof, seqno)


def decode_stream_header(buf: bytes) -> StreamHeader:
    _check_prefix(buf, TYPE_STREAM, STREAM_HEADER_LEN)
    if len(buf) != STREAM_HEADER_LEN:
        raise FrameError(f"stream header is {len(buf)} bytes, expected {STREAM_HEADER_LEN}")
    _, _, length, payload_size, numblks = _STREAM.unpack(buf)
    return StreamHeader(length, payload_size, numblks)


def decode_frame(buf: bytes) -> Union[Packet, Ack, StreamHeader]:
    """Dispatch on the type byte."""
    if len(buf) < 2:
        raise FrameError(f"truncated frame: {len(buf)} bytes")
    decoders = {TYPE_DATA: decode_packet, TYPE_ACK: decode_ack, TYPE_STREAM: decode_stream_header}
    decoder = decoders.get(buf[1])
    if decoder is None:
        raise FrameError(f"unknown frame type {buf[1]}")
    return decoder(buf)
