"""
Tests for frame encoding and decoding
"""

import pytest

from execution.wire import (ACK_LEN, DATA_HEADER_LEN, NO_SYS_INDEX, STREAM_HEADER_LEN, UNBOUNDED_STREAM,
                            Ack, FrameError, Packet, StreamHeader, decode_ack, decode_frame,
                            decode_packet, decode_stream_header, encode_ack, encode_packet,
                            encode_stream_header)


def test_frame_lengths():
    assert DATA_HEADER_LEN == 21
    assert ACK_LEN == 12
    assert STREAM_HEADER_LEN == 14
    assert len(encode_packet(Packet.coded(0, 0, 1, 5, b""))) == 21
    assert len(encode_packet(Packet.coded(0, 0, 1, 5, b"x" * 100))) == 121


def test_ack_bytes_are_big_endian():
    assert encode_ack(Ack(1, 2, 3)) == bytes.fromhex("c701" "00000001" "0002" "00000003")


def test_data_packet_layout():
    buf = encode_packet(Packet.uncoded(7, 9, 4, 2, b"hi"))
    assert buf[:2] == b"\xc7\x00"
    assert buf[2:6] == (7).to_bytes(4, "big")
    assert buf[6:10] == (9).to_bytes(4, "big")
    assert buf[14:16] == (4).to_bytes(2, "big")
    assert buf[16] == 1
    assert buf[17:19] == (2).to_bytes(2, "big")
    assert buf[19:21] == (2).to_bytes(2, "big")
    assert buf[21:] == b"hi"


@pytest.mark.parametrize("packet", [
    Packet.uncoded(0, 0, 1, 0, b"a"),
    Packet.uncoded(2**32 - 1, 2**32 - 1, 0xFFFF, 0xFFFE, b"payload"),
    Packet.coded(12, 345, 32, 0xDEADBEEF, bytes(range(256))),
    Packet.coded(1, 1, 3, 1, b""),
])
def test_packet_round_trip(packet):
    decoded = decode_packet(encode_packet(packet))
    assert decoded == packet
    assert decode_frame(encode_packet(packet)) == packet


def test_coded_packet_marks_no_sys_index():
    p = decode_packet(encode_packet(Packet.coded(0, 0, 4, 99, b"xy")))
    assert not p.systematic
    assert p.sys_index == NO_SYS_INDEX


def test_ack_and_stream_header_round_trip():
    ack = Ack(5, 17, 1000)
    assert decode_ack(encode_ack(ack)) == ack
    assert decode_frame(encode_ack(ack)) == ack

    header = StreamHeader(UNBOUNDED_STREAM, 1448, 3)
    assert decode_stream_header(encode_stream_header(header)) == header
    assert decode_frame(encode_stream_header(header)) == header


# =============================================================================
# MALFORMED INPUT
# =============================================================================

def test_bad_magic():
    buf = bytearray(encode_ack(Ack(1, 2, 3)))
    buf[0] = 0x00
    with pytest.raises(FrameError):
        decode_ack(bytes(buf))


def test_truncated_header():
    buf = encode_packet(Packet.coded(0, 0, 2, 1, b"abc"))
    with pytest.raises(FrameError):
        decode_packet(buf[:10])
    with pytest.raises(FrameError):
        decode_frame(b"\xc7")


def test_payload_overrun_and_trailing_bytes():
    buf = encode_packet(Packet.coded(0, 0, 2, 1, b"abc"))
    with pytest.raises(FrameError):
        decode_packet(buf[:-1])
    with pytest.raises(FrameError):
        decode_packet(buf + b"\x00")
    with pytest.raises(FrameError):
        decode_ack(encode_ack(Ack(0, 0, 0)) + b"\x00")


def test_wrong_and_unknown_type():
    with pytest.raises(FrameError):
        decode_packet(encode_ack(Ack(0, 0, 0)))
    with pytest.raises(FrameError):
        decode_frame(b"\xc7\x09" + bytes(12))


def test_systematic_index_outside_block_is_rejected():
    buf = bytearray(encode_packet(Packet.uncoded(0, 0, 4, 3, b"z")))
    buf[17:19] = (4).to_bytes(2, "big")
    with pytest.raises(FrameError):
        decode_packet(bytes(buf))


def test_frame_error_is_a_value_error():
    with pytest.raises(ValueError):
        decode_frame(b"")


@pytest.mark.parametrize("packet", [
    Packet.uncoded(0, 0, 4, 4, b""),
    Packet.coded(0, 0, 0, 1, b""),
    Packet.coded(2**32, 0, 1, 1, b""),
    Packet.coded(0, 0, 1, 1, bytes(0x10000)),
])
def test_encode_rejects_out_of_range_fields(packet):
    with pytest.raises(ValueError):
        encode_packet(packet)


def test_encode_ack_rejects_oversized_dof():
    with pytest.raises(ValueError):
        encode_ack(Ack(0, 0x10000, 0))
