"""
Data Sources - What the Sender Segments into Blocks
In-memory byte streams and deterministic synthetic streams
"""

import math
from typing import List, Optional


class BytesSource:
    """A finite in-memory stream."""

    def __init__(self, data: bytes, payload_size: int):
        if payload_size < 1:
            raise ValueError(f"payload_size must be >= 1, got {payload_size}")
        self.data = bytes(data)
        self.payload_size = payload_size
        self.total_packets: Optional[int] = math.ceil(len(self.data) / payload_size)
        self.stream_length: Optional[int] = len(self.data)

    def read(self, index: int, count: int) -> List[bytes]:
        """Packets [index, index+count); the last one may be short."""
        size = self.payload_size
        return [self.data[i * size:(i + 1) * size] for i in range(index, index + count)]


class PatternSource:
    """
    Synthetic stream whose packet i is the big-endian index repeated to fill
    the payload. Unbounded when total_packets is None (backlogged flows).
    """

    def __init__(self, payload_size: int, total_packets: Optional[int] = None):
        if payload_size < 1:
            raise ValueError(f"payload_size must be >= 1, got {payload_size}")
        self.payload_size = payload_size
        self.total_packets = total_packets
        self.stream_length = None if total_packets is None else total_packets * payload_size

    def packet(self, index: int) -> bytes:
        word = index.to_bytes(8, "big")
        reps = -(-self.payload_size // 8)
        return (word * reps)[:self.payload_size]

    def read(self, index: int, count: int) -> List[bytes]:
        return [self.packet(i) for i in range(index, index + count)]
