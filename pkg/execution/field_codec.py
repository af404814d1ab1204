"""
Field Codec - GF(256) Random Linear Coding
Systematic block encoding and incremental Gaussian-elimination decoding
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, NamedTuple, Sequence

import galois
import numpy as np
import streamlit as st

logger = logging.getLogger(__name__)

# x^8 + x^4 + x^3 + x + 1
REDUCTION_POLY = 0x11B

_MASK32 = 0xFFFFFFFF
_MASK64 = 0xFFFFFFFFFFFFFFFF
_XORSHIFT_MULT = 0x2545F4914F6CDD1D


class FieldTables:
    """GF(256) field class plus the dense product and inverse tables derived from it."""

    def __init__(self):
        self.GF = galois.GF(2**8, irreducible_poly=REDUCTION_POLY)
        elements = self.GF.elements
        self.mul = (elements[:, None] * elements[None, :]).view(np.ndarray).astype(np.uint8)
        self.inv = np.zeros(256, dtype=np.uint8)
        self.inv[1:] = (elements[1:] ** -1).view(np.ndarray).astype(np.uint8)
        logger.info(f"✓ GF(256) tables built (poly=0x{REDUCTION_POLY:X})")


@st.cache_resource
def get_field_tables() -> FieldTables:
    """Build the field once per process."""
    return FieldTables()


# =============================================================================
# SCALAR ARITHMETIC
# =============================================================================

def gf_add(a: int, b: int) -> int:
    return a ^ b


def gf_mul(a: int, b: int) -> int:
    """Product in F_256 reduced by 0x11B."""
    GF = get_field_tables().GF
    return int(GF(a) * GF(b))


def gf_inv(a: int) -> int:
    """Multiplicative inverse; zero has none."""
    if a == 0:
        raise ZeroDivisionError("0x00 has no multiplicative inverse in GF(256)")
    GF = get_field_tables().GF
    return int(GF(a) ** -1)


def gf_div(a: int, b: int) -> int:
    return gf_mul(a, gf_inv(b))


# =============================================================================
# CODING VECTORS
# =============================================================================

@lru_cache(maxsize=8192)
def _xorshift_bytes(seed: int, blk_len: int) -> bytes:
    x = ((seed & _MASK32) << 32) | (seed & _MASK32)
    out = bytearray(blk_len)
    for i in range(blk_len):
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        out[i] = (x * _XORSHIFT_MULT) & 0xFF
    return bytes(out)


def coeff_vector(seed: int, blk_len: int) -> np.ndarray:
    """
    Coding coefficients for a coded packet.

    xorshift64* seeded with the 32-bit seed duplicated into both halves of
    the 64-bit state; each output contributes its low byte. Seed 0 yields
    the all-zero vector (the generator's fixed point).

    Returns:
        Read-only uint8 array of length blk_len
    """
    if blk_len < 1:
        raise ValueError(f"blk_len must be >= 1, got {blk_len}")
    return np.frombuffer(_xorshift_bytes(seed & _MASK32, blk_len), dtype=np.uint8)


def nonzero_seed(seed: int, blk_len: int) -> int:
    """Re-draw with seed+1 until the coefficient vector is nonzero."""
    seed &= _MASK32
    while not coeff_vector(seed, blk_len).any():
        seed = (seed + 1) & _MASK32
    return seed


def unit_vector(index: int, blk_len: int) -> np.ndarray:
    v = np.zeros(blk_len, dtype=np.uint8)
    v[index] = 1
    return v


# =============================================================================
# BLOCKS AND ENCODING
# =============================================================================

@dataclass
class Block:
    """A group of equal-length packets coded together."""
    block_no: int
    packets: np.ndarray  # (blk_len, payload_size) uint8

    def __post_init__(self):
        if self.packets.ndim != 2 or self.packets.shape[0] < 1:
            raise ValueError(f"block {self.block_no} needs at least one packet")
        if self.packets.dtype != np.uint8:
            self.packets = self.packets.astype(np.uint8)

    @property
    def blk_len(self) -> int:
        return self.packets.shape[0]

    @property
    def payload_size(self) -> int:
        return self.packets.shape[1]

    @classmethod
    def from_payloads(cls, block_no: int, payloads: Sequence[bytes], payload_size: int) -> "Block":
        """Stack payloads into a block, zero-padding short ones."""
        rows = np.zeros((len(payloads), payload_size), dtype=np.uint8)
        for i, payload in enumerate(payloads):
            if len(payload) > payload_size:
                raise ValueError(
                    f"packet {i} of block {block_no} is {len(payload)} bytes, limit {payload_size}"
                )
            rows[i, :len(payload)] = np.frombuffer(payload, dtype=np.uint8)
        return cls(block_no, rows)

    @classmethod
    def from_bytes(cls, block_no: int, data: bytes, payload_size: int) -> "Block":
        """Segment raw bytes into payload_size packets."""
        payloads = [data[i:i + payload_size] for i in range(0, len(data), payload_size)]
        return cls.from_payloads(block_no, payloads, payload_size)


def encode_systematic(block: Block, index: int) -> bytes:
    """Packet `index` verbatim; its coding vector is the unit vector e_index."""
    if not 0 <= index < block.blk_len:
        raise IndexError(f"systematic index {index} outside block of {block.blk_len}")
    return block.packets[index].tobytes()


def encode_coded(block: Block, seed: int) -> bytes:
    """Byte-wise sum over F_256 of coeff[i] * packet_i."""
    mul = get_field_tables().mul
    coeffs = coeff_vector(seed, block.blk_len)
    products = mul[coeffs[:, None], block.packets]
    return np.bitwise_xor.reduce(products, axis=0).tobytes()


# =============================================================================
# DECODING
# =============================================================================

class InsertResult(NamedTuple):
    innovative: bool
    rank: int


class DecoderState:
    """
    Per-block decoder kept in reduced row-echelon form.

    The row whose pivot is column c is stored at index c, so at full rank
    the coefficient matrix is the identity and payload_matrix holds the
    source packets in order.
    """

    def __init__(self, blk_len: int, payload_size: int):
        if blk_len < 1:
            raise ValueError(f"blk_len must be >= 1, got {blk_len}")
        self.blk_len = blk_len
        self.payload_size = payload_size
        self.coeff_matrix = np.zeros((blk_len, blk_len), dtype=np.uint8)
        self.payload_matrix = np.zeros((blk_len, payload_size), dtype=np.uint8)
        self.pivot_present = np.zeros(blk_len, dtype=bool)
        self.rank = 0
        self._tables = get_field_tables()

    @property
    def decodable(self) -> bool:
        return self.rank == self.blk_len

    def _check_vector(self, vector) -> np.ndarray:
        v = np.asarray(vector, dtype=np.uint8)
        if v.shape != (self.blk_len,):
            raise ValueError(f"coding vector length {v.size} != blk_len {self.blk_len}")
        return v

    def _reduce(self, v: np.ndarray, payload: np.ndarray = None):
        """Eliminate every stored pivot from v (and its payload)."""
        cols = np.flatnonzero(self.pivot_present & (v != 0))
        if cols.size:
            mul = self._tables.mul
            factors = v[cols][:, None]
            v = v ^ np.bitwise_xor.reduce(mul[factors, self.coeff_matrix[cols]], axis=0)
            if payload is not None:
                payload = payload ^ np.bitwise_xor.reduce(
                    mul[factors, self.payload_matrix[cols]], axis=0
                )
        return v, payload

    def is_innovative(self, vector) -> bool:
        v, _ = self._reduce(self._check_vector(vector))
        return bool(v.any())

    def insert(self, vector, payload: bytes) -> InsertResult:
        v = self._check_vector(vector)
        if len(payload) != self.payload_size:
            raise ValueError(f"payload length {len(payload)} != {self.payload_size}")
        pl = np.frombuffer(payload, dtype=np.uint8)

        v, pl = self._reduce(v, pl)
        nonzero = np.flatnonzero(v)
        if nonzero.size == 0:
            return InsertResult(False, self.rank)

        mul = self._tables.mul
        col = nonzero[0]
        scale = mul[self._tables.inv[v[col]]]
        v = scale[v]
        pl = scale[pl]

        # Clear the new pivot column from the rows already stored
        rows = np.flatnonzero(self.pivot_present & (self.coeff_matrix[:, col] != 0))
        if rows.size:
            factors = self.coeff_matrix[rows, col][:, None]
            self.coeff_matrix[rows] ^= mul[factors, v[None, :]]
            self.payload_matrix[rows] ^= mul[factors, pl[None, :]]

        self.coeff_matrix[col] = v
        self.payload_matrix[col] = pl
        self.pivot_present[col] = True
        self.rank += 1
        return InsertResult(True, self.rank)

    def decode(self) -> List[bytes]:
        if not self.decodable:
            raise ValueError(f"block not decodable yet: rank {self.rank}/{self.blk_len}")
        return [row.tobytes() for row in self.payload_matrix]


def decoder_insert(d: DecoderState, vector, payload: bytes) -> InsertResult:
    return d.insert(vector, payload)


def decoder_decode(d: DecoderState) -> List[bytes]:
    return d.decode()
