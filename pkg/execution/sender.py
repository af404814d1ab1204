"""
CTCP Sender - Estimation, Congestion Control and Block Scheduling
Token-based AIMD with adaptive backoff over systematic coded blocks
"""

import logging
import math
import random
from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Dict, List, Optional

from execution.field_codec import Block, encode_coded, encode_systematic, nonzero_seed
from execution.settings import secret_float, secret_int
from execution.wire import UNBOUNDED_STREAM, Ack, Packet, StreamHeader

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    SLOW_START = "slow-start"
    CONGESTION_AVOIDANCE = "congestion-avoidance"


LOSS_COUNT_MODES = ("gap", "inclusive")


@dataclass(frozen=True)
class SenderConfig:
    """
    Sender tunables.

    loss_count_mode "gap" counts ack_seqno - seqno_una losses for a gap ACK;
    "inclusive" adds one, as the estimator is printed in the original algorithm.
    """
    mu: float = 0.1
    gamma: float = 3.0
    initial_tokens: float = 2.0
    initial_ss_threshold: float = 64.0
    numblks: int = 2
    max_blksize: int = 128
    min_blksize: int = 8
    default_p: float = 0.05
    inflight_staleness_factor: float = 1.5
    default_rtt: float = 0.2
    token_floor: float = 2.0
    initial_p: float = 0.0
    loss_count_mode: str = "gap"

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must be in (0, 1), got {self.mu}")
        if self.gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.inflight_staleness_factor < 1:
            raise ValueError(f"staleness factor must be >= 1, got {self.inflight_staleness_factor}")
        if not 1 <= self.min_blksize <= self.max_blksize <= 0xFFFF:
            raise ValueError(f"blksize bounds invalid: [{self.min_blksize}, {self.max_blksize}]")
        if self.numblks < 1:
            raise ValueError(f"numblks must be >= 1, got {self.numblks}")
        if self.initial_tokens < 1 or self.token_floor < 1:
            raise ValueError("initial_tokens and token_floor must be >= 1")
        for name in ("default_p", "initial_p"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.default_rtt <= 0:
            raise ValueError(f"default_rtt must be positive, got {self.default_rtt}")
        if self.loss_count_mode not in LOSS_COUNT_MODES:
            raise ValueError(f"loss_count_mode must be one of {LOSS_COUNT_MODES}")

    @classmethod
    def from_secrets(cls, **overrides) -> "SenderConfig":
        """Defaults overridden by CTCP_* secrets, then by explicit keyword overrides."""
        base = cls()
        values = {
            "mu": secret_float("CTCP_MU", base.mu),
            "gamma": secret_float("CTCP_GAMMA", base.gamma),
            "initial_tokens": secret_float("CTCP_INITIAL_TOKENS", base.initial_tokens),
            "initial_ss_threshold": secret_float("CTCP_SS_THRESHOLD", base.initial_ss_threshold),
            "numblks": secret_int("CTCP_NUMBLKS", base.numblks),
            "min_blksize": secret_int("CTCP_MIN_BLKSIZE", base.min_blksize),
            "max_blksize": secret_int("CTCP_MAX_BLKSIZE", base.max_blksize),
            "default_p": secret_float("CTCP_DEFAULT_P", base.default_p),
            "inflight_staleness_factor": secret_float("CTCP_STALENESS", base.inflight_staleness_factor),
        }
        values.update(overrides)
        return cls(**values)

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def with_overrides(self, **overrides) -> "SenderConfig":
        return replace(self, **overrides)


# =============================================================================
# ESTIMATORS
# =============================================================================

def update_loss_estimate(p: float, losses: int, mu: float) -> float:
    """
    Exponential smoothing of the 0/1 loss sequence.

    losses=0 is one success; losses=L>=1 is one success followed by L losses.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if losses < 0:
        raise ValueError(f"losses must be >= 0, got {losses}")
    keep = 1 - mu
    if losses == 0:
        return p * keep
    updated = p * keep ** (losses + 1) + (1 - keep ** losses)
    return min(1.0, max(0.0, updated))


def backoff_factor(rtt_min: float, rtt: float) -> float:
    """beta = RTT_min / RTT."""
    if rtt_min <= 0 or rtt <= 0:
        raise ValueError(f"RTTs must be positive, got RTT_min={rtt_min}, RTT={rtt}")
    if rtt_min > rtt:
        raise ValueError(f"RTT_min {rtt_min} exceeds RTT {rtt}")
    return rtt_min / rtt


# =============================================================================
# SENDER STATE MACHINE
# =============================================================================

class CtcpSender:
    """
    Per-connection sender state.

    Every time argument is caller-supplied, in seconds; the machine has no
    clock of its own. Attribute names follow the sender parameter table:
    p, rtt, rtt_min, rto, seqno_nxt, seqno_una, ss_threshold, time_lastack,
    tokens, blksize, currblk, currdof, numblks, block_of (B) and send_time (T).
    """

    def __init__(self, source, config: Optional[SenderConfig] = None, seed: int = 0):
        self.config = config or SenderConfig()
        self.source = source
        cfg = self.config

        self.p = cfg.initial_p
        self.rtt = cfg.default_rtt
        self.rtt_min = math.inf
        self.seqno_nxt = 0
        self.seqno_una = 0
        self.ss_threshold = cfg.initial_ss_threshold
        self.time_lastack: Optional[float] = None
        self.tokens = cfg.initial_tokens
        self.blksize = cfg.min_blksize
        self.currblk = 0
        self.currdof = 0
        self.numblks = cfg.numblks
        self.mode = Mode.SLOW_START

        self.send_time: Dict[int, float] = {}
        self.block_of: Dict[int, int] = {}
        self.blocks: Dict[int, Block] = {}
        self.next_sys_index: Dict[int, int] = {}
        # per block, seqnos and send times in send order
        self._sent_seqnos: Dict[int, List[int]] = {}
        self._sent_times: Dict[int, List[float]] = {}

        self._next_block_no = 0
        self._next_source_index = 0
        # seqnos below this were outstanding at the last timeout
        self._stale_before = 0
        self._seeds = random.Random(seed)

        self.packets_sent = 0
        self.systematic_sent = 0
        self.coded_sent = 0
        self.acks_received = 0
        self.stale_acks = 0
        self.timeouts = 0

    @property
    def rto(self) -> float:
        return self.config.gamma * self.rtt

    @property
    def finished(self) -> bool:
        """Source exhausted and every opened block acknowledged."""
        return not self._has_more_source() and self.currblk >= self._next_block_no

    @property
    def blocks_opened(self) -> int:
        return self._next_block_no

    def start(self, now: float) -> StreamHeader:
        """SYN-equivalent: arm the ACK timer and announce the stream."""
        self.time_lastack = now
        self._ensure_blocks()
        length = self.source.stream_length
        return StreamHeader(
            stream_length=UNBOUNDED_STREAM if length is None else length,
            payload_size=self.source.payload_size,
            numblks=self.numblks
        )

    # -------------------------------------------------------------------------
    # Block lifecycle
    # -------------------------------------------------------------------------

    def _has_more_source(self) -> bool:
        total = self.source.total_packets
        return total is None or self._next_source_index < total

    def adapt_blksize(self) -> int:
        """Block size for the next block: tokens, rounded and clamped."""
        cfg = self.config
        self.blksize = min(max(round(self.tokens), cfg.min_blksize), cfg.max_blksize)
        return self.blksize

    def _open_block(self):
        size = self.adapt_blksize()
        total = self.source.total_packets
        if total is not None:
            size = min(size, total - self._next_source_index)
        payloads = self.source.read(self._next_source_index, size)
        block_no = self._next_block_no
        self.blocks[block_no] = Block.from_payloads(block_no, payloads, self.source.payload_size)
        self.next_sys_index[block_no] = 0
        self._next_block_no += 1
        self._next_source_index += size
        logger.debug(f"Opened block {block_no} with {size} packets")

    def _ensure_blocks(self):
        while self._next_block_no < self.currblk + self.numblks and self._has_more_source():
            self._open_block()

    def _free_blocks(self, upto: int):
        for block_no in range(self.currblk, upto):
            self.blocks.pop(block_no, None)
            self.next_sys_index.pop(block_no, None)

    # -------------------------------------------------------------------------
    # ACK processing
    # -------------------------------------------------------------------------

    def _count_losses(self, gap: int) -> int:
        if gap == 0:
            return 0
        return gap + 1 if self.config.loss_count_mode == "inclusive" else gap

    def _update_tokens(self, gap_ack: bool):
        if self.mode is Mode.SLOW_START:
            self.tokens += 1
            if self.tokens > self.ss_threshold:
                self.mode = Mode.CONGESTION_AVOIDANCE
                logger.debug(f"Congestion avoidance at {self.tokens:.1f} tokens")
        elif gap_ack:
            beta = backoff_factor(self.rtt_min, self.rtt) if self.rtt_min > 0 else 1.0
            self.tokens = max(beta * self.tokens, self.config.token_floor)
        else:
            self.tokens += 1 / self.tokens

    def on_ack(self, ack: Ack, now: float):
        """Update estimates, block state and tokens from one ACK."""
        sent_at = self.send_time.get(ack.ack_seqno)
        if sent_at is None:
            self.stale_acks += 1
            logger.debug(f"Ignoring ACK for unknown seqno {ack.ack_seqno}")
            return
        self.acks_received += 1

        self.time_lastack = now
        self.rtt = now - sent_at
        self.rtt_min = min(self.rtt_min, self.rtt)

        if ack.ack_currblk > self.currblk:
            self._free_blocks(ack.ack_currblk)
            self.currblk = ack.ack_currblk
            self.currdof = ack.ack_currdof
        if ack.ack_currblk == self.currblk:
            self.currdof = max(ack.ack_currdof, self.currdof)

        gap = ack.ack_seqno - self.seqno_una
        self.p = update_loss_estimate(self.p, self._count_losses(gap), self.config.mu)
        self._update_tokens(gap_ack=gap > 0)

        for seqno in range(self.seqno_una, ack.ack_seqno + 1):
            self.send_time.pop(seqno, None)
            self.block_of.pop(seqno, None)
        self.seqno_una = ack.ack_seqno + 1
        self._ensure_blocks()

    def check_timeout(self, now: float) -> bool:
        """Reset to slow start when no ACK arrived for RTO. Returns True on timeout."""
        if self.time_lastack is None or now <= self.time_lastack + self.rto:
            return False

        cfg = self.config
        tokens_before = self.tokens
        self.tokens = cfg.initial_tokens
        self.mode = Mode.SLOW_START
        self.ss_threshold = max(tokens_before / 2, cfg.initial_tokens)
        self.p = cfg.default_p
        self.rtt = cfg.default_rtt
        self.time_lastack = now
        self._stale_before = self.seqno_nxt
        self.timeouts += 1
        logger.info(f"Timeout at t={now:.3f}s: tokens {tokens_before:.1f} -> {self.tokens:.1f}")
        return True

    # -------------------------------------------------------------------------
    # Scheduling
    # -------------------------------------------------------------------------

    def onfly(self, now: float) -> Counter:
        """Per-block count of unacknowledged packets sent within the staleness horizon."""
        horizon = self.config.inflight_staleness_factor * self.rtt
        lowest = max(self.seqno_una, self._stale_before)
        counts = Counter()
        for block_no in list(self._sent_seqnos):
            seqnos = self._sent_seqnos[block_no]
            if seqnos[-1] < lowest:
                del self._sent_seqnos[block_no], self._sent_times[block_no]
                continue
            # both lists are sorted, so the live packets are a suffix
            first = max(bisect_left(seqnos, lowest),
                        bisect_right(self._sent_times[block_no], now, key=lambda t: t + horizon))
            if first < len(seqnos):
                counts[block_no] = len(seqnos) - first
        return counts

    def in_flight(self, now: float) -> int:
        return sum(self.onfly(now).values())

    def _select_block(self, onfly: Counter) -> Optional[int]:
        keep = 1 - self.p
        for block_no in range(self.currblk, self.currblk + self.numblks):
            block = self.blocks.get(block_no)
            if block is None:
                break
            needed = block.blk_len - self.currdof if block_no == self.currblk else block.blk_len
            if keep * onfly[block_no] < needed:
                return block_no
        return None

    def schedule_block(self, now: float) -> Optional[int]:
        """Lowest active block still short of expected dofs, or None."""
        self._ensure_blocks()
        return self._select_block(self.onfly(now))

    def next_packet(self, block_no: int, now: float) -> Packet:
        """Systematic packets first, then coded packets with fresh seeds."""
        block = self.blocks.get(block_no)
        if block is None:
            raise ValueError(f"block {block_no} is not active (currblk={self.currblk})")

        seqno = self.seqno_nxt
        index = self.next_sys_index[block_no]
        if index < block.blk_len:
            packet = Packet.uncoded(block_no, seqno, block.blk_len, index, encode_systematic(block, index))
            self.next_sys_index[block_no] = index + 1
            self.systematic_sent += 1
        else:
            seed = nonzero_seed(self._seeds.getrandbits(32), block.blk_len)
            packet = Packet.coded(block_no, seqno, block.blk_len, seed, encode_coded(block, seed))
            self.coded_sent += 1

        self.send_time[seqno] = now
        self.block_of[seqno] = block_no
        self._sent_seqnos.setdefault(block_no, []).append(seqno)
        self._sent_times.setdefault(block_no, []).append(now)
        self.seqno_nxt += 1
        self.packets_sent += 1
        return packet

    def tick(self, now: float) -> List[Packet]:
        """Send while tokens allow and some block still needs packets."""
        if self.time_lastack is None:
            self.time_lastack = now
        self.check_timeout(now)
        self._ensure_blocks()

        onfly = self.onfly(now)
        in_flight = sum(onfly.values())
        packets = []
        while in_flight < int(self.tokens):
            block_no = self._select_block(onfly)
            if block_no is None:
                break
            packets.append(self.next_packet(block_no, now))
            onfly[block_no] += 1
            in_flight += 1
        return packets
