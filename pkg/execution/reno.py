"""
Reno Reference Model - Per-Packet Standard TCP
Slow start, AIMD (alpha=1, beta=0.5) with one backoff per loss window, RTO
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Set

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RenoConfig:
    initial_cwnd: float = 2.0
    initial_ssthresh: float = 64.0
    dupack_threshold: int = 3
    # appropriate byte counting limit during slow start
    abc_limit: int = 2
    initial_rto_s: float = 1.0
    min_rto_s: float = 0.2
    max_rto_s: float = 60.0

    def __post_init__(self):
        if self.initial_cwnd < 1 or self.initial_ssthresh < 2:
            raise ValueError("initial_cwnd must be >= 1 and initial_ssthresh >= 2")
        if self.dupack_threshold < 1 or self.abc_limit < 1:
            raise ValueError("dupack_threshold and abc_limit must be >= 1")
        if not 0 < self.min_rto_s <= self.initial_rto_s <= self.max_rto_s:
            raise ValueError("need 0 < min_rto_s <= initial_rto_s <= max_rto_s")


@dataclass(frozen=True)
class Segment:
    seq: int
    sent_at: float
    retransmit: bool = False


@dataclass(frozen=True)
class RenoAck:
    """Cumulative ACK (next expected seq) echoing the triggering segment's timestamp."""
    ackno: int
    echo_sent_at: float


class RenoSender:
    """NewReno-style sender: fast retransmit/recovery, go-back-N after a timeout."""

    def __init__(self, total_segments: Optional[int] = None, config: Optional[RenoConfig] = None):
        self.config = config or RenoConfig()
        self.total_segments = total_segments

        self.cwnd = self.config.initial_cwnd
        self.ssthresh = self.config.initial_ssthresh
        self.snd_una = 0
        self.snd_nxt = 0
        self.high_water = 0
        self.dupacks = 0
        self.in_recovery = False
        self.recover = -1
        self._recovery_cap = 0.0
        self._partial_acked = False

        self.srtt: Optional[float] = None
        self.rttvar = 0.0
        self.rtt = 0.0
        self.rto = self.config.initial_rto_s
        self.rto_deadline: Optional[float] = None
        self._retransmit = deque()

        self.packets_sent = 0
        self.fast_retransmits = 0
        self.timeouts = 0

    @property
    def window(self) -> float:
        return self.cwnd

    @property
    def finished(self) -> bool:
        return self.total_segments is not None and self.snd_una >= self.total_segments

    def _has_data(self) -> bool:
        return self.total_segments is None or self.snd_nxt < self.total_segments

    def _sample_rtt(self, sample: float):
        if self.srtt is None:
            self.srtt = sample
            self.rttvar = sample / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - sample)
            self.srtt = 0.875 * self.srtt + 0.125 * sample
        self.rtt = sample
        cfg = self.config
        self.rto = min(max(self.srtt + 4 * self.rttvar, cfg.min_rto_s), cfg.max_rto_s)

    def _halved_window(self) -> float:
        return max(min(self.snd_nxt - self.snd_una, self.cwnd) / 2, 2.0)

    def _on_timeout(self, now: float):
        if not self.in_recovery:
            # ssthresh was already halved when recovery began
            self.ssthresh = self._halved_window()
        self.cwnd = 1.0
        self.snd_nxt = self.snd_una
        self.recover = self.high_water - 1
        self.in_recovery = False
        self.dupacks = 0
        self._retransmit.clear()
        self.rto = min(self.rto * 2, self.config.max_rto_s)
        self.rto_deadline = now + self.rto
        self.timeouts += 1
        logger.debug(f"Reno timeout at t={now:.3f}s, rto now {self.rto:.3f}s")

    def on_ack(self, ack: RenoAck, now: float):
        if ack.ackno > self.snd_una:
            newly_acked = ack.ackno - self.snd_una
            self._sample_rtt(now - ack.echo_sent_at)
            self.snd_una = ack.ackno
            self.snd_nxt = max(self.snd_nxt, self.snd_una)
            if self.in_recovery:
                if ack.ackno > self.recover:
                    self.in_recovery = False
                    self.cwnd = self.ssthresh
                else:
                    # partial ACK: the next hole is lost too
                    self._retransmit.append(self.snd_una)
                    self.cwnd = max(self.cwnd - newly_acked + 1, 1.0)
                    if self._partial_acked:
                        # impatient timer: only the first partial ACK restarts the RTO
                        self.dupacks = 0
                        return
                    self._partial_acked = True
            elif self.cwnd < self.ssthresh:
                self.cwnd += min(newly_acked, self.config.abc_limit)
            else:
                self.cwnd += newly_acked / self.cwnd
            self.dupacks = 0
            self.rto_deadline = now + self.rto if self.snd_nxt > self.snd_una else None
            return

        if ack.ackno == self.snd_una and self.snd_nxt > self.snd_una:
            self.dupacks += 1
            if self.in_recovery:
                self.cwnd = min(self.cwnd + 1, self._recovery_cap)
            elif self.dupacks == self.config.dupack_threshold and ack.ackno > self.recover:
                flight = self.snd_nxt - self.snd_una
                self.ssthresh = self._halved_window()
                self.cwnd = self.ssthresh + self.config.dupack_threshold
                # dupacks may not release more than the window that was in flight
                self._recovery_cap = self.ssthresh + flight
                self._partial_acked = False
                self.recover = self.snd_nxt - 1
                self.in_recovery = True
                self._retransmit.append(self.snd_una)
                self.fast_retransmits += 1

    def tick(self, now: float) -> List[Segment]:
        if self.rto_deadline is not None and now >= self.rto_deadline and self.snd_una < self.high_water:
            self._on_timeout(now)

        segments = []
        while self._retransmit:
            seq = self._retransmit.popleft()
            if seq >= self.snd_una:
                segments.append(Segment(seq, now, retransmit=True))
        while self.snd_nxt - self.snd_una < int(self.cwnd) and self._has_data():
            segments.append(Segment(self.snd_nxt, now, retransmit=self.snd_nxt < self.high_water))
            self.snd_nxt += 1
        self.high_water = max(self.high_water, self.snd_nxt)

        if segments and self.rto_deadline is None:
            self.rto_deadline = now + self.rto
        self.packets_sent += len(segments)
        return segments


class RenoReceiver:
    """Cumulative-ACK receiver buffering out-of-order segments."""

    def __init__(self, total_segments: Optional[int] = None):
        self.total_segments = total_segments
        self.expected = 0
        self._out_of_order: Set[int] = set()

    @property
    def delivered_packets(self) -> int:
        return self.expected

    @property
    def complete(self) -> bool:
        return self.total_segments is not None and self.expected >= self.total_segments

    def on_segment(self, segment: Segment) -> RenoAck:
        if segment.seq == self.expected:
            self.expected += 1
            while self.expected in self._out_of_order:
                self._out_of_order.remove(self.expected)
                self.expected += 1
        elif segment.seq > self.expected:
            self._out_of_order.add(segment.seq)
        return RenoAck(self.expected, segment.sent_at)


def reno_flow_step(sender: RenoSender, now: float, ack: Optional[RenoAck] = None) -> List[Segment]:
    """Apply an ACK (if any), then let the window release segments."""
    if ack is not None:
        sender.on_ack(ack, now)
    return sender.tick(now)
