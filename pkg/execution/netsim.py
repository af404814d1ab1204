"""
Network Simulator - Dummynet-Style Bottleneck on SimPy
Rate-limited FIFO link with propagation delay, loss applied before the queue,
CTCP and Reno flows driven by the same event loop.

Simulated time is an integer nanosecond clock; protocol code sees seconds.
"""

import logging
import math
import random
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import simpy

from execution.loss_models import LossModel, Verdict, loss_decision
from execution.receiver import CtcpReceiver
from execution.reno import RenoConfig, RenoReceiver, RenoSender, reno_flow_step
from execution.sender import CtcpSender, SenderConfig
from execution.sources import PatternSource
from execution.wire import decode_ack, decode_packet, encode_ack, encode_packet

logger = logging.getLogger(__name__)

NS_PER_S = 1_000_000_000
PROTOCOLS = ("ctcp", "reno")


def to_ns(seconds: float) -> int:
    return int(round(seconds * NS_PER_S))


class ConservationError(RuntimeError):
    """Packet accounting broke: sent != delivered + dropped + queued + in flight."""


# =============================================================================
# SCENARIO TYPES
# =============================================================================

@dataclass(frozen=True)
class LinkConfig:
    rate_bps: float
    prop_delay_s: float
    queue_pkts: int
    loss_model: LossModel = field(default_factory=LossModel)
    ack_loss_model: LossModel = field(default_factory=LossModel)

    def __post_init__(self):
        if self.rate_bps <= 0 or self.prop_delay_s <= 0:
            raise ValueError("link rate and propagation delay must be positive")
        if self.queue_pkts < 1:
            raise ValueError(f"queue must hold at least one packet, got {self.queue_pkts}")

    @property
    def rtt_s(self) -> float:
        return 2 * self.prop_delay_s

    def tx_time_s(self, segment_bytes: int) -> float:
        return segment_bytes * 8 / self.rate_bps

    def bdp_packets(self, segment_bytes: int) -> float:
        return self.rate_bps * self.rtt_s / (8 * segment_bytes)


@dataclass(frozen=True)
class FlowSpec:
    """
    One flow. file_bytes=None means backlogged; duration_s bounds how long
    a backlogged flow keeps sending. payload_bytes is what is actually coded
    and carried, segment_bytes is the wire size the link serializes.
    """
    protocol: str = "ctcp"
    start_s: float = 0.0
    file_bytes: Optional[int] = None
    duration_s: Optional[float] = None
    segment_bytes: int = 1500
    payload_bytes: int = 16
    sender_config: Optional[SenderConfig] = None
    reno_config: Optional[RenoConfig] = None

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")
        if self.start_s < 0:
            raise ValueError(f"start_s must be >= 0, got {self.start_s}")
        if self.file_bytes is not None and self.file_bytes < 1:
            raise ValueError(f"file_bytes must be >= 1, got {self.file_bytes}")
        if self.duration_s is not None and self.duration_s <= 0:
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")
        if self.segment_bytes < 1 or self.payload_bytes < 1:
            raise ValueError("segment_bytes and payload_bytes must be >= 1")

    @property
    def total_segments(self) -> Optional[int]:
        if self.file_bytes is None:
            return None
        return math.ceil(self.file_bytes / self.segment_bytes)


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    link: LinkConfig
    flows: Tuple[FlowSpec, ...]
    rng_seed: int = 1
    sim_duration_s: float = 60.0
    sample_interval_s: float = 0.1
    tick_interval_s: float = 0.005
    check_conservation: bool = False
    serialize_frames: bool = False

    def __post_init__(self):
        if not self.flows:
            raise ValueError("scenario needs at least one flow")
        if self.sim_duration_s < 0:
            raise ValueError(f"sim_duration_s must be >= 0, got {self.sim_duration_s}")
        if self.sample_interval_s <= 0 or self.tick_interval_s <= 0:
            raise ValueError("sample and tick intervals must be positive")


@dataclass
class FlowStats:
    flow_id: int
    protocol: str
    start_s: float
    segment_bytes: int
    goodput_bps: float = 0.0
    completion_s: Optional[float] = None
    packets_sent: int = 0
    lost_model: int = 0
    lost_overflow: int = 0
    packets_delivered: int = 0
    app_packets: int = 0
    innovative: int = 0
    redundant: int = 0
    timeouts: int = 0
    mean_window: float = 0.0
    in_queue: int = 0
    in_flight: int = 0
    # (t, window, delivered application packets, rtt)
    series: List[Tuple[float, float, int, float]] = field(default_factory=list)

    @property
    def packets_lost(self) -> int:
        return self.lost_model + self.lost_overflow

    @property
    def conserved(self) -> bool:
        return self.packets_sent == (self.packets_delivered + self.packets_lost
                                     + self.in_queue + self.in_flight)


# =============================================================================
# FLOW ADAPTERS
# =============================================================================

class _Flow:
    """Link-side accounting shared by both protocols."""

    def __init__(self, flow_id: int, spec: FlowSpec, link: LinkConfig):
        self.flow_id = flow_id
        self.spec = spec
        self.tx_ns = max(1, to_ns(link.tx_time_s(spec.segment_bytes)))
        self.started = False
        self.completion_s: Optional[float] = None

        self.sent = 0
        self.lost_model = 0
        self.lost_overflow = 0
        self.in_queue = 0
        self.in_flight = 0
        self.arrived = 0

    def sending(self, now_s: float) -> bool:
        if not self.started:
            return False
        if self.spec.duration_s is not None and now_s >= self.spec.start_s + self.spec.duration_s:
            return False
        return True

    def check(self):
        delivered = self.arrived + self.lost_model + self.lost_overflow + self.in_queue + self.in_flight
        if self.sent != delivered:
            raise ConservationError(
                f"flow {self.flow_id}: sent {self.sent} != arrived {self.arrived} + lost "
                f"{self.lost_model}+{self.lost_overflow} + queued {self.in_queue} + flight {self.in_flight}"
            )


class _CtcpFlow(_Flow):
    def __init__(self, flow_id: int, spec: FlowSpec, link: LinkConfig, seed: int, serialize: bool):
        super().__init__(flow_id, spec, link)
        source = PatternSource(spec.payload_bytes, spec.total_segments)
        self.sender = CtcpSender(source, spec.sender_config or SenderConfig(), seed=seed)
        self.receiver = CtcpReceiver(self.sender.numblks)
        self.serialize = serialize

    def start(self, now_s: float):
        self.receiver.on_stream_header(self.sender.start(now_s))
        self.started = True

    def poll(self, now_s: float) -> list:
        packets = self.sender.tick(now_s)
        return [encode_packet(p) for p in packets] if self.serialize else packets

    def on_ack(self, frame, now_s: float) -> list:
        self.sender.on_ack(decode_ack(frame) if self.serialize else frame, now_s)
        return self.poll(now_s) if self.sending(now_s) else []

    def on_data(self, frame, now_s: float):
        ack = self.receiver.on_packet(decode_packet(frame) if self.serialize else frame)
        self.receiver.deliver()
        return encode_ack(ack) if self.serialize else ack

    @property
    def complete(self) -> bool:
        return self.receiver.complete

    @property
    def window(self) -> float:
        return self.sender.tokens

    @property
    def rtt(self) -> float:
        return self.sender.rtt

    def fill(self, stats: FlowStats):
        stats.app_packets = self.receiver.delivered_packets
        stats.innovative = self.receiver.innovative
        stats.redundant = self.receiver.non_innovative
        stats.timeouts = self.sender.timeouts


class _RenoFlow(_Flow):
    def __init__(self, flow_id: int, spec: FlowSpec, link: LinkConfig):
        super().__init__(flow_id, spec, link)
        self.sender = RenoSender(spec.total_segments, spec.reno_config or RenoConfig())
        self.receiver = RenoReceiver(spec.total_segments)

    def start(self, now_s: float):
        self.started = True

    def poll(self, now_s: float) -> list:
        return reno_flow_step(self.sender, now_s)

    def on_ack(self, ack, now_s: float) -> list:
        if not self.sending(now_s):
            self.sender.on_ack(ack, now_s)
            return []
        return reno_flow_step(self.sender, now_s, ack)

    def on_data(self, segment, now_s: float):
        return self.receiver.on_segment(segment)

    @property
    def complete(self) -> bool:
        return self.receiver.complete

    @property
    def window(self) -> float:
        return self.sender.cwnd

    @property
    def rtt(self) -> float:
        return self.sender.rtt

    def fill(self, stats: FlowStats):
        stats.app_packets = self.receiver.delivered_packets
        stats.timeouts = self.sender.timeouts


# =============================================================================
# SIMULATION
# =============================================================================

class Simulation:
    """
    One scenario run.

    The bottleneck is modelled analytically: each accepted frame gets its
    departure time from the link's busy-until instant, so only arrivals,
    ACKs, ticks and samples become SimPy events. Frames whose departure has
    passed are moved from the queue to the wire lazily, at the next event.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.link = scenario.link
        self.env = simpy.Environment()
        self.rng = random.Random(scenario.rng_seed)
        self.prop_ns = to_ns(self.link.prop_delay_s)
        self.deadline_ns = to_ns(scenario.sim_duration_s)

        # (departure_ns, flow, corrupted)
        self.queue = deque()
        self.link_free_ns = 0
        self.max_queue = 0
        self.events = 0

        self.flows: List[_Flow] = []
        for flow_id, spec in enumerate(scenario.flows):
            if spec.protocol == "ctcp":
                seed = scenario.rng_seed * 1000 + flow_id
                self.flows.append(_CtcpFlow(flow_id, spec, self.link, seed, scenario.serialize_frames))
            else:
                self.flows.append(_RenoFlow(flow_id, spec, self.link))

        self._samples = [[] for _ in self.flows]
        self._stop = self.env.event()

    # -------------------------------------------------------------------------
    # Event plumbing
    # -------------------------------------------------------------------------

    @property
    def now_s(self) -> float:
        return self.env.now / NS_PER_S

    def _schedule(self, delay_ns: int, handler, *args):
        event = self.env.timeout(delay_ns)
        event.callbacks.append(lambda _event: self._dispatch(handler, *args))

    def _dispatch(self, handler, *args):
        if self._stop.triggered:
            return
        self.events += 1
        self._refresh_queue()
        handler(*args)
        if self.scenario.check_conservation:
            for flow in self.flows:
                flow.check()

    def _finish(self, _event=None):
        if not self._stop.triggered:
            self._stop.succeed()

    # -------------------------------------------------------------------------
    # Data path
    # -------------------------------------------------------------------------

    def _refresh_queue(self):
        now = self.env.now
        while self.queue and self.queue[0][0] <= now:
            _, flow, corrupted = self.queue.popleft()
            flow.in_queue -= 1
            if corrupted:
                flow.lost_model += 1
            else:
                flow.in_flight += 1

    def _transmit(self, flow: _Flow, frame):
        """Loss before the rate constraint, then the FIFO, then the wire."""
        now = self.env.now
        flow.sent += 1
        if self.link.loss_model.random_loss(self.rng):
            flow.lost_model += 1
            return
        if len(self.queue) >= self.link.queue_pkts:
            flow.lost_overflow += 1
            return

        start = max(now, self.link_free_ns)
        departure = start + flow.tx_ns
        self.link_free_ns = departure
        corrupted = self.link.loss_model.corrupts(start / NS_PER_S, flow.tx_ns / NS_PER_S)
        self.queue.append((departure, flow, corrupted))
        self.max_queue = max(self.max_queue, len(self.queue))
        flow.in_queue += 1
        if not corrupted:
            self._schedule(departure + self.prop_ns - now, self._arrive, flow, frame)

    def _send_all(self, flow: _Flow, frames: list):
        for frame in frames:
            self._transmit(flow, frame)

    def _arrive(self, flow: _Flow, frame):
        now_s = self.now_s
        flow.in_flight -= 1
        flow.arrived += 1
        ack = flow.on_data(frame, now_s)

        if flow.completion_s is None and flow.complete:
            flow.completion_s = now_s - flow.spec.start_s
            logger.debug(f"Flow {flow.flow_id} complete after {flow.completion_s:.3f}s")
            if all(f.spec.file_bytes is not None and f.completion_s is not None for f in self.flows):
                self._finish()

        if loss_decision(self.link.ack_loss_model, now_s, self.rng) is Verdict.DROP:
            return
        self._schedule(self.prop_ns, self._ack_arrive, flow, ack)

    def _ack_arrive(self, flow: _Flow, ack):
        now_s = self.now_s
        self._send_all(flow, flow.on_ack(ack, now_s))

    # -------------------------------------------------------------------------
    # Processes
    # -------------------------------------------------------------------------

    def _start_flow(self, flow: _Flow):
        now_s = self.now_s
        flow.start(now_s)
        logger.debug(f"Flow {flow.flow_id} ({flow.spec.protocol}) started at t={now_s:.3f}s")
        self._sample()
        self._send_all(flow, flow.poll(now_s))

    def _ticker(self):
        tick_ns = max(1, to_ns(self.scenario.tick_interval_s))
        while True:
            yield self.env.timeout(tick_ns)
            self._dispatch(self._tick)

    def _tick(self):
        now_s = self.now_s
        for flow in self.flows:
            if flow.sending(now_s):
                self._send_all(flow, flow.poll(now_s))

    def _sampler(self):
        sample_ns = max(1, to_ns(self.scenario.sample_interval_s))
        while not self._stop.triggered:
            self._sample()
            yield self.env.timeout(sample_ns)

    def _sample(self):
        now_s = self.now_s
        for flow, rows in zip(self.flows, self._samples):
            if not flow.started or (rows and rows[-1][0] == now_s):
                continue
            delivered = flow.receiver.delivered_packets
            rows.append((now_s, float(flow.window), delivered, float(flow.rtt)))

    # -------------------------------------------------------------------------
    # Run
    # -------------------------------------------------------------------------

    def run(self) -> List[FlowStats]:
        scenario = self.scenario
        if self.deadline_ns == 0:
            logger.info(f"Scenario {scenario.scenario_id} has zero duration; nothing to simulate")
            return [self._stats(flow, []) for flow in self.flows]

        for flow in self.flows:
            start_ns = to_ns(flow.spec.start_s)
            if start_ns < self.deadline_ns:
                self._schedule(start_ns, self._start_flow, flow)
        self.env.process(self._ticker())
        self.env.process(self._sampler())
        self.env.timeout(self.deadline_ns).callbacks.append(self._finish)

        self.env.run(until=self._stop)
        self._refresh_queue()
        self._sample()
        logger.info(
            f"✓ Scenario {scenario.scenario_id} (seed {scenario.rng_seed}) finished at "
            f"t={self.now_s:.3f}s after {self.events} events"
        )
        return [self._stats(flow, rows) for flow, rows in zip(self.flows, self._samples)]

    def _stats(self, flow: _Flow, rows: list) -> FlowStats:
        spec = flow.spec
        stats = FlowStats(
            flow_id=flow.flow_id,
            protocol=spec.protocol,
            start_s=spec.start_s,
            segment_bytes=spec.segment_bytes,
            completion_s=flow.completion_s,
            packets_sent=flow.sent,
            lost_model=flow.lost_model,
            lost_overflow=flow.lost_overflow,
            packets_delivered=flow.arrived,
            in_queue=flow.in_queue,
            in_flight=flow.in_flight,
            series=rows,
        )
        if not flow.started:
            return stats
        flow.fill(stats)

        if flow.completion_s is not None:
            active_s = flow.completion_s
        else:
            active_s = self.now_s - spec.start_s
            if spec.duration_s is not None:
                active_s = min(active_s, spec.duration_s)
        if active_s > 0:
            stats.goodput_bps = stats.app_packets * spec.segment_bytes * 8 / active_s

        end_s = spec.start_s + active_s
        windows = [row[1] for row in rows if row[0] <= end_s]
        if windows:
            stats.mean_window = sum(windows) / len(windows)
        return stats


def run_scenario(scenario: Scenario) -> List[FlowStats]:
    """Simulate one scenario; identical (scenario, seed) gives identical stats."""
    return Simulation(scenario).run()


def goodput_between(stats: FlowStats, t0: float, t1: float) -> float:
    """Goodput in bps over [t0, t1] from the sampled delivery series."""
    if t1 <= t0:
        raise ValueError(f"empty interval [{t0}, {t1}]")
    if not stats.series:
        return 0.0
    times = [row[0] for row in stats.series]

    def delivered_at(t: float) -> int:
        i = bisect_right(times, t)
        return stats.series[i - 1][2] if i else 0

    packets = delivered_at(t1) - delivered_at(t0)
    return packets * stats.segment_bytes * 8 / (t1 - t0)
