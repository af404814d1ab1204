"""
Tests for the bottleneck simulator
"""

import pytest

from execution.loss_models import LossModel
from execution.netsim import (FlowSpec, FlowStats, LinkConfig, Scenario, Simulation, goodput_between,
                              run_scenario, to_ns)


def make_scenario(flows=(FlowSpec(),), loss=None, duration=2.0, queue=21, rate=10e6, **kwargs) -> Scenario:
    link = LinkConfig(rate_bps=rate, prop_delay_s=0.0125, queue_pkts=queue,
                      loss_model=loss or LossModel.none())
    return Scenario("test", link, tuple(flows), sim_duration_s=duration, **kwargs)


def test_link_derived_quantities():
    link = LinkConfig(rate_bps=25e6, prop_delay_s=0.0125, queue_pkts=52)
    assert link.rtt_s == pytest.approx(0.025)
    assert link.tx_time_s(1500) == pytest.approx(0.00048)
    assert link.bdp_packets(1500) == pytest.approx(52.083, rel=1e-3)
    assert to_ns(0.0125) == 12_500_000


def test_zero_duration_runs_nothing():
    sim = Simulation(make_scenario(duration=0.0))
    stats = sim.run()
    assert sim.events == 0
    assert len(stats) == 1
    assert stats[0].packets_sent == 0
    assert stats[0].goodput_bps == 0
    assert stats[0].series == []


def test_same_seed_gives_identical_stats():
    scenario = make_scenario(loss=LossModel.iid(0.05), rng_seed=7)
    assert run_scenario(scenario) == run_scenario(scenario)


def test_packet_conservation_holds_at_every_event():
    flows = (FlowSpec("ctcp"), FlowSpec("reno"))
    scenario = make_scenario(flows, loss=LossModel.iid(0.05), queue=5, check_conservation=True)
    for stats in run_scenario(scenario):
        assert stats.conserved
        assert stats.packets_sent > 0


def test_lossless_link_has_no_model_losses():
    stats = run_scenario(make_scenario())[0]
    assert stats.lost_model == 0
    assert stats.app_packets > 0
    assert stats.goodput_bps > 0


def test_queue_never_exceeds_capacity():
    sim = Simulation(make_scenario((FlowSpec("reno"),), queue=5, duration=3.0))
    stats = sim.run()
    assert sim.max_queue <= 5
    assert stats[0].lost_overflow > 0


def test_long_frames_are_wiped_out_by_bursts():
    # 12 ms per 1500-byte frame at 1 Mbps; the burst gap is only 11 ms
    loss = LossModel.periodic_burst(0.020, 0.009)
    stats = run_scenario(make_scenario(loss=loss, rate=1e6, duration=3.0))[0]
    assert stats.packets_sent > 0
    assert stats.packets_delivered == 0
    assert stats.app_packets == 0


def test_serialized_frames_match_in_memory_frames():
    scenario = make_scenario(loss=LossModel.iid(0.02), duration=1.0)
    serialized = make_scenario(loss=LossModel.iid(0.02), duration=1.0, serialize_frames=True)
    assert run_scenario(scenario) == run_scenario(serialized)


@pytest.mark.parametrize("protocol", ["ctcp", "reno"])
def test_file_transfer_completes_and_stops_early(protocol):
    flow = FlowSpec(protocol, file_bytes=150_000)
    sim = Simulation(make_scenario((flow,), duration=30.0))
    stats = sim.run()[0]
    assert stats.completion_s is not None
    assert stats.completion_s < 5.0
    assert stats.app_packets == 100
    assert sim.now_s < 30.0


def test_late_flow_starts_on_time():
    flows = (FlowSpec("ctcp"), FlowSpec("ctcp", start_s=1.0))
    stats = run_scenario(make_scenario(flows, duration=2.0))
    assert stats[1].packets_sent > 0
    assert stats[0].series[0][0] == 0.0
    assert stats[1].series[0][0] == 1.0


def test_flow_starting_after_deadline_stays_idle():
    flows = (FlowSpec("ctcp"), FlowSpec("ctcp", start_s=5.0))
    stats = run_scenario(make_scenario(flows, duration=1.0))
    assert stats[1].packets_sent == 0
    assert stats[1].goodput_bps == 0
    assert stats[1].series == []


def test_backlogged_flow_stops_after_its_duration():
    flow = FlowSpec("reno", duration_s=0.5)
    stats = run_scenario(make_scenario((flow,), duration=2.0))[0]
    assert stats.series[-1][2] == stats.app_packets
    # goodput is measured over the flow's own active period
    assert stats.goodput_bps == pytest.approx(stats.app_packets * 1500 * 8 / 0.5)


def test_goodput_between_uses_delivery_series():
    stats = FlowStats(0, "ctcp", 0.0, 1500,
                      series=[(0.0, 1.0, 0, 0.1), (1.0, 1.0, 100, 0.1), (2.0, 1.0, 300, 0.1)])
    assert goodput_between(stats, 1.0, 2.0) == pytest.approx(200 * 1500 * 8)
    assert goodput_between(stats, 0.0, 2.0) == pytest.approx(150 * 1500 * 8)
    with pytest.raises(ValueError):
        goodput_between(stats, 2.0, 1.0)


def test_invalid_configuration_is_rejected():
    with pytest.raises(ValueError):
        LinkConfig(rate_bps=0, prop_delay_s=0.01, queue_pkts=1)
    with pytest.raises(ValueError):
        FlowSpec("quic")
    with pytest.raises(ValueError):
        make_scenario(flows=())
