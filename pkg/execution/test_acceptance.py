"""
Headline results on the bundled scenarios, with shortened durations.

    pytest -m slow
"""

import math
import time

import pytest

from execution.analysis import jain_index
from execution.netsim import goodput_between, run_scenario
from execution.reports import build_report
from execution.scenarios import build_scenario, bundled_scenarios, read_scenario_file, with_override

pytestmark = pytest.mark.slow


def bundled(name: str, **overrides):
    path = bundled_scenarios()[name]
    data = read_scenario_file(path)
    for key, value in overrides.items():
        data = with_override(data, key.replace("__", "."), value, str(path))
    scenario = build_scenario(data, str(path))
    return scenario, run_scenario(scenario)


def efficiency(name: str, **overrides) -> float:
    scenario, stats = bundled(name, **overrides)
    return build_report(scenario, stats).efficiency


@pytest.mark.parametrize("p, floor", [(0.01, 0.90), (0.10, 0.75)])
def test_efficiency_under_random_loss(p, floor):
    started = time.perf_counter()
    assert efficiency("efficiency_p01", p=p, duration_s=60.0) >= floor
    # one sweep point must stay under a minute of wall time
    assert time.perf_counter() - started < 60.0


@pytest.mark.parametrize("p", [0.01, 0.05])
def test_small_buffer_costs_little(p):
    full = efficiency("efficiency_p01", p=p, duration_s=60.0)
    quarter = efficiency("efficiency_quarter_bdp", p=p, duration_s=60.0)
    assert abs(full - quarter) <= 0.05


@pytest.mark.parametrize("p", [0.005, 0.01, 0.02, 0.05])
def test_reno_window_follows_padhye(p):
    _, stats = bundled("reno_padhye", p=p, duration_s=120.0)
    expected = math.sqrt(1.5 / p)
    assert 0.7 * expected <= stats[0].mean_window <= 1.3 * expected


@pytest.mark.parametrize("rtt_ms", [10.0, 25.0])
def test_friendliness_without_loss(rtt_ms):
    _, (reno, ctcp) = bundled("friendliness_lossfree", rtt_ms=rtt_ms, duration_s=120.0)
    assert 0.7 <= ctcp.goodput_bps / reno.goodput_bps <= 1.4


@pytest.mark.parametrize("p", [0.01, 0.05])
def test_ctcp_does_not_penalize_reno_on_lossy_links(p):
    _, (reno_with_ctcp, _) = bundled("friendliness_lossy", p=p, duration_s=120.0)
    _, (reno_with_reno, _) = bundled("reno_pair_lossy", p=p, duration_s=120.0)
    assert reno_with_ctcp.goodput_bps == pytest.approx(reno_with_reno.goodput_bps, rel=0.2)


def test_ctcp_flows_converge_to_fair_shares():
    scenario, stats = bundled("fairness_ctcp")
    end = scenario.sim_duration_s
    start = end - end / 3
    shares = [goodput_between(s, start, end) for s in stats]
    assert jain_index(shares) >= 0.95


def test_lossy_transfer_completion():
    times = {}
    for protocol in ("ctcp", "reno"):
        for p in (0.0, 0.20):
            scenario, (stats,) = bundled("transfer_1mb", p=p, flows__0__protocol=protocol)
            if protocol == "ctcp" or p == 0.0:
                assert stats.completion_s is not None
            # an unfinished transfer took at least the whole run
            times[protocol, p] = stats.completion_s or scenario.sim_duration_s
    assert times["ctcp", 0.20] <= 2 * times["ctcp", 0.0]
    assert times["reno", 0.20] >= 8 * times["reno", 0.0]


def test_interference_on_slow_link_is_total():
    _, (stats,) = bundled("microwave_interference", rate_mbps=1.0, duration_s=20.0)
    assert stats.packets_sent > 0
    assert stats.app_packets == 0


def test_ctcp_rides_through_interference():
    _, (ctcp,) = bundled("microwave_interference", duration_s=60.0)
    _, (reno,) = bundled("microwave_interference", duration_s=60.0, flows__0__protocol="reno")
    assert ctcp.goodput_bps > 0
    assert reno.goodput_bps * 3 <= ctcp.goodput_bps
