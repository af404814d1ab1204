"""
Tests for the closed-form models and fairness metric
"""

import math

import numpy as np
import pytest

from execution.analysis import (AimdModelParams, efficiency_bound, efficiency_eta, efficiency_eta_exact,
                                forward_coded_packets, friendliness_ratio, jain_index, padhye_window,
                                rtt_fairness_ratio, simulate_unneeded_coded, stationary_rate)


@pytest.mark.parametrize("p, expected", [(0.01, 12.247), (0.015, 10.0)])
def test_padhye_window(p, expected):
    assert padhye_window(p) == pytest.approx(expected, abs=1e-3)


def test_padhye_window_near_certain_loss():
    assert padhye_window(0.999999) == pytest.approx(math.sqrt(1.5), rel=1e-5)


def test_padhye_window_strictly_decreasing():
    windows = [padhye_window(p) for p in np.linspace(0.001, 0.9, 200)]
    assert all(a > b for a, b in zip(windows, windows[1:]))


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1])
def test_padhye_window_domain(p):
    with pytest.raises(ValueError):
        padhye_window(p)


@pytest.mark.parametrize("N, p, n", [(32, 0.0, 0), (32, 0.05, 1), (4, 0.2, 1), (32, 0.1, 3), (4, 0.05, 0)])
def test_forward_coded_packets(N, p, n):
    assert forward_coded_packets(N, p) == n


@pytest.mark.parametrize("N, p, expected", [
    (32, 0.0, 0.0),
    (32, 0.05, 0.95**32 / 32),
    (4, 0.2, 0.1024),
])
def test_efficiency_eta_examples(N, p, expected):
    assert efficiency_eta(N, p) == pytest.approx(expected)


@pytest.mark.parametrize("N", [4, 8, 32])
@pytest.mark.parametrize("p", [0.05, 0.1, 0.2])
def test_exact_eta_matches_monte_carlo(N, p):
    mean, se = simulate_unneeded_coded(N, p, trials=100_000, seed=N * 100 + int(p * 100))
    assert abs(efficiency_eta_exact(N, p) - mean) <= 3 * se + 1e-12


def test_printed_eta_departs_from_monte_carlo():
    mean, se = simulate_unneeded_coded(32, 0.1, trials=100_000, seed=1)
    assert abs(efficiency_eta(32, 0.1) - mean) > 10 * se


def test_single_forward_packet_forms_agree():
    # with n = 1 only the k = 0 term survives in both sums
    assert efficiency_eta(4, 0.2) == pytest.approx(0.8**4 / 4)
    assert efficiency_eta_exact(4, 0.2) == pytest.approx(0.8**5 / 4)


def test_efficiency_bound_is_a_fraction():
    for p in (0.0, 0.01, 0.1, 0.2):
        for exact in (False, True):
            assert 0 < efficiency_bound(32, p, exact) <= 1
    assert efficiency_bound(32, 0.0) == 1.0


# =============================================================================
# AIMD SHARES
# =============================================================================

def test_equal_parameters_give_equal_rates():
    a = AimdModelParams(1.0, 0.025, 0.5, 2.0)
    b = AimdModelParams(1.0, 0.025, 0.5, 2.0)
    assert stationary_rate(a) == stationary_rate(b)


def test_doubled_rtt_quarters_the_rate():
    slow = AimdModelParams(1.0, 0.050, 0.5, 2.0)
    fast = AimdModelParams(1.0, 0.025, 0.5, 2.0)
    assert stationary_rate(slow) / stationary_rate(fast) == pytest.approx(0.25)
    assert rtt_fairness_ratio(0.050, 0.025) == pytest.approx(0.25)


@pytest.mark.parametrize("beta_j", [0.3, 0.5, 0.8])
def test_fixed_half_backoff_against_adaptive_backoff(beta_j):
    fixed = AimdModelParams(1.0, 0.025, 0.5, 1.0)
    adaptive = AimdModelParams(1.0, 0.025, beta_j, 1.0)
    ratio = stationary_rate(fixed) / stationary_rate(adaptive)
    assert ratio == pytest.approx(friendliness_ratio(beta_j))
    assert ratio == pytest.approx(2 * (1 - beta_j))


def test_stationary_rate_is_linear_in_mean_period():
    base = stationary_rate(AimdModelParams(1.0, 0.025, 0.4, 1.0))
    for c in (0.5, 2.0, 7.0):
        assert stationary_rate(AimdModelParams(1.0, 0.025, 0.4, c)) == pytest.approx(c * base)


def test_stationary_rate_rejects_full_backoff():
    with pytest.raises(ValueError):
        stationary_rate(AimdModelParams(1.0, 0.025, 1.0, 1.0))


# =============================================================================
# JAIN INDEX
# =============================================================================

@pytest.mark.parametrize("x, expected", [([5, 5, 5], 1.0), ([1, 0], 0.5), ([3, 1], 0.8)])
def test_jain_index_examples(x, expected):
    assert jain_index(x) == pytest.approx(expected)


def test_jain_index_is_scale_invariant():
    x = [1.0, 2.5, 7.0, 0.3]
    for c in (0.01, 3.0, 1e6):
        assert jain_index([c * v for v in x]) == pytest.approx(jain_index(x))


@pytest.mark.parametrize("x", [[], [0, 0], [1, -1]])
def test_jain_index_rejects_degenerate_input(x):
    with pytest.raises(ValueError):
        jain_index(x)
