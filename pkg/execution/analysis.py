"""
Analysis - Closed-Form Models and Metrics
Padhye window, block-code efficiency, AIMD stationary shares, Jain fairness
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

# float slack so that e.g. 4 / (1 - 0.2) floors to 5
_FLOOR_EPS = 1e-9


def padhye_window(p: float) -> float:
    """Standard TCP window in packets per RTT at loss rate p: sqrt(1.5 / p)."""
    if not 0 < p < 1:
        raise ValueError(f"p must be in (0, 1), got {p}")
    return math.sqrt(1.5 / p)


# =============================================================================
# BLOCK-CODE EFFICIENCY
# =============================================================================

def forward_coded_packets(N: int, p: float) -> int:
    """n = floor(N / (1 - p)) - N coded packets sent up front with each block."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not 0 <= p < 1:
        raise ValueError(f"p must be in [0, 1), got {p}")
    return math.floor(N / (1 - p) + _FLOOR_EPS) - N


def efficiency_eta(N: int, p: float) -> float:
    """
    Mean unnecessary forward coded packets per source packet, summed exactly
    as the closed form is printed: C(n, k) p^k (1-p)^(N-k) weights.

    This disagrees with a direct simulation of N + n erasures; see
    efficiency_eta_exact for the version that matches it.
    """
    n = forward_coded_packets(N, p)
    total = sum((n - k) * math.comb(n, k) * p**k * (1 - p)**(N - k) for k in range(n))
    return total / N


def efficiency_eta_exact(N: int, p: float) -> float:
    """Same quantity with the binomial over all N + n transmissions."""
    n = forward_coded_packets(N, p)
    sent = N + n
    total = sum((n - k) * math.comb(sent, k) * p**k * (1 - p)**(sent - k) for k in range(n))
    return total / N


def simulate_unneeded_coded(N: int, p: float, trials: int = 100_000,
                            seed: int = 0) -> Tuple[float, float]:
    """
    Monte Carlo oracle: send N + n packets per block with Bernoulli(p)
    erasures and count the coded packets that were not needed.

    Returns (mean, standard error) of that count divided by N.
    """
    if trials < 2:
        raise ValueError(f"need at least 2 trials, got {trials}")
    n = forward_coded_packets(N, p)
    rng = np.random.default_rng(seed)
    losses = rng.binomial(N + n, p, size=trials)
    unneeded = np.maximum(n - losses, 0) / N
    return float(unneeded.mean()), float(unneeded.std(ddof=1) / math.sqrt(trials))


def efficiency_bound(N: int, p: float, exact: bool = False) -> float:
    """Efficiency upper bound 1 - eta * N / (N + n)."""
    n = forward_coded_packets(N, p)
    eta = efficiency_eta_exact(N, p) if exact else efficiency_eta(N, p)
    return 1 - eta * N / (N + n)


# =============================================================================
# AIMD STATIONARY SHARES
# =============================================================================

@dataclass(frozen=True)
class AimdModelParams:
    """
    alpha: additive increase in packets per RTT
    rtt: the flow's round-trip propagation delay T_i
    mean_beta: mean backoff factor at congestion events
    mean_T: mean time between congestion events
    """
    alpha: float
    rtt: float
    mean_beta: float
    mean_T: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.rtt <= 0 or self.mean_T <= 0:
            raise ValueError("rtt and mean_T must be positive")

    @property
    def alpha_tilde(self) -> float:
        return self.alpha / self.rtt**2


def stationary_rate(params: AimdModelParams) -> float:
    """Mean rate alpha_tilde * E[T] / (1 - E[beta])."""
    if not 0 <= params.mean_beta < 1:
        raise ValueError(f"mean_beta must be in [0, 1), got {params.mean_beta}")
    return params.alpha_tilde * params.mean_T / (1 - params.mean_beta)


def friendliness_ratio(beta_j: float) -> float:
    """Rate of a beta=0.5 flow over an adaptive flow with mean backoff beta_j, same RTT."""
    if not 0 <= beta_j < 1:
        raise ValueError(f"beta_j must be in [0, 1), got {beta_j}")
    return 2 * (1 - beta_j)


def rtt_fairness_ratio(rtt_i: float, rtt_j: float) -> float:
    """Rate of flow i over flow j for equal backoff: (T_j / T_i)^2."""
    if rtt_i <= 0 or rtt_j <= 0:
        raise ValueError("RTTs must be positive")
    return (rtt_j / rtt_i) ** 2


# =============================================================================
# FAIRNESS
# =============================================================================

def jain_index(goodputs: Sequence[float]) -> float:
    """(sum x)^2 / (n * sum x^2), in (0, 1]."""
    x = np.asarray(goodputs, dtype=float)
    if x.size == 0:
        raise ValueError("jain_index needs at least one value")
    if (x < 0).any():
        raise ValueError("goodputs must be non-negative")
    squares = float((x * x).sum())
    if squares == 0:
        raise ValueError("jain_index is undefined when every goodput is zero")
    return float(x.sum()) ** 2 / (x.size * squares)
