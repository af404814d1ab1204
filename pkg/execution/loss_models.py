"""
Loss Models - Synthetic Link Impairments
i.i.d. erasures, periodic interference bursts and their union
"""

import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

LOSS_KINDS = ("none", "iid", "periodic_burst", "composite")


class Verdict(str, Enum):
    KEEP = "keep"
    DROP = "drop"


@dataclass(frozen=True)
class LossModel:
    """
    A link loss process.

    iid losses are decided when a frame reaches the link (before the queue);
    periodic bursts corrupt any frame whose transmission overlaps a burst.
    """
    kind: str = "none"
    p: float = 0.0
    period_s: float = 0.0
    width_s: float = 0.0
    phase_s: float = 0.0
    parts: Tuple["LossModel", ...] = ()

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss model {self.kind!r}; expected one of {LOSS_KINDS}")
        if self.kind == "iid" and not 0 <= self.p < 1:
            raise ValueError(f"iid loss rate must be in [0, 1), got {self.p}")
        if self.kind == "periodic_burst":
            if self.period_s <= 0 or self.width_s < 0:
                raise ValueError("burst period must be positive and width non-negative")
            if self.width_s >= self.period_s:
                raise ValueError(f"burst width {self.width_s}s must be below period {self.period_s}s")
        if self.kind == "composite" and not self.parts:
            raise ValueError("composite loss model needs at least one part")

    @classmethod
    def none(cls) -> "LossModel":
        return cls()

    @classmethod
    def iid(cls, p: float) -> "LossModel":
        return cls(kind="iid", p=p)

    @classmethod
    def periodic_burst(cls, period_s: float, width_s: float, phase_s: float = 0.0) -> "LossModel":
        return cls(kind="periodic_burst", period_s=period_s, width_s=width_s, phase_s=phase_s)

    @classmethod
    def composite(cls, *parts: "LossModel") -> "LossModel":
        return cls(kind="composite", parts=tuple(parts))

    @classmethod
    def hidden_terminal(cls, rate_pps: float, frame_s: float) -> "LossModel":
        """
        Poisson interferer without carrier sense: a frame collides when any
        interfering frame starts within its vulnerable window of 2*frame_s.
        """
        if rate_pps < 0 or frame_s <= 0:
            raise ValueError("interferer rate must be >= 0 and frame time positive")
        return cls.iid(1 - math.exp(-2 * rate_pps * frame_s))

    @property
    def lossless(self) -> bool:
        if self.kind == "composite":
            return all(part.lossless for part in self.parts)
        return self.kind == "none" or (self.kind == "iid" and self.p == 0)

    def random_loss(self, rng: random.Random) -> bool:
        """iid component: one draw per iid part, in declaration order."""
        if self.kind == "iid":
            return self.p > 0 and rng.random() < self.p
        if self.kind == "composite":
            dropped = False
            for part in self.parts:
                dropped = part.random_loss(rng) or dropped
            return dropped
        return False

    def corrupts(self, start_s: float, duration_s: float = 0.0) -> bool:
        """Burst component: does [start, start + duration) touch a burst?"""
        if self.kind == "periodic_burst":
            offset = (start_s - self.phase_s) % self.period_s
            if offset < self.width_s:
                return True
            return duration_s > self.period_s - offset
        if self.kind == "composite":
            return any(part.corrupts(start_s, duration_s) for part in self.parts)
        return False


def loss_decision(model: LossModel, now: float, rng: random.Random,
                  duration: float = 0.0) -> Verdict:
    """Union of the random and burst components for a frame starting at `now`."""
    dropped = model.random_loss(rng)
    if model.corrupts(now, duration) or dropped:
        return Verdict.DROP
    return Verdict.KEEP
