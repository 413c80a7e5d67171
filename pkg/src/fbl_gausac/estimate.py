"""Monte Carlo point estimates with confidence intervals."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy.special import ndtri


@dataclass(frozen=True)
class EstimateWithCI:
    """A Monte Carlo estimate.

    ``half_width`` is the half-width of a two-sided interval at level
    ``confidence``; ``std_error`` is the plain standard error (the sigma-hat used
    by k-sigma checks).  ``method`` is ``"wilson"`` for event frequencies and
    ``"normal"`` for averages of bounded variables.
    """

    point: float
    half_width: float
    confidence: float
    samples: int
    std_error: float
    method: str = "wilson"
    successes: int | None = None

    @property
    def low(self) -> float:
        return self.point - self.half_width

    @property
    def high(self) -> float:
        return self.point + self.half_width

    def contains(self, value: float) -> bool:
        return abs(value - self.point) <= self.half_width

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EstimateWithCI":
        return cls(**data)


def _z(confidence: float) -> float:
    return float(ndtri(0.5 + confidence / 2.0))


def proportion(successes: int, samples: int, confidence: float = 0.95) -> EstimateWithCI:
    """Event frequency with a Wilson score interval.

    The reported point is the raw frequency; the half-width is the larger of its
    distances to the Wilson bounds so that the interval always covers it.
    """
    if samples <= 0:
        raise ValueError("samples must be positive")
    successes = int(successes)
    p = successes / samples
    z = _z(confidence)
    denom = 1.0 + z * z / samples
    centre = (p + z * z / (2 * samples)) / denom
    spread = z * math.sqrt(p * (1 - p) / samples + z * z / (4 * samples * samples)) / denom
    half = max(p - (centre - spread), (centre + spread) - p)
    return EstimateWithCI(
        point=p,
        half_width=half,
        confidence=confidence,
        samples=samples,
        std_error=math.sqrt(p * (1 - p) / samples),
        method="wilson",
        successes=successes,
    )


def mean_estimate(total: float, total_sq: float, samples: int, confidence: float = 0.95) -> EstimateWithCI:
    """Sample mean with a normal-approximation interval, from running sums."""
    if samples <= 0:
        raise ValueError("samples must be positive")
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    if samples > 1:
        var *= samples / (samples - 1)
    se = math.sqrt(var / samples)
    return EstimateWithCI(
        point=mean,
        half_width=_z(confidence) * se,
        confidence=confidence,
        samples=samples,
        std_error=se,
        method="normal",
    )
