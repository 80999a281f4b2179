"""Binomial Monte Carlo estimates with Wilson score intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import special

CONFIDENCE = 0.99


def wilson_interval(hits: int, n: int, level: float = CONFIDENCE) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion; ``(0, 1)`` when ``n = 0``."""
    if n == 0:
        return 0.0, 1.0
    if not 0 <= hits <= n:
        raise ValueError("need 0 <= hits <= n")
    z = float(special.ndtri(0.5 + level / 2))
    p = hits / n
    z2n = z * z / n
    centre = (p + z2n / 2) / (1 + z2n)
    half = z / (1 + z2n) * math.sqrt(p * (1 - p) / n + z2n / (4 * n))
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


@dataclass(frozen=True)
class Estimate:
    """``hits / n_samples`` with a Wilson interval.

    ``config`` is a hashable description of the experiment; only estimates
    with equal configs can be merged.  ``wall_time`` is informational and
    takes no part in equality.
    """

    hits: int
    n_samples: int
    seed: int | None = None
    config: tuple = ()
    wall_time: float = field(default=0.0, compare=False)
    level: float = CONFIDENCE
    p_hat: float = field(init=False)
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)

    def __post_init__(self):
        if self.n_samples < 0 or not 0 <= self.hits <= max(self.n_samples, 0):
            raise ValueError("need 0 <= hits <= n_samples")
        p = self.hits / self.n_samples if self.n_samples else 0.0
        lo, hi = wilson_interval(self.hits, self.n_samples, self.level)
        object.__setattr__(self, "p_hat", p)
        object.__setattr__(self, "ci_low", lo)
        object.__setattr__(self, "ci_high", hi)

    @classmethod
    def empty(cls, config: tuple = (), seed: int | None = None) -> "Estimate":
        return cls(0, 0, seed, config)

    @property
    def radius(self) -> float:
        return (self.ci_high - self.ci_low) / 2

    @property
    def std_error(self) -> float:
        if self.n_samples == 0:
            return math.inf
        return math.sqrt(self.p_hat * (1 - self.p_hat) / self.n_samples)


class ConfigMismatch(ValueError):
    """Estimates from different experiment configurations cannot be pooled."""


def merge(e1: Estimate, e2: Estimate) -> Estimate:
    """Pool two estimates of the same experiment by adding their counts."""
    if e1.config != e2.config or e1.level != e2.level:
        raise ConfigMismatch(f"cannot merge {e1.config!r} with {e2.config!r}")
    if e2.n_samples == 0:
        return e1
    if e1.n_samples == 0:
        return e2
    seed = e1.seed if e1.seed == e2.seed else None
    return Estimate(e1.hits + e2.hits, e1.n_samples + e2.n_samples, seed, e1.config,
                    e1.wall_time + e2.wall_time, e1.level)
