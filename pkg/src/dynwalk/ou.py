"""Limit objects: the stationary Ornstein-Uhlenbeck process and the sheet field.

The scalar process is sampled with its exact AR(1) transition,
``U(s + h) = e^{-h} U(s) + sqrt(1 - e^{-2h}) xi``, so the only error in a
grid supremum is the (downward) discretization of the sup itself.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .analytic import DomainError, tail_f
from .estimate import Estimate, wilson_interval

CHUNK = 4096


@dataclass(frozen=True, eq=False)
class OUPath:
    h: float
    s_grid: np.ndarray
    values: np.ndarray
    seed: int | None = None


def ou_grid(h: float, horizon: float = 1.0) -> np.ndarray:
    steps = int(math.floor(horizon / h + 1e-9))
    return np.arange(steps + 1) * h


def _check_step(h: float):
    if not 0 < h <= 0.1:
        raise DomainError("step h must lie in (0, 0.1]")


def ou_recursion(start: np.ndarray, noise: np.ndarray, h: float) -> np.ndarray:
    """Run the AR(1) recursion along the last axis.

    ``start`` has one entry per path; ``noise`` holds the standard normal
    innovations.  Returns the paths including the start value.
    """
    rho = math.exp(-h)
    sigma = math.sqrt(-math.expm1(-2 * h))
    start = np.asarray(start, dtype=float)
    zi = (rho * start)[..., None]
    body, _ = signal.lfilter([sigma], [1.0, -rho], noise, axis=-1, zi=zi)
    return np.concatenate([start[..., None], body], axis=-1)


def sample_ou(h: float, seed: int, horizon: float = 1.0) -> OUPath:
    """Stationary OU path on ``{0, h, 2h, ...}`` up to ``horizon``."""
    _check_step(h)
    grid = ou_grid(h, horizon)
    rng = np.random.default_rng(seed)
    u0 = rng.standard_normal()
    noise = rng.standard_normal(grid.size - 1)
    vals = ou_recursion(np.array(u0), noise, h)
    return OUPath(h, grid, vals, seed)


def sample_ou_batch(h: float, M: int, rng: np.random.Generator, horizon: float = 1.0
                    ) -> np.ndarray:
    """``M`` independent paths as an ``(M, steps + 1)`` array."""
    _check_step(h)
    steps = ou_grid(h, horizon).size - 1
    u0 = rng.standard_normal(M)
    noise = rng.standard_normal((M, steps))
    return ou_recursion(u0, noise, h)


@dataclass(frozen=True, eq=False)
class SheetFieldSample:
    """``values[i, j] = U_{t_j}(s_i) = e^{-s_i} B(e^{2 s_i}, t_j)``."""

    s_grid: np.ndarray
    t_grid: np.ndarray
    a_grid: np.ndarray
    values: np.ndarray
    seed: int | None = None


def _check_grid(g: np.ndarray, name: str):
    if g.ndim != 1 or g.size == 0 or np.any(np.diff(g) < 0) or g[0] < 0 or g[-1] > 1:
        raise DomainError(f"{name} must be sorted inside [0, 1]")


def sheet_fields(s_grid, t_grid, rng: np.random.Generator, M: int = 1) -> np.ndarray:
    """``M`` sheet-based fields as an ``(M, len(s), len(t))`` array.

    The sheet is built on the rectangle grid ``{0, e^{2s}} x {0, t}`` from
    independent cell increments with variance equal to the cell area, then
    accumulated with a 2-d prefix sum.
    """
    s = np.asarray(s_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    _check_grid(s, "s_grid")
    _check_grid(t, "t_grid")
    a = np.exp(2 * s)
    da = np.diff(np.concatenate(([0.0], a)))
    dt = np.diff(np.concatenate(([0.0], t)))
    scale = np.sqrt(np.outer(da, dt))
    cells = rng.standard_normal((M, s.size, t.size)) * scale
    sheet = cells.cumsum(axis=1).cumsum(axis=2)
    return sheet * np.exp(-s)[None, :, None]


def sample_sheet_field(s_grid, t_grid, seed: int) -> SheetFieldSample:
    rng = np.random.default_rng(seed)
    s = np.asarray(s_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    vals = sheet_fields(s, t, rng, 1)[0]
    return SheetFieldSample(s, t, np.exp(2 * s), vals, seed)


def _sup_hits(h: float, z: float, M: int, rng: np.random.Generator,
              stride: int = 1, horizon: float = 1.0) -> int:
    hits = 0
    done = 0
    while done < M:
        m = min(CHUNK, M - done)
        paths = sample_ou_batch(h, m, rng, horizon)
        hits += int(np.count_nonzero(paths[:, ::stride].max(axis=1) >= z))
        done += m
    return hits


def ou_sup_tail(z: float, h: float = 1e-3, M: int = 10**5, seed: int = 0) -> Estimate:
    """Estimate ``P{max_grid U(s) >= z}`` over ``s in [0, 1]``.

    The grid maximum never exceeds the true supremum, so the estimate is
    biased low by an amount that shrinks with ``h``.
    """
    if M < 1000:
        raise DomainError("M must be >= 1000")
    _check_step(h)
    t0 = time.perf_counter()
    hits = _sup_hits(h, z, M, np.random.default_rng(seed))
    return Estimate(hits, M, seed, ("ou_sup_tail", float(z), float(h)),
                    time.perf_counter() - t0)


@dataclass(frozen=True)
class HalvingDiagnostic:
    """Coupled estimates at steps ``h`` and ``h/2`` from the same fine paths."""

    z: float
    h: float
    M: int
    hits_coarse: int
    hits_fine: int
    shift: float
    radius: float
    passed: bool


def ou_halving_diagnostic(z: float, h: float = 1e-3, M: int = 10**5, seed: int = 0
                          ) -> HalvingDiagnostic:
    """Move of the tail estimate when the step is halved.

    Paths are simulated at ``h/2``; the coarse estimate reads every other
    point of the same paths, which is an exact step-``h`` sample.  Passes
    when the shift is below the Wilson radius of the coarse estimate.
    """
    _check_step(h)
    rng = np.random.default_rng(seed)
    coarse = fine = 0
    done = 0
    while done < M:
        m = min(CHUNK, M - done)
        paths = sample_ou_batch(h / 2, m, rng)
        fine += int(np.count_nonzero(paths.max(axis=1) >= z))
        coarse += int(np.count_nonzero(paths[:, ::2].max(axis=1) >= z))
        done += m
    lo, hi = wilson_interval(coarse, M)
    shift = (fine - coarse) / M
    radius = (hi - lo) / 2
    return HalvingDiagnostic(z, h, M, coarse, fine, shift, radius, abs(shift) < radius)


def implied_mountford_constant(p: float, z: float) -> float:
    """Smallest ``K`` with ``p`` inside ``[f(z) / K, K f(z)]``."""
    f = tail_f(z)
    if p <= 0:
        return math.inf
    return max(p / f, f / p)
