"""Event-driven simulation of the dynamical Gaussian walk.

``S_n(t)`` is the sum of ``n`` standard normal increments, each of which is
replaced by a fresh deviate whenever its Poisson clock rings.  A path is
right-continuous and piecewise constant with a breakpoint at every event.

Deviate stream contract: one generator per path, seeded by ``deviate_seed``;
the ``n`` initial increments are drawn first in coordinate order, then one
replacement per event in event order, all by inversion of the normal CDF.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as kern
from .analytic import DomainError, normal_deviates, normal_sf
from .clocks import ClockEventLog, count_changed, sample_clocks

RESUM_EVERY = kern.RESUM_EVERY
BRUTE_FORCE_BUDGET = 10**7


# ---------------------------------------------------------------------------
# Streams and seeds
# ---------------------------------------------------------------------------


def path_deviates(n: int, events: int, deviate_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Initial increments and replacement deviates for one path.

    Equivalent to two consecutive draws of ``n`` and ``events`` deviates
    from the same generator.
    """
    z = normal_deviates(np.random.default_rng(deviate_seed), n + events)
    return z[:n], z[n:]


def derive_seed(base_seed: int, *key: int) -> int:
    """A 64-bit seed for ``key`` under ``base_seed`` (SeedSequence hashing)."""
    ss = np.random.SeedSequence(base_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WalkPath:
    """Piecewise-constant path: ``values[i]`` holds on ``[times[i], times[i+1])``.

    ``times[0] = 0`` and the last value holds up to and including ``horizon``.
    """

    n: int
    horizon: float
    times: np.ndarray
    values: np.ndarray
    clock_seed: int | None = None
    deviate_seed: int | None = None

    @classmethod
    def from_segments(cls, values: Sequence[float], times: Sequence[float] | None = None,
                      horizon: float = 1.0, n: int = 1) -> "WalkPath":
        values = np.asarray(values, dtype=float)
        if times is None:
            times = np.arange(values.size) * (horizon / values.size)
        return cls(n, horizon, np.asarray(times, dtype=float), values)

    def __len__(self):
        return self.values.size

    @property
    def ends(self) -> np.ndarray:
        return np.append(self.times[1:], self.horizon)


def _check_log(n: int, log: ClockEventLog):
    if log.n != n:
        raise DomainError(f"clock log has n={log.n} but the walk has n={n}")


def simulate_path(n: int, log: ClockEventLog, deviate_seed: int) -> WalkPath:
    """Run the walk against ``log`` with an incremental running sum."""
    _check_log(n, log)
    x0, repl = path_deviates(n, len(log), deviate_seed)
    values = kern.walk_values(x0, log.coords, repl, RESUM_EVERY)
    times = np.concatenate(([0.0], log.times))
    return WalkPath(n, log.horizon, times, values, log.seed, deviate_seed)


def brute_force_path(n: int, log: ClockEventLog, deviate_seed: int) -> WalkPath:
    """Reference implementation: full resummation after every event."""
    _check_log(n, log)
    if n * max(len(log), 1) > BRUTE_FORCE_BUDGET:
        raise DomainError(f"n * events = {n * len(log)} exceeds the brute-force budget")
    x0, repl = path_deviates(n, len(log), deviate_seed)
    values = kern.walk_values_brute(x0, log.coords, repl)
    times = np.concatenate(([0.0], log.times))
    return WalkPath(n, log.horizon, times, values, log.seed, deviate_seed)


def path_sup(path: WalkPath, window: tuple[float, float] | None = None) -> float:
    """Maximum of the path over ``[a, b)``, or over ``[a, horizon]`` when ``b = horizon``.

    The value in force at ``a`` is included; a segment starting exactly at
    ``b < horizon`` is not.
    """
    a, b = (0.0, path.horizon) if window is None else window
    if not 0 <= a <= b <= path.horizon:
        raise DomainError("window must satisfy 0 <= a <= b <= horizon")
    first = int(np.searchsorted(path.times, a, side="right")) - 1
    if b == path.horizon:
        last = path.values.size
    else:
        if a == b:
            raise DomainError("empty window")
        last = int(np.searchsorted(path.times, b, side="left"))
    return float(path.values[first:last].max())


def occupation_time(path: WalkPath, level: float) -> float:
    """Lebesgue measure of ``{v in [0, horizon] : S(v) >= level}``."""
    lengths = path.ends - path.times
    return float(lengths[path.values >= level].sum())


def write_path_csv(path: WalkPath, dest: str | os.PathLike) -> None:
    """Segments as ``start,end,value`` rows for plotting."""
    with open(dest, "w", encoding="utf-8") as fh:
        fh.write("start,end,value\n")
        for a, b, v in zip(path.times.tolist(), path.ends.tolist(), path.values.tolist()):
            fh.write(f"{a!r},{b!r},{v!r}\n")


# ---------------------------------------------------------------------------
# Path functionals computed without materialising the path
# ---------------------------------------------------------------------------


def sup_and_occupation(n: int, log: ClockEventLog, deviate_seed: int,
                       level: float) -> tuple[float, float]:
    _check_log(n, log)
    x0, repl = path_deviates(n, len(log), deviate_seed)
    return kern.sup_and_occupation(x0, log.times, log.coords, repl, log.horizon, level,
                                   RESUM_EVERY)


def annealed_sup(n: int, clock_seed: int, deviate_seed: int, horizon: float = 1.0) -> float:
    """Path supremum with fresh clocks; the clock log is never kept."""
    log = sample_clocks(n, horizon, clock_seed)
    x0, repl = path_deviates(n, len(log), deviate_seed)
    return float(kern.path_sup_only(x0, log.coords, repl, RESUM_EVERY))


def running_max_sup(n: int, log: ClockEventLog, deviate_seed: int) -> float:
    """``sup_t max_{1<=k<=n} S_k(t)`` via a max-prefix-sum tree, O(log n) per event."""
    _check_log(n, log)
    x0, repl = path_deviates(n, len(log), deviate_seed)
    return float(kern.running_max_tree(x0, log.coords, repl))


def running_max_sup_scan(n: int, log: ClockEventLog, deviate_seed: int) -> float:
    """Linear-rescan version of :func:`running_max_sup`, O(n) per event."""
    _check_log(n, log)
    x0, repl = path_deviates(n, len(log), deviate_seed)
    return float(kern.running_max_scan(x0, log.coords, repl))


class MaxPrefixSumTree:
    """Segment tree over an array supporting point assignment and the
    maximum over nonempty prefixes of the prefix sum."""

    def __init__(self, values: Sequence[float]):
        x = np.ascontiguousarray(values, dtype=float)
        if x.size == 0:
            raise DomainError("tree needs at least one value")
        self._n = x.size
        self._sum, self._best, self._size = kern.tree_build(x)

    def __len__(self):
        return self._n

    def update(self, j: int, value: float) -> None:
        if not 0 <= j < self._n:
            raise IndexError(j)
        kern.tree_update(self._sum, self._best, self._size, j, float(value))

    def max_prefix(self) -> float:
        return float(self._best[1])

    def total(self) -> float:
        return float(self._sum[1])


def multilevel_sup(log: ClockEventLog, deviate_seed: int, level_ends: Sequence[int]) -> np.ndarray:
    """Coupled path suprema of ``S_k`` for every ``k`` in ``level_ends``.

    ``level_ends`` must be strictly increasing with last entry ``log.n``.
    """
    ends = np.asarray(level_ends, dtype=np.int64)
    if ends.size == 0 or np.any(np.diff(ends) <= 0) or ends[0] < 1 or ends[-1] != log.n:
        raise DomainError("level_ends must increase strictly up to log.n")
    block = np.searchsorted(ends, np.arange(log.n), side="right").astype(np.int64)
    x0, repl = path_deviates(log.n, len(log), deviate_seed)
    return kern.multilevel_sup(x0, log.coords, repl, ends, block, RESUM_EVERY)


# ---------------------------------------------------------------------------
# Quenched ensembles
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuenchedEnsemble:
    """``M`` deviate realizations against one shared clock log."""

    log: ClockEventLog
    functional: str
    seeds: np.ndarray
    outputs: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.seeds.size


def quenched_seeds(base_seed: int, M: int, offset: int = 0) -> np.ndarray:
    seeds = np.array([derive_seed(base_seed, m) for m in range(offset, offset + M)],
                     dtype=np.uint64)
    if np.unique(seeds).size != seeds.size:
        raise RuntimeError("deviate seed collision")  # 2^-64 scale event
    return seeds


def quenched_outputs(log: ClockEventLog, seeds: np.ndarray, functional: str,
                     level: float | None = None,
                     points: Sequence[float] | None = None) -> np.ndarray:
    n = log.n
    if functional == "sup":
        out = np.empty(seeds.size)
        for i, sd in enumerate(seeds):
            x0, repl = path_deviates(n, len(log), int(sd))
            out[i] = kern.path_sup_only(x0, log.coords, repl, RESUM_EVERY)
        return out
    if functional in ("occupation", "sup_occupation"):
        if level is None:
            raise DomainError("occupation functional needs a level")
        out = np.empty((seeds.size, 2))
        for i, sd in enumerate(seeds):
            x0, repl = path_deviates(n, len(log), int(sd))
            out[i] = kern.sup_and_occupation(x0, log.times, log.coords, repl, log.horizon,
                                             float(level), RESUM_EVERY)
        return out[:, 1] if functional == "occupation" else out
    if functional == "values":
        if points is None:
            raise DomainError("values functional needs query points")
        q = np.asarray(points, dtype=float)
        order = np.argsort(q, kind="stable")
        out = np.empty((seeds.size, q.size))
        for i, sd in enumerate(seeds):
            x0, repl = path_deviates(n, len(log), int(sd))
            out[i, order] = kern.values_at(x0, log.times, log.coords, repl, q[order], RESUM_EVERY)
        return out
    raise DomainError(f"unknown functional {functional!r}")


def quenched_resample(log: ClockEventLog, M: int, functional: str = "sup", base_seed: int = 0,
                      level: float | None = None,
                      points: Sequence[float] | None = None) -> QuenchedEnsemble:
    """Resample the deviates ``M`` times against the fixed ``log``.

    ``functional`` is ``"sup"``, ``"occupation"`` (needs ``level``),
    ``"sup_occupation"`` (both, one row per path) or ``"values"`` (needs
    ``points``; one row of path values per resample).
    """
    if M < 1:
        raise DomainError("M must be >= 1")
    seeds = quenched_seeds(base_seed, M)
    out = quenched_outputs(log, seeds, functional, level, points)
    params = {"level": level, "points": None if points is None else tuple(points)}
    return QuenchedEnsemble(log, functional, seeds, out, params)


# ---------------------------------------------------------------------------
# Conditional moments under the quenched measure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalMomentsReport:
    """Regression of ``S(v)`` on ``S(u)`` over quenched resamples.

    Targets are slope ``1 - N/n`` and residual variance ``N (2 - N/n)``
    with ``N`` the number of coordinates changed in ``(u, v]``.
    """

    n: int
    u: float
    v: float
    changed: int
    M: int
    slope: float
    slope_se: float
    slope_target: float
    resid_var: float
    resid_var_se: float
    resid_var_target: float
    slope_z: float
    resid_var_z: float
    tail_table: tuple = ()
    degenerate: bool = False
    exact_equal: bool | None = None

    @property
    def passed(self) -> bool:
        if self.degenerate:
            return bool(self.exact_equal)
        return abs(self.slope_z) <= 4 and abs(self.resid_var_z) <= 4


def conditional_moments_check(log: ClockEventLog, u: float, v: float, M: int,
                              base_seed: int = 0, y: float | None = None,
                              bins: int = 5) -> ConditionalMomentsReport:
    """Check the quenched regression law of ``S(v)`` given ``S(u)``.

    Also tabulates, per quantile bin of ``S(u)``, the empirical
    ``P{S(v) >= y | S(u) in bin}`` next to the Gaussian prediction averaged
    over the bin (``y`` defaults to ``sqrt(n)``).
    """
    if not 0 <= u <= v <= log.horizon:
        raise DomainError("need 0 <= u <= v <= horizon")
    n = log.n
    N = count_changed(log, u, v)
    ens = quenched_resample(log, M, "values", base_seed, points=(u, v))
    su, sv = ens.outputs[:, 0], ens.outputs[:, 1]
    slope_t = 1.0 - N / n
    var_t = N * (2.0 - N / n)
    if N == 0:
        eq = bool(np.array_equal(su, sv))
        return ConditionalMomentsReport(n, u, v, 0, M, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                                        degenerate=True, exact_equal=eq)
    xc = su - su.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (sv - sv.mean())) / sxx
    resid = sv - sv.mean() - slope * xc
    rv = float(resid @ resid) / (M - 2)
    slope_se = math.sqrt(rv / sxx)
    # variance of a sample variance: (mu4 - s^4) / M, estimated from residuals
    m4 = float(np.mean(resid**4))
    rv_se = math.sqrt(max(m4 - rv * rv, 0.0) / M)
    y = math.sqrt(n) if y is None else y
    edges = np.quantile(su, np.linspace(0, 1, bins + 1))
    table = []
    sd = math.sqrt(var_t)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (su >= lo) & (su <= hi)
        if not np.any(sel):
            continue
        emp = float(np.mean(sv[sel] >= y))
        pred = float(np.mean(normal_sf((y - slope_t * su[sel]) / sd)))
        table.append((float(lo), float(hi), int(sel.sum()), emp, pred))
    return ConditionalMomentsReport(
        n, u, v, N, M, slope, slope_se, slope_t, rv, rv_se, var_t,
        (slope - slope_t) / slope_se, (rv - var_t) / rv_se, tuple(table))


# ---------------------------------------------------------------------------
# Rescaled two-parameter field
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RescaledFieldSample:
    """``values[i, j] = S_{floor(n t_j)}(s_i) / sqrt(n)``.

    ``s_grid`` is dynamical time, ``t_grid`` is the size fraction.
    """

    n: int
    s_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray

    def at(self, s: float, t: float) -> float:
        return float(self.values[_grid_index(self.s_grid, s, "s"), _grid_index(self.t_grid, t, "t")])


def _grid_index(grid: np.ndarray, x: float, name: str) -> int:
    i = int(np.searchsorted(grid, x - 1e-12))
    if i >= grid.size or abs(grid[i] - x) > 1e-12:
        raise DomainError(f"{name}={x} is not on the sample grid")
    return i


def size_indices(n: int, t_grid) -> np.ndarray:
    # floor(n t) with a guard against 0.3 * 1000 = 299.99999...
    return np.floor(np.asarray(t_grid, dtype=float) * n + 1e-9).astype(np.int64)


def rescaled_field(n: int, log: ClockEventLog, deviate_seed: int, s_grid, t_grid
                   ) -> RescaledFieldSample:
    s_grid = np.asarray(s_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    for g, name in ((s_grid, "s_grid"), (t_grid, "t_grid")):
        if np.any(np.diff(g) < 0) or g.size == 0 or g[0] < 0 or g[-1] > 1:
            raise DomainError(f"{name} must be sorted inside [0, 1]")
    _check_log(n, log)
    x0, repl = path_deviates(n, len(log), deviate_seed)
    k = size_indices(n, t_grid)
    vals = kern.prefix_sums_at(x0, log.times, log.coords, repl, s_grid, k) / math.sqrt(n)
    return RescaledFieldSample(n, s_grid, t_grid, vals)


def block_increment(field: RescaledFieldSample, size_interval: tuple[float, float],
                    time_interval: tuple[float, float]) -> float:
    """Increment of ``Y(t, s) = U_t(s)`` over the block ``size_interval x time_interval``.

    For the block ``(a, b] x (u, w]`` this is
    ``Y(b, w) - Y(b, u) - Y(a, w) + Y(a, u)``.  Size corners must lie on
    ``t_grid`` and in ``n^{-1} Z``; time corners must lie on ``s_grid``.
    """
    a, b = size_interval
    u, w = time_interval
    if a > b or u > w:
        raise DomainError("block intervals must be ordered")
    for c in (a, b):
        if abs(c * field.n - round(c * field.n)) > 1e-9:
            raise DomainError(f"size corner {c} is not in n^-1 Z")
    # grouped so that a degenerate block cancels exactly
    return (field.at(w, b) - field.at(w, a)) - (field.at(u, b) - field.at(u, a))
