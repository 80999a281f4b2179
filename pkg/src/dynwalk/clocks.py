"""Superposed Poisson clocks and changed-coordinate counts.

A clock log is the complete realization of ``n`` independent rate-one
Poisson processes on ``(0, horizon]``.  It is generated by superposition:
one Poisson(``n * horizon``) total, i.i.d. uniform event times, i.i.d.
uniform coordinate marks.  Windows are half-open, ``(s, t]``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .analytic import DomainError

EXACT_SWEEP_CAP = 20_000


@dataclass(frozen=True, eq=False)
class ClockEventLog:
    """Sorted event times and the 0-based coordinate that fires at each.

    ``times`` is strictly increasing inside ``(0, horizon]``.  ``coords``
    holds 0-based coordinate numbers; :attr:`indices` gives the 1-based
    view used in files and reports.
    """

    n: int
    horizon: float
    times: np.ndarray
    coords: np.ndarray
    seed: int | None = None
    _prev: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=np.float64)
        coords = np.ascontiguousarray(self.coords, dtype=np.int64)
        if times.shape != coords.shape or times.ndim != 1:
            raise DomainError("times and coords must be 1-d arrays of equal length")
        if self.n < 1 or not self.horizon > 0:
            raise DomainError("need n >= 1 and horizon > 0")
        if times.size:
            if np.any(np.diff(times) <= 0):
                raise DomainError("event times must be strictly increasing")
            if times[0] <= 0 or times[-1] > self.horizon:
                raise DomainError("event times must lie in (0, horizon]")
            if coords.min() < 0 or coords.max() >= self.n:
                raise DomainError("coordinate out of range")
        times.setflags(write=False)
        coords.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "coords", coords)

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, ClockEventLog):
            return NotImplemented
        return (self.n == other.n and self.horizon == other.horizon and self.seed == other.seed
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.coords, other.coords))

    @property
    def indices(self) -> np.ndarray:
        """1-based coordinate numbers."""
        return self.coords + 1

    @property
    def previous_event(self) -> np.ndarray:
        """For each event, the position of the previous event of the same
        coordinate, or -1 if it is that coordinate's first event."""
        if self._prev is None:
            prev = _previous_same_coord(self.coords, self.n)
            prev.setflags(write=False)
            object.__setattr__(self, "_prev", prev)
        return self._prev


def _previous_same_coord(coords: np.ndarray, n: int) -> np.ndarray:
    m = coords.size
    prev = np.full(m, -1, dtype=np.int64)
    if m == 0:
        return prev
    order = np.lexsort((np.arange(m), coords))
    same = coords[order[1:]] == coords[order[:-1]]
    prev[order[1:][same]] = order[:-1][same]
    return prev


def sample_clocks(n: int, horizon: float = 1.0, seed: int = 0) -> ClockEventLog:
    """Draw ``n`` independent rate-one Poisson clocks on ``(0, horizon]``.

    Deterministic in ``(n, horizon, seed)``.  Coincident times have
    probability zero; if floating point produces one anyway, the later of
    the two is nudged up by one ulp so the order stays strict.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if not horizon > 0 or not math.isfinite(horizon):
        raise DomainError("horizon must be positive and finite")
    rng = np.random.default_rng(seed)
    count = int(rng.poisson(n * horizon))
    times = np.sort(horizon * (1.0 - rng.random(count)))  # in (0, horizon]
    # marks are independent of times, so assigning them in time order
    # leaves the law unchanged and avoids an argsort
    coords = rng.integers(0, n, size=count, dtype=np.int64)
    ties = np.flatnonzero(np.diff(times) <= 0)
    for k in ties:  # essentially never runs
        times[k + 1] = np.nextafter(times[k], np.inf)
    if count and times[-1] > horizon:
        raise DomainError("tie resolution pushed an event past the horizon")
    return ClockEventLog(n=n, horizon=float(horizon), times=times, coords=coords, seed=seed)


def empty_log(n: int, horizon: float = 1.0, seed: int | None = None) -> ClockEventLog:
    return ClockEventLog(n, horizon, np.empty(0), np.empty(0, dtype=np.int64), seed)


def pi_total(log: ClockEventLog) -> int:
    """Total number of replacements on the horizon."""
    return len(log)


def g_indicator(log: ClockEventLog) -> bool:
    """Whether the replacement count is at most ``3 n``."""
    return len(log) <= 3 * log.n


def count_changed(log: ClockEventLog, s: float, t: float) -> int:
    """Number of distinct coordinates with at least one event in ``(s, t]``."""
    if s > t:
        raise DomainError(f"need s <= t, got s={s}, t={t}")
    lo = int(np.searchsorted(log.times, s, side="right"))
    hi = int(np.searchsorted(log.times, t, side="right"))
    if hi <= lo:
        return 0
    return int(np.count_nonzero(log.previous_event[lo:hi] < lo))


def expected_changed(n: int, s, t):
    """``n (1 - exp(-(t - s)))``."""
    d = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)
    if np.any(d < 0):
        raise DomainError("need s <= t")
    out = -n * np.expm1(-d)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DeviationStat:
    """Supremum of ``|N(s,t) / E N(s,t) - 1|`` over windows with ``t - s >= delta``."""

    delta: float
    value: float
    method: str  # "ExactSweep" | "Grid"
    grid_k: int | None = None


def grid_size(alpha: float, delta: float) -> int:
    """``floor(1 + 8 / (alpha delta))`` grid intervals per unit time."""
    if not 0 < alpha < 1 or not delta > 0:
        raise DomainError("need alpha in (0, 1) and delta > 0")
    # the nudge keeps products like 0.2 * 0.05 from rounding one grid point away
    return int(math.floor(1.0 + 8.0 / (alpha * delta) + 1e-9))


def uniform_deviation(log: ClockEventLog, delta: float, mode: str = "exact",
                      alpha: float | None = None, grid_k: int | None = None,
                      cap: int = EXACT_SWEEP_CAP) -> DeviationStat:
    """Uniform relative deviation of the changed counts from their mean.

    ``mode="exact"`` sweeps every constancy rectangle of ``N`` and evaluates
    the ratio at the end points of its admissible window lengths, giving the
    exact supremum; it costs ``O(events^2)`` and refuses logs above ``cap``
    events.  ``mode="grid"`` restricts ``s, t`` to ``{j horizon / k}`` with
    ``k = grid_k`` or ``grid_size(alpha, delta)``; it never exceeds the
    exact value.
    """
    if not delta > 0:
        raise DomainError("delta must be > 0")
    if mode in ("exact", "ExactSweep"):
        if len(log) > cap:
            raise DomainError(f"{len(log)} events exceed the exact-sweep cap {cap}; use mode='grid'")
        if delta > log.horizon:
            return DeviationStat(delta, 0.0, "ExactSweep")
        return DeviationStat(delta, _exact_sweep(log, delta), "ExactSweep")
    if mode in ("grid", "Grid"):
        if grid_k is None:
            if alpha is None:
                raise DomainError("grid mode needs alpha or grid_k")
            grid_k = grid_size(alpha, delta)
        k = int(grid_k)
        if delta > log.horizon:
            return DeviationStat(delta, 0.0, "Grid", k)
        return DeviationStat(delta, _grid_sup(log, delta, k), "Grid", k)
    raise DomainError(f"unknown mode {mode!r}")


def _exact_sweep(log: ClockEventLog, delta: float) -> float:
    m = len(log)
    n = log.n
    # tau[0] = 0, tau[1..m] = events, tau[m+1] = horizon
    tau = np.concatenate(([0.0], log.times, [log.horizon]))
    prev1 = log.previous_event + 1  # 1-based position of previous event, 0 if none
    best = 0.0
    for a in range(m + 1):
        # s in [tau_a, tau_{a+1}); t in [tau_b, tau_{b+1}) for b = a..m
        flags = prev1[a:] <= a  # events a+1..m, first in window after s
        counts = np.concatenate(([0], np.cumsum(flags)))
        b = np.arange(a, m + 1)
        d_hi = tau[b + 1] - tau[a]
        d_lo = np.maximum(tau[b] - tau[a + 1], delta)
        ok = d_lo <= d_hi
        if not np.any(ok):
            continue
        c = counts[ok]
        for d in (d_lo[ok], d_hi[ok]):
            r = np.abs(c / (-n * np.expm1(-d)) - 1.0)
            best = max(best, float(r.max()))
    return best


def _event_rectangles(log: ClockEventLog, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # an event counts towards (g_i, g_l] iff i_lo <= i < i_hi <= l
    if not len(log):
        return np.empty(0, np.int64), np.empty(0, np.int64)
    prev = log.previous_event
    prev_t = np.where(prev >= 0, log.times[np.maximum(prev, 0)], -1.0)
    i_lo = np.searchsorted(grid, prev_t, side="left")
    i_hi = np.searchsorted(grid, log.times, side="left")
    ok = i_lo < i_hi
    return i_lo[ok], i_hi[ok]


def changed_count_grid(log: ClockEventLog, k: int) -> tuple[np.ndarray, np.ndarray]:
    """``N(g_i, g_l)`` for all grid pairs ``g = j horizon / k``.

    Returns ``(grid, counts)`` with ``counts[i, l]`` meaningful for ``i <= l``.
    An event counts towards ``(g_i, g_l]`` iff it lies in the window and the
    previous event of its coordinate lies at or before ``g_i``, which is a
    rectangle in ``(i, l)``; the rectangles are accumulated with a 2-d
    difference array.
    """
    if k < 1:
        raise DomainError("grid needs k >= 1")
    grid = np.arange(k + 1) * (log.horizon / k)
    rows = [block for _, block in _count_row_blocks(log, grid, k + 1)]
    return grid, np.vstack(rows)


def _count_row_blocks(log: ClockEventLog, grid: np.ndarray, block: int):
    # yields (first row, counts[rows, :]) with the difference array cumulated
    # block by block, so memory is O(block * k)
    k = grid.size - 1
    i_lo, i_hi = _event_rectangles(log, grid)
    carry = np.zeros(k + 2, dtype=np.int64)
    for r0 in range(0, k + 1, block):
        r1 = min(r0 + block, k + 1)
        diff = np.zeros((r1 - r0, k + 2), dtype=np.int64)
        sel = (i_lo >= r0) & (i_lo < r1)
        np.add.at(diff, (i_lo[sel] - r0, i_hi[sel]), 1)
        sel = (i_hi >= r0) & (i_hi < r1)
        np.add.at(diff, (i_hi[sel] - r0, i_hi[sel]), -1)
        acc = diff.cumsum(axis=0) + carry
        carry = acc[-1].copy()
        yield r0, acc.cumsum(axis=1)[:, : k + 1]


GRID_BLOCK_CELLS = 2**22


def _grid_sup(log: ClockEventLog, delta: float, k: int) -> float:
    grid = np.arange(k + 1) * (log.horizon / k)
    h = log.horizon / k
    min_steps = max(1, math.ceil(delta / h - 1e-9))
    block = max(1, GRID_BLOCK_CELLS // (k + 2))
    lag_mean = -log.n * np.expm1(-np.arange(k + 1) * h)
    best = 0.0
    for r0, counts in _count_row_blocks(log, grid, block):
        i = np.arange(r0, r0 + counts.shape[0])[:, None]
        lag = np.arange(k + 1)[None, :] - i
        valid = lag >= min_steps
        if not valid.any():
            continue
        en = lag_mean[np.clip(lag, 0, k)]
        r = np.where(valid, np.abs(counts / np.where(valid, en, 1.0) - 1.0), 0.0)
        best = max(best, float(r.max()))
    return best


def write_csv(log: ClockEventLog, path: str | os.PathLike) -> None:
    """Flat CSV: header line ``n=..,horizon=..,seed=..`` then ``time,index`` rows.

    Times are written with ``repr`` so they round-trip exactly; indices are
    1-based.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n={log.n},horizon={log.horizon!r},seed={log.seed}\n")
        for t, j in zip(log.times.tolist(), log.indices.tolist()):
            fh.write(f"{t!r},{j}\n")


def read_csv(path: str | os.PathLike) -> ClockEventLog:
    with open(path, encoding="utf-8") as fh:
        header = dict(item.split("=", 1) for item in fh.readline().strip().split(","))
        rows = [line.split(",") for line in fh if line.strip()]
    seed = None if header["seed"] == "None" else int(header["seed"])
    times = np.array([float(r[0]) for r in rows], dtype=np.float64)
    coords = np.array([int(r[1]) - 1 for r in rows], dtype=np.int64)
    return ClockEventLog(int(header["n"]), float(header["horizon"]), times, coords, seed)
