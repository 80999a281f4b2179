"""Monte Carlo verification suites with band verdicts.

Every experiment splits its samples into shards of a fixed size.  Shard
``i`` draws the seeds of its samples in one block from
``SeedSequence(master, spawn_key=(tag, ..., i))``, where ``tag`` names the
experiment.  The shard layout and every count depend only on the
configuration and the master seed, never on the number of worker
processes, and shard results are combined in shard order.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels as kern
from .analytic import (BandRegimeWarning, DomainError, GrowthEnvelope, TailBand,
                       clock_uniform_bound, erdos_sequence, integral_test, normal_sf,
                       q_argument, q_envelope, scale_regime, static_erdos_test, sum_test,
                       tail_band, tail_f, log_e)
from .clocks import ClockEventLog, expected_changed, sample_clocks, uniform_deviation
from .estimate import ConfigMismatch, Estimate, merge
from .ou import implied_mountford_constant, ou_halving_diagnostic, ou_sup_tail
from .walk import (RESUM_EVERY, annealed_sup, block_increment, multilevel_sup,
                   path_deviates, quenched_outputs, rescaled_field)

__all__ = [
    "BandReport", "Check", "ExperimentReport", "HitCounter", "ConfigMismatch", "merge",
    "band_verdict", "sample_seeds", "shard_sizes", "run_tail_sweep", "tail_sweep_shard",
    "run_quenched_tail", "run_quenched_family", "run_clock_verification",
    "run_fdd_covariance", "run_block_moment_check", "neighbour_kind", "run_erdos_suite",
    "run_integral_tests", "default_family", "q_table",
    "paley_zygmund_check", "reflection_check", "run_ou_tail", "DEFAULT_SLACK",
]

PASS, FAIL, UNDERPOWERED = "Pass", "Fail", "Underpowered"
DEFAULT_SLACK = (0.5, 2.0)
DEFAULT_SHARD = 10_000
MIN_EXPECTED_HITS = 20

# spawn-key tags, one per experiment, so equal master seeds give unrelated streams
TAIL_TAG, QUENCHED_TAG, CLOCK_TAG, SMALL_LOG_TAG, FDD_TAG = 1, 2, 3, 4, 5
BLOCK_TAG, ERDOS_TAG, PZ_TAG, REFLECT_TAG = 6, 7, 8, 9


# ---------------------------------------------------------------------------
# Report types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BandReport:
    """An estimate judged against an accepted interval ``band``."""

    parameter: str
    estimate: Estimate
    band: tuple
    verdict: str
    note: str = ""


@dataclass(frozen=True)
class Check:
    """A scalar statistic that must lie in ``[low, high]``."""

    name: str
    value: float
    low: float
    high: float
    verdict: str
    note: str = ""


def make_check(name: str, value: float, low: float = -math.inf, high: float = math.inf,
               note: str = "") -> Check:
    value = float(value)
    ok = low <= value <= high
    return Check(name, value, float(low), float(high), PASS if ok else FAIL, note)


def band_verdict(est: Estimate, band: tuple[float, float]) -> str:
    """Underpowered when the interval is wider than the band, else Pass when
    ``p_hat`` lies in the band, else Fail."""
    low, high = band
    if est.ci_high - est.ci_low > high - low:
        return UNDERPOWERED
    if low <= est.p_hat <= high:
        return PASS
    return FAIL


def make_band(parameter: str, est: Estimate, band: tuple[float, float], note: str = ""
              ) -> BandReport:
    band = (float(band[0]), float(band[1]))
    return BandReport(parameter, est, band, band_verdict(est, band), note)


def _plain(x):
    # JSON-shaped copy: tuples become lists, numpy scalars become Python ones,
    # non-finite floats become None
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


@dataclass
class ExperimentReport:
    """Outcome of one experiment.

    ``config`` holds the fully resolved parameters; ``bands`` and ``checks``
    carry verdicts; ``tables`` holds plot-ready rows that carry no verdict.
    """

    experiment: str
    config: dict
    seed: int
    bands: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    wall_time: float = field(default=0.0, compare=False)

    def __post_init__(self):
        self.config = _plain(self.config)
        self.tables = _plain(self.tables)

    def verdicts(self) -> list[str]:
        return [b.verdict for b in self.bands] + [c.verdict for c in self.checks]

    @property
    def verdict(self) -> str:
        v = self.verdicts()
        if FAIL in v:
            return FAIL
        if UNDERPOWERED in v:
            return UNDERPOWERED
        return PASS

    def exit_code(self, strict: bool = False) -> int:
        v = self.verdicts()
        if FAIL in v:
            return 1
        if strict and UNDERPOWERED in v:
            return 3
        return 0

    def band(self, parameter: str) -> BandReport:
        for b in self.bands:
            if b.parameter == parameter:
                return b
        raise KeyError(parameter)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True, eq=False)
class HitCounter:
    """Per-level hit counts of ``S*_j in I_j`` and ``S*_j >= H_j sqrt(e_j)``.

    ``indicators`` is the level series of one tracked path; its running sum
    is the partial count ``L_n``.
    """

    levels: np.ndarray
    e_values: np.ndarray
    hits_in: np.ndarray
    hits_above: np.ndarray
    M: int
    indicators: np.ndarray

    @property
    def partial_counts(self) -> np.ndarray:
        return np.cumsum(self.indicators.astype(np.int64))

    @property
    def mean_partial_counts(self) -> np.ndarray:
        """``E L_n`` estimated over all paths."""
        return np.cumsum(self.hits_in / self.M)


# ---------------------------------------------------------------------------
# Seeds and shards
# ---------------------------------------------------------------------------


def sample_seeds(master: int, key: Sequence[int], count: int) -> np.ndarray:
    """``count`` 64-bit seeds for the stream ``key`` under ``master``."""
    if master < 0:
        raise DomainError("master seed must be >= 0")
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return ss.generate_state(count, np.uint64) if count else np.empty(0, np.uint64)


def shard_sizes(M: int, shard_size: int) -> list[int]:
    if shard_size < 1:
        raise DomainError("shard_size must be >= 1")
    full, rest = divmod(M, shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def _map_shards(fn: Callable, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        return list(ex.map(fn, tasks))


def _check_count(M: int, name: str = "M"):
    if M < 1:
        raise DomainError(f"{name} must be >= 1")


def _regime_note(n: int, z: float) -> str:
    zmax = 0.5 * math.sqrt(n / log_e(n))
    if z < 1:
        return f"z={z} below the regime z >= 1"
    if z > zmax:
        return f"z={z} above the regime bound {zmax:.4g}"
    return ""


def _rare_guard(z: float, M: int, allow_rare: bool):
    expected = tail_f(z) * M
    if expected < MIN_EXPECTED_HITS and not allow_rare:
        raise DomainError(
            f"z={z} with M={M} expects {expected:.3g} < {MIN_EXPECTED_HITS} hits; "
            "raise M or pass allow_rare")


def _quiet_band(z: float, band: TailBand) -> tuple[float, float]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BandRegimeWarning)
        return tail_band(z, band)


# ---------------------------------------------------------------------------
# Annealed tail sweep
# ---------------------------------------------------------------------------


def tail_sweep_shard(task) -> list[int]:
    """Hit counts of ``sup_t S_n(t) >= z sqrt(n)`` for one shard.

    ``task = (n, z_list, master, shard, count)``.  Sample ``m`` uses the clock
    seed ``2m`` and the deviate seed ``2m + 1`` of the shard's seed block.
    """
    n, z_list, master, shard, count = task
    seeds = sample_seeds(master, (TAIL_TAG, shard), 2 * count)
    sups = np.empty(count)
    for m in range(count):
        sups[m] = annealed_sup(n, int(seeds[2 * m]), int(seeds[2 * m + 1]))
    root = math.sqrt(n)
    return [int(np.count_nonzero(sups >= z * root)) for z in z_list]


def run_tail_sweep(n: int, z_list: Sequence[float], M: int, seed: int = 0, *,
                   slack: tuple[float, float] = DEFAULT_SLACK, workers: int = 1,
                   shard_size: int = DEFAULT_SHARD, allow_rare: bool = False
                   ) -> ExperimentReport:
    """Annealed estimates of ``P{sup_{t<=1} S_n(t) >= z sqrt(n)}`` against the tail band.

    All ``z`` share the same ``M`` paths (fresh clocks per path).  A ``z``
    outside ``1 <= z <= 0.5 sqrt(n / ln n)`` is still run and flagged in the
    band's note.
    """
    _check_count(n, "n")
    _check_count(M)
    z_list = [float(z) for z in z_list]
    if not z_list:
        raise DomainError("z_list is empty")
    band = TailBand(slack_low=slack[0], slack_high=slack[1])
    for z in z_list:
        _rare_guard(z, M, allow_rare)
    t0 = time.perf_counter()
    tasks = [(n, z_list, seed, i, c) for i, c in enumerate(shard_sizes(M, shard_size))]
    counts = np.zeros(len(z_list), dtype=np.int64)
    for hits in _map_shards(tail_sweep_shard, tasks, workers):
        counts += hits
    wall = time.perf_counter() - t0
    bands = []
    for z, h in zip(z_list, counts):
        est = Estimate(int(h), M, seed, ("tail_sweep", n, z), wall / len(z_list))
        bands.append(make_band(f"z={z}", est, _quiet_band(z, band), _regime_note(n, z)))
    config = {"n": n, "z_list": z_list, "M": M, "slack": slack, "shard_size": shard_size,
              "allow_rare": allow_rare}
    return ExperimentReport("tail-sweep", config, seed, bands, [], {}, wall)


# ---------------------------------------------------------------------------
# Quenched tail
# ---------------------------------------------------------------------------


def _quenched_shard(task) -> int:
    log, level, master, shard, count = task
    seeds = sample_seeds(master, (QUENCHED_TAG, log.seed or 0, shard), count)
    sups = quenched_outputs(log, seeds, "sup")
    return int(np.count_nonzero(sups >= level))


def _quenched_estimate(log: ClockEventLog, z: float, M: int, seed: int, workers: int,
                       shard_size: int) -> Estimate:
    t0 = time.perf_counter()
    level = z * math.sqrt(log.n)
    tasks = [(log, level, seed, i, c) for i, c in enumerate(shard_sizes(M, shard_size))]
    hits = sum(_map_shards(_quenched_shard, tasks, workers))
    return Estimate(int(hits), M, seed, ("quenched_tail", log.n, z, log.seed),
                    time.perf_counter() - t0)


def _quenched_bands(est: Estimate, n: int, z: float, eps: float, slack_low: float
                    ) -> list[BandReport]:
    f = tail_f(z)
    note = _regime_note(n, z)
    clock = est.config[-1]
    upper = make_band(f"upper clock_seed={clock}", est, (0.0, min(1.0, (2 + eps) * f)), note)
    lower = make_band(f"lower clock_seed={clock}", est, (slack_low * f / 9, 1.0), note)
    return [upper, lower]


def run_quenched_tail(n: int, z: float, clock_seed: int, M: int, seed: int = 0, *,
                      eps: float = 0.5, slack_low: float = DEFAULT_SLACK[0],
                      workers: int = 1, shard_size: int = DEFAULT_SHARD,
                      allow_rare: bool = False) -> ExperimentReport:
    """Quenched estimate of ``P_N{sup S_n >= z sqrt(n)}`` for one clock log.

    The upper band is ``[0, (2 + eps) f(z)]`` and the lower band
    ``[slack_low f(z) / 9, 1]``.
    """
    _check_count(M)
    _rare_guard(z, M, allow_rare)
    log = sample_clocks(n, 1.0, clock_seed)
    est = _quenched_estimate(log, z, M, seed, workers, shard_size)
    config = {"n": n, "z": z, "clock_seed": clock_seed, "M": M, "eps": eps,
              "slack_low": slack_low, "shard_size": shard_size}
    tables = {"logs": [{"clock_seed": clock_seed, "events": len(log), "p_hat": est.p_hat}]}
    return ExperimentReport("quenched-tail", config, seed, _quenched_bands(est, n, z, eps, slack_low),
                            [], tables, est.wall_time)


def run_quenched_family(n: int, z: float, clock_seeds: Sequence[int], M: int, seed: int = 0,
                        *, eps: float = 0.5, slack_low: float = DEFAULT_SLACK[0],
                        max_cv: float = 0.3, workers: int = 1,
                        shard_size: int = DEFAULT_SHARD, allow_rare: bool = False
                        ) -> ExperimentReport:
    """:func:`run_quenched_tail` over several clock logs plus the spread of
    the quenched estimates (coefficient of variation at most ``max_cv``)."""
    _check_count(M)
    _rare_guard(z, M, allow_rare)
    t0 = time.perf_counter()
    bands, rows, p = [], [], []
    for cs in clock_seeds:
        log = sample_clocks(n, 1.0, cs)
        est = _quenched_estimate(log, z, M, seed, workers, shard_size)
        bands += _quenched_bands(est, n, z, eps, slack_low)
        rows.append({"clock_seed": cs, "events": len(log), "p_hat": est.p_hat,
                     "ci_low": est.ci_low, "ci_high": est.ci_high})
        p.append(est.p_hat)
    checks = []
    if len(p) >= 2 and np.mean(p) > 0:
        cv = float(np.std(p, ddof=1) / np.mean(p))
        checks.append(make_check("coefficient_of_variation", cv, 0.0, max_cv))
    config = {"n": n, "z": z, "clock_seeds": list(clock_seeds), "M": M, "eps": eps,
              "slack_low": slack_low, "max_cv": max_cv, "shard_size": shard_size}
    return ExperimentReport("quenched-tail", config, seed, bands, checks, {"logs": rows},
                            time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Clock concentration
# ---------------------------------------------------------------------------


def _clock_shard(task) -> np.ndarray:
    n, delta, alpha, master, shard, count = task
    seeds = sample_seeds(master, (CLOCK_TAG, shard), count)
    return np.array([uniform_deviation(sample_clocks(n, 1.0, int(sd)), delta, "grid",
                                       alpha=alpha).value for sd in seeds])


def run_clock_verification(n: int, delta: float, alpha: float, reps: int, seed: int = 0, *,
                           small_logs: int = 50, small_n: int = 30, small_delta: float = 0.1,
                           small_k: int = 1000, workers: int = 1, shard_size: int = 20
                           ) -> ExperimentReport:
    """Exceedance frequency of ``{deviation >= alpha}`` against the clamped bound.

    The deviation statistic is evaluated on the grid of
    ``grid_size(alpha, delta)`` points.  A second check compares the grid
    and exact sweeps on ``small_logs`` small logs: the grid value may not
    exceed the exact one and may undershoot it by at most the Lipschitz
    allowance ``2 (1 + exact) n / (E N(delta) k)``.
    """
    if n * delta < 100:
        raise DomainError("need n * delta >= 100")
    _check_count(reps, "reps")
    t0 = time.perf_counter()
    tasks = [(n, delta, alpha, seed, i, c) for i, c in enumerate(shard_sizes(reps, shard_size))]
    values = np.concatenate(_map_shards(_clock_shard, tasks, workers))
    exceed = int(np.count_nonzero(values >= alpha))
    est = Estimate(exceed, reps, seed, ("clock_exceedance", n, delta, alpha))
    bound = clock_uniform_bound(n, delta, alpha)
    raw = clock_uniform_bound(n, delta, alpha, clamp=False)
    checks = [make_check("exceedance_frequency", est.p_hat, 0.0, bound,
                         f"exceedances={exceed}/{reps} raw_bound={raw:.6g}")]

    gaps = []
    lip = small_n / expected_changed(small_n, 0.0, small_delta)
    for sd in sample_seeds(seed, (SMALL_LOG_TAG,), small_logs):
        log = sample_clocks(small_n, 1.0, int(sd))
        ex = uniform_deviation(log, small_delta, "exact").value
        gr = uniform_deviation(log, small_delta, "grid", grid_k=small_k).value
        gaps.append((ex - gr) / (2 * (1 + ex) * lip / small_k) if gr <= ex + 1e-12 else math.inf)
    if small_logs:
        checks.append(make_check("sweep_grid_agreement", max(gaps), 0.0, 1.0,
                                 f"{small_logs} logs, n={small_n}, k={small_k}"))

    config = {"n": n, "delta": delta, "alpha": alpha, "reps": reps, "small_logs": small_logs,
              "small_n": small_n, "small_delta": small_delta, "small_k": small_k,
              "shard_size": shard_size}
    tables = {"deviation": [{"mean": float(values.mean()), "max": float(values.max()),
                             "noise_scale": 1 / math.sqrt(n * delta), "bound": bound,
                             "raw_bound": raw}]}
    return ExperimentReport("clock-verify", config, seed, [], checks, tables,
                            time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Finite-dimensional covariance of the rescaled field
# ---------------------------------------------------------------------------


def _fdd_shard(task):
    n, s_grid, t_grid, master, shard, count = task
    seeds = sample_seeds(master, (FDD_TAG, shard), 2 * count)
    k = len(s_grid) * len(t_grid)
    s1 = np.zeros((k, k))
    s2 = np.zeros((k, k))
    for m in range(count):
        log = sample_clocks(n, 1.0, int(seeds[2 * m]))
        x = rescaled_field(n, log, int(seeds[2 * m + 1]), s_grid, t_grid).values.ravel()
        p = np.outer(x, x)
        s1 += p
        s2 += p * p
    return s1, s2


def run_fdd_covariance(n: int, s_grid: Sequence[float], t_grid: Sequence[float], reps: int,
                       seed: int = 0, *, workers: int = 1, shard_size: int = 2000,
                       max_z: float = 4.0) -> ExperimentReport:
    """Second moments of ``U^n_t(s)`` on a grid against ``e^{-|s-s'|} min(t, t')``.

    The field has mean zero, so covariances are estimated by the mean of the
    products and their standard errors by the spread of the products.
    """
    if reps < 1000:
        raise DomainError("reps must be >= 1000")
    s_grid = [float(v) for v in s_grid]
    t_grid = [float(v) for v in t_grid]
    t0 = time.perf_counter()
    tasks = [(n, s_grid, t_grid, seed, i, c) for i, c in enumerate(shard_sizes(reps, shard_size))]
    parts = _map_shards(_fdd_shard, tasks, workers)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / reps
    se = np.sqrt(np.maximum(s2 / reps - mean**2, 0.0) * reps / (reps - 1) / reps)
    pts = [(s, t) for s in s_grid for t in t_grid]
    rows, zs, errs = [], [], []
    for a, (sa, ta) in enumerate(pts):
        for b in range(a, len(pts)):
            sb, tb = pts[b]
            target = math.exp(-abs(sa - sb)) * min(ta, tb)
            err = mean[a, b] - target
            if se[a, b] > 0:
                zscore = err / se[a, b]
            else:
                zscore = 0.0 if err == 0 else math.inf
            rows.append({"s": sa, "t": ta, "s2": sb, "t2": tb, "estimate": mean[a, b],
                         "target": target, "se": se[a, b], "z": zscore})
            zs.append(abs(zscore))
            errs.append(abs(err))
    checks = [make_check("max_abs_z", max(zs), 0.0, max_z, f"max_abs_error={max(errs):.4g}")]
    config = {"n": n, "s_grid": s_grid, "t_grid": t_grid, "reps": reps, "max_z": max_z,
              "shard_size": shard_size}
    return ExperimentReport("fdd-cov", config, seed, [], checks, {"covariance": rows},
                            time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Block fourth moments
# ---------------------------------------------------------------------------

# (size interval, time interval) per block; two horizontal then two vertical pairs
DEFAULT_BLOCK_PAIRS = (
    (((0.2, 0.4), (0.3, 0.6)), ((0.4, 0.6), (0.3, 0.6))),
    (((0.0, 0.5), (0.0, 1.0)), ((0.5, 1.0), (0.0, 1.0))),
    (((0.2, 0.5), (0.1, 0.4)), ((0.2, 0.5), (0.4, 0.7))),
    (((0.0, 1.0), (0.0, 0.5)), ((0.0, 1.0), (0.5, 1.0))),
)


def _abut(p, q) -> bool:
    return p[1] == q[0] or q[1] == p[0]


def neighbour_kind(I, J) -> str:
    """``"horizontal"`` when the blocks share their time interval and abut in
    size, ``"vertical"`` when they share their size interval and abut in time."""
    (ia, it), (ja, jt) = I, J
    if tuple(it) == tuple(jt) and _abut(ia, ja):
        return "horizontal"
    if tuple(ia) == tuple(ja) and _abut(it, jt):
        return "vertical"
    raise DomainError(f"blocks {I} and {J} are not neighbours")


def _area(block) -> float:
    (a, b), (u, w) = block
    return (b - a) * (w - u)


def _block_shard(task):
    n, pairs, s_grid, t_grid, master, shard, count = task
    seeds = sample_seeds(master, (BLOCK_TAG, shard), 2 * count)
    s1 = np.zeros(len(pairs))
    s2 = np.zeros(len(pairs))
    for m in range(count):
        log = sample_clocks(n, 1.0, int(seeds[2 * m]))
        fld = rescaled_field(n, log, int(seeds[2 * m + 1]), s_grid, t_grid)
        for k, (I, J) in enumerate(pairs):
            yi = block_increment(fld, I[0], I[1])
            yj = block_increment(fld, J[0], J[1])
            v = yi * yi * yj * yj
            s1[k] += v
            s2[k] += v * v
    return s1, s2


def run_block_moment_check(n: int, blocks=DEFAULT_BLOCK_PAIRS, reps: int = 10_000,
                           seed: int = 0, *, coeff: float = 10.0, workers: int = 1,
                           shard_size: int = 2000) -> ExperimentReport:
    """``E{Y(I)^2 Y(J)^2}`` for neighbouring blocks against ``coeff |I| |J|``.

    A block is ``(size interval, time interval)``.  Horizontal pairs are
    also checked against ``4 |I| |J|``.
    """
    _check_count(reps, "reps")
    pairs = [tuple(tuple(tuple(float(c) for c in iv) for iv in blk) for blk in pr)
             for pr in blocks]
    kinds = [neighbour_kind(I, J) for I, J in pairs]
    s_grid = sorted({c for I, J in pairs for c in (*I[1], *J[1])})
    t_grid = sorted({c for I, J in pairs for c in (*I[0], *J[0])})
    t0 = time.perf_counter()
    tasks = [(n, pairs, s_grid, t_grid, seed, i, c)
             for i, c in enumerate(shard_sizes(reps, shard_size))]
    parts = _map_shards(_block_shard, tasks, workers)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / reps
    se = np.sqrt(np.maximum(s2 / reps - mean**2, 0.0) / max(reps - 1, 1))
    checks, rows = [], []
    for k, ((I, J), kind) in enumerate(zip(pairs, kinds)):
        scale = _area(I) * _area(J)
        label = f"{kind} I={list(I)} J={list(J)}"
        checks.append(make_check(f"moment {label}", mean[k], 0.0, coeff * scale + 4 * se[k]))
        if kind == "horizontal":
            checks.append(make_check(f"independent {label}", mean[k], 0.0, 4 * scale + 4 * se[k]))
        rows.append({"kind": kind, "I": I, "J": J, "moment": mean[k], "se": se[k],
                     "area_product": scale, "ratio": mean[k] / scale if scale else None})
    config = {"n": n, "blocks": pairs, "reps": reps, "coeff": coeff, "shard_size": shard_size}
    return ExperimentReport("block-moment", config, seed, [], checks, {"blocks": rows},
                            time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Erdős-sequence suite
# ---------------------------------------------------------------------------


def default_family() -> list[tuple[str, GrowthEnvelope]]:
    return [(f"corollary a={a}", GrowthEnvelope.corollary(a)) for a in (2.5, 3.5, 4.5, 5.5)] + \
           [(f"scaled_lil c={c}", GrowthEnvelope.scaled_lil(c)) for c in (0.9, 1.2)]


def _erdos_shard(task):
    ends, lo, hi, master, shard, count = task
    seeds = sample_seeds(master, (ERDOS_TAG, shard), 2 * count)
    n = int(ends[-1])
    above = np.zeros(len(ends), dtype=np.int64)
    inside = np.zeros(len(ends), dtype=np.int64)
    first = None
    for m in range(count):
        log = sample_clocks(n, 1.0, int(seeds[2 * m]))
        sup = multilevel_sup(log, int(seeds[2 * m + 1]), ends)
        a = sup >= lo
        i = a & (sup <= hi)
        above += a
        inside += i
        if first is None:
            first = i
    return above, inside, first


def q_table(H: GrowthEnvelope, seq, indices: Sequence[int]) -> list[dict]:
    """``Q_{i,j}`` at one ``j`` per scale regime for each ``i``."""
    rows = []
    for i in indices:
        li = log_e(i)
        for j in (i + 1, i + math.ceil(li), i + math.floor(li**10) + 1):
            if j > seq.n_max or j <= i:
                continue
            rows.append({"i": i, "j": j, "regime": scale_regime(i, j),
                         "argument": q_argument(i, j, H, seq), "Q": q_envelope(i, j, H, seq)})
    return rows


def _decay_slopes(rows: list[dict]) -> list[dict]:
    out = []
    for regime in (1, 2, 3):
        pts = [(r["i"], r["Q"]) for r in rows if r["regime"] == regime and r["Q"] > 0]
        if len({i for i, _ in pts}) >= 2:
            x = np.log([p[0] for p in pts])
            y = np.log([p[1] for p in pts])
            out.append({"regime": regime, "slope": float(np.polyfit(x, y, 1)[0]),
                        "points": len(pts)})
    return out


def _classify_family(family, seq) -> tuple[list[Check], list[dict]]:
    checks, rows = [], []
    for label, H in family:
        dyn = integral_test(H)
        sta = static_erdos_test(H)
        sm = sum_test(H, seq)
        rows.append({"label": label, "integral": dyn.classification,
                     "integral_partial": dyn.partial_value, "static": sta.classification,
                     "sum": sm.classification, "sum_exponent": sm.tail_exponent})
        agree = sm.classification == dyn.classification
        checks.append(Check(f"sum agrees {label}", float(agree), 1.0, 1.0,
                            PASS if agree else FAIL, f"{sm.classification} vs {dyn.classification}"))
    return checks, rows


def run_integral_tests(H_family, n_max: int = 20_000) -> ExperimentReport:
    """Dynamical, static and sum-test classifications for ``(label, envelope)`` pairs.

    The sum test must agree with the dynamical integral test.
    """
    family = list(H_family)
    t0 = time.perf_counter()
    checks, rows = _classify_family(family, erdos_sequence(n_max))
    config = {"family": [lbl for lbl, _ in family], "n_max": n_max}
    return ExperimentReport("integral-test", config, 0, [], checks, {"classification": rows},
                            time.perf_counter() - t0)


def run_erdos_suite(H_family=None, n_max: int = 20_000, M: int = 10**5, seed: int = 0, *,
                    cap: int = 10**4, H_mc: GrowthEnvelope | None = None,
                    ratio_low: float = 1e-2, slack_low: float = DEFAULT_SLACK[0],
                    q_indices: Sequence[int] = (5, 8, 10, 20, 50, 100, 200, 500, 1000),
                    workers: int = 1, shard_size: int = DEFAULT_SHARD) -> ExperimentReport:
    """Classifications, localization ratios and the pair-correlation table.

    ``H_family`` is a list of ``(label, envelope)``.  For each, the dynamical
    integral test, the static test and the sum test along the Erdős sequence
    are run; the sum test must agree with the dynamical test.  The Monte
    Carlo part samples ``S*_j = sup_t S_{e_j}(t)`` for all ``e_j <= cap``
    with one coupled multi-level path per sample, and checks
    ``P{S*_j in I_j} / P{S*_j >= H_j sqrt(e_j)}`` against
    ``[slack_low ratio_low, 1]`` with ``I_j = [H_j, H_j + 14 / H_j] sqrt(e_j)``.
    """
    _check_count(M)
    family = default_family() if H_family is None else list(H_family)
    H_mc = GrowthEnvelope.scaled_lil(1.0, clamped=True) if H_mc is None else H_mc
    seq = erdos_sequence(n_max)
    t0 = time.perf_counter()

    checks, cls_rows = _classify_family(family, seq)

    J = seq.largest_index_below(cap)
    levels = np.arange(1, J + 1)
    e_vals = np.array([seq[j] for j in levels], dtype=np.int64)
    h = np.array([H_mc.at_log(math.log(e)) for e in e_vals], dtype=float)
    root = np.sqrt(e_vals.astype(float))
    lo = h * root
    hi = (h + 14.0 / h) * root
    tasks = [(e_vals, lo, hi, seed, i, c) for i, c in enumerate(shard_sizes(M, shard_size))]
    above = np.zeros(J, dtype=np.int64)
    inside = np.zeros(J, dtype=np.int64)
    first = None
    for a, i, f in _map_shards(_erdos_shard, tasks, workers):
        above += a
        inside += i
        first = f if first is None else first
    counter = HitCounter(levels, e_vals, inside, above, M, first)

    bands, ratio_rows = [], []
    for k, j in enumerate(levels):
        est = Estimate(int(inside[k]), int(above[k]), seed, ("erdos_ratio", int(j), int(e_vals[k])))
        bands.append(make_band(f"j={j} e_j={e_vals[k]}", est, (slack_low * ratio_low, 1.0)))
        ratio_rows.append({"j": j, "e_j": e_vals[k], "H_j": h[k], "p_above": above[k] / M,
                           "p_inside": inside[k] / M, "ratio": est.p_hat,
                           "mean_partial_count": counter.mean_partial_counts[k]})

    qrows = q_table(H_mc, seq, q_indices)
    config = {"family": [lbl for lbl, _ in family], "n_max": n_max, "M": M, "cap": cap,
              "H_mc": [H_mc.variant, H_mc.param, H_mc.clamped], "ratio_low": ratio_low,
              "slack_low": slack_low, "q_indices": list(q_indices), "shard_size": shard_size}
    tables = {"classification": cls_rows, "localization": ratio_rows, "q_table": qrows,
              "q_decay": _decay_slopes(qrows)}
    rep = ExperimentReport("erdos-suite", config, seed, bands, checks, tables,
                           time.perf_counter() - t0)
    rep.hit_counter = counter
    return rep


# ---------------------------------------------------------------------------
# Occupation-time moments and the Paley-Zygmund bound
# ---------------------------------------------------------------------------


def _pz_shard(task):
    log, level, master, shard, count = task
    seeds = sample_seeds(master, (PZ_TAG, log.seed or 0, shard), count)
    return quenched_outputs(log, seeds, "sup_occupation", level=level)


def paley_zygmund_check(log: ClockEventLog, n: int, z: float, M: int, seed: int = 0, *,
                        alpha: float = 0.5, workers: int = 1,
                        shard_size: int = DEFAULT_SHARD) -> ExperimentReport:
    """Quenched moments of the occupation time ``J = |{v : S_n(v) >= z sqrt(n)}|``.

    Checks, each at 4 standard errors: ``E J = normal_sf(z)``;
    ``P{J > 0} >= (E J)^2 / E J^2``; and, when the log lies in the good
    event (uniform deviation at most ``alpha`` over windows of length
    ``1 / (16 z^2)``), ``E J^2 <= 9 normal_sf(z) / z^2``.  ``J > 0`` must
    coincide with ``sup S_n >= z sqrt(n)`` path by path.
    """
    if log.n != n:
        raise DomainError("log was sampled for a different n")
    _check_count(M)
    t0 = time.perf_counter()
    level = z * math.sqrt(n)
    tasks = [(log, level, seed, i, c) for i, c in enumerate(shard_sizes(M, shard_size))]
    out = np.concatenate(_map_shards(_pz_shard, tasks, workers))
    sup, occ = out[:, 0], out[:, 1]
    target = float(normal_sf(z))

    m1 = occ.mean()
    m2 = (occ**2).mean()
    hit = occ > 0
    p_pos = hit.mean()
    se1 = occ.std(ddof=1) / math.sqrt(M) if M > 1 else math.inf
    se2 = (occ**2).std(ddof=1) / math.sqrt(M) if M > 1 else math.inf
    checks = []
    if se1 > 0:
        checks.append(make_check("mean_occupation_z", (m1 - target) / se1, -4.0, 4.0,
                                 f"E J={m1:.6g} target={target:.6g}"))
    else:
        checks.append(make_check("mean_occupation_z", 0.0, -4.0, 4.0,
                                 f"no hits; target={target:.3g}"))
    if m2 > 0:
        ratio = m1 * m1 / m2
        cov = np.cov(occ, occ**2)
        grad = np.array([2 * m1 / m2, -m1 * m1 / m2**2])
        se_ratio = math.sqrt(max(float(grad @ cov @ grad), 0.0) / M)
        se_p = math.sqrt(p_pos * (1 - p_pos) / M)
        slack = 4 * math.hypot(se_ratio, se_p)
    else:
        ratio, slack = 0.0, 0.0
    checks.append(make_check("paley_zygmund", p_pos - ratio, -slack, math.inf,
                             f"P(J>0)={p_pos:.6g} bound={ratio:.6g}"))
    mismatch = int(np.count_nonzero(hit != (sup >= level)))
    checks.append(make_check("occupation_sup_equivalence", mismatch, 0, 0))

    delta = 1.0 / (16 * z * z)
    good = delta <= 1 and uniform_deviation(log, delta, "grid", alpha=alpha).value <= alpha
    if good:
        checks.append(make_check("second_moment", m2, 0.0, 9 * target / (z * z) + 4 * se2))
    est = Estimate(int(hit.sum()), M, seed, ("pz_hit", n, z, log.seed))
    config = {"n": n, "z": z, "clock_seed": log.seed, "M": M, "alpha": alpha,
              "shard_size": shard_size}
    tables = {"moments": [{"E_J": m1, "E_J2": m2, "P_J_pos": p_pos, "pz_bound": ratio,
                           "target_E_J": target, "good_event": bool(good), "window": delta,
                           "se_E_J": se1, "se_E_J2": se2}]}
    bands = [make_band("P(J>0)", est, (ratio - slack if m2 > 0 else 0.0, 1.0))]
    return ExperimentReport("pz-check", config, seed, bands, checks, tables,
                            time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Reflection inequality
# ---------------------------------------------------------------------------


def _reflect_shard(task):
    n, master, shard, count = task
    seeds = sample_seeds(master, (REFLECT_TAG, shard), 2 * count)
    out = np.empty((count, 2))
    for m in range(count):
        log = sample_clocks(n, 1.0, int(seeds[2 * m]))
        x0, repl = path_deviates(n, len(log), int(seeds[2 * m + 1]))
        out[m, 0] = kern.running_max_tree(x0, log.coords, repl)
        out[m, 1] = kern.path_sup_only(x0, log.coords, repl, RESUM_EVERY)
    return out


def reflection_check(n: int, lambdas: Sequence[float] = (1.5, 2.0, 2.5), reps: int = 6000,
                     seed: int = 0, *, workers: int = 1, shard_size: int = 2000
                     ) -> ExperimentReport:
    """``P{sup_t max_k S_k(t) >= l sqrt(n)} <= 2 P{sup_t S_n(t) >= l sqrt(n)}``.

    Both sides come from the same paths; the check is one-sided at 4
    standard errors of the paired difference.
    """
    _check_count(reps, "reps")
    t0 = time.perf_counter()
    tasks = [(n, seed, i, c) for i, c in enumerate(shard_sizes(reps, shard_size))]
    out = np.concatenate(_map_shards(_reflect_shard, tasks, workers))
    checks, rows = [], []
    for lam in lambdas:
        lv = lam * math.sqrt(n)
        a = out[:, 0] >= lv
        b = out[:, 1] >= lv
        d = a.astype(float) - 2 * b
        se = d.std(ddof=1) / math.sqrt(reps) if reps > 1 else math.inf
        checks.append(make_check(f"reflection lambda={lam}", d.mean(), -math.inf, 4 * se))
        rows.append({"lambda": lam, "p_running_max": a.mean(), "p_sup": b.mean()})
    config = {"n": n, "lambdas": list(lambdas), "reps": reps, "shard_size": shard_size}
    return ExperimentReport("reflection", config, seed, [], checks, {"reflection": rows},
                            time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# OU tail
# ---------------------------------------------------------------------------


def run_ou_tail(z: float, h: float = 1e-3, M: int = 10**5, seed: int = 0, *,
                K: float = 10.0, halving: bool = True, allow_rare: bool = False
                ) -> ExperimentReport:
    """OU sup-tail estimate against ``[f(z) / K, K f(z)]`` with the step-halving diagnostic."""
    if z < 1:
        raise DomainError("z must be >= 1")
    if K < 1:
        raise DomainError("K must be >= 1")
    _rare_guard(z, M, allow_rare)
    t0 = time.perf_counter()
    est = ou_sup_tail(z, h, M, seed)
    f = tail_f(z)
    bands = [make_band(f"z={z}", est, (f / K, min(1.0, K * f)))]
    checks = []
    tables = {"ou": [{"z": z, "h": h, "p_hat": est.p_hat, "f": f,
                      "implied_K": implied_mountford_constant(est.p_hat, z)}]}
    if halving:
        d = ou_halving_diagnostic(z, h, M, seed + 1)
        checks.append(Check("halving_shift", abs(d.shift), 0.0, d.radius,
                            PASS if d.passed else FAIL,
                            f"hits {d.hits_coarse} -> {d.hits_fine} at h/2"))
    config = {"z": z, "h": h, "M": M, "K": K, "halving": halving}
    return ExperimentReport("ou-tail", config, seed, bands, checks, tables,
                            time.perf_counter() - t0)
