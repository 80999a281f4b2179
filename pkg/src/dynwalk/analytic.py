"""Scalar Gaussian-tail mathematics, closed-form bounds, and the integral test.

Everything here is a pure function of its arguments.  Probability-valued
bounds are clamped to ``[0, 1]`` by default; pass ``clamp=False`` to get the
raw value, which is often far above one at desk-scale parameters.

Logarithms follow the convention ``log x = ln(max(e, x))`` wherever iterated
logarithms of growth envelopes or Erdős indices appear.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

SQRT_2PI = math.sqrt(2.0 * math.pi)
_INT64_MAX = np.iinfo(np.int64).max
_U_TINY = 2.0**-54


class DomainError(ValueError):
    """An argument lies outside the domain of the requested quantity."""


class BandRegimeWarning(UserWarning):
    """A tail band was requested outside its asymptotic regime (z < 1)."""


# ---------------------------------------------------------------------------
# Gaussian tail
# ---------------------------------------------------------------------------


def _check_finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {x!r}")
    return arr


def normal_sf(x):
    """Standard normal upper tail ``P{Z >= x}``.

    Computed from the complementary error function, so the relative error
    stays at machine level deep into the tail.  Values underflow to 0 past
    ``x ~ 38.5``; use :func:`log_normal_sf` there.
    """
    arr = _check_finite(x)
    out = special.ndtr(-arr)
    return float(out) if out.ndim == 0 else out


def log_normal_sf(x):
    """Natural log of :func:`normal_sf`, finite for every finite ``x``."""
    arr = _check_finite(x)
    out = special.log_ndtr(-arr)
    return float(out) if out.ndim == 0 else out


def normal_pdf(x):
    arr = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * arr * arr) / SQRT_2PI
    return float(out) if out.ndim == 0 else out


def mills_asymptotic(z):
    """Leading Mills approximation ``exp(-z^2/2) / (z sqrt(2 pi))`` of the tail.

    It dominates ``normal_sf(z)`` for every ``z > 0`` and the ratio tends to 1.
    """
    arr = _check_finite(z, "z")
    if np.any(arr <= 0):
        raise DomainError("mills_asymptotic needs z > 0")
    out = np.exp(-0.5 * arr * arr) / (arr * SQRT_2PI)
    return float(out) if out.ndim == 0 else out


def normal_deviates(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal deviates by inversion of the normal CDF.

    One uniform is consumed per deviate, in order, which is what makes the
    walk simulators bit-comparable with their brute-force oracle.
    """
    u = rng.random(size)
    np.maximum(u, _U_TINY, out=u)
    return special.ndtri(u)


def tail_f(z):
    """``f(z) = z^2 * normal_sf(z)``, the shape of the supremum tail."""
    arr = _check_finite(z, "z")
    if np.any(arr <= 0):
        raise DomainError("tail_f needs z > 0")
    out = arr * arr * special.ndtr(-arr)
    return float(out) if out.ndim == 0 else out


def _f_any(z: float) -> float:
    # f on the whole real line; above 1/2 of the mass when z < 0.
    return z * z * float(special.ndtr(-z))


def phibar_sqrt_integral(upper: float = math.inf) -> float:
    """``int_0^upper normal_sf(sqrt(t)) dt``; equals 1/2 when ``upper`` is infinite."""
    if upper < 0:
        raise DomainError("upper limit must be nonnegative")
    # substitute t = y^2 so the integrand is smooth at the origin
    ymax = math.sqrt(upper) if math.isfinite(upper) else math.inf
    val, _ = integrate.quad(lambda y: 2.0 * y * special.ndtr(-y), 0.0, ymax,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


# ---------------------------------------------------------------------------
# Tail bands
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailBand:
    """Two-sided envelope ``[lower_coeff * f(z), upper_coeff * f(z)]`` with slack.

    The default coefficients 1/9 and 2 are the asymptotic constants for the
    dynamical walk.  ``slack_low`` and ``slack_high`` make the ``(1 + o(1))``
    factors explicit.
    """

    lower_coeff: float = 1.0 / 9.0
    upper_coeff: float = 2.0
    slack_low: float = 1.0
    slack_high: float = 1.0

    def __post_init__(self):
        if not 0 < self.lower_coeff < self.upper_coeff:
            raise DomainError("need 0 < lower_coeff < upper_coeff")
        if not 0 < self.slack_low <= 1 <= self.slack_high:
            raise DomainError("need 0 < slack_low <= 1 <= slack_high")


def tail_band(z: float, band: TailBand = TailBand()) -> tuple[float, float]:
    if z < 1:
        warnings.warn(f"tail band at z={z} < 1 is outside its regime", BandRegimeWarning,
                      stacklevel=2)
    fz = tail_f(z)
    low = band.slack_low * band.lower_coeff * fz
    high = min(1.0, band.slack_high * band.upper_coeff * fz)
    return low, high


# ---------------------------------------------------------------------------
# Concentration and Chernoff bounds
# ---------------------------------------------------------------------------


def _finish(log_raw: float, clamp: bool) -> float:
    if clamp:
        return 1.0 if log_raw >= 0 else math.exp(log_raw)
    return math.exp(log_raw) if log_raw < 709 else math.inf


def bernstein_bound(n: int, p: float, lam: float, clamp: bool = True) -> float:
    """Bernstein bound ``2 exp(-n lam^2 / (2p + 2 lam / 3))`` on a binomial deviation."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if not 0 <= p <= 1:
        raise DomainError("p must lie in [0, 1]")
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    if lam == 0:
        return _finish(math.log(2.0), clamp)
    return _finish(math.log(2.0) - n * lam * lam / (2 * p + 2 * lam / 3), clamp)


def clock_uniform_bound(n: int, delta: float, alpha: float, clamp: bool = True) -> float:
    """Bound on the chance that some window of length >= delta has
    ``|N / EN - 1| >= alpha``: ``512/(alpha delta)^2 * exp(-3 alpha^3 n delta / 2304)``.
    """
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    if not 0 < delta <= 1:
        raise DomainError("delta must lie in (0, 1]")
    log_raw = math.log(512.0) - 2 * math.log(alpha * delta) - 3 * alpha**3 * n * delta / 2304
    return _finish(log_raw, clamp)


def poisson_chernoff(n: float, x: float, clamp: bool = True) -> float:
    """Chernoff bound ``exp(-n - x ln(x / (e n)))`` on ``P{Poisson(n) >= x}``."""
    if n <= 0 or x <= 0:
        raise DomainError("poisson_chernoff needs n > 0 and x > 0")
    return _finish(-n - x * math.log(x / (math.e * n)), clamp)


def phibar_shift_upper(z: float, eps: float) -> float:
    """Dominates ``normal_sf(z + eps z)``: returns ``exp(-z^2 eps) normal_sf(z)``."""
    if z < 1 or eps < 0 or not math.isfinite(eps):
        raise DomainError("need z >= 1 and eps >= 0")
    return math.exp(-z * z * eps) * normal_sf(z)


def phibar_shift_lower(z: float, gamma: float) -> float:
    """Dominates ``normal_sf(z - gamma / z)``: returns ``(1 + e^{2 gamma}) normal_sf(z)``."""
    if gamma <= 0:
        raise DomainError("gamma must be > 0")
    if z < math.sqrt(gamma):
        raise DomainError("need z >= sqrt(gamma)")
    return (1.0 + math.exp(2 * gamma)) * normal_sf(z)


# ---------------------------------------------------------------------------
# Iterated logarithms, growth envelopes
# ---------------------------------------------------------------------------


def log_e(x):
    """``ln(max(e, x))``."""
    arr = np.asarray(x, dtype=float)
    out = np.log(np.maximum(arr, math.e))
    return float(out) if out.ndim == 0 else out


def loglog_from_log(u):
    """``log log t`` given ``u = ln t`` (safe for astronomically large t)."""
    u = np.asarray(u, dtype=float)
    out = np.log(np.maximum(np.maximum(u, 1.0), math.e))
    return float(out) if out.ndim == 0 else out


def logloglog_from_log(u):
    out = np.log(np.maximum(loglog_from_log(u), math.e))
    return float(out) if np.ndim(out) == 0 else out


_VARIANTS = ("scaled_lil", "corollary", "tabulated")


@dataclass(frozen=True)
class GrowthEnvelope:
    """A nondecreasing growth function ``H`` on ``[1, inf)``.

    Use the constructors :meth:`scaled_lil`, :meth:`corollary` and
    :meth:`tabulated`.  Evaluation goes through ``u = ln t`` so that
    envelopes can be probed at ``t`` far beyond floating-point range.
    """

    variant: str
    param: float = math.nan
    table_log_t: tuple = ()
    table_h: tuple = ()
    clamped: bool = False

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise DomainError(f"unknown variant {self.variant!r}")
        if self.variant == "tabulated":
            lt = np.asarray(self.table_log_t, dtype=float)
            h = np.asarray(self.table_h, dtype=float)
            if lt.size < 2 or lt.shape != h.shape:
                raise DomainError("tabulated envelope needs >= 2 matching (t, H) pairs")
            if np.any(np.diff(lt) <= 0):
                raise DomainError("tabulated t values must be strictly increasing")
            if np.any(np.diff(h) < 0) or np.any(h < 0):
                raise DomainError("tabulated H must be nonnegative and nondecreasing")
            if lt[0] < 0:
                raise DomainError("tabulated t values must be >= 1")
        elif self.variant == "scaled_lil" and not self.param > 0:
            raise DomainError("scaled_lil needs c > 0")

    @classmethod
    def scaled_lil(cls, c: float, clamped: bool = False) -> "GrowthEnvelope":
        """``H(t) = c sqrt(2 log log t)``."""
        return cls("scaled_lil", float(c), clamped=clamped)

    @classmethod
    def corollary(cls, a: float, clamped: bool = False) -> "GrowthEnvelope":
        """``H(t) = sqrt(2 log log t + a log log log t)``."""
        return cls("corollary", float(a), clamped=clamped)

    @classmethod
    def tabulated(cls, t: Sequence[float], h: Sequence[float],
                  clamped: bool = False) -> "GrowthEnvelope":
        """Piecewise-linear in ``ln t`` through sorted ``(t, H(t))`` pairs."""
        return cls.tabulated_log(np.log(np.asarray(t, dtype=float)), h, clamped)

    @classmethod
    def tabulated_log(cls, log_t: Sequence[float], h: Sequence[float],
                      clamped: bool = False) -> "GrowthEnvelope":
        """Same as :meth:`tabulated` but keyed by ``ln t``, for ``t`` past float range."""
        return cls("tabulated", table_log_t=tuple(float(v) for v in log_t),
                   table_h=tuple(float(v) for v in h), clamped=clamped)

    def with_clamp(self, clamped: bool = True) -> "GrowthEnvelope":
        return GrowthEnvelope(self.variant, self.param, self.table_log_t, self.table_h, clamped)

    @property
    def max_log_t(self) -> float:
        """Largest ``ln t`` at which the envelope is defined."""
        return self.table_log_t[-1] if self.variant == "tabulated" else math.inf

    def at_log(self, u):
        """Evaluate ``H(e^u)``; NaN beyond the range of a tabulated envelope."""
        u = np.asarray(u, dtype=float)
        ll = loglog_from_log(u)
        if self.variant == "scaled_lil":
            h = self.param * np.sqrt(2.0 * ll)
        elif self.variant == "corollary":
            h = np.sqrt(np.maximum(2.0 * ll + self.param * logloglog_from_log(u), 0.0))
        else:
            lt = np.asarray(self.table_log_t)
            h = np.interp(u, lt, np.asarray(self.table_h))
            h = np.where(u > lt[-1], np.nan, h)
        if self.clamped:
            root = np.sqrt(ll)
            h = np.clip(h, root, 2.0 * root)
        return float(h) if np.ndim(h) == 0 else h

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 1):
            raise DomainError("growth envelopes are defined on t >= 1")
        return self.at_log(np.log(t))


# ---------------------------------------------------------------------------
# Erdős sequence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErdosSequence:
    """``e_n = floor(exp(n / log n))`` for ``1 <= n <= n_max`` (1-based).

    ``log_values`` holds ``ln e_n`` for every index.  Exact integers are kept
    for the indices whose value fits in a signed 64-bit integer; asking for
    an exact value past that raises :class:`OverflowError`.
    """

    n_max: int
    log_values: np.ndarray = field(repr=False)
    exact: tuple = field(repr=False)

    def __len__(self):
        return self.n_max

    def _check(self, n: int):
        if not 1 <= n <= self.n_max:
            raise IndexError(f"index {n} outside 1..{self.n_max}")

    def __getitem__(self, n: int) -> int:
        self._check(n)
        if n > len(self.exact):
            raise OverflowError(f"e_{n} exceeds the signed 64-bit integer range")
        return self.exact[n - 1]

    def log_value(self, n: int) -> float:
        self._check(n)
        return float(self.log_values[n - 1])

    @property
    def values(self) -> np.ndarray:
        if len(self.exact) < self.n_max:
            raise OverflowError(
                f"e_n exceeds the signed 64-bit range beyond n = {len(self.exact)}")
        return np.array(self.exact, dtype=np.int64)

    def largest_index_below(self, cap: int) -> int:
        """Largest ``j`` with ``e_j <= cap`` (0 if none)."""
        j = 0
        for k, v in enumerate(self.exact, start=1):
            if v > cap:
                break
            j = k
        return j


def erdos_sequence(n_max: int) -> ErdosSequence:
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    n = np.arange(1, n_max + 1, dtype=float)
    x = n / log_e(n)
    log_values = x.copy()
    exact = []
    limit = math.log(_INT64_MAX)
    with localcontext() as ctx:
        ctx.prec = 60
        for k in range(1, n_max + 1):
            if x[k - 1] > limit + 1:
                break
            dk = Decimal(k)
            lg = Decimal(1) if k < 3 else dk.ln()
            v = int((dk / lg).exp())  # int() truncates: floor for positives
            if v > _INT64_MAX:
                break
            exact.append(v)
            log_values[k - 1] = math.log(v)
    return ErdosSequence(n_max=n_max, log_values=log_values, exact=tuple(exact))


def gap_ratio(seq: ErdosSequence, n: int) -> float:
    """``(e_{n+1} - e_n) log(n) / e_n``, which tends to 1."""
    if not 1 <= n < seq.n_max:
        raise IndexError(f"gap_ratio needs 1 <= n < {seq.n_max}")
    if n + 1 <= len(seq.exact):
        rel = (seq.exact[n] - seq.exact[n - 1]) / seq.exact[n - 1]
    else:
        rel = math.expm1(seq.log_values[n] - seq.log_values[n - 1])
    return rel * log_e(n)


# ---------------------------------------------------------------------------
# Integral tests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureBudget:
    """Controls for the quadrature fallback and the symbolic partial value.

    Upper limits expand as ``t_k = 10**(2**k)`` for ``k <= max_doublings``;
    a partial integral above ``divergence_threshold`` means Divergent and a
    relative increment below ``rel_tail_tol`` means Finite.
    """

    max_doublings: int = 20
    divergence_threshold: float = 1e3
    rel_tail_tol: float = 1e-9
    w_max: float = 60.0


@dataclass(frozen=True)
class IntegralVerdict:
    classification: str  # "Finite" | "Divergent" | "Inconclusive"
    partial_value: float
    method: str  # "SymbolicTail" | "Quadrature"
    exponents: tuple = ()


def _integrand(kind: str) -> Callable[[np.ndarray], np.ndarray]:
    # g(H) in  int g(H(t)) dt / t
    if kind == "J":
        return lambda h: h**4 * special.ndtr(-h)
    if kind == "equivalent":
        return lambda h: h**3 * np.exp(-0.5 * h * h)
    if kind == "static":
        return lambda h: h * np.exp(-0.5 * h * h)
    raise DomainError(f"unknown integrand kind {kind!r}")


def _h_power(kind: str) -> int:
    # power of H left after the Gaussian tail is replaced by its Mills form
    return 1 if kind == "static" else 3


def _bertrand_exponents(H: GrowthEnvelope, kind: str) -> tuple[float, float, float]:
    """Exponents ``(a1, a2, a3)`` with integrand ~ ``1 / (t L1^a1 L2^a2 L3^a3)``,
    ``Lk`` the k-fold iterated logarithm."""
    k = _h_power(kind)
    if H.variant == "scaled_lil":
        c = H.param
        if H.clamped:
            c = min(max(c, 1 / math.sqrt(2)), math.sqrt(2))
        return (c * c, -k / 2.0, 0.0)
    if H.variant == "corollary":
        return (1.0, (H.param - k) / 2.0, 0.0)
    raise DomainError("symbolic tail analysis needs a parametric envelope")


def _bertrand_converges(exps: Sequence[float]) -> bool:
    for a in exps:
        if not math.isclose(a, 1.0, abs_tol=1e-12):
            return a > 1.0
    return False


def _tail_upper_bound(H: GrowthEnvelope, kind: str, w0: float) -> float:
    """Upper bound of the integral over ``log log t >= w0`` for a convergent
    parametric envelope, in the variable ``w = ln ln t``."""
    k = _h_power(kind)
    if H.variant == "scaled_lil":
        c = H.param
        if H.clamped:
            c = min(max(c, 1 / math.sqrt(2)), math.sqrt(2))
        beta = c * c - 1.0
        # g(H) e^w <= (2 c^2 w)^{k/2} e^{-beta w}   (times 1/sqrt(2 pi) for J)
        pref = (2 * c * c) ** (k / 2)
        s = k / 2 + 1
        tail = pref * special.gammaincc(s, beta * w0) * special.gamma(s) / beta**s
    else:
        a = H.param
        # H^2 = 2w + a ln w <= (2 + |a|/e) w ;  e^{-H^2/2} e^w = w^{-a/2}
        pref = (2 + abs(a) / math.e) ** (k / 2)
        p = (a - k) / 2.0 - 1.0
        tail = pref * w0 ** (-p) / p
    return tail / SQRT_2PI if kind == "J" else tail


def _partial_integral_w(H: GrowthEnvelope, g, w_max: float) -> float:
    """``int_1^{T} g(H(t)) dt/t`` with ``ln ln T = w_max``."""
    # u = ln t in [0, e]: log log t is pinned at 1 there
    head, _ = integrate.quad(lambda u: float(g(H.at_log(u))), 0.0, math.e, limit=200)
    body, _ = integrate.quad(lambda w: float(g(H.at_log(math.exp(w)))) * math.exp(w),
                             1.0, w_max, limit=400, epsabs=0.0, epsrel=1e-10)
    return head + body


def _quadrature_verdict(H: GrowthEnvelope, g, budget: QuadratureBudget) -> IntegralVerdict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return _quadrature_loop(H, g, budget)


def _quadrature_loop(H: GrowthEnvelope, g, budget: QuadratureBudget) -> IntegralVerdict:
    total = 0.0
    prev_u = 0.0
    ln10 = math.log(10.0)
    for k in range(budget.max_doublings + 1):
        u_k = (2.0**k) * ln10
        if u_k > H.max_log_t:
            return IntegralVerdict("Inconclusive", total, "Quadrature")
        if prev_u < math.e:
            lo = prev_u
            hi = min(u_k, math.e)
            piece, _ = integrate.quad(lambda u: float(g(H.at_log(u))), lo, hi, limit=200)
            total_piece = piece
            lo_w = 1.0
        else:
            total_piece = 0.0
            lo_w = math.log(prev_u)
        if u_k > math.e:
            pw, _ = integrate.quad(lambda w: float(g(H.at_log(math.exp(w)))) * math.exp(w),
                                   max(lo_w, 1.0), math.log(u_k), limit=400)
            total_piece += pw
        total += total_piece
        prev_u = u_k
        if total > budget.divergence_threshold:
            return IntegralVerdict("Divergent", total, "Quadrature")
        if k > 0 and total > 0 and total_piece / total < budget.rel_tail_tol:
            return IntegralVerdict("Finite", total, "Quadrature")
    return IntegralVerdict("Inconclusive", total, "Quadrature")


def _classify(H: GrowthEnvelope, kind: str, budget: QuadratureBudget, method: str):
    g = _integrand(kind)
    if method == "auto":
        method = "quadrature" if H.variant == "tabulated" else "symbolic"
    if method == "quadrature":
        return _quadrature_verdict(H, g, budget)
    if method != "symbolic":
        raise DomainError(f"unknown method {method!r}")
    exps = _bertrand_exponents(H, kind)
    partial = _partial_integral_w(H, g, budget.w_max)
    if _bertrand_converges(exps):
        return IntegralVerdict("Finite", float(partial + _tail_upper_bound(H, kind, budget.w_max)),
                               "SymbolicTail", exps)
    return IntegralVerdict("Divergent", partial, "SymbolicTail", exps)


def integral_test(H: GrowthEnvelope, budget: QuadratureBudget = QuadratureBudget(),
                  form: str = "J", method: str = "auto") -> IntegralVerdict:
    """Classify ``int_1^inf H^4(t) normal_sf(H(t)) dt / t`` as Finite or Divergent.

    ``form="equivalent"`` uses the integrand ``H^3 exp(-H^2/2) / t`` instead;
    the two agree in classification.  Parametric envelopes are decided by
    their iterated-logarithm tail exponents; tabulated ones by quadrature
    over expanding upper limits.
    """
    if form not in ("J", "equivalent"):
        raise DomainError("form must be 'J' or 'equivalent'")
    return _classify(H, form, budget, method)


def static_erdos_test(H: GrowthEnvelope, budget: QuadratureBudget = QuadratureBudget(),
                      method: str = "auto") -> IntegralVerdict:
    """Classify ``int_1^inf H(t) exp(-H^2(t)/2) dt / t`` (the fixed-time test)."""
    return _classify(H, "static", budget, method)


@dataclass(frozen=True)
class SumTestResult:
    """Partial sums along the Erdős sequence and their convergence verdict.

    ``tail_exponent`` is the Bertrand exponent ``p`` of the terms, read as
    ``a_n ~ 1 / (n (log n)^p)``; the series converges iff ``p > 1``.
    """

    partial_sums: np.ndarray
    classification: str
    tail_exponent: float


def _log_sum_term(H: GrowthEnvelope, x: np.ndarray) -> np.ndarray:
    # ln of H^2(e_n) normal_sf(H(e_n)) at n = e^x, using ln e_n = n / ln n
    w = x - np.log(x)  # ln ln e_n
    if H.variant == "tabulated":
        h = np.asarray(H.at_log(np.exp(w)), dtype=float)
    else:
        h = _at_loglog(H, w)
    return 2.0 * np.log(h) + special.log_ndtr(-h)


def _at_loglog(H: GrowthEnvelope, w: np.ndarray):
    # evaluate H given w = ln ln t (w >= 1) without forming ln t
    w = np.maximum(np.asarray(w, dtype=float), 1.0)
    if H.variant == "scaled_lil":
        h = H.param * np.sqrt(2.0 * w)
    elif H.variant == "corollary":
        h = np.sqrt(np.maximum(2.0 * w + H.param * np.log(np.maximum(w, math.e)), 0.0))
    else:
        return np.full_like(w, np.nan)
    if H.clamped:
        h = np.clip(h, np.sqrt(w), 2.0 * np.sqrt(w))
    return h


def sum_test(H: GrowthEnvelope, seq: ErdosSequence, n_max: int | None = None,
             margin: float = 0.1, far_log_index: tuple[float, float] = (1e4, 1e6)
             ) -> SumTestResult:
    """Partial sums of ``H^2(e_n) normal_sf(H(e_n))`` along the Erdős sequence.

    The partial sums are returned for ``n <= n_max``.  Convergence is decided
    by the logarithmic (Bertrand) series test on the terms themselves: with
    ``x = ln n`` the exponent ``p = -d ln(n a_n) / d ln x`` is measured between
    the two ``x`` values in ``far_log_index``, where the slowly decaying
    finite-range corrections have died out.  ``p > 1 + margin`` is Finite,
    ``p < 1 - margin`` Divergent, anything else Inconclusive.  Tabulated
    envelopes are probed at the largest ``x`` their table covers.
    """
    n_max = seq.n_max if n_max is None else n_max
    if not 1 <= n_max <= seq.n_max:
        raise DomainError("n_max exceeds the sequence length")
    u = seq.log_values[:n_max]
    h = np.asarray(H.at_log(u), dtype=float)
    sums = np.cumsum(h * h * special.ndtr(-h))
    if np.isfinite(sums[-1]) and sums[-1] < 1e-12:
        return SumTestResult(sums, "Finite", math.inf)

    x1, x2 = far_log_index
    if H.variant == "tabulated":
        # largest x with n / ln n = x - ln x <= ln(max ln t)
        target = math.log(H.max_log_t) if H.max_log_t > 1 else 0.0
        x2 = min(x2, _solve_x_minus_log_x(target))
        x1 = x2 / 100.0
        if x1 < 20.0:
            return SumTestResult(sums, "Inconclusive", math.nan)
    xs = np.array([x1, x2])
    log_terms = _log_sum_term(H, xs)
    if not np.all(np.isfinite(log_terms)):
        return SumTestResult(sums, "Inconclusive", math.nan)
    log_n_a = xs + log_terms
    p = -float((log_n_a[1] - log_n_a[0]) / (math.log(x2) - math.log(x1)))
    if p > 1 + margin:
        verdict = "Finite"
    elif p < 1 - margin:
        verdict = "Divergent"
    else:
        verdict = "Inconclusive"
    return SumTestResult(sums, verdict, p)


def _solve_x_minus_log_x(target: float) -> float:
    # largest-branch solution of x - ln x = target (x >= 1)
    if target <= 1.0:
        return 1.0
    x = target + math.log(target)
    for _ in range(50):
        x = target + math.log(x)
    return x


# ---------------------------------------------------------------------------
# Pair-correlation envelope
# ---------------------------------------------------------------------------


def _ratio_i_over_gap(seq: ErdosSequence, i: int, j: int) -> float:
    # e_i / (e_j - e_i)
    if j <= len(seq.exact):
        return seq.exact[i - 1] / (seq.exact[j - 1] - seq.exact[i - 1])
    d = seq.log_values[j - 1] - seq.log_values[i - 1]
    return 1.0 / math.expm1(d) if d < 700 else 0.0


def q_argument(i: int, j: int, H: GrowthEnvelope, seq: ErdosSequence) -> float:
    """Argument of ``f`` in the pair envelope ``Q_{i,j}``."""
    if not j > i >= 1:
        raise DomainError("q_envelope needs j > i >= 1")
    r = _ratio_i_over_gap(seq, i, j)
    hi = H.at_log(seq.log_value(i))
    hj = H.at_log(seq.log_value(j))
    return hj * math.sqrt(1.0 + r) - hi * math.sqrt(r) - (14.0 / hi) * math.sqrt(r)


def q_envelope(i: int, j: int, H: GrowthEnvelope, seq: ErdosSequence) -> float:
    """``Q_{i,j} = f(H_j sqrt(e_j/(e_j-e_i)) - (H_i + 14/H_i) sqrt(e_i/(e_j-e_i)))``.

    ``f(z) = z^2 normal_sf(z)`` is applied on the whole line, so small index
    pairs can give vacuous values above 1/2.
    """
    return _f_any(q_argument(i, j, H, seq))


def scale_regime(i: int, j: int) -> int:
    """1 for ``j > i + (log i)^10``, 2 for ``j in [i + log i, i + (log i)^10]``,
    3 for ``j in (i, i + log i)``."""
    if not j > i >= 1:
        raise DomainError("need j > i >= 1")
    li = log_e(i)
    if j > i + li**10:
        return 1
    if j >= i + li:
        return 2
    return 3
