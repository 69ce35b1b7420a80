"""Rising moments, mean and variance of the completion time T.

Two independent routes are provided:

* ``rising_moment_exact`` evaluates the finite inclusion-exclusion
  (rational) formula over nonempty coupon subsets;
* ``rising_moment_quadrature`` integrates the Poissonized survival function
  ``1 - prod_j F_m(p_j t)`` against ``r t^{r-1}``.

Both return E[T (T+1) ... (T+r-1)], which equals the r-th ordinary moment of
the Poissonized completion time X.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate
from scipy.optimize import brentq
from scipy.special import gammaln, polygamma, digamma

from . import gamma_kernel as gk
from .errors import CancellationWarning, QuadratureNonConvergence, TooLarge
from .models import CollectorModel

MAX_TERMS = 10**8
MAX_RISING_ORDER = 6
EXACT_MAX_N = 12
QUAD_RTOL = 1e-10
_EPS = float(np.finfo(float).eps)


class Method(str, Enum):
    EXACT_IE = "exact_ie"
    QUADRATURE = "quadrature"
    CLOSED_FORM_UNIFORM_M1 = "closed_form_uniform_m1"


@dataclass(frozen=True)
class MomentReport:
    mean: float
    rising2: float
    var_T: float
    var_X: float
    method: Method
    abs_err_estimate: float
    closed_form_var_T: float | None = None

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "rising2": self.rising2,
            "var_T": self.var_T,
            "var_X": self.var_X,
            "method": self.method.value,
            "abs_err_estimate": self.abs_err_estimate,
            "closed_form_var_T": self.closed_form_var_T,
        }


def _check_order(r: int) -> int:
    if int(r) != r or not 1 <= r <= MAX_RISING_ORDER:
        raise ValueError(f"rising order r must be an integer in 1..{MAX_RISING_ORDER}")
    return int(r)


def term_count(n: int, m: int) -> int:
    """Number of (subset, multi-index) pairs, i.e. (1+m)^N including the empty set."""
    return (1 + m) ** n


def subset_rising_moments(rates, m: int, orders) -> list[tuple[float, float]]:
    """Inclusion-exclusion moments of the maximum of Gamma(m, rate_i) clocks.

    ``rates`` need not sum to one.  For each order r this returns
    ``(E max^r, abs_err_estimate)``.  For a fixed subset A the inner sum over
    multi-indices is collapsed by convolving the per-coupon polynomials
    sum_{a<m} (rate_i t)^a / a!; the subset polynomials are built
    incrementally over bitmasks.  Rates are sorted first so the result does
    not depend on coupon order.
    """
    rates = np.sort(np.asarray(rates, dtype=float))
    n = rates.size
    m = gk.check_shape(m)
    if term_count(n, m) > MAX_TERMS:
        raise TooLarge(f"(1+m)^N = {term_count(n, m)} exceeds the guard {MAX_TERMS}")
    deg = (m - 1) * n
    size = 1 << n
    poly = np.zeros((size, deg + 1))
    poly[0, 0] = 1.0
    mass = np.zeros(size)
    popcount = np.zeros(size, dtype=np.int64)
    inv_fact = np.array([1.0 / math.factorial(a) for a in range(m)])
    for i, rate in enumerate(rates):
        lo = 1 << i
        base = poly[:lo]
        block = np.zeros((lo, deg + 1))
        for a in range(m):
            block[:, a:] += base[:, : deg + 1 - a] * (rate**a * inv_fact[a])
        poly[lo : 2 * lo] = block
        mass[lo : 2 * lo] = mass[:lo] + rate
        popcount[lo : 2 * lo] = popcount[:lo] + 1

    poly, mass, popcount = poly[1:], mass[1:], popcount[1:]
    sign = np.where(popcount % 2 == 1, 1.0, -1.0)
    log_mass = np.log(mass)
    k = np.arange(deg + 1, dtype=float)
    with np.errstate(divide="ignore"):
        log_poly = np.log(poly)
    results = []
    for r in orders:
        r = _check_order(r)
        # c_k (k+r-1)! / p_A^(k+r), assembled in log space
        log_terms = log_poly + gammaln(k + r)[None, :] - (k[None, :] + r) * log_mass[:, None]
        terms = r * np.exp(log_terms).sum(axis=1)
        total = math.fsum((sign * terms).tolist())
        gross = math.fsum(terms.tolist())
        err = _EPS * (4.0 * (deg + n + r) + 8.0) * gross
        results.append((total, err))
    return results


def rising_moment_exact(model: CollectorModel, r: int, *, with_error: bool = False):
    """E[T^{(r)}] from the finite inclusion-exclusion formula.

    Emits ``CancellationWarning`` if the estimated relative error of the
    alternating sum exceeds 1e-6; the value is still returned.
    """
    ((value, err),) = subset_rising_moments(model.p.p, model.m, [r])
    _warn_cancellation(value, err)
    return (value, err) if with_error else value


def _warn_cancellation(value: float, err: float) -> None:
    if err > 1e-6 * abs(value):
        warnings.warn(
            f"inclusion-exclusion relative error estimate {err / abs(value):.2e} exceeds 1e-6",
            CancellationWarning,
            stacklevel=3,
        )


# ---------------------------------------------------------------------------
# quadrature route


class _Survival:
    """P(X > t) for the Poissonized model, grouping equal probabilities."""

    def __init__(self, rates: np.ndarray, counts: np.ndarray, m: int):
        self.rates = rates
        self.counts = counts
        self.m = m

    @classmethod
    def from_model(cls, model: CollectorModel) -> "_Survival":
        vals, counts = model.p.grouped()
        return cls(vals, counts, model.m)

    def log_cdf(self, t: float) -> float:
        return float(np.dot(self.counts, gk.log_F(self.m, self.rates * t)))

    def __call__(self, t: float) -> float:
        if t <= 0.0:
            return 1.0
        return -math.expm1(self.log_cdf(t))

    def defect_mass(self, t: float) -> float:
        return float(np.dot(self.counts, np.exp(gk.log_Q(self.m, self.rates * t))))

    def log_defect_mass(self, t: float) -> float:
        lq = np.asarray(gk.log_Q(self.m, self.rates * t)) + np.log(self.counts)
        top = lq.max()
        return float(top + np.log(np.exp(lq - top).sum()))

    def time_at_mass(self, level: float) -> float:
        """Time t at which sum_j Q_m(p_j t) equals ``level`` (< total count)."""
        if level >= self.counts.sum():
            return 0.0
        target = math.log(level)
        hi = 1.0 / self.rates.min()
        while self.log_defect_mass(hi) > target:
            hi *= 2.0
        lo = hi / 2.0
        while lo > 0 and self.log_defect_mass(lo) < target:
            lo /= 2.0
        return brentq(lambda t: self.log_defect_mass(t) - target, lo, hi, xtol=1e-12 * hi, rtol=1e-14)

    def tail_bound(self, r: int, t: float) -> float:
        """Bound on r * int_t^inf s^{r-1} P(X > s) ds using P(X > s) <= sum_j Q_m(p_j s)."""
        total = 0.0
        for a in range(self.m):
            coef = math.exp(math.lgamma(a + r) - math.lgamma(a + 1))
            q = np.exp(gk.log_Q(a + r, self.rates * t))
            total += coef * float(np.dot(self.counts, q * self.rates ** (-float(r))))
        return r * total


def _quad_pieces(fun, edges, rtol):
    value = 0.0
    err = 0.0
    converged = True
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            v, e, info = integrate.quad(fun, lo, hi, epsabs=0.0, epsrel=rtol * 1e-2, limit=400, full_output=1)[:3]
        value += v
        err += e
    if err > rtol * abs(value):
        converged = False
    return value, err, converged


def survival_integral(survival, r: int, *, rtol: float = QUAD_RTOL, scale_hint: float | None = None):
    """r * int_0^inf t^{r-1} S(t) dt for a survival object with the ``_Survival`` interface.

    The range is split at the times where the expected defect count equals
    1 and 1e-3, and truncated at T_hi where it drops below 1e-16; the
    certified remainder bound is folded into the error estimate.
    """
    t_one = survival.time_at_mass(1.0)
    t_hi = survival.time_at_mass(1e-16)
    t_mid = survival.time_at_mass(1e-3)
    edges = sorted({0.0, 0.25 * t_one, 0.5 * t_one, 0.75 * t_one, t_one, t_mid, t_hi})

    def integrand(t: float) -> float:
        return r * t ** (r - 1) * survival(t)

    value, err, ok = _quad_pieces(integrand, edges, rtol)
    err += survival.tail_bound(r, t_hi)
    if not ok or err > rtol * abs(value):
        warnings.warn(
            f"quadrature error estimate {err:.3e} exceeds target {rtol * abs(value):.3e}",
            QuadratureNonConvergence,
            stacklevel=2,
        )
    return value, err


def rising_moment_quadrature(model: CollectorModel, r: int) -> tuple[float, float]:
    """E[T^{(r)}] = r * int_0^inf t^{r-1} [1 - prod_j F_m(p_j t)] dt, with error estimate."""
    r = _check_order(r)
    return survival_integral(_Survival.from_model(model), r)


# ---------------------------------------------------------------------------
# closed form and the combined report


def harmonic(n: int, order: int = 1) -> float:
    """Generalised harmonic number H_n^{(order)} for order 1 or 2."""
    if order == 1:
        return float(digamma(n + 1.0) + np.euler_gamma)
    if order == 2:
        return float(math.pi**2 / 6.0 - polygamma(1, n + 1.0))
    raise ValueError("only orders 1 and 2 are supported")


def uniform_m1_closed_form(n: int) -> tuple[float, float]:
    """(E T, Var T) for the classical collector with N equal coupons."""
    h1 = harmonic(n, 1)
    h2 = harmonic(n, 2)
    return n * h1, n * n * h2 - n * h1


def _report(mean, mean_err, rising2, rising2_err, method, closed=None) -> MomentReport:
    var_t = rising2 - mean - mean * mean
    err = rising2_err + (1.0 + 2.0 * abs(mean)) * mean_err + 4.0 * _EPS * abs(rising2)
    return MomentReport(
        mean=mean,
        rising2=rising2,
        var_T=var_t,
        var_X=var_t + mean,
        method=method,
        abs_err_estimate=err,
        closed_form_var_T=closed,
    )


def mean_variance(model: CollectorModel, method: str | Method = "auto") -> MomentReport:
    """Mean, second rising moment and variances of T (and of its Poissonization X).

    ``method="auto"`` uses exact inclusion-exclusion up to N = 12, the
    closed form for the uniform m = 1 collector beyond that, and quadrature
    otherwise.
    """
    uniform_m1 = model.m == 1 and model.p.is_uniform()
    closed = uniform_m1_closed_form(model.n)[1] if uniform_m1 else None
    if method == "auto":
        if model.n <= EXACT_MAX_N and term_count(model.n, model.m) <= MAX_TERMS:
            method = Method.EXACT_IE
        elif uniform_m1:
            method = Method.CLOSED_FORM_UNIFORM_M1
        else:
            method = Method.QUADRATURE
    method = Method(method)

    if method is Method.EXACT_IE:
        (m1, e1), (m2, e2) = subset_rising_moments(model.p.p, model.m, [1, 2])
        _warn_cancellation(m1, e1)
        _warn_cancellation(m2, e2)
    elif method is Method.QUADRATURE:
        surv = _Survival.from_model(model)
        m1, e1 = survival_integral(surv, 1)
        m2, e2 = survival_integral(surv, 2)
    else:
        if not uniform_m1:
            raise ValueError("closed form applies only to the uniform m=1 model")
        mean, var_t = uniform_m1_closed_form(model.n)
        m1, e1 = mean, 4.0 * _EPS * mean
        m2, e2 = var_t + mean + mean * mean, 8.0 * _EPS * (var_t + mean * mean)
    return _report(m1, e1, m2, e2, method, closed)
