"""Erlang (integer-shape gamma) tail kernels in natural and log scale.

Every function takes an integer shape ``m >= 1`` and a scalar or array
argument.  Scalars come back as Python floats, arrays as ``ndarray``.

The survival function

    Q_m(x) = exp(-x) * sum_{j<m} x**j / j!

is evaluated from its finite sum (log-sum-exp, positive terms only) for
moderate ``x`` and from the Legendre continued fraction once
``x > m + 10*sqrt(m)``.  The distribution function F_m = 1 - Q_m uses the
lower-tail power series below ``y = m`` so it never suffers the
cancellation of ``1 - Q_m``.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Union

import numpy as np
from scipy.special import gammaln

ArrayLike = Union[float, np.ndarray]

_TINY = 1e-300
_SERIES_RTOL = 1e-18
_CF_RTOL = 1e-16
_CF_MAXITER = 10_000

# slack used by every "strictly monotone" runtime check in the package
MONOTONE_SLACK = 1e-12


class KernelValue(NamedTuple):
    """A kernel evaluation carried in both natural and log scale."""

    value: ArrayLike
    log_value: ArrayLike


def check_shape(m) -> int:
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise ValueError(f"shape m must be a positive integer, got {m!r}")
    return int(m)


def _as_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _out(arr: np.ndarray, scalar: bool):
    return float(arr[0]) if scalar else arr


def _log_partial_sum(m: int, x: np.ndarray) -> np.ndarray:
    """log sum_{j<m} x**j/j!, normalised by the largest term."""
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    jstar = np.minimum(np.floor(x), m - 1)
    with np.errstate(invalid="ignore"):  # 0 * log(0) in the discarded branch
        lmax = np.where(jstar > 0, jstar * logx - gammaln(jstar + 1), 0.0)
    acc = np.zeros_like(x)
    for j in range(m):
        if j == 0:
            lt = np.zeros_like(x)
        else:
            lt = np.where(x > 0, j * logx - gammaln(j + 1.0), -np.inf)
        acc += np.exp(lt - lmax)
    return lmax + np.log(acc)


def _log_upper_cf(m: int, x: np.ndarray) -> np.ndarray:
    """log of the continued fraction in Gamma(m, x) = e^-x x^m * CF (modified Lentz)."""
    a = float(m)
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for i in range(1, _CF_MAXITER):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(done, h, h * delta)
        done |= np.abs(delta - 1.0) < _CF_RTOL
        if done.all():
            break
    return np.log(h)


def _cf_region(m: int, x: np.ndarray) -> np.ndarray:
    return x > m + 10.0 * math.sqrt(m)


def log_Q(m: int, x) -> ArrayLike:
    """Natural log of the Erlang survival function Q_m(x), x >= 0."""
    m = check_shape(m)
    xa, scalar = _as_array(x)
    if np.any(xa < 0):
        raise ValueError("Q_m is defined for x >= 0")
    out = np.empty_like(xa)
    cf = _cf_region(m, xa)
    # below the mode F is small and accurate, so Q = 1 - F keeps its tiny deficit
    low = xa < m
    if np.any(low):
        out[low] = np.log1p(-np.exp(_log_F_series(m, xa[low])))
    mid = ~cf & ~low
    if np.any(mid):
        xs = xa[mid]
        out[mid] = -xs + _log_partial_sum(m, xs)
    if np.any(cf):
        xc = xa[cf]
        out[cf] = -xc + m * np.log(xc) - gammaln(m) + _log_upper_cf(m, xc)
    return _out(out, scalar)


def log_f(m: int, x) -> ArrayLike:
    """Natural log of the Erlang(m, 1) density."""
    m = check_shape(m)
    xa, scalar = _as_array(x)
    if m == 1:
        out = -xa
    else:
        with np.errstate(divide="ignore"):
            out = -xa + (m - 1) * np.log(xa) - gammaln(m)
    return _out(out, scalar)


def lower_series(m: int, y, *, minus_one: bool = False) -> ArrayLike:
    """S_m(y) = sum_{k>=0} y**k m!/(m+k)!, so that D_m(y) = y**m/m! * S_m(y).

    With ``minus_one=True`` the leading 1 is dropped, giving ``S_m(y) - 1``
    without cancellation.  Intended for ``y`` up to about ``m``; the terms
    stop once the next one falls below 1e-18 of the running sum.
    """
    m = check_shape(m)
    ya, scalar = _as_array(y)
    term = np.ones_like(ya)
    total = np.zeros_like(ya) if minus_one else np.ones_like(ya)
    active = ya > 0
    k = 0
    while active.any():
        k += 1
        term = np.where(active, term * ya / (m + k), 0.0)
        total = total + term
        active &= term >= _SERIES_RTOL * np.abs(total)
        # degenerate "minus_one" start: total is 0 until the first term lands
        if k > 100_000:  # pragma: no cover - would need y >> m
            raise RuntimeError("lower series failed to converge")
    return _out(total, scalar)


def _log_F_series(m: int, y: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return -y + m * np.log(y) - gammaln(m + 1.0) + np.log(lower_series(m, y))


def log_F(m: int, y) -> ArrayLike:
    """Natural log of F_m(y) = P(Gamma(m, 1) <= y), cancellation safe."""
    m = check_shape(m)
    ya, scalar = _as_array(y)
    if np.any(ya < 0):
        raise ValueError("F_m is defined for y >= 0")
    out = np.empty_like(ya)
    low = ya < m
    if np.any(low):
        out[low] = _log_F_series(m, ya[low])
    if np.any(~low):
        out[~low] = np.log1p(-np.exp(log_Q(m, ya[~low])))
    return _out(out, scalar)


def survival_Q(m: int, x) -> KernelValue:
    """Q_m(x): regularized upper incomplete gamma with integer shape ``m``."""
    lq = log_Q(m, x)
    return KernelValue(np.exp(lq) if isinstance(lq, np.ndarray) else math.exp(lq), lq)


def density_f(m: int, x) -> KernelValue:
    """f_m(x) = exp(-x) x**(m-1)/(m-1)!, the Erlang(m, 1) density (= -Q_m')."""
    lf = log_f(m, x)
    return KernelValue(np.exp(lf) if isinstance(lf, np.ndarray) else math.exp(lf), lf)


def cdf_F(m: int, y) -> KernelValue:
    """F_m(y) = 1 - Q_m(y), computed from the lower series when y < m."""
    lF = log_F(m, y)
    return KernelValue(np.exp(lF) if isinstance(lF, np.ndarray) else math.exp(lF), lF)


def upper_hazard_h(m: int, t) -> ArrayLike:
    """Upper-tail hazard f_m(t)/Q_m(t); nondecreasing in t."""
    m = check_shape(m)
    ta, scalar = _as_array(t)
    if np.any(ta <= 0):
        raise ValueError("hazard requires t > 0")
    return _out(np.exp(log_f(m, ta) - log_Q(m, ta)), scalar)


def reverse_hazard_phi(m: int, y) -> ArrayLike:
    """Reverse hazard phi_m(y) = f_m(y)/F_m(y).

    Below ``y = m`` this is m / (y * S_m(y)), which stays finite and exact
    where F_m itself would underflow.
    """
    m = check_shape(m)
    ya, scalar = _as_array(y)
    if np.any(ya <= 0):
        raise ValueError("reverse hazard requires y > 0")
    out = np.empty_like(ya)
    low = ya < m
    if np.any(low):
        yl = ya[low]
        out[low] = m / (yl * lower_series(m, yl))
    if np.any(~low):
        yh = ya[~low]
        out[~low] = np.exp(log_f(m, yh) - log_F(m, yh))
    return _out(out, scalar)


def log_reverse_hazard(m: int, y) -> ArrayLike:
    """log phi_m(y); finite where phi itself underflows (large y)."""
    m = check_shape(m)
    ya, scalar = _as_array(y)
    if np.any(ya <= 0):
        raise ValueError("reverse hazard requires y > 0")
    out = np.empty_like(ya)
    low = ya < m
    if np.any(low):
        yl = ya[low]
        out[low] = math.log(m) - np.log(yl) - np.log(lower_series(m, yl))
    if np.any(~low):
        yh = ya[~low]
        out[~low] = log_f(m, yh) - log_F(m, yh)
    return _out(out, scalar)


def log_elasticity_e(m: int, y) -> ArrayLike:
    """e(y) = d log phi / d log y = m - 1 - y D_m'(y)/D_m(y).

    Using D_m' = D_m + y**(m-1)/(m-1)! this equals ``m - 1 - y - y*phi(y)``;
    below ``y = m`` it is rearranged to ``-1 - y + m (S-1)/S`` so the
    small-y limit -1 is reached without cancellation.
    """
    m = check_shape(m)
    ya, scalar = _as_array(y)
    if np.any(ya <= 0):
        raise ValueError("log-elasticity requires y > 0")
    out = np.empty_like(ya)
    low = ya < m
    if np.any(low):
        yl = ya[low]
        s1 = lower_series(m, yl, minus_one=True)
        out[low] = -1.0 - yl + m * s1 / (1.0 + s1)
    if np.any(~low):
        yh = ya[~low]
        out[~low] = (m - 1.0) - yh - yh * reverse_hazard_phi(m, yh)
    return _out(out, scalar)


def strictly_decreasing(values, slack: float = MONOTONE_SLACK) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(v[1:] < v[:-1] + slack * (1.0 + np.abs(v[:-1]))))


def strictly_increasing(values, slack: float = MONOTONE_SLACK) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(v[1:] > v[:-1] - slack * (1.0 + np.abs(v[:-1]))))


def log_grid(lo: float, hi: float, per_decade: int = 200) -> np.ndarray:
    """Logarithmic grid from lo to hi with ``per_decade`` points per decade."""
    n = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)
