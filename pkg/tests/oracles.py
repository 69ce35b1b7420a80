"""Independent reference values used across the tests.

Nothing here imports the package: each oracle is a different route to
the same quantity.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache

import mpmath


def harmonic(n: int, order: int = 1) -> Fraction:
    return sum((Fraction(1, k**order) for k in range(1, n + 1)), Fraction(0))


def uniform_m1_moments(n: int) -> tuple[Fraction, Fraction]:
    """(E T, Var T) for N equal coupons, m = 1, as exact rationals."""
    return n * harmonic(n), n * n * harmonic(n, 2) - n * harmonic(n)


def two_coupon_m1(p: Fraction) -> tuple[Fraction, Fraction]:
    """(E T, Var T) for two coupons with probabilities p, 1-p and m = 1."""
    q = 1 - p
    mean = 1 / p + 1 / q - 1
    rising2 = 2 / p**2 + 2 / q**2 - 2  # E max(Exp(p), Exp(q))^2
    return mean, rising2 - mean - mean * mean


def chain_moments(p, m: int) -> tuple[Fraction, Fraction]:
    """(E T, Var T) by first-step analysis on capped count vectors.

    With r = mass of completed types (self loops),
    E_s (1 - r) = 1 + sum_{j open} p_j E_{s+e_j} and
    S_s (1 - r) = 1 + 2 (sum_open p_j E_{s+e_j} + r E_s) + sum_open p_j S_{s+e_j}
    for the second moment S_s.
    """
    p = tuple(Fraction(v) for v in p)
    n = len(p)

    @lru_cache(maxsize=None)
    def solve(state):
        if all(c >= m for c in state):
            return Fraction(0), Fraction(0)
        r = sum((p[j] for j in range(n) if state[j] >= m), Fraction(0))
        first, second = Fraction(0), Fraction(0)
        for j in range(n):
            if state[j] < m:
                nxt = list(state)
                nxt[j] += 1
                e, s = solve(tuple(nxt))
                first += p[j] * e
                second += p[j] * s
        e = (1 + first) / (1 - r)
        s = (1 + 2 * (first + r * e) + second) / (1 - r)
        return e, s

    e, s = solve((0,) * n)
    return e, s - e * e


def ie_mean_m1(p) -> Fraction:
    """E T for m = 1 via sum over nonempty subsets of (-1)^{|A|+1} / p_A."""
    p = [Fraction(v) for v in p]
    total = Fraction(0)
    for k in range(1, len(p) + 1):
        for sub in itertools.combinations(p, k):
            total += (-1) ** (k + 1) / sum(sub)
    return total


def erlang_Q(m: int, x: float, dps: int = 40) -> float:
    with mpmath.workdps(dps):
        return float(mpmath.gammainc(m, x, mpmath.inf, regularized=True))


def erlang_logQ(m: int, x: float, dps: int = 40) -> float:
    with mpmath.workdps(dps):
        return float(mpmath.log(mpmath.gammainc(m, x, mpmath.inf, regularized=True)))


def erlang_logF(m: int, y: float, dps: int = 40) -> float:
    with mpmath.workdps(dps):
        return float(mpmath.log(mpmath.gammainc(m, 0, y, regularized=True)))


def erlang_log_phi(m: int, y: float, dps: int = 40) -> float:
    with mpmath.workdps(dps):
        y = mpmath.mpf(y)
        logf = (m - 1) * mpmath.log(y) - y - mpmath.loggamma(m)
        return float(logf - mpmath.log(mpmath.gammainc(m, 0, y, regularized=True)))
