"""Numerical checks of variance extremality at the uniform coupon law.

* ``radial_variance_scan``: Var(T) along ``u + theta h`` must increase.
* ``hessian_constant``: the tangent eigenvalue C_{m,N} of the variance at
  uniform, from the order-statistic covariance identity.
* ``monotone_bm_report``: monotonicity of b_m(y) = y phi(y) + y - (m-1).
* ``cauchy_mass_decay_check``: for m = 1, the expected unseen mass after
  each discovery never exceeds its uniform value r/N.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import gamma_kernel as gk
from . import montecarlo
from .centering import solve_centering
from .errors import DomainExit
from .exact_moments import _Survival, mean_variance
from .models import CollectorModel, ProbabilityVector
from .poissonized import RadialDirection, radial_derivative_w

DEFAULT_STEPS = 16


@dataclass(frozen=True)
class RadialScanResult:
    direction: RadialDirection
    m: int
    thetas: np.ndarray
    variances: np.ndarray
    errors: np.ndarray
    w_integrals: list = field(default_factory=list)
    verdict: bool = False
    min_increment: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "h": self.direction.h.tolist(),
            "m": self.m,
            "thetas": self.thetas.tolist(),
            "variances": self.variances.tolist(),
            "errors": self.errors.tolist(),
            "w_integrals": self.w_integrals,
            "verdict": self.verdict,
            "min_increment": self.min_increment,
        }


def step_tolerance(err_a: float, err_b: float) -> float:
    return max(1e-10, 10.0 * err_a + 10.0 * err_b)


def integrate_over_time(fun, model: CollectorModel, rtol: float = 1e-11) -> tuple[float, float]:
    """int_0^inf fun(t) dt for integrands living on the completion-time scale of ``model``."""
    surv = _Survival.from_model(model)
    t_one = surv.time_at_mass(1.0)
    t_hi = surv.time_at_mass(1e-18)
    edges = sorted({0.0, 0.25 * t_one, 0.5 * t_one, t_one, surv.time_at_mass(1e-3), t_hi})
    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                v, e = integrate.quad(fun, lo, hi, epsabs=0.0, epsrel=rtol, limit=400)
            total += v
            err += e
    return total, err


def w_moments(direction: RadialDirection, m: int, theta: float) -> tuple[float, float]:
    """(int w dt, int t w dt) at ``theta``; the first is dE X/dtheta."""
    model = direction.model(m, theta)
    w0, _ = integrate_over_time(lambda t: radial_derivative_w(direction, m, theta, t), model)
    w1, _ = integrate_over_time(lambda t: t * radial_derivative_w(direction, m, theta, t), model)
    return w0, w1


def radial_variance_scan(
    direction: RadialDirection,
    m: int,
    theta_max: float | None = None,
    steps: int = DEFAULT_STEPS,
    *,
    method: str = "auto",
    check_w: bool = True,
) -> RadialScanResult:
    """Var(T) on ``steps`` equally spaced theta in [0, theta_max].

    The default ``theta_max`` is half the exit parameter.  When ``check_w``
    is set, three interior points also compare int w dt with a central
    difference of E T in theta.
    """
    m = gk.check_shape(m)
    if theta_max is None:
        theta_max = 0.5 * direction.exit_theta
    q_end = 1.0 / direction.n + theta_max * direction.h
    if np.any(q_end < 1e-6):
        raise DomainExit(f"theta_max={theta_max} brings a probability below 1e-6")
    thetas = np.linspace(0.0, theta_max, steps)
    reports = [mean_variance(direction.model(m, th), method=method) for th in thetas]
    variances = np.array([r.var_T for r in reports])
    errors = np.array([r.abs_err_estimate for r in reports])
    incr = np.diff(variances)
    tol = np.array([step_tolerance(errors[i], errors[i + 1]) for i in range(steps - 1)])
    verdict = bool(np.all(incr > tol))

    checks = []
    if check_w and steps >= 5:
        for idx in (steps // 4, steps // 2, (3 * steps) // 4):
            th = float(thetas[idx])
            d = 1e-4 * theta_max
            fd = (mean_variance(direction.model(m, th + d), method=method).mean
                  - mean_variance(direction.model(m, th - d), method=method).mean) / (2 * d)
            w0, _ = w_moments(direction, m, th)
            checks.append({"theta": th, "w_integral": w0, "fd_dmean": fd})
    return RadialScanResult(
        direction=direction,
        m=m,
        thetas=thetas,
        variances=variances,
        errors=errors,
        w_integrals=checks,
        verdict=verdict,
        min_increment=float(incr.min()),
    )


# ---------------------------------------------------------------------------
# Hessian constant


@dataclass(frozen=True)
class HessianReport:
    m: int
    N: int
    C: float
    cov_term: float
    mean_term: float
    abs_err: float

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "N": self.N,
            "C": self.C,
            "cov_term": self.cov_term,
            "mean_term": self.mean_term,
            "abs_err": self.abs_err,
            "positive": self.C > 0,
        }


def b_m(m: int, y):
    """b_m(y) = y phi_m(y) + y - (m-1); increasing from 1 at y = 0+."""
    y = np.asarray(y, dtype=float)
    return y * gk.reverse_hazard_phi(m, y) + y - (m - 1.0)


def hessian_constant(m: int, N: int) -> HessianReport:
    """C_{m,N} with D^2 Var(u)[h, h] = C * sum h_i^2 on the tangent space.

    Uses C / N^2 = 2N Cov(Y, a_m(Y)) - E a_m(Y), Y the maximum of N iid
    Gamma(m, 1), a_m(y) = y b_m(y).
    """
    m = gk.check_shape(m)
    if not (m <= 10 and 2 <= N <= 50):
        raise ValueError("hessian_constant supports m <= 10 and 2 <= N <= 50")
    log_n = math.log(N)

    centre = solve_centering(N, m).b
    edges = [0.0, 0.5 * centre, centre, centre + 5.0, centre + 20.0, centre + 80.0, math.inf]

    def integrand(y: float) -> np.ndarray:
        if y <= 0.0:
            return np.zeros(3)
        dens = math.exp(log_n + (N - 1) * gk.log_F(m, y) + gk.log_f(m, y))
        a = y * float(b_m(m, y))
        return dens * np.array([y, a, y * a])

    total, err = np.zeros(3), np.zeros(3)
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad_vec(integrand, lo, hi, epsabs=0.0, epsrel=1e-13, norm="max", limit=400)
        total += v
        err += e
    (ey, ea, eya), (e1, e2, e3) = total, err
    cov = eya - ey * ea
    c = N * N * (2.0 * N * cov - ea)
    err = N * N * (2.0 * N * (e3 + abs(ey) * e2 + abs(ea) * e1) + e2)
    return HessianReport(m=m, N=N, C=float(c), cov_term=float(cov), mean_term=float(ea), abs_err=float(err))


def hessian_by_finite_differences(m: int, N: int, step: float = 1e-2) -> float:
    """Richardson-extrapolated second difference of Var along h = e_1 - e_2."""
    h = np.zeros(N)
    h[0], h[1] = 1.0, -1.0
    direction = RadialDirection(h)
    v0 = mean_variance(CollectorModel.uniform(N, m)).var_T

    def second(d):
        vp = mean_variance(direction.model(m, d)).var_T
        vm = mean_variance(direction.model(m, -d)).var_T
        return (vp - 2.0 * v0 + vm) / (d * d * 2.0)

    c1 = second(step)
    c2 = second(step / 2.0)
    return (4.0 * c2 - c1) / 3.0


def closed_form_c12() -> float:
    """C_{1,2} from Var(T) = 2 + 80 eps^2 + O(eps^4) at p = (1/2 + eps, 1/2 - eps)."""
    # Var T = 2 sum 1/p^2 - 2 - (sum 1/p - 1)^2 - (sum 1/p - 1); expand in eps:
    # sum 1/p = 4 + 16 eps^2, sum 1/p^2 = 8 + 96 eps^2  =>  eps^2 coefficient 192 - 96 - 16
    coef = 2 * 96 - 2 * 3 * 16 - 16
    # D^2 V[h,h] = 2 coef for h = (1,-1), and sum h^2 = 2
    return 2.0 * coef / 2.0


# ---------------------------------------------------------------------------
# b_m monotonicity


@dataclass(frozen=True)
class BmReport:
    m: int
    increasing: bool
    above_one: bool
    min_slope: float
    min_value: float

    @property
    def ok(self) -> bool:
        return self.increasing and self.above_one

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "increasing": self.increasing,
            "above_one": self.above_one,
            "min_slope": self.min_slope,
            "min_value": self.min_value,
        }


def monotone_bm_report(m: int, y_grid) -> BmReport:
    y = np.sort(np.asarray(y_grid, dtype=float))
    if np.any(y <= 0):
        raise ValueError("grid must be positive")
    b = b_m(m, y)
    slopes = np.diff(b) / np.diff(y)
    return BmReport(
        m=m,
        increasing=gk.strictly_increasing(b),
        above_one=bool(np.all(b > 1.0 - 1e-12)),
        min_slope=float(slopes.min()) if slopes.size else float("nan"),
        min_value=float(b.min()),
    )


# ---------------------------------------------------------------------------
# m = 1 unseen-mass decay


@dataclass(frozen=True)
class MassDecayReport:
    N: int
    trials: int
    seed: int
    r: np.ndarray           # number of unseen coupons, N .. 1
    mean_mass: np.ndarray   # Monte Carlo E R_r
    std_error: np.ndarray
    uniform_mass: np.ndarray  # r / N

    @property
    def ok(self) -> bool:
        return bool(np.all(self.mean_mass <= self.uniform_mass + 3.0 * self.std_error + 1e-15))

    @property
    def z_margin(self) -> np.ndarray:
        """(r/N - E R_r) / SE; large positive values mean strict decay."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.uniform_mass - self.mean_mass) / self.std_error

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "trials": self.trials,
            "seed": self.seed,
            "r": self.r.tolist(),
            "mean_mass": self.mean_mass.tolist(),
            "std_error": self.std_error.tolist(),
            "uniform_mass": self.uniform_mass.tolist(),
            "ok": self.ok,
        }


def cauchy_mass_decay_check(p, trials: int = 10**5, seed: int = 0, workers: int = 1) -> MassDecayReport:
    """Monte Carlo E R_r for the m = 1 collector, compared with r / N."""
    pv = p if isinstance(p, ProbabilityVector) else ProbabilityVector(p)
    model = CollectorModel(1, pv)
    cfg = montecarlo.SimConfig(trials=trials, seed=seed, model=model, workers=workers)
    masses = montecarlo.useful_hit_masses(cfg)  # column l holds R after l hits = R_{N-l}
    n = pv.n
    mean = masses.mean(axis=0)
    se = masses.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros(n)
    r = np.arange(n, 0, -1)
    return MassDecayReport(
        N=n, trials=trials, seed=seed, r=r, mean_mass=mean, std_error=se, uniform_mass=r / n
    )
