"""The Poissonized completion time X = max_j Gamma(m, rate p_j).

Besides the distribution function and density, this module evaluates the
objects that appear along a ray ``q(theta) = u + theta * h`` leaving the
uniform law ``u``: the radial derivative ``w = -dG/dtheta``, the size-bias
ratio ``w / (t g)`` and the reverse-hazard weighted mean ``M(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gamma_kernel as gk
from .errors import DomainExit
from .models import CollectorModel, ProbabilityVector

DIRECTION_SUM_TOL = 1e-14


@dataclass(frozen=True)
class RadialDirection:
    """Zero-sum perturbation ``h`` of the uniform law on N coupons."""

    h: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = np.array(self.h, dtype=float).ravel()
        if h.size < 2:
            raise ValueError("a radial direction needs N >= 2 coordinates")
        if abs(h.sum()) > DIRECTION_SUM_TOL:
            raise ValueError(f"direction must sum to zero (sum = {h.sum()!r})")
        if not np.any(h != 0):
            raise ValueError("direction must be nonzero")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @classmethod
    def toward(cls, p) -> "RadialDirection":
        """Direction ``p - u``; theta = 1 then lands on ``p``."""
        p = np.asarray(p, dtype=float)
        h = p - 1.0 / p.size
        h = h - h.mean()
        return cls(h)

    @classmethod
    def normalized(cls, h) -> "RadialDirection":
        h = np.asarray(h, dtype=float)
        h = h - h.mean()
        return cls(h / np.linalg.norm(h))

    @property
    def n(self) -> int:
        return int(self.h.size)

    @property
    def exit_theta(self) -> float:
        """Largest theta for which u + theta h stays in the closed simplex."""
        neg = self.h[self.h < 0]
        return float((1.0 / self.n) / (-neg).max())

    def q(self, theta: float) -> np.ndarray:
        q = 1.0 / self.n + theta * self.h
        if np.any(q <= 0):
            raise DomainExit(f"theta={theta} leaves the simplex (min q = {q.min():.3e})")
        return q

    def model(self, m: int, theta: float) -> CollectorModel:
        q = self.q(theta)
        return CollectorModel(m, ProbabilityVector(q / q.sum()))


def _t(t):
    ta = np.asarray(t, dtype=float)
    return np.atleast_1d(ta), ta.ndim == 0


def _log_phi_matrix(q: np.ndarray, m: int, t: np.ndarray) -> np.ndarray:
    """log phi_m(q_i t_k) as an array of shape (len(t), N)."""
    y = np.outer(t, q)
    return np.asarray(gk.log_reverse_hazard(m, y.ravel())).reshape(y.shape)


def _scaled_phi(q: np.ndarray, m: int, t: np.ndarray) -> np.ndarray:
    """phi_m(q_i t_k) divided by its row maximum; ratios of row sums are unchanged."""
    lp = _log_phi_matrix(q, m, t)
    return np.exp(lp - lp.max(axis=1, keepdims=True))


def _log_cdf(q: np.ndarray, m: int, t: np.ndarray) -> np.ndarray:
    y = np.outer(t, q)
    return np.asarray(gk.log_F(m, y.ravel())).reshape(y.shape).sum(axis=1)


def completion_cdf(model: CollectorModel, t):
    """P(X <= t) = prod_j F_m(p_j t)."""
    ta, scalar = _t(t)
    if np.any(ta < 0):
        raise ValueError("t must be nonnegative")
    vals, counts = model.p.grouped()
    y = np.outer(ta, vals)
    logs = np.asarray(gk.log_F(model.m, y.ravel())).reshape(y.shape) @ counts
    out = np.exp(logs)
    return float(out[0]) if scalar else out


def completion_density(model: CollectorModel, t):
    """Density of X: G(t) * sum_j p_j phi_m(p_j t)."""
    ta, scalar = _t(t)
    if np.any(ta <= 0):
        raise ValueError("t must be positive")
    vals, counts = model.p.grouped()
    y = np.outer(ta, vals)
    logs = np.asarray(gk.log_F(model.m, y.ravel())).reshape(y.shape) @ counts
    phi = np.asarray(gk.reverse_hazard_phi(model.m, y.ravel())).reshape(y.shape)
    out = np.exp(logs) * (phi @ (counts * vals))
    return float(out[0]) if scalar else out


def radial_derivative_w(direction: RadialDirection, m: int, theta: float, t):
    """w_theta(t) = -d/dtheta G_theta(t) along ``q = u + theta h``.

    Evaluated as ``-G t sum_i h_i phi(q_i t)``, which is the bracketed form
    ``(G t / theta) [mean_i phi(q_i t) - sum_i q_i phi(q_i t)]`` with the
    factor ``(1/N - q_i) / theta = -h_i`` cancelled analytically.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    q = direction.q(theta)
    ta, scalar = _t(t)
    weights = np.exp(_log_phi_matrix(q, m, ta) + _log_cdf(q, m, ta)[:, None])
    out = -ta * (weights @ direction.h)
    return float(out[0]) if scalar else out


def size_bias_ratio(direction: RadialDirection, m: int, theta: float, t):
    """w / (t g) = (1/theta) (1/(N M(t)) - 1), evaluated as -sum h phi / sum q phi."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    q = direction.q(theta)
    ta, scalar = _t(t)
    phi = _scaled_phi(q, m, ta)
    out = -(phi @ direction.h) / (phi @ q)
    return float(out[0]) if scalar else out


def weighted_mean_M(q, m: int, t):
    """M(t) = sum q_i phi(q_i t) / sum phi(q_i t)."""
    q = q.p if isinstance(q, ProbabilityVector) else np.asarray(q, dtype=float)
    ta, scalar = _t(t)
    phi = _scaled_phi(q, m, ta)
    out = (phi @ q) / phi.sum(axis=1)
    return float(out[0]) if scalar else out


def default_time_grid(model: CollectorModel, lo: float = 1e-2, hi: float = 1e2, per_decade: int = 200) -> np.ndarray:
    """Log grid of times around the natural scale N*m of the model."""
    scale = model.n * model.m
    return gk.log_grid(lo * scale, hi * scale, per_decade)
