"""Reproducible simulation of the collector, its Poissonization and its useful-hit chain.

Randomness comes from counter-based Philox streams keyed by
``(seed, block_index)``.  Trials are cut into fixed blocks of
``BLOCK_SIZE``; each block owns its stream, so per-trial output depends only
on ``(seed, trial_index)`` and never on how many workers ran the blocks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exact_moments import mean_variance
from .models import CollectorModel

BLOCK_SIZE = 4096
ALIAS_THRESHOLD = 16
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    trials: int
    seed: int
    model: CollectorModel
    workers: int = 1

    def __post_init__(self):
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= int(self.seed) <= _SEED_MASK:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SampleStats:
    mean: float
    variance: float
    std_error_mean: float
    std_error_variance: float
    trials: int

    @classmethod
    def from_samples(cls, x) -> "SampleStats":
        x = np.asarray(x, dtype=float)
        n = x.size
        mean = float(x.mean())
        if n < 2:
            return cls(mean, 0.0, 0.0, 0.0, n)
        dev = x - mean
        var = float(dev @ dev / (n - 1))
        m4 = float(np.mean(dev**4))
        var_of_var = max(m4 - var * var * (n - 3) / (n - 1), 0.0) / n
        return cls(mean, var, math.sqrt(var / n), math.sqrt(var_of_var), n)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "std_error_mean": self.std_error_mean,
            "std_error_variance": self.std_error_variance,
            "trials": self.trials,
        }


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(block)))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("DIXIECUP_THREADS", "1")))
    except ValueError:
        return 1


def _run_blocks(cfg: SimConfig, kernel) -> np.ndarray:
    """Apply ``kernel(rng, size)`` per block and stack the results in block order."""
    nblocks = -(-cfg.trials // BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, cfg.trials - b * BLOCK_SIZE) for b in range(nblocks)]

    def job(b: int):
        return kernel(block_generator(cfg.seed, b), sizes[b])

    if cfg.workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(job, range(nblocks)))
    else:
        parts = [job(b) for b in range(nblocks)]
    return np.concatenate(parts, axis=0)


# ---------------------------------------------------------------------------
# alias sampling


class AliasTable:
    """Walker/Vose alias table for O(1) categorical draws."""

    def __init__(self, p):
        p = np.asarray(p, dtype=float)
        n = p.size
        prob = np.zeros(n)
        alias = np.zeros(n, dtype=np.int64)
        scaled = p * n / p.sum()
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = scaled[g] + scaled[s] - 1.0
            (small if scaled[g] < 1.0 else large).append(g)
        for i in large + small:
            prob[i] = 1.0
            alias[i] = i
        self.prob = prob
        self.alias = alias

    def __len__(self) -> int:
        return self.prob.size

    def implied_probabilities(self) -> np.ndarray:
        n = self.prob.size
        out = self.prob.copy()
        np.add.at(out, self.alias, 1.0 - self.prob)
        return out / n

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        n = self.prob.size
        k = rng.integers(0, n, size=size)
        keep = rng.random(size) < self.prob[k]
        return np.where(keep, k, self.alias[k])


def _categorical_sampler(p: np.ndarray):
    if p.size > ALIAS_THRESHOLD:
        table = AliasTable(p)
        return table.sample
    cdf = np.cumsum(p)
    cdf[-1] = 1.0

    def sample(rng, size):
        return np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), p.size - 1)

    return sample


# ---------------------------------------------------------------------------
# kernels


def _useful_hit_kernel(p: np.ndarray, m: int, *, with_geometric: bool):
    n = p.size

    def kernel(rng: np.random.Generator, size: int):
        remaining = np.full((size, n), m, dtype=np.int64)
        masses = np.empty((size, m * n))
        mass = np.ones(size)
        rows = np.arange(size)
        for step in range(m * n):
            masses[:, step] = mass
            active = remaining > 0
            weights = np.where(active, p, 0.0)
            cum = np.cumsum(weights, axis=1)
            u = rng.random(size) * cum[:, -1]
            pick = (cum <= u[:, None]).sum(axis=1)
            # guard against u rounding onto the last cumulative value
            last_active = n - 1 - np.argmax(active[:, ::-1], axis=1)
            pick = np.minimum(pick, last_active)
            remaining[rows, pick] -= 1
            mass = np.where(remaining > 0, p, 0.0).sum(axis=1)
        if not with_geometric:
            return masses
        waits = rng.geometric(np.minimum(masses, 1.0))
        return waits.sum(axis=1).astype(float)

    return kernel


def useful_hit_masses(cfg: SimConfig) -> np.ndarray:
    """Active mass R_l before each of the m N useful hits, shape (trials, m N)."""
    model = cfg.model
    return _run_blocks(cfg, _useful_hit_kernel(model.p.p, model.m, with_geometric=False))


def _direct_kernel(p: np.ndarray, m: int):
    n = p.size
    sampler = _categorical_sampler(p)

    def kernel(rng: np.random.Generator, size: int):
        counts = np.zeros((size, n), dtype=np.int64)
        draws = np.zeros(size)
        live = np.arange(size)
        while live.size:
            labels = sampler(rng, live.size)
            counts[live, labels] += 1
            draws[live] += 1
            live = live[(counts[live] < m).any(axis=1)]
        return draws

    return kernel


def sample_discrete(cfg: SimConfig, method: str = "skip") -> np.ndarray:
    """Per-trial draw counts T.

    ``method="direct"`` draws coupon labels one at a time until every type
    has m copies (alias sampling above 16 types).  ``method="skip"``
    follows the useful-hit chain and adds a Geometric(R) number of draws per
    useful hit, which has the same law and costs O(m N) per trial.
    """
    p, m = cfg.model.p.p, cfg.model.m
    if method == "direct":
        return _run_blocks(cfg, _direct_kernel(p, m))
    if method == "skip":
        return _run_blocks(cfg, _useful_hit_kernel(p, m, with_geometric=True))
    raise ValueError(f"unknown method {method!r}")


def simulate_discrete(cfg: SimConfig, method: str = "skip") -> SampleStats:
    """Sample statistics of the number of draws T."""
    return SampleStats.from_samples(sample_discrete(cfg, method))


def _poissonized_kernel(p: np.ndarray, m: int):
    def kernel(rng: np.random.Generator, size: int):
        clocks = rng.standard_exponential((size, p.size, m)).sum(axis=2) / p
        return clocks.max(axis=1)

    return kernel


def sample_poissonized(cfg: SimConfig) -> np.ndarray:
    """Per-trial X = max_j Gamma(m, rate p_j), each gamma a sum of m exponentials."""
    return _run_blocks(cfg, _poissonized_kernel(cfg.model.p.p, cfg.model.m))


def simulate_poissonized(cfg: SimConfig) -> SampleStats:
    return SampleStats.from_samples(sample_poissonized(cfg))


# ---------------------------------------------------------------------------
# reports


def _z(diff: float, se: float) -> float:
    if se == 0.0:
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    return diff / se


@dataclass(frozen=True)
class TransferReport:
    discrete: SampleStats
    poissonized: SampleStats
    exact_var_T: float
    mean_z: float            # (mean X - mean T) / combined SE
    var_transfer: float      # sample Var X - sample E X
    var_transfer_se: float
    var_transfer_z: float

    @property
    def ok(self) -> bool:
        return abs(self.mean_z) <= 3.0 and abs(self.var_transfer_z) <= 3.0

    def to_dict(self) -> dict:
        return {
            "discrete": self.discrete.to_dict(),
            "poissonized": self.poissonized.to_dict(),
            "exact_var_T": self.exact_var_T,
            "mean_z": self.mean_z,
            "var_transfer": self.var_transfer,
            "var_transfer_se": self.var_transfer_se,
            "var_transfer_z": self.var_transfer_z,
            "ok": self.ok,
        }


def transfer_report(cfg: SimConfig) -> TransferReport:
    """Compare E X with E T and Var X - E X with the exact Var T."""
    t = sample_discrete(cfg)
    x = sample_poissonized(SimConfig(cfg.trials, (cfg.seed + 1) & _SEED_MASK, cfg.model, cfg.workers))
    st, sx = SampleStats.from_samples(t), SampleStats.from_samples(x)
    exact = mean_variance(cfg.model).var_T
    mean_se = math.hypot(st.std_error_mean, sx.std_error_mean)
    z = (x - sx.mean) ** 2 - x
    est = sx.variance - sx.mean
    se = float(z.std(ddof=1) / math.sqrt(z.size)) if z.size > 1 else 0.0
    return TransferReport(
        discrete=st,
        poissonized=sx,
        exact_var_T=exact,
        mean_z=_z(sx.mean - st.mean, mean_se),
        var_transfer=est,
        var_transfer_se=se,
        var_transfer_z=_z(est - exact, se),
    )


def psi(r):
    r = np.asarray(r, dtype=float)
    return 1.0 / (r * r) - 1.0 / r


@dataclass(frozen=True)
class ActiveClockReport:
    trials: int
    seed: int
    psi_sum_mean: float      # E sum_l psi(R_l)
    psi_sum_se: float
    var_H: float             # Var(sum_l 1/R_l)
    var_H_se: float
    total: float
    total_se: float
    exact_var_T: float

    @property
    def z(self) -> float:
        return _z(self.total - self.exact_var_T, self.total_se)

    @property
    def ok(self) -> bool:
        return abs(self.z) <= 3.0

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "psi_sum_mean": self.psi_sum_mean,
            "psi_sum_se": self.psi_sum_se,
            "var_H": self.var_H,
            "var_H_se": self.var_H_se,
            "total": self.total,
            "total_se": self.total_se,
            "exact_var_T": self.exact_var_T,
            "z": self.z,
            "ok": self.ok,
        }


def simulate_active_clock(cfg: SimConfig, exact_var_T: float | None = None) -> ActiveClockReport:
    """Estimate both terms of Var T = E sum psi(R_l) + Var(H) from useful-hit paths."""
    masses = useful_hit_masses(cfg)
    psi_sum = psi(masses).sum(axis=1)
    h = (1.0 / masses).sum(axis=1)
    sp, sh = SampleStats.from_samples(psi_sum), SampleStats.from_samples(h)
    n = masses.shape[0]
    # per-trial contributions to the combined estimator, for its standard error
    combined = psi_sum + (h - sh.mean) ** 2 * (n / (n - 1) if n > 1 else 1.0)
    total_se = float(combined.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    if exact_var_T is None:
        exact_var_T = mean_variance(cfg.model).var_T
    return ActiveClockReport(
        trials=n,
        seed=cfg.seed,
        psi_sum_mean=sp.mean,
        psi_sum_se=sp.std_error_mean,
        var_H=sh.variance,
        var_H_se=sh.std_error_variance,
        total=sp.mean + sh.variance,
        total_se=total_se,
        exact_var_T=exact_var_T,
    )
