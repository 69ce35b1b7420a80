"""Problem instances: coupon laws and collector models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gamma_kernel import check_shape

SUM_TOL = 1e-12


@dataclass(frozen=True)
class ProbabilityVector:
    """Positive coupon probabilities summing to one."""

    p: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.p, dtype=float).ravel()
        if arr.size < 1:
            raise ValueError("probability vector must have at least one entry")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValueError("coupon probabilities must be positive and finite")
        if abs(arr.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {float(arr.sum())!r}, not 1")
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)

    @classmethod
    def uniform(cls, n: int) -> "ProbabilityVector":
        return cls(np.full(int(n), 1.0 / n))

    @classmethod
    def powerlaw(cls, n: int, alpha: float) -> "ProbabilityVector":
        w = np.arange(1, int(n) + 1, dtype=float) ** (-float(alpha))
        return cls(w / w.sum())

    @classmethod
    def from_weights(cls, weights, tol: float | None = None) -> "ProbabilityVector":
        """Normalise ``weights``.

        With ``tol`` set, the raw sum must already be within ``tol`` of one
        (the CLI accepts hand-typed decimals this way).
        """
        w = np.asarray(weights, dtype=float).ravel()
        s = w.sum()
        if tol is not None and abs(s - 1.0) > tol:
            raise ValueError(f"probabilities sum to {float(s)!r}; off by more than {tol}")
        return cls(w / s)

    @property
    def n(self) -> int:
        return int(self.p.size)

    def is_uniform(self) -> bool:
        return bool(np.all(self.p == self.p[0]))

    def grouped(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct probabilities and their multiplicities."""
        vals, counts = np.unique(self.p, return_counts=True)
        return vals, counts.astype(float)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other):
        return isinstance(other, ProbabilityVector) and np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash(self.p.tobytes())


@dataclass(frozen=True)
class CollectorModel:
    """Collect at least ``m`` copies of each of ``N = len(p)`` coupon types."""

    m: int
    p: ProbabilityVector

    def __post_init__(self):
        object.__setattr__(self, "m", check_shape(self.m))
        if not isinstance(self.p, ProbabilityVector):
            object.__setattr__(self, "p", ProbabilityVector(self.p))

    @classmethod
    def uniform(cls, n: int, m: int) -> "CollectorModel":
        return cls(m, ProbabilityVector.uniform(n))

    @property
    def n(self) -> int:
        return self.p.n

    def to_dict(self) -> dict:
        return {"N": self.n, "m": self.m, "p": [float(v) for v in self.p.p]}
