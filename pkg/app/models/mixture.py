"""Gaussian mixture model of normalised wind speeds, and EM fitting options."""
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import List, Optional

import numpy as np
import scipy.linalg

from app.errors import CholeskyError, DataError, UsageError

WEIGHT_SUM_TOL = 1e-12
SYMMETRY_TOL = 1e-10


def _encode(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray        # (M,)
    means: np.ndarray          # (M, D)
    covariances: np.ndarray    # (M, D, D)

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        means = np.asarray(self.means, dtype=float)
        if means.ndim == 1:
            means = means.reshape(len(weights), -1)
        covs = np.asarray(self.covariances, dtype=float)
        m, d = means.shape
        if covs.shape == (m,) and d == 1:
            covs = covs.reshape(m, 1, 1)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)

        if weights.ndim != 1 or len(weights) != m or covs.shape != (m, d, d):
            raise DataError(f"inconsistent mixture shapes: weights {weights.shape}, "
                            f"means {means.shape}, covariances {covs.shape}")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(means)) and np.all(np.isfinite(covs))):
            raise DataError("mixture parameters must be finite")
        if np.any(weights <= 0):
            raise DataError("mixture weights must be positive")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise DataError(f"weights must sum to 1 (got {weights.sum():.15g})")
        scale = max(1.0, float(np.max(np.abs(covs), initial=0.0)))
        if np.max(np.abs(covs - covs.transpose(0, 2, 1)), initial=0.0) > SYMMETRY_TOL * scale:
            raise DataError("covariance matrices must be symmetric")

    def __eq__(self, other):
        if not isinstance(other, GaussianMixture):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights) and np.array_equal(self.means, other.means)
                and np.array_equal(self.covariances, other.covariances))

    __hash__ = None

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @cached_property
    def cholesky_factors(self) -> np.ndarray:
        """Lower Cholesky factor of every component covariance."""
        factors = np.empty_like(self.covariances)
        for m, cov in enumerate(self.covariances):
            try:
                factors[m] = scipy.linalg.cholesky(cov, lower=True)
            except np.linalg.LinAlgError as e:
                raise CholeskyError(f"covariance of component {m + 1} is not positive definite") from e
        return factors

    def relabel(self, order) -> "GaussianMixture":
        order = list(order)
        return GaussianMixture(self.weights[order], self.means[order], self.covariances[order])

    # ------------------------------------------------------
    # JSON form
    # ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "M": self.n_components,
            "D": self.dim,
            "weights": [_encode(w) for w in self.weights],
            "means": [[_encode(v) for v in mu] for mu in self.means],
            "covariances": [[[_encode(v) for v in row] for row in cov] for cov in self.covariances],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianMixture":
        try:
            weights = np.array([float(w) for w in data["weights"]])
            means = np.array([[float(v) for v in mu] for mu in data["means"]])
            covs = np.array([[[float(v) for v in row] for row in cov] for cov in data["covariances"]])
            m = int(data.get("M", len(weights)))
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"malformed mixture description: {e}") from e
        if m != len(weights):
            raise DataError(f"mixture declares M={m} but lists {len(weights)} weights")
        if means.ndim != 2 or covs.ndim != 3:
            raise DataError("mixture means must be M x D and covariances M x D x D")
        return cls(weights, means, covs)


class InitMethod(str, Enum):
    KMEANS_PP = "kmeans_pp"
    RANDOM_RESTART = "random_restart"


@dataclass(frozen=True)
class EmOptions:
    max_iter: int = 500
    rel_tol: float = 1e-7
    reg_eps: float = 1e-6
    init: InitMethod = InitMethod.KMEANS_PP
    restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "init", InitMethod(self.init))
        if self.rel_tol <= 0:
            raise UsageError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.reg_eps < 0:
            raise UsageError(f"reg_eps must be non-negative, got {self.reg_eps}")
        if self.max_iter < 1 or self.restarts < 1:
            raise UsageError("max_iter and restarts must be at least 1")


@dataclass
class FitResult:
    model: GaussianMixture
    trace: List[float] = field(default_factory=list)   # log-likelihood after init and each M-step
    iterations: int = 0
    converged: bool = False

    def __iter__(self):
        yield self.model
        yield self.trace

    @property
    def log_likelihood(self) -> Optional[float]:
        return self.trace[-1] if self.trace else None
