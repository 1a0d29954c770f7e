"""Uniform streams and Metropolis-Hastings chain records."""
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from app.errors import DimensionError, UsageError


class StreamKind(str, Enum):
    SRS = "srs"
    LHS = "lhs"
    SOBOL = "sobol"


class UniformStream(ABC):
    """Deterministic source of points in [0,1)^dim, fixed by (kind, dim, seed, skip).

    A stream is single-owner state. `points_emitted` counts points handed out
    after the initial skip.
    """
    kind: StreamKind

    def __init__(self, dim: int, seed: int = 0, skip: int = 0):
        if dim < 1:
            raise UsageError(f"stream dimension must be at least 1, got {dim}")
        if skip < 0:
            raise UsageError(f"skip must be non-negative, got {skip}")
        self.dim = dim
        self.seed = seed
        self.skip = skip
        self.points_emitted = 0

    @property
    def coordinates_emitted(self) -> int:
        return self.points_emitted * self.dim

    @property
    def position(self) -> int:
        """Index of the next point counted from the start of the sequence."""
        return self.skip + self.points_emitted

    @abstractmethod
    def _draw(self, n: int) -> np.ndarray:
        """Next n points as an (n, dim) array."""

    def next_block(self, n: int) -> np.ndarray:
        if n < 0:
            raise UsageError(f"block size must be non-negative, got {n}")
        if n == 0:
            return np.empty((0, self.dim))
        block = self._draw(n)
        self.points_emitted += n
        return block

    def next_point(self) -> np.ndarray:
        return self.next_block(1)[0]

    def __repr__(self):
        return (f"{type(self).__name__}(dim={self.dim}, seed={self.seed}, "
                f"skip={self.skip}, emitted={self.points_emitted})")


@dataclass
class MhConfig:
    dim: int
    stream: UniformStream
    proposal_scale: np.ndarray = 0.1      # per-dimension random-walk std
    burn_in: int = 1000
    n_samples: int = 1000
    thin: int = 1
    support_low: Optional[np.ndarray] = None    # default 0
    support_high: Optional[np.ndarray] = None   # default 1
    auto_tune: bool = False

    def __post_init__(self):
        self.proposal_scale = np.broadcast_to(
            np.asarray(self.proposal_scale, dtype=float), (self.dim,)).copy()
        self.support_low = (np.zeros(self.dim) if self.support_low is None
                            else np.broadcast_to(np.asarray(self.support_low, dtype=float), (self.dim,)).copy())
        self.support_high = (np.ones(self.dim) if self.support_high is None
                             else np.broadcast_to(np.asarray(self.support_high, dtype=float), (self.dim,)).copy())
        if np.any(self.proposal_scale <= 0):
            raise UsageError("proposal_scale must be positive in every dimension")
        if self.burn_in < 0:
            raise UsageError(f"burn_in must be non-negative, got {self.burn_in}")
        if self.thin < 1:
            raise UsageError(f"thin must be at least 1, got {self.thin}")
        if self.n_samples < 0:
            raise UsageError(f"n_samples must be non-negative, got {self.n_samples}")
        if np.any(self.support_low >= self.support_high):
            raise UsageError("support box must have low < high in every dimension")
        if self.stream.dim != self.dim + 1:
            raise DimensionError(f"stream dimension must be {self.dim + 1} for a {self.dim}-D chain, "
                                 f"got {self.stream.dim}")

    @property
    def total_steps(self) -> int:
        return self.burn_in + self.n_samples * self.thin


@dataclass(frozen=True)
class ChainState:
    x: np.ndarray
    log_p: float
    accepted: int = 0
    proposed: int = 0


@dataclass
class ChainDiagnostics:
    acceptance_rate: float
    n: int
    burn_in: int
    thin: int
    per_dim_mean: List[float]
    per_dim_std: List[float]
    stream_kind: str
    seed: int
    proposal_scale: List[float] = field(default_factory=list)
    coordinates_consumed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)
