"""
Uniform point streams for Monte Carlo and quasi-Monte Carlo sampling.

SRS   plain pseudo-random points (numpy Philox, a counter-based generator)
LHS   Latin hypercube blocks, emitted row by row
Sobol scrambled Sobol points (linear matrix scramble plus digital shift), optionally emitted in shuffled order
      within blocks; the raw sequence is available unrandomized
"""
import logging
import warnings

import numpy as np
from scipy.stats import qmc

from app.errors import StreamExhaustedError, UsageError
from app.models.sampling import StreamKind, UniformStream

logger = logging.getLogger(__name__)

SOBOL_MAX_DIM = 64
SOBOL_BITS = 32
DEFAULT_BLOCK_SIZE = 1024
SCRAMBLE_TAG = 0x5C4A
ORDER_TAG = 0x0D3E


def _philox(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def lhs_block(n: int, d: int, seed) -> np.ndarray:
    """n x d Latin hypercube: one point per stratum [(i-1)/n, i/n) in every column."""
    if n < 1:
        raise UsageError(f"LHS block needs n >= 1, got {n}")
    rng = _philox(seed)
    block = np.empty((n, d))
    for j in range(d):
        block[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return block


class SrsStream(UniformStream):
    kind = StreamKind.SRS

    def __init__(self, dim: int, seed: int = 0, skip: int = 0):
        super().__init__(dim, seed, skip)
        self._rng = _philox(seed)
        remaining = skip
        while remaining:
            chunk = min(remaining, 1 << 16)
            self._rng.random((chunk, dim))
            remaining -= chunk

    def _draw(self, n):
        return self._rng.random((n, self.dim))


class LhsStream(UniformStream):
    """Consecutive Latin hypercube blocks of `block_size` points each.

    Without refill the stream ends after its first block.
    """
    kind = StreamKind.LHS

    def __init__(self, dim: int, seed: int = 0, skip: int = 0,
                 block_size: int = DEFAULT_BLOCK_SIZE, refill: bool = True):
        super().__init__(dim, seed, skip)
        if block_size < 1:
            raise UsageError(f"LHS block size must be at least 1, got {block_size}")
        self.block_size = block_size
        self.refill = refill
        self._block_index = -1
        self._block = np.empty((0, dim))
        self._offset = 0
        if skip:
            self._take(skip)

    def _load_next_block(self):
        if self._block_index >= 0 and not self.refill:
            raise StreamExhaustedError(
                f"LHS block of {self.block_size} points exhausted and refill is disabled")
        self._block_index += 1
        seed = np.random.SeedSequence([self.seed, self._block_index])
        self._block = lhs_block(self.block_size, self.dim, seed)
        self._offset = 0

    def _take(self, n):
        out = np.empty((n, self.dim))
        filled = 0
        while filled < n:
            if self._offset >= len(self._block):
                self._load_next_block()
            take = min(n - filled, len(self._block) - self._offset)
            out[filled:filled + take] = self._block[self._offset:self._offset + take]
            self._offset += take
            filled += take
        return out

    def _draw(self, n):
        return self._take(n)


class SobolStream(UniformStream):
    """Sobol points from scipy's Joe-Kuo direction numbers.

    A randomized stream is scrambled from its seed (linear matrix scramble
    plus digital shift) and starts at index
    0, so every aligned block of `block_size` points is a scrambled net.
    With shuffle=True the points of each block come out in a seeded random
    order, which is how Markov chains read the stream: consecutive steps
    are exchangeable while each block stays stratified. An unrandomized
    stream is the raw Gray-code sequence without its origin.
    """
    kind = StreamKind.SOBOL

    def __init__(self, dim: int, seed: int = 0, skip: int = 0,
                 block_size: int = DEFAULT_BLOCK_SIZE, randomize: bool = True, shuffle: bool = False):
        if dim > SOBOL_MAX_DIM:
            raise UsageError(f"Sobol streams support at most {SOBOL_MAX_DIM} dimensions, got {dim}")
        super().__init__(dim, seed, skip)
        self.randomize = randomize
        self.shuffle = shuffle
        self.block_size = 1 << max(0, int(block_size - 1).bit_length())
        scramble_rng = _philox(np.random.SeedSequence([seed, SCRAMBLE_TAG])) if randomize else None
        self._engine = qmc.Sobol(d=dim, scramble=randomize, bits=SOBOL_BITS, seed=scramble_rng)
        # the raw sequence starts with the origin, which is never emitted
        start = 0 if randomize else 1
        first_block, self._lead = divmod(skip, self.block_size)
        self._block_index = first_block - 1
        self._buffer = np.empty((0, dim))
        self._offset = 0
        try:
            # fast_forward(0) is a no-op, but some scipy versions reject it
            if start + first_block * self.block_size:
                self._engine.fast_forward(start + first_block * self.block_size)
        except ValueError as e:
            raise StreamExhaustedError(f"Sobol skip {skip} beyond the sequence length") from e

    def _refill(self):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                pts = self._engine.random(self.block_size)
        except ValueError as e:
            raise StreamExhaustedError(f"Sobol index overflow after {self.position} points") from e
        self._block_index += 1
        if self.shuffle:
            order_seed = np.random.SeedSequence([self.seed, ORDER_TAG, self._block_index])
            pts = pts[_philox(order_seed).permutation(len(pts))]
        self._buffer = pts
        self._offset = self._lead
        self._lead = 0

    def _draw(self, n):
        out = np.empty((n, self.dim))
        filled = 0
        while filled < n:
            if self._offset >= len(self._buffer):
                self._refill()
            take = min(n - filled, len(self._buffer) - self._offset)
            out[filled:filled + take] = self._buffer[self._offset:self._offset + take]
            self._offset += take
            filled += take
        return out


def make_stream(kind, dim: int, seed: int = 0, skip: int = 0,
                block_size: int = DEFAULT_BLOCK_SIZE, randomize: bool = True,
                shuffle: bool = False) -> UniformStream:
    """Stream factory. `randomize` and `shuffle` only apply to Sobol streams."""
    kind = StreamKind(kind)
    logger.debug("creating %s stream: dim=%d seed=%d skip=%d", kind.value, dim, seed, skip)
    if kind == StreamKind.SRS:
        return SrsStream(dim, seed, skip)
    if kind == StreamKind.LHS:
        return LhsStream(dim, seed, skip, block_size=block_size)
    return SobolStream(dim, seed, skip, block_size=block_size, randomize=randomize, shuffle=shuffle)
