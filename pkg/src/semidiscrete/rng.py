"""Reproducible Brownian increments, one counter-based stream per path.

Each path owns a Philox4x64-10 generator keyed by (master_seed, path_index)
with the counter starting at zero. Standard normals come from NumPy's
ziggurat sampler (``Generator.standard_normal``) and are scaled by
sqrt(delta). Path i's draws therefore never depend on how many draws any
other path consumed, nor on the order in which paths are generated.

Sampled increments are rounded to integer multiples of ``QUANTUM`` = 2**-40.
All partial sums of such numbers below 2**13 in magnitude are exact in
double precision, so block sums (coarsening) and prefix sums (Brownian path
values) do not depend on summation order. The rounding perturbs each
increment by at most 2**-41.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Tuple, Union

import numpy as np

from .core import InvalidArgumentError, TimeGrid

QUANTUM_EXPONENT = 40
QUANTUM = 2.0 ** -QUANTUM_EXPONENT
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    path_index: int

    @property
    def key(self) -> Tuple[int, int]:
        return (self.master_seed & _MASK64, self.path_index & _MASK64)

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(key=np.array(self.key, dtype=np.uint64)))

    def standard_normal(self, size: int) -> np.ndarray:
        return self.generator().standard_normal(size)


def derive_stream(master_seed: int, path_index: int) -> RngStream:
    if path_index < 0:
        raise InvalidArgumentError("path_index must be nonnegative")
    return RngStream(int(master_seed), int(path_index))


@dataclass(frozen=True)
class BrownianIncrements:
    """Increments dW_k = W(t_{k+1}) - W(t_k), shape (n,) or (M, n)."""

    grid: TimeGrid
    dW: np.ndarray
    master_seed: int = 0
    path_index: Union[int, np.ndarray] = 0
    level: int = 1

    def __post_init__(self):
        if self.dW.shape[-1] != self.grid.n:
            raise InvalidArgumentError(
                f"increment count {self.dW.shape[-1]} does not match grid steps {self.grid.n}"
            )

    @property
    def n_paths(self) -> int:
        return 1 if self.dW.ndim == 1 else self.dW.shape[0]


def quantize(x: np.ndarray) -> np.ndarray:
    return np.ldexp(np.rint(np.ldexp(x, QUANTUM_EXPONENT)), -QUANTUM_EXPONENT)


def sample_increments(grid: TimeGrid, stream: RngStream) -> BrownianIncrements:
    dW = quantize(np.sqrt(grid.delta) * stream.standard_normal(grid.n))
    return BrownianIncrements(grid, dW, stream.master_seed, stream.path_index, 1)


def sample_batch(grid: TimeGrid, master_seed: int, path_indices: Iterable[int]) -> BrownianIncrements:
    """Increments for several paths stacked as rows, one stream per row."""
    idx = np.asarray(list(path_indices), dtype=np.int64)
    dW = np.empty((idx.size, grid.n))
    for row, i in enumerate(idx):
        dW[row] = sample_increments(grid, derive_stream(master_seed, int(i))).dW
    return BrownianIncrements(grid, dW, int(master_seed), idx, 1)


def coarsen(incs: BrownianIncrements, factor: int) -> BrownianIncrements:
    """Block sums of `factor` consecutive increments, ascending order."""
    n = incs.grid.n
    if factor < 1 or n % factor:
        raise InvalidArgumentError(f"factor {factor} does not divide step count {n}")
    if factor == 1:
        return incs
    blocks = incs.dW.reshape(incs.dW.shape[:-1] + (n // factor, factor))
    out = blocks[..., 0].copy()
    for j in range(1, factor):
        out += blocks[..., j]
    grid = TimeGrid(incs.grid.T, n // factor)
    return BrownianIncrements(grid, out, incs.master_seed, incs.path_index, incs.level * factor)


def cumulative(incs: BrownianIncrements) -> np.ndarray:
    """Brownian path at the nodes: W_0 = 0, W_{k+1} = W_k + dW_k."""
    dW = incs.dW
    W = np.zeros(dW.shape[:-1] + (dW.shape[-1] + 1,))
    np.cumsum(dW, axis=-1, out=W[..., 1:])
    return W


def dump_csv(incs: BrownianIncrements, path) -> None:
    """Debug dump of a single path's increments (columns k, dW)."""
    if incs.dW.ndim != 1:
        raise InvalidArgumentError("dump_csv takes a single path")
    with open(path, "w") as fh:
        fh.write("k,dW\n")
        for k, v in enumerate(incs.dW):
            fh.write(f"{k},{v:.17g}\n")
