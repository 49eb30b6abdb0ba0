"""Reproducible Brownian paths on a dyadic lattice.

Every random stream is keyed by ``(master_seed, path_index, stream tag, ...)``
and derived through :class:`numpy.random.SeedSequence`, whose hash-based
entropy mixing makes streams for distinct keys statistically independent.
Bit generator is PCG64; Gaussians use numpy's ziggurat ``standard_normal``.
Both are fixed for a given numpy release.

Coarse increments are built by summing adjacent pairs level by level, so a
level-l increment is exactly the sum of its two level-(l+1) children as
computed in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, ResolutionError

MAX_LEVELS = 26

STREAM_INCREMENTS = 0
STREAM_OFFSETS = 1
STREAM_BRIDGE = 2


def derive_rng(master_seed: int, path_index: int, *key: int) -> np.random.Generator:
    """Independent generator for one (seed, path, stream...) key."""
    if master_seed < 0 or path_index < 0:
        raise ConfigurationError("master_seed and path_index must be nonnegative")
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(path_index), *map(int, key)])
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class BrownianLattice:
    t0: float
    t_end: float
    levels: int
    increments: np.ndarray
    master_seed: int = 0
    path_index: int = 0
    _pyramid: dict = field(default_factory=dict, init=False, repr=False)

    @property
    def fine_dt(self) -> float:
        return (self.t_end - self.t0) / 2 ** self.levels

    def coarsen(self, level: int) -> np.ndarray:
        return coarsen(self, level)

    def path(self, level: int | None = None) -> np.ndarray:
        """B(t_j) - B(t0) on the level grid, starting with 0."""
        inc = coarsen(self, self.levels if level is None else level)
        return np.concatenate([[0.0], np.cumsum(inc)])


def generate(master_seed: int, path_index: int, levels: int,
             t0: float = 0.0, t_end: float = 1.0) -> BrownianLattice:
    """Fine lattice with 2**levels i.i.d. N(0, (t_end - t0) / 2**levels) increments."""
    if not (isinstance(levels, (int, np.integer)) and 0 <= levels <= MAX_LEVELS):
        raise ConfigurationError(f"levels must be an integer in [0, {MAX_LEVELS}], got {levels}")
    if not t0 < t_end:
        raise ConfigurationError(f"need t0 < t_end, got [{t0}, {t_end}]")
    rng = derive_rng(master_seed, path_index, STREAM_INCREMENTS)
    n = 2 ** levels
    inc = rng.standard_normal(n) * math.sqrt((t_end - t0) / n)
    inc.setflags(write=False)
    return BrownianLattice(t0, t_end, int(levels), inc, master_seed, path_index)


def coarsen(lattice: BrownianLattice, level: int) -> np.ndarray:
    """Increments over the 2**level equal cells, by pairwise summation."""
    if not 0 <= level <= lattice.levels:
        raise ResolutionError(f"level {level} outside [0, {lattice.levels}]")
    cache = lattice._pyramid
    if level not in cache:
        if level == lattice.levels:
            cache[level] = lattice.increments
        else:
            finer = coarsen(lattice, level + 1)
            out = finer[0::2] + finer[1::2]
            out.setflags(write=False)
            cache[level] = out
    return cache[level]


def coarsen_batch(increments: np.ndarray, level: int) -> np.ndarray:
    """Same pairwise tree as :func:`coarsen` for a (paths, 2**L) array."""
    out = increments
    while out.shape[-1] > 2 ** level:
        out = out[..., 0::2] + out[..., 1::2]
    return out


def generate_batch(master_seed: int, path_indices, levels: int,
                   t0: float = 0.0, t_end: float = 1.0) -> np.ndarray:
    """Fine increments of several paths stacked as rows."""
    return np.stack([generate(master_seed, int(i), levels, t0, t_end).increments
                     for i in path_indices])


@dataclass(frozen=True, eq=False)
class UniformOffsets:
    values: np.ndarray
    master_seed: int = 0
    path_index: int = 0


def offsets(master_seed: int, path_index: int, n: int) -> UniformOffsets:
    """n i.i.d. U(0,1) offsets, strictly inside (0, 1).

    Keyed by the step count so runs at different step sizes draw separate
    streams; independent of the increment stream.
    """
    rng = derive_rng(master_seed, path_index, STREAM_OFFSETS, n)
    k = rng.integers(0, 2 ** 53, size=n, dtype=np.int64)
    vals = (k.astype(float) + 0.5) * 2.0 ** -53
    vals.setflags(write=False)
    return UniformOffsets(vals, master_seed, path_index)


def bridge_normals(master_seed: int, path_index: int, n: int) -> np.ndarray:
    """Auxiliary standard normals for bridge sampling on an n-step run."""
    return derive_rng(master_seed, path_index, STREAM_BRIDGE, n).standard_normal(n)


def bridge_sample(endpoint_increment, tau, dt, z):
    """B(t_i + tau dt) - B(t_i) given B(t_i + dt) - B(t_i) = endpoint_increment.

    Conditional mean tau * W and variance tau (1 - tau) dt; ``z`` is the
    auxiliary standard normal.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any((tau <= 0) | (tau >= 1)):
        raise DomainError("bridge offset tau must lie strictly inside (0, 1)")
    return tau * endpoint_increment + np.sqrt(tau * (1.0 - tau) * dt) * z
