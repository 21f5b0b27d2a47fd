"""Normed-space primitives: vectors, p-norms, radial projection, block sums.

Points are plain tuples of floats throughout the package; the functions here
take either tuples/sequences or numpy arrays (with rows as points).  Only the
l1, l2 and sup norms are supported: they cover both polytopal and smooth unit
balls while keeping nearest-point searches tractable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Default absolute tolerance for floating-point comparisons.  Operations that
# are documented as exact-integer do not use it.
ABS_TOL = 1e-9


class NormKind(str, Enum):
    L1 = "L1"
    L2 = "L2"
    LINF = "LINF"


class Ambient(str, Enum):
    """How block norms combine into the norm of a block sum."""

    SUP_SUM = "SUP"
    L1_SUM = "L1"


def norm_rows(arr, kind: NormKind, axis: int = -1):
    """Norms of the rows (or the given axis) of an array."""
    a = np.abs(np.asarray(arr, dtype=float))
    if kind == NormKind.L1:
        return a.sum(axis=axis)
    if kind == NormKind.L2:
        return np.sqrt((a * a).sum(axis=axis))
    return a.max(axis=axis)


def norm_of(coords, kind: NormKind) -> float:
    """Norm of a single point given as a sequence of coordinates."""
    if kind == NormKind.L1:
        return float(sum(abs(c) for c in coords))
    if kind == NormKind.L2:
        return math.sqrt(sum(c * c for c in coords))
    return float(max(abs(c) for c in coords))


def radial_project_coords(coords, s: float, kind: NormKind) -> tuple:
    """Radial projection onto the ball of radius s.

    Identity inside the ball, radial rescaling to norm s outside.  s = 0 maps
    everything to the origin (including the origin itself).
    """
    if s < 0:
        raise ValueError("radius must be nonnegative")
    pt = tuple(float(c) for c in coords)
    n = norm_of(pt, kind)
    if n <= s:
        return pt
    if s == 0.0:
        return (0.0,) * len(pt)
    return tuple(c * (s / n) for c in pt)


def radial_project_rows(arr, s: float, kind: NormKind) -> np.ndarray:
    """Row-wise radial projection onto the radius-s ball."""
    a = np.asarray(arr, dtype=float)
    n = norm_rows(a, kind)
    out = a.copy()
    outside = n > s
    if np.any(outside):
        if s == 0.0:
            out[outside] = 0.0
        else:
            out[outside] = a[outside] * (s / n[outside])[:, None]
    return out


@dataclass(frozen=True)
class Vector:
    """A point of a concrete normed space: coordinates plus a norm tag."""

    coords: tuple
    norm_kind: NormKind

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if len(coords) < 1:
            raise ValueError("dimension must be at least 1")
        if not all(math.isfinite(c) for c in coords):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def norm(self) -> float:
        return norm_of(self.coords, self.norm_kind)


def norm(x: Vector) -> float:
    return x.norm()


def radial_project(x: Vector, s: float) -> Vector:
    return Vector(radial_project_coords(x.coords, s, x.norm_kind), x.norm_kind)


@dataclass(frozen=True)
class BlockSpace:
    """A finite block sum: ordered (dimension, norm) blocks plus an ambient rule.

    SUP_SUM realizes the c0-like combination of the blocks, L1_SUM the l1
    combination; the natural projections keep the first blocks and zero the
    rest.
    """

    blocks: tuple
    ambient: Ambient = Ambient.SUP_SUM

    def __post_init__(self):
        blocks = tuple((int(d), NormKind(k)) for d, k in self.blocks)
        if len(blocks) < 1:
            raise ValueError("need at least one block")
        if any(d < 1 for d, _ in blocks):
            raise ValueError("block dimensions must be >= 1")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def total_dim(self) -> int:
        return sum(d for d, _ in self.blocks)

    def block_slices(self):
        out, off = [], 0
        for d, _ in self.blocks:
            out.append(slice(off, off + d))
            off += d
        return out

    def combine(self, block_norms) -> float:
        vals = [float(v) for v in block_norms]
        if self.ambient == Ambient.SUP_SUM:
            return max(vals) if vals else 0.0
        return sum(vals)


def block_norms(blocks, space: BlockSpace):
    """Per-block norms and the ambient norm of a block tuple.

    ``blocks`` is one coordinate sequence per block of ``space``; dimensions
    must match the space.
    """
    if len(blocks) != space.n_blocks:
        raise ValueError("block count mismatch")
    per = []
    for coords, (d, kind) in zip(blocks, space.blocks):
        if len(coords) != d:
            raise ValueError("block dimension mismatch")
        per.append(norm_of(coords, kind))
    return per, space.combine(per)
