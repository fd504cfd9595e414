"""Subset-indexed coordinates of the cube space X^[d].

Coordinates of a cube point are stored in ascending mask order: position
``mask`` holds the coordinate indexed by the subset whose members are the
set bits of ``mask`` (bit ``i - 1`` stands for element ``i``). A phase point
is a 1-d numpy array, so a cube point wraps an array of shape ``(2**d, m)``.

The zero-dimensional cube X^[0] is just X; it is represented by a bare phase
point and never by a :class:`CubePoint`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

MAX_DIM = 12


class DimensionError(ValueError):
    pass


def check_dim(d: int, allow_zero: bool = False) -> int:
    d = int(d)
    lo = 0 if allow_zero else 1
    if d < lo:
        raise DimensionError(f"d must be >= {lo}, got {d}")
    if d > MAX_DIM:
        raise DimensionError(f"d={d} exceeds the cube dimension cap {MAX_DIM}")
    return d


@dataclass(frozen=True, order=True)
class SubsetIndex:
    """A subset of {1, ..., dim} encoded as a bit mask."""

    mask: int
    dim: int

    def __post_init__(self):
        if self.dim < 0 or not 0 <= self.mask < (1 << self.dim):
            raise ValueError(f"mask {self.mask} out of range for dim {self.dim}")

    @classmethod
    def from_members(cls, members: Iterable[int], dim: int) -> "SubsetIndex":
        mask = 0
        for i in members:
            if not 1 <= i <= dim:
                raise ValueError(f"element {i} not in {{1..{dim}}}")
            mask |= 1 << (i - 1)
        return cls(mask, dim)

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(i + 1 for i in range(self.dim) if self.mask >> i & 1)

    def __contains__(self, i: int) -> bool:
        return 1 <= i <= self.dim and bool(self.mask >> (i - 1) & 1)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def is_empty(self) -> bool:
        return self.mask == 0


def all_subsets(d: int) -> list[SubsetIndex]:
    return [SubsetIndex(mask, d) for mask in range(1 << d)]


@lru_cache(maxsize=None)
def membership_matrix(d: int) -> np.ndarray:
    """0/1 matrix of shape (2**d, d); row ``mask`` flags the members of the subset."""
    masks = np.arange(1 << d)[:, None]
    out = (masks >> np.arange(d)[None, :]) & 1
    out.setflags(write=False)
    return out


def _frozen(a) -> np.ndarray:
    a = np.array(a, copy=True)
    if a.ndim == 1:
        a = a[:, None]
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CubePoint:
    """A point of X^[d]: ``coords[mask]`` is the coordinate indexed by ``mask``."""

    dim: int
    coords: np.ndarray

    def __post_init__(self):
        check_dim(self.dim)
        coords = _frozen(self.coords)
        if coords.shape[0] != 1 << self.dim:
            raise DimensionError(
                f"a {self.dim}-cube needs {1 << self.dim} coordinates, got {coords.shape[0]}"
            )
        object.__setattr__(self, "coords", coords)

    def __eq__(self, other):
        if not isinstance(other, CubePoint):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.dim, self.coords.tobytes()))

    def __getitem__(self, eps) -> np.ndarray:
        return project_coord(self, eps)


@dataclass(frozen=True, eq=False)
class StarPoint:
    """A point of X_*^[d]: the cube point without its empty-set coordinate.

    ``coords[mask - 1]`` is the coordinate indexed by ``mask``.
    """

    dim: int
    coords: np.ndarray

    def __post_init__(self):
        check_dim(self.dim)
        coords = _frozen(self.coords)
        if coords.shape[0] != (1 << self.dim) - 1:
            raise DimensionError(
                f"a {self.dim}-star needs {(1 << self.dim) - 1} coordinates, got {coords.shape[0]}"
            )
        object.__setattr__(self, "coords", coords)

    def __eq__(self, other):
        if not isinstance(other, StarPoint):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.dim, self.coords.tobytes()))


def _mask_of(eps, d: int) -> int:
    if isinstance(eps, SubsetIndex):
        if eps.dim != d:
            raise DimensionError(f"subset of dim {eps.dim} used on a {d}-cube")
        return eps.mask
    mask = int(eps)
    if not 0 <= mask < 1 << d:
        raise DimensionError(f"mask {mask} out of range for a {d}-cube")
    return mask


def project_coord(c: CubePoint, eps) -> np.ndarray:
    return c.coords[_mask_of(eps, c.dim)]


def make_diagonal(x, d: int) -> CubePoint:
    d = check_dim(d)
    x = np.atleast_1d(np.asarray(x))
    return CubePoint(d, np.broadcast_to(x, (1 << d, x.shape[0])))


def make_star_diagonal(x, d: int) -> StarPoint:
    d = check_dim(d)
    x = np.atleast_1d(np.asarray(x))
    return StarPoint(d, np.broadcast_to(x, ((1 << d) - 1, x.shape[0])))


def project_star(c: CubePoint) -> StarPoint:
    return StarPoint(c.dim, c.coords[1:])


def unstar(x, s: StarPoint) -> CubePoint:
    """Reattach an empty-set coordinate ``x`` to a star point."""
    x = np.atleast_1d(np.asarray(x, dtype=s.coords.dtype))
    return CubePoint(s.dim, np.vstack([x[None, :], s.coords]))


def split(c: CubePoint):
    """Return ``(x', x'')``: the halves with bit d clear and with bit d set.

    For d = 1 the halves are bare phase points (X^[0] = X).
    """
    half = 1 << (c.dim - 1)
    lo, hi = c.coords[:half], c.coords[half:]
    if c.dim == 1:
        return lo[0].copy(), hi[0].copy()
    return CubePoint(c.dim - 1, lo), CubePoint(c.dim - 1, hi)


def join(first, second) -> CubePoint:
    """Inverse of :func:`split`."""
    if isinstance(first, CubePoint) != isinstance(second, CubePoint):
        raise DimensionError("join needs two cube points or two phase points")
    if isinstance(first, CubePoint):
        if first.dim != second.dim:
            raise DimensionError("halves have different dimensions")
        return CubePoint(first.dim + 1, np.vstack([first.coords, second.coords]))
    a = np.atleast_1d(np.asarray(first))
    b = np.atleast_1d(np.asarray(second))
    return CubePoint(1, np.vstack([a, b]))


def split_positions(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Positions in the d-cube read by the first and second half, indexed by the (d-1)-mask."""
    d = check_dim(d)
    masks = np.arange(1 << (d - 1))
    return masks, masks | (1 << (d - 1))


# batched helpers for stacks of cube points shaped (..., 2**d, m)

def diagonal_array(points: np.ndarray, d: int) -> np.ndarray:
    points = np.asarray(points)
    return np.repeat(points[..., None, :], 1 << d, axis=-2)


def cube_from_array(a: np.ndarray) -> CubePoint:
    n = a.shape[-2]
    d = n.bit_length() - 1
    if 1 << d != n:
        raise DimensionError(f"{n} coordinates is not a power of two")
    return CubePoint(d, a)
