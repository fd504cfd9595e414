"""Face, diagonal and total group actions on cube points.

T = Z^k is written additively, so the product of the t_i over a subset is a
sum of integer vectors. A face element is an integer array of shape (d, k),
a total element adds one more row for the diagonal part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube_index import (
    CubePoint,
    DimensionError,
    SubsetIndex,
    check_dim,
    join,
    membership_matrix,
    split,
)
from .systems import System

GroupElement = np.ndarray


def as_group_element(t, k: int) -> GroupElement:
    t = np.atleast_1d(np.asarray(t, dtype=np.int64))
    if t.shape != (k,):
        raise DimensionError(f"group element must have {k} components, got {t.shape}")
    return t


@dataclass(frozen=True, eq=False)
class FaceElement:
    """``ts[i - 1]`` is the group element t_i acting along direction i."""

    ts: np.ndarray

    def __post_init__(self):
        ts = np.array(self.ts, dtype=np.int64)
        if ts.ndim == 1:
            ts = ts[:, None]
        if ts.ndim != 2 or ts.shape[0] < 1:
            raise DimensionError(f"face element needs shape (d, k), got {ts.shape}")
        ts.setflags(write=False)
        object.__setattr__(self, "ts", ts)

    @property
    def dim(self) -> int:
        return self.ts.shape[0]

    @property
    def rank(self) -> int:
        return self.ts.shape[1]

    @classmethod
    def identity(cls, d: int, k: int = 1) -> "FaceElement":
        return cls(np.zeros((d, k), dtype=np.int64))

    def __add__(self, other: "FaceElement") -> "FaceElement":
        if self.ts.shape != other.ts.shape:
            raise DimensionError("face elements of different shapes")
        return FaceElement(self.ts + other.ts)

    def __neg__(self) -> "FaceElement":
        return FaceElement(-self.ts)

    def __eq__(self, other):
        return isinstance(other, FaceElement) and np.array_equal(self.ts, other.ts)

    def __hash__(self):
        return hash(self.ts.tobytes())

    def drop_last(self) -> "FaceElement | None":
        return FaceElement(self.ts[:-1]) if self.dim > 1 else None


@dataclass(frozen=True, eq=False)
class TotalElement:
    face: FaceElement
    diag: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "diag", as_group_element(self.diag, self.face.rank))

    @property
    def dim(self) -> int:
        return self.face.dim

    @classmethod
    def from_array(cls, a) -> "TotalElement":
        a = np.asarray(a, dtype=np.int64)
        if a.ndim == 1:
            a = a[:, None]
        return cls(FaceElement(a[:-1]), a[-1])

    def as_array(self) -> np.ndarray:
        return np.vstack([self.face.ts, self.diag[None, :]])

    def __add__(self, other: "TotalElement") -> "TotalElement":
        return TotalElement(self.face + other.face, self.diag + other.diag)

    def __eq__(self, other):
        return isinstance(other, TotalElement) and np.array_equal(self.as_array(), other.as_array())

    def __hash__(self):
        return hash(self.as_array().tobytes())


def face_coefficient(f: FaceElement, eps) -> GroupElement:
    if isinstance(eps, SubsetIndex):
        if eps.dim != f.dim:
            raise DimensionError(f"subset of dim {eps.dim} vs face element of dim {f.dim}")
        mask = eps.mask
    else:
        mask = int(eps)
        if not 0 <= mask < 1 << f.dim:
            raise DimensionError(f"mask {mask} out of range for dim {f.dim}")
    return face_coefficients(f)[mask]


def face_coefficients(f: FaceElement) -> np.ndarray:
    """All coefficients at once, shape (2**d, k), ascending mask order."""
    return membership_matrix(f.dim) @ f.ts


def coefficient_array(faces: np.ndarray) -> np.ndarray:
    """Batched coefficients: faces (..., d, k) -> (..., 2**d, k)."""
    d = faces.shape[-2]
    return np.einsum("ed,...dk->...ek", membership_matrix(d), faces)


def _check(sys: System, d: int, c: CubePoint):
    if c.dim != d:
        raise DimensionError(f"element of dim {d} applied to a {c.dim}-cube")
    sys.check_points(c.coords)


def face_apply(sys: System, f: FaceElement, c: CubePoint) -> CubePoint:
    _check(sys, f.dim, c)
    if f.rank != sys.rank:
        raise DimensionError(f"face element rank {f.rank} vs system rank {sys.rank}")
    return CubePoint(c.dim, sys.act_many(face_coefficients(f), c.coords))


def diag_apply(sys: System, t, c: CubePoint) -> CubePoint:
    t = as_group_element(t, sys.rank)
    sys.check_points(c.coords)
    return CubePoint(c.dim, sys.act_many(t[None, :], c.coords))


def total_apply(sys: System, g: TotalElement, c: CubePoint) -> CubePoint:
    _check(sys, g.dim, c)
    coeffs = face_coefficients(g.face) + g.diag[None, :]
    return CubePoint(c.dim, sys.act_many(coeffs, c.coords))


def total_array_apply(sys: System, totals: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Batched total action on diagonals: totals (N, d+1, k), points (N, m) -> (N, 2**d, m)."""
    coeffs = coefficient_array(totals[:, :-1]) + totals[:, -1:, :]
    return sys.act_many(coeffs, points[:, None, :])


def face_array_apply(sys: System, faces: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Batched face action on diagonals: faces (N, d, k), points (N, m) -> (N, 2**d, m)."""
    return sys.act_many(coefficient_array(faces), points[:, None, :])


def _rep_equal(sys: System, a, b, tol: float) -> bool:
    return bool(np.all(sys.rep_distance_many(np.asarray(a), np.asarray(b)) <= tol))


def recursion_check(sys: System, f: FaceElement, c: CubePoint, tol: float = 1e-12) -> bool:
    """Compare the split of ``f c`` with (f' c', theta_{t_d} f' c'') computed independently."""
    d = check_dim(c.dim)
    _check(sys, f.dim, c)
    lhs_first, lhs_second = split(face_apply(sys, f, c))
    first, second = split(c)
    t_d = f.ts[-1]
    f_prime = f.drop_last()
    if f_prime is None:
        # X^[0] = X: the 0-dimensional face group is trivial
        rhs_first = first
        rhs_second = sys.act_many(t_d, second)
    else:
        rhs_first = face_apply(sys, f_prime, first).coords
        rhs_second = diag_apply(sys, t_d, face_apply(sys, f_prime, second)).coords
    if d > 1:
        lhs_first, lhs_second = lhs_first.coords, lhs_second.coords
    return _rep_equal(sys, lhs_first, rhs_first, tol) and _rep_equal(sys, lhs_second, rhs_second, tol)


def last_direction_move(sys: System, t, c: CubePoint) -> CubePoint:
    """``(x', x'') -> (x', theta_t x'')``, built from the halves directly."""
    first, second = split(c)
    t = as_group_element(t, sys.rank)
    if c.dim == 1:
        return join(first, sys.act_many(t, second))
    return join(first, diag_apply(sys, t, second))


# enumeration of group elements by sup-norm shells

_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def _splitmix(h: np.ndarray) -> np.ndarray:
    h = h + _GOLD
    h = (h ^ (h >> np.uint64(30))) * _MIX1
    h = (h ^ (h >> np.uint64(27))) * _MIX2
    return h ^ (h >> np.uint64(31))


def shuffle_keys(elements: np.ndarray, seed: int) -> np.ndarray:
    """Pseudo-random sort keys depending only on (seed, element)."""
    h = np.full(len(elements), np.uint64(seed % 2**64), dtype=np.uint64)
    with np.errstate(over="ignore"):
        for col in elements.T:
            h = _splitmix(h ^ col.astype(np.int64).view(np.uint64))
    return h


def _box(n: int, r: int) -> np.ndarray:
    axes = np.arange(-r, r + 1, dtype=np.int64)
    return np.stack(np.meshgrid(*([axes] * n), indexing="ij"), axis=-1).reshape(-1, n)


def _ordered_box(n: int, r: int, seed: int):
    box = _box(n, r)
    shells = np.abs(box).max(axis=1)
    order = np.lexsort((shuffle_keys(box, seed), shells))
    return box[order], shells[order]


def shell(n: int, r: int, seed: int = 0) -> np.ndarray:
    """Elements of Z^n with sup-norm exactly ``r``, shuffled by a key of ``(seed, element)``.

    Shell orders do not depend on how many shells are requested, so
    enumerations with a larger radius extend smaller ones.
    """
    if r == 0:
        return np.zeros((1, n), dtype=np.int64)
    box = _box(n, r)
    s = box[np.abs(box).max(axis=1) == r]
    return s[np.argsort(shuffle_keys(s, seed), kind="stable")]


def shell_size(n: int, r: int) -> int:
    return 1 if r == 0 else (2 * r + 1) ** n - (2 * r - 1) ** n


def radius_for_count(n: int, count: int) -> int:
    r = 0
    while (2 * r + 1) ** n < count:
        r += 1
    return r


def enumerate_elements(n: int, count: int | None = None, radius: int | None = None, seed: int = 0):
    """First ``count`` elements (or all up to ``radius``) of Z^n in shell order.

    Returns ``(elements, shell_index)``.
    """
    if count is None and radius is None:
        raise ValueError("need a count or a radius")
    r = radius if count is None else radius_for_count(n, count)
    if radius is not None:
        r = min(r, radius)
    els, shells = _ordered_box(n, r, seed)
    if count is not None:
        els, shells = els[:count], shells[:count]
    return els, shells


def enumerate_faces(d: int, k: int, count: int | None = None, radius: int | None = None, seed: int = 0):
    els, shells = enumerate_elements(d * k, count, radius, seed)
    return els.reshape(-1, d, k), shells


def enumerate_totals(d: int, k: int, count: int | None = None, radius: int | None = None, seed: int = 0):
    els, shells = enumerate_elements((d + 1) * k, count, radius, seed)
    return els.reshape(-1, d + 1, k), shells
