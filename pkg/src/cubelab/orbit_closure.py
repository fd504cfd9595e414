"""Point-cloud surrogates for Y_x^[d], Q^[d] and Q_x^[d].

Clouds are finite samples of orbit sets; distances between them are
Hausdorff distances for the sup metric over cube coordinates. Everything here
is evidence gathered at a fixed budget, never a proof of a closure property.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .actions import coefficient_array, enumerate_faces, enumerate_totals
from .cube_index import CubePoint, check_dim
from .systems import SkewProduct, System, TorusRotation, wrap

MAGIC = b"CUBE"
DUMP_VERSION = 1
_HEADER = struct.Struct("<4sIII")
SIGMA = 0.01
# (elements per base point, base points) giving ~4e4-point clouds for each recipe
DEFAULT_Q_BUDGETS = {"total": (8000, 5), "face": (400, 100)}


@dataclass
class PointCloud:
    """``points[i]`` is a cube point of shape (2**d, m); ``elements[i]`` produced it.

    ``elements`` rows are face elements (d, k) or total elements (d + 1, k),
    and ``bases[i]`` is the diagonal point they were applied to.
    """

    d: int
    system: str
    points: np.ndarray
    elements: np.ndarray
    bases: np.ndarray
    seed: int = 0
    recipe: str = "face"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.points) != len(self.elements) or len(self.points) != len(self.bases):
            raise ValueError("generator log must match the number of points")
        if self.points.ndim != 3 or self.points.shape[1] != 1 << self.d:
            raise ValueError(f"points must have shape (N, {1 << self.d}, m)")

    def __len__(self):
        return len(self.points)

    def cube(self, i: int) -> CubePoint:
        return CubePoint(self.d, self.points[i])

    def subset(self, keep) -> "PointCloud":
        return PointCloud(
            self.d, self.system, self.points[keep], self.elements[keep], self.bases[keep], self.seed, self.recipe, dict(self.meta)
        )

    def union(self, other: "PointCloud") -> "PointCloud":
        _same(self, other)
        if self.elements.shape[1:] != other.elements.shape[1:]:
            raise ValueError("clouds were generated by different actions")
        return PointCloud(
            self.d,
            self.system,
            np.concatenate([self.points, other.points]),
            np.concatenate([self.elements, other.elements]),
            np.concatenate([self.bases, other.bases]),
            self.seed,
            self.recipe if self.recipe == other.recipe else "mixed",
        )


def _sys_id(sys: System) -> str:
    return sys.describe()


def _same(a: PointCloud, b: PointCloud):
    if a.d != b.d or a.system != b.system:
        raise ValueError("clouds belong to different systems or dimensions")


def sample_Y(sys: System, x, d: int, budget: int, seed: int = 0) -> PointCloud:
    """Face images ``f x^[d]`` for the first ``budget`` enumerated face elements (identity first)."""
    d = check_dim(d)
    if budget < 1:
        raise ValueError("budget must be >= 1")
    x = sys.check_points(x)
    faces, _ = enumerate_faces(d, sys.rank, count=budget, seed=seed)
    pts = sys.act_many(coefficient_array(faces), x[None, None, :])
    assert np.all(sys.rep_distance_many(pts[:, 0], x[None, :]) == 0)
    bases = np.repeat(x[None, :], len(pts), axis=0)
    return PointCloud(d, _sys_id(sys), pts, faces, bases, seed, "face")


def base_points(sys: System, n: int, seed: int = 0) -> np.ndarray:
    """Seeded base points; stratified along the first coordinate of torus systems."""
    rng = np.random.default_rng(seed)
    pts = sys.random_points(rng, n)
    if isinstance(sys, (TorusRotation, SkewProduct)) and n > 0:
        pts[:, 0] = (np.arange(n) + rng.random(n)) / n
    return pts


def sample_Q(
    sys: System,
    d: int,
    budget: int,
    base_samples: int,
    seed: int = 0,
    recipe: str = "total",
    bases=None,
) -> PointCloud:
    """Sampled Q^[d] from ``base_samples`` diagonal points and ``budget`` enumerated elements each.

    ``recipe="total"`` applies G_d elements to diagonals; ``recipe="face"``
    applies F_d elements to the diagonal set. Explicit ``bases`` come first,
    followed by ``base_samples`` seeded base points.
    """
    d = check_dim(d)
    if budget < 1:
        raise ValueError("budget must be >= 1")
    pts = [] if bases is None else [sys.check_points(np.atleast_2d(bases))]
    if base_samples:
        pts.append(base_points(sys, base_samples, seed))
    if not pts:
        raise ValueError("need at least one base point")
    xs = np.concatenate(pts).astype(sys.dtype)
    if recipe == "total":
        els, _ = enumerate_totals(d, sys.rank, count=budget, seed=seed)
        coeffs = coefficient_array(els[:, :-1]) + els[:, -1:, :]
    elif recipe == "face":
        els, _ = enumerate_faces(d, sys.rank, count=budget, seed=seed)
        coeffs = coefficient_array(els)
    else:
        raise ValueError(f"unknown recipe {recipe!r}")
    cloud = sys.act_many(coeffs[None, :, :, :], xs[:, None, None, :])
    n = len(xs) * len(els)
    return PointCloud(
        d,
        _sys_id(sys),
        cloud.reshape(n, 1 << d, -1),
        np.tile(els, (len(xs), 1, 1)),
        np.repeat(xs, len(els), axis=0),
        seed,
        recipe,
    )


def parallelepiped_residual(points: np.ndarray) -> np.ndarray:
    """``x_0 - x_1 - x_2 + x_12`` reduced to the circle distance from 0, per point and component."""
    r = np.mod(points[:, 0] - points[:, 1] - points[:, 2] + points[:, 3], 1.0)
    return np.minimum(r, 1.0 - r)


def _is_torus(sys: System) -> bool:
    return isinstance(sys, (TorusRotation, SkewProduct))


def directed_hausdorff(sys: System, A: PointCloud, B: PointCloud, chunk: int = 2048) -> float:
    """``max_{a in A} min_{b in B}`` of the sup distance."""
    _same(A, B)
    if not len(A):
        return 0.0
    if not len(B):
        return np.inf
    if _is_torus(sys):
        a = wrap(A.points.reshape(len(A), -1))
        b = wrap(B.points.reshape(len(B), -1))
        tree = cKDTree(b, boxsize=1.0)
        dist, _ = tree.query(a, k=1, p=np.inf)
        return float(dist.max())
    best = 0.0
    for lo in range(0, len(A), chunk):
        a = A.points[lo : lo + chunk]
        dist = np.full(len(a), np.inf)
        for blo in range(0, len(B), chunk):
            b = B.points[blo : blo + chunk]
            dd = sys.metric_many(a[:, None], b[None, :]).max(axis=-1)
            dist = np.minimum(dist, dd.min(axis=1))
        best = max(best, float(dist.max()))
    return best


def hausdorff(sys: System, A: PointCloud, B: PointCloud) -> float:
    return max(directed_hausdorff(sys, A, B), directed_hausdorff(sys, B, A))


def minimality_probe(
    sys: System,
    cloud: PointCloud,
    action: str = "face",
    epsilon: float = 0.05,
    probe_budget: int = 2000,
    starts: int = 10,
    targets: int = 50,
    seed: int = 0,
) -> dict:
    """Fraction of (start, target) pairs where the action orbit of start comes epsilon-close to target."""
    rng = np.random.default_rng(seed)
    n = len(cloud)
    if n == 0:
        raise ValueError("empty cloud")
    si = np.sort(rng.choice(n, size=min(starts, n), replace=False))
    ti = np.sort(rng.choice(n, size=min(targets, n), replace=False))
    if action == "face":
        els, _ = enumerate_faces(cloud.d, sys.rank, count=probe_budget, seed=seed)
        coeffs = coefficient_array(els)
    elif action == "total":
        els, _ = enumerate_totals(cloud.d, sys.rank, count=probe_budget, seed=seed)
        coeffs = coefficient_array(els[:, :-1]) + els[:, -1:, :]
    else:
        raise ValueError(f"unknown action {action!r}")
    hits = np.zeros((len(si), len(ti)), dtype=bool)
    for a, s in enumerate(si):
        orbit = sys.act_many(coeffs, cloud.points[s][None])  # (E, 2**d, m)
        for b, t in enumerate(ti):
            dist = sys.metric_many(orbit, cloud.points[t][None]).max(axis=-1)
            hits[a, b] = bool(dist.min() < epsilon)
    frac = float(hits.mean())
    return {
        "tag": "Thm-min",
        "action": action,
        "epsilon": epsilon,
        "probe_budget": probe_budget,
        "starts": si.tolist(),
        "targets": ti.tolist(),
        "fraction": frac,
        "flag": None if frac == 1.0 else "non_minimal_evidence",
    }


@dataclass(frozen=True)
class ScanBudget:
    """Budgets for the generic-equality scan.

    ``y``: face elements per Y cloud; ``q``: total elements per Q base point;
    ``q_bases``: seeded base points added to the grid points; ``sigma``: slab
    half-width for the Q_x surrogate.
    """

    y: int = 2000
    q: int = 8000
    q_bases: int = 200
    sigma: float = SIGMA


def restrict_fiber(sys: System, cloud: PointCloud, x, sigma: float = SIGMA) -> PointCloud:
    """Points whose empty-set coordinate lies within ``sigma`` of x."""
    x = sys.check_points(x)
    keep = sys.rep_distance_many(cloud.points[:, 0], x[None, :]) < sigma
    return cloud.subset(keep)


def generic_equality_scan(sys: System, d: int, x_grid, budget: ScanBudget = ScanBudget(), seed: int = 0) -> dict:
    """Hausdorff distance between sampled Y_x^[d] and the slab surrogate of Q_x^[d] along a grid.

    One Q cloud (total recipe, base points = grid points plus seeded extras) is
    shared by all grid points. The directed distance from Y to Q measures the
    inclusion that always holds; the reverse direction measures equality.
    """
    grid = sys.check_points(np.atleast_2d(x_grid))
    if len(grid) == 0:
        raise ValueError("empty grid")
    Q = sample_Q(sys, d, budget.q, budget.q_bases, seed, "total", bases=grid)
    rows = []
    for x in grid:
        Y = sample_Y(sys, x, d, budget.y, seed)
        Qx = restrict_fiber(sys, Q, x, budget.sigma)
        y_to_q = directed_hausdorff(sys, Y, Qx)
        q_to_y = directed_hausdorff(sys, Qx, Y)
        rows.append({"x": x.tolist(), "q_points": len(Qx), "y_to_q": y_to_q, "q_to_y": q_to_y, "hausdorff": max(y_to_q, q_to_y)})
    h = np.array([r["hausdorff"] for r in rows])
    return {
        "tag": "Thm-min-generic",
        "d": d,
        "sigma": budget.sigma,
        "budget": {"y": budget.y, "q": budget.q, "q_bases": budget.q_bases},
        "seed": seed,
        "rows": rows,
        "max": float(h.max()),
        "median": float(np.median(h)),
    }


# export

def _columns(d: int, m: int) -> list[str]:
    if m == 1:
        return [f"e{mask}" for mask in range(1 << d)]
    return [f"e{mask}_{j}" for mask in range(1 << d) for j in range(m)]


def to_csv(cloud: PointCloud, path) -> None:
    n, size, m = cloud.points.shape
    flat = cloud.points.reshape(n, size * m)
    fmt = "%d" if np.issubdtype(flat.dtype, np.integer) else "%.17g"
    np.savetxt(path, flat, delimiter=",", header=",".join(_columns(cloud.d, m)), comments="", fmt=fmt)


def read_csv(path) -> tuple[int, np.ndarray]:
    """Returns ``(d, points)`` with points shaped (N, 2**d, m)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    size = len({c.split("_")[0] for c in header})
    d = size.bit_length() - 1
    return d, data.reshape(len(data), size, -1)


def to_binary(cloud: PointCloud, path) -> None:
    """16-byte header (magic, version, d, count) then float64 coordinates in mask order."""
    data = np.ascontiguousarray(cloud.points, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, DUMP_VERSION, cloud.d, len(cloud)))
        fh.write(data.tobytes())


def read_binary(path) -> tuple[int, np.ndarray]:
    raw = Path(path).read_bytes()
    magic, version, d, count = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != DUMP_VERSION:
        raise ValueError(f"not a cube dump (magic {magic!r}, version {version})")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    return d, data.reshape(count, 1 << d, -1) if count else data.reshape(0, 1 << d, 0)
