"""Concrete minimal flows: rotations, torus skew products, Sturmian shifts, finite permutations.

Every system acts by T = Z^k on a phase space whose points are 1-d numpy
arrays of length ``point_dim``. All action and metric methods are vectorized:
they take stacks of group elements ``(..., k)`` and points ``(..., m)`` and
broadcast over the leading axes.

Torus coordinates live in [0, 1). Products ``n * a mod 1`` are evaluated with
:func:`frac_mul`, which is exact up to a couple of ulps for |n| < 2**35, so
group laws hold to ~1e-15 even for large group elements.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
KINDS = ("rotation", "torus_rotation", "skew_product", "sturmian", "finite_perm")


class SystemMismatch(ValueError):
    """Raised on a point/system mismatch or an invalid system description."""


def _split18(a: np.ndarray) -> list[np.ndarray]:
    # three chunks of at most 18 significant bits each; they sum to ``a`` exactly
    parts = []
    r = np.asarray(a, dtype=np.float64)
    for _ in range(3):
        _, e = np.frexp(r)
        scale = np.ldexp(1.0, 18 - e)
        hi = np.floor(r * scale) / scale
        parts.append(hi)
        r = r - hi
    return parts


def frac_mul(n, a) -> np.ndarray:
    """``n * a mod 1`` for integer ``n`` (|n| < 2**35) and real ``a``, without cancellation loss."""
    n = np.asarray(n, dtype=np.float64)
    a = np.mod(np.asarray(a, dtype=np.float64), 1.0)
    acc = np.zeros(np.broadcast_shapes(n.shape, a.shape))
    for part in _split18(a):
        acc = acc + np.mod(n * part, 1.0)
    return np.mod(acc, 1.0)


def wrap(x) -> np.ndarray:
    out = np.mod(x, 1.0)
    # np.mod can return 1.0 for tiny negative inputs
    return np.where(out >= 1.0, 0.0, out)


def circle_dist(a, b) -> np.ndarray:
    r = np.mod(np.asarray(a) - np.asarray(b), 1.0)
    return np.minimum(r, 1.0 - r)


def continued_fraction(alpha: float, terms: int = 12) -> list[int]:
    x = Fraction(alpha)
    out = []
    for _ in range(terms):
        q = math.floor(x)
        out.append(q)
        x -= q
        if x == 0:
            break
        x = 1 / x
    return out


def convergents(alpha: float, terms: int = 12) -> list[Fraction]:
    h0, h1, k0, k1 = 0, 1, 1, 0
    out = []
    for a in continued_fraction(alpha, terms):
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        out.append(Fraction(h1, k1))
    return out


class System:
    """Base class. Subclasses set ``kind``, ``rank`` (k) and ``point_dim`` (m)."""

    kind = "abstract"
    rank = 1
    point_dim = 1
    dtype = np.float64
    isometric = False
    # the factor map is 1-Lipschitz onto an isometric factor
    factor_lipschitz = False

    def act_many(self, ts, ps) -> np.ndarray:
        raise NotImplementedError

    def metric_many(self, ps, qs) -> np.ndarray:
        raise NotImplementedError

    def random_points(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def config(self) -> dict:
        raise NotImplementedError

    # distance between representations; equals the metric except for symbolic points
    def rep_distance_many(self, ps, qs) -> np.ndarray:
        return self.metric_many(ps, qs)

    @property
    def factor(self) -> "System | None":
        return None

    def factor_many(self, ps) -> np.ndarray:
        raise SystemMismatch(f"{self.kind} system has no declared factor")

    def factor_modulus(self, delta: float) -> float:
        """Bound on the factor distance of points closer than ``delta`` upstairs."""
        raise SystemMismatch(f"{self.kind} system has no declared factor")

    def check_points(self, ps) -> np.ndarray:
        ps = np.asarray(ps, dtype=self.dtype)
        if ps.ndim == 0 or ps.shape[-1] != self.point_dim:
            raise SystemMismatch(
                f"{self.kind} points have {self.point_dim} components, got shape {ps.shape}"
            )
        return ps

    def check_elements(self, ts) -> np.ndarray:
        ts = np.asarray(ts)
        if ts.ndim == 0:
            ts = ts[None]
        if not np.issubdtype(ts.dtype, np.integer):
            if not np.all(np.equal(np.mod(ts, 1), 0)):
                raise SystemMismatch("group elements must be integer vectors")
            ts = ts.astype(np.int64)
        if ts.shape[-1] != self.rank:
            raise SystemMismatch(f"group elements of {self.kind} have rank {self.rank}, got {ts.shape}")
        return ts

    def act(self, t, p) -> np.ndarray:
        return self.act_many(self.check_elements(t), self.check_points(p))

    def metric(self, p, q) -> float:
        return float(self.metric_many(self.check_points(p), self.check_points(q)))

    def factor_map(self, p) -> np.ndarray:
        return self.factor_many(self.check_points(p))

    def identity(self) -> np.ndarray:
        return np.zeros(self.rank, dtype=np.int64)

    def describe(self) -> str:
        return json.dumps(self.config(), sort_keys=True)


class TorusRotation(System):
    """Z^k acting on T^m by ``x -> x + sum_i t_i * alphas[i]``."""

    isometric = True

    def __init__(self, alphas):
        a = np.atleast_2d(np.asarray(alphas, dtype=np.float64))
        if a.ndim != 2:
            raise SystemMismatch("alphas must be a (k, m) array")
        self.alphas = np.mod(a, 1.0)
        self.rank, self.point_dim = self.alphas.shape
        self.kind = "rotation" if self.point_dim == 1 else "torus_rotation"
        self.convergents = [convergents(float(v)) for v in self.alphas.ravel()]

    def act_many(self, ts, ps):
        ts = np.asarray(ts)
        out = np.asarray(ps, dtype=np.float64)
        for i in range(self.rank):
            out = out + frac_mul(ts[..., i : i + 1], self.alphas[i])
        return wrap(out)

    def metric_many(self, ps, qs):
        return circle_dist(ps, qs).max(axis=-1)

    def random_points(self, rng, n):
        return rng.random((n, self.point_dim))

    def config(self):
        alpha = self.alphas[0, 0] if self.alphas.size == 1 else self.alphas.tolist()
        return {"version": SCHEMA_VERSION, "kind": self.kind, "alpha": alpha, "rank": self.rank}


class SkewProduct(System):
    """The 2-step nilsystem model ``(x, y) -> (x + a, y + 2x + a)`` on T^2 (k = 1).

    The n-th iterate is ``(x + n a, y + 2 n x + n^2 a)``; :meth:`act_many`
    uses this closed form, valid for |n| < 2**26.
    """

    kind = "skew_product"
    rank = 1
    point_dim = 2
    factor_lipschitz = True

    def __init__(self, alpha: float = GOLDEN):
        self.alpha = float(np.mod(alpha, 1.0))
        self.convergents = convergents(self.alpha)
        self._base = TorusRotation([[self.alpha]])

    def act_many(self, ts, ps):
        n = np.asarray(ts)[..., 0].astype(np.float64)
        ps = np.asarray(ps, dtype=np.float64)
        x, y = ps[..., 0], ps[..., 1]
        nx = wrap(x + frac_mul(n, self.alpha))
        ny = wrap(y + frac_mul(2.0 * n, x) + frac_mul(n * n, self.alpha))
        return np.stack([nx, ny], axis=-1)

    def step(self, p):
        """One application of the generator, written out directly."""
        x, y = np.asarray(p, dtype=np.float64)
        return wrap(np.array([x + self.alpha, y + 2.0 * x + self.alpha]))

    def metric_many(self, ps, qs):
        return circle_dist(ps, qs).max(axis=-1)

    def random_points(self, rng, n):
        return rng.random((n, 2))

    @property
    def factor(self):
        return self._base

    def factor_many(self, ps):
        return np.asarray(ps, dtype=np.float64)[..., :1].copy()

    def factor_modulus(self, delta):
        return float(delta)

    def config(self):
        return {"version": SCHEMA_VERSION, "kind": self.kind, "alpha": self.alpha, "rank": 1}


class Sturmian(System):
    """The Sturmian shift coding the rotation by ``alpha``.

    A point is stored as ``[theta, side]``: its symbol at position n is 1 iff
    ``theta + n alpha mod 1`` lies in ``[1 - alpha, 1)``. On the orbit of the
    cut points the coding is taken as the one-sided limit from the right
    (side = +1) or the left (side = -1); this is how the two codings of an
    asymptotic pair are told apart. Windows cover positions ``-W/2 .. W/2 - 1``
    and are rendered on demand, so shifting never loses symbols.

    The metric is ``2**-k`` with k the smallest |n| at which the windows
    differ, and 0 when the windows agree.
    """

    kind = "sturmian"
    rank = 1
    point_dim = 2
    boundary_tol = 1e-9

    def __init__(self, alpha: float = GOLDEN, window: int = 32):
        self.alpha = float(np.mod(alpha, 1.0))
        if window < 2 or window % 2:
            raise SystemMismatch("window length must be an even integer >= 2")
        self.window = int(window)
        self.positions = np.arange(-self.window // 2, self.window // 2)
        self.convergents = convergents(self.alpha)
        self._base = TorusRotation([[self.alpha]])

    def act_many(self, ts, ps):
        ps = np.asarray(ps, dtype=np.float64)
        n = np.asarray(ts)[..., 0]
        theta = wrap(ps[..., 0] + frac_mul(n, self.alpha))
        side = np.broadcast_to(ps[..., 1], theta.shape)
        return np.stack([theta, side], axis=-1)

    def render(self, ps) -> np.ndarray:
        """Boolean windows of shape ``(..., W)``."""
        ps = np.asarray(ps, dtype=np.float64)
        theta = ps[..., 0:1]
        side = ps[..., 1:2]
        r = wrap(theta + frac_mul(self.positions, self.alpha))
        cut = 1.0 - self.alpha
        sym = r >= cut
        at_zero = circle_dist(r, 0.0) < self.boundary_tol
        at_cut = circle_dist(r, cut) < self.boundary_tol
        sym = np.where(at_zero, side < 0, sym)
        sym = np.where(at_cut, side > 0, sym)
        return sym

    def metric_many(self, ps, qs):
        diff = self.render(ps) != self.render(qs)
        absn = np.abs(self.positions).astype(np.float64)
        k = np.where(diff, absn, np.inf).min(axis=-1)
        return np.where(np.isinf(k), 0.0, np.exp2(-k))

    def rep_distance_many(self, ps, qs):
        ps = np.asarray(ps, dtype=np.float64)
        qs = np.asarray(qs, dtype=np.float64)
        d = circle_dist(ps[..., 0], qs[..., 0])
        return np.where(ps[..., 1] == qs[..., 1], d, np.inf)

    def random_points(self, rng, n):
        return np.stack([rng.random(n), np.ones(n)], axis=-1)

    def point(self, theta: float, side: int = 1) -> np.ndarray:
        return np.array([float(np.mod(theta, 1.0)), 1.0 if side >= 0 else -1.0])

    @property
    def factor(self):
        return self._base

    def factor_many(self, ps):
        return np.asarray(ps, dtype=np.float64)[..., :1].copy()

    def cut_points(self, k: int) -> np.ndarray:
        """Sorted angles where the coding of positions |n| < k changes."""
        # position n switches at theta = -n alpha and at theta = -(n + 1) alpha
        m = np.arange(-(k - 1), k + 1)
        return np.unique(wrap(-frac_mul(m, self.alpha)))

    def factor_modulus(self, delta):
        # points closer than delta share positions |n| < k, hence one cylinder arc
        if delta > 1.0:
            return 0.5
        k = max(1, int(math.ceil(-math.log2(delta))))
        k = min(k, self.window // 2)
        cuts = self.cut_points(k)
        gaps = np.diff(np.concatenate([cuts, [cuts[0] + 1.0]]))
        return float(min(0.5, gaps.max()))

    def config(self):
        return {
            "version": SCHEMA_VERSION,
            "kind": self.kind,
            "alpha": self.alpha,
            "rank": 1,
            "window": self.window,
        }


class FinitePerm(System):
    """Commuting permutations of {0..n-1} generating a Z^k action.

    Points are state indices stored as length-1 integer arrays; the metric is
    discrete.
    """

    kind = "finite_perm"
    point_dim = 1
    dtype = np.int64
    isometric = True

    def __init__(self, perms, minimal: bool = True):
        perms = np.atleast_2d(np.asarray(perms, dtype=np.int64))
        self.n = perms.shape[1]
        self.rank = perms.shape[0]
        for p in perms:
            if sorted(p.tolist()) != list(range(self.n)):
                raise SystemMismatch(f"not a permutation of {self.n} states: {p.tolist()}")
        for i in range(self.rank):
            for j in range(i):
                if not np.array_equal(perms[i][perms[j]], perms[j][perms[i]]):
                    raise SystemMismatch("generators must commute (T is abelian)")
        self.perms = perms
        self.minimal = minimal
        self._powers = [self._power_table(p) for p in perms]
        if minimal and len(self.orbit(0)) != self.n:
            raise SystemMismatch("declared minimal, but the action is not transitive")

    @staticmethod
    def _power_table(p):
        rows = [np.arange(len(p))]
        while True:
            nxt = p[rows[-1]]
            if np.array_equal(nxt, rows[0]):
                return np.array(rows)
            rows.append(nxt)

    def orbit(self, s: int) -> set[int]:
        seen, todo = {int(s)}, [int(s)]
        while todo:
            a = todo.pop()
            for p in self.perms:
                b = int(p[a])
                if b not in seen:
                    seen.add(b)
                    todo.append(b)
        return seen

    def act_many(self, ts, ps):
        ts = np.asarray(ts)
        ps = np.asarray(ps, dtype=np.int64)
        shape = np.broadcast_shapes(ts.shape[:-1], ps.shape[:-1])
        out = np.broadcast_to(ps[..., 0], shape).copy()
        for i, table in enumerate(self._powers):
            e = np.mod(np.broadcast_to(ts[..., i], shape), len(table))
            out = table[e, out]
        return out[..., None]

    def metric_many(self, ps, qs):
        return (np.asarray(ps)[..., 0] != np.asarray(qs)[..., 0]).astype(np.float64)

    def random_points(self, rng, n):
        return rng.integers(0, self.n, size=(n, 1))

    def config(self):
        return {
            "version": SCHEMA_VERSION,
            "kind": self.kind,
            "rank": self.rank,
            "perms": self.perms.tolist(),
            "minimal": self.minimal,
        }


def cyclic(n: int) -> FinitePerm:
    return FinitePerm([np.roll(np.arange(n), -1)])


def _alpha_default(cfg):
    a = cfg.get("alpha", GOLDEN)
    if isinstance(a, str):
        raise SystemMismatch("alpha must be numeric")
    return a


def system_from_config(cfg: dict) -> System:
    """Build a system from its config mapping ``{kind, alpha, rank, window, seed, ...}``."""
    version = cfg.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SystemMismatch(f"unsupported system schema version {version}")
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise SystemMismatch(f"unknown system kind {kind!r}; expected one of {KINDS}")
    if kind == "rotation":
        a = np.atleast_1d(np.asarray(_alpha_default(cfg), dtype=np.float64))
        rank = int(cfg.get("rank", a.size))
        if a.size != rank:
            raise SystemMismatch(f"rotation of rank {rank} needs {rank} alphas")
        sys = TorusRotation(a.reshape(rank, 1))
    elif kind == "torus_rotation":
        a = np.asarray(cfg.get("alpha", [GOLDEN, math.sqrt(2.0) - 1.0]), dtype=np.float64)
        sys = TorusRotation(a if a.ndim == 2 else a[None, :])
        if "rank" in cfg and int(cfg["rank"]) != sys.rank:
            raise SystemMismatch(f"rank {cfg['rank']} does not match alpha shape {a.shape}")
    elif kind == "skew_product":
        sys = SkewProduct(float(_alpha_default(cfg)))
    elif kind == "sturmian":
        sys = Sturmian(float(_alpha_default(cfg)), int(cfg.get("window", 32)))
    else:
        if "perms" in cfg:
            sys = FinitePerm(cfg["perms"], minimal=bool(cfg.get("minimal", True)))
        else:
            sys = cyclic(int(cfg.get("n", 5)))
    if kind in ("skew_product", "sturmian") and int(cfg.get("rank", 1)) != 1:
        raise SystemMismatch(f"{kind} systems have rank 1")
    return sys


def load_config_file(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    return tomllib.loads(text)


def load_system(path) -> System:
    cfg = load_config_file(path)
    return system_from_config(cfg.get("system", cfg))
