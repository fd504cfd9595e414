"""Finite transformation semigroups: closure, minimal left ideals, idempotents.

Composition convention: ``(p . q)(x) = p(q(x))``, i.e. ``p . q == p[q]`` as
arrays. This matches the left action ``px`` of an enveloping semigroup, and
it fixes the sidedness of ideals: a left ideal ``L`` satisfies ``S . L <= L``.
Under the opposite convention left and right ideals swap.

Elements are identified by their full tables; there is no word rewriting.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

DEFAULT_CAP = 10**6


class ClosureCapExceeded(RuntimeError):
    def __init__(self, cap: int, size: int):
        super().__init__(f"closure exceeded the cap of {cap} elements (reached {size})")
        self.cap = cap
        self.size = size


def as_table(m, n: int | None = None) -> np.ndarray:
    t = np.asarray(m, dtype=np.int64)
    if t.ndim != 1:
        raise ValueError("a transformation table is a 1-d array")
    n = len(t) if n is None else n
    if len(t) != n or (len(t) and (t.min() < 0 or t.max() >= n)):
        raise ValueError(f"table {t.tolist()} is not a self-map of {n} states")
    return t


def compose(p, q) -> np.ndarray:
    """``p . q``: apply q first, then p."""
    return np.asarray(p)[np.asarray(q)]


def identity_table(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)


def is_idempotent(e) -> bool:
    e = np.asarray(e)
    return bool(np.array_equal(e[e], e))


@dataclass
class SemigroupClosure:
    """A composition-closed set of tables with its Cayley graphs.

    ``elements[i]`` is a table; ``right[i, j]`` indexes ``elements[i] . g_j``
    and ``left[i, j]`` indexes ``g_j . elements[i]``. ``parent``/``letter``
    record the BFS word: element i is ``elements[parent[i]] . g_{letter[i]}``
    (parent -1 means a generator, or the identity when letter is -1).
    """

    n: int
    elements: np.ndarray
    generators: np.ndarray
    right: np.ndarray
    left: np.ndarray
    parent: np.ndarray
    letter: np.ndarray
    _index: dict = field(repr=False, default_factory=dict)

    def __len__(self):
        return len(self.elements)

    def index(self, table) -> int | None:
        return self._index.get(np.asarray(table, dtype=np.int64).tobytes())

    def __contains__(self, table) -> bool:
        return self.index(table) is not None

    def mul(self, i: int, j: int) -> int:
        k = self.index(compose(self.elements[i], self.elements[j]))
        if k is None:
            raise RuntimeError("product escaped the closure")
        return k

    def word(self, i: int) -> tuple[int, ...]:
        out = []
        while i >= 0 and self.letter[i] >= 0:
            out.append(int(self.letter[i]))
            i = int(self.parent[i])
        return tuple(reversed(out))


def closure(generators, cap: int = DEFAULT_CAP, include_identity: bool = False) -> SemigroupClosure:
    """Smallest composition-closed set containing the generators.

    Elements come out in BFS order: word length first, then the word read
    lexicographically by generator index. With ``include_identity`` the
    identity (empty word) is element 0, giving the monoid.
    """
    gens = [np.asarray(g, dtype=np.int64) for g in generators]
    if not gens:
        raise ValueError("need at least one generator")
    n = len(gens[0])
    gens = np.array([as_table(g, n) for g in gens])
    g_count = len(gens)

    index: dict[bytes, int] = {}
    elements: list[np.ndarray] = []
    parent: list[int] = []
    letter: list[int] = []

    def add(t, par, let):
        key = t.tobytes()
        got = index.get(key)
        if got is not None:
            return got
        if len(elements) >= cap:
            raise ClosureCapExceeded(cap, len(elements) + 1)
        index[key] = len(elements)
        elements.append(t)
        parent.append(par)
        letter.append(let)
        return index[key]

    if include_identity:
        add(identity_table(n), -1, -1)
    gen_idx = np.array([add(g.copy(), -1, j) for j, g in enumerate(gens)])

    right_rows: list[np.ndarray] = []
    pos = 0
    while pos < len(elements):
        level_end = len(elements)
        block = np.array(elements[pos:level_end])
        # rows of block[:, gens[j]] are block[i] . g_j
        prods = block[:, gens]  # (B, g, n)
        for b in range(len(block)):
            row = np.empty(g_count, dtype=np.int64)
            for j in range(g_count):
                row[j] = add(np.ascontiguousarray(prods[b, j]), pos + b, j)
            right_rows.append(row)
        pos = level_end

    E = np.array(elements)
    right = np.array(right_rows)
    left = np.empty_like(right)
    for j, g in enumerate(gens):
        prods = g[E]  # g . s for every s
        for i, t in enumerate(prods):
            left[i, j] = index[t.tobytes()]
    E.setflags(write=False)
    return SemigroupClosure(
        n=n,
        elements=E,
        generators=gen_idx,
        right=right,
        left=left,
        parent=np.array(parent),
        letter=np.array(letter),
        _index=index,
    )


def left_ideal_of(S: SemigroupClosure, i: int) -> set[int]:
    """``S . x`` for x = element i (products with at least one factor from S)."""
    seen = set(int(v) for v in S.left[i])
    todo = list(seen)
    while todo:
        a = todo.pop()
        for b in S.left[a]:
            b = int(b)
            if b not in seen:
                seen.add(b)
                todo.append(b)
    return seen


def minimal_left_ideals(S: SemigroupClosure) -> list[np.ndarray]:
    """Minimal left ideals, as sorted index arrays ordered by their first element.

    They are the terminal strongly connected components of the left Cayley
    graph ``s -> g . s``.
    """
    N, g = S.left.shape
    rows = np.repeat(np.arange(N), g)
    graph = csr_matrix((np.ones(N * g, dtype=np.int8), (rows, S.left.ravel())), shape=(N, N))
    _, labels = connected_components(graph, directed=True, connection="strong")
    leaves = labels[rows] != labels[S.left.ravel()]
    non_terminal = set(labels[rows[leaves]].tolist())
    ideals = [np.flatnonzero(labels == c) for c in sorted(set(labels.tolist())) if c not in non_terminal]
    return sorted(ideals, key=lambda a: int(a[0]))


def kernel(S: SemigroupClosure, ideals=None) -> np.ndarray:
    ideals = minimal_left_ideals(S) if ideals is None else ideals
    return np.sort(np.concatenate(ideals))


def idempotents(S: SemigroupClosure) -> np.ndarray:
    E = S.elements
    return np.flatnonzero(np.all(np.take_along_axis(E, E, axis=1) == E, axis=1))


def minimal_idempotents(S: SemigroupClosure, ideals=None) -> np.ndarray:
    return np.intersect1d(idempotents(S), kernel(S, ideals))


@dataclass
class UVReport:
    ideals: int
    idempotents_per_ideal: list[int]
    pairs_checked: int
    violations: list[tuple[int, int]]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self):
        return asdict(self)


def check_uv_identity(S: SemigroupClosure) -> UVReport:
    """For idempotents u, v in one minimal left ideal, check ``u . v == u``."""
    ideals = minimal_left_ideals(S)
    idem = set(idempotents(S).tolist())
    counts, violations, checked = [], [], 0
    for L in ideals:
        us = [int(i) for i in L if int(i) in idem]
        counts.append(len(us))
        for u, v in itertools.product(us, us):
            checked += 1
            if not np.array_equal(compose(S.elements[u], S.elements[v]), S.elements[u]):
                violations.append((u, v))
    return UVReport(len(ideals), counts, checked, violations)


def check_absorption(S: SemigroupClosure) -> list[tuple[int, int]]:
    """Pairs (u, v), u a minimal idempotent and v an idempotent with v . u = v, where u . v != u."""
    E = S.elements
    bad = []
    mins = minimal_idempotents(S)
    for v in idempotents(S):
        for u in mins:
            if np.array_equal(E[v][E[u]], E[v]) and not np.array_equal(E[u][E[v]], E[u]):
                bad.append((int(u), int(v)))
    return bad


# cube lifts of a finite base system

def _cube_codes(n: int, d: int) -> np.ndarray:
    return n ** np.arange(1 << d, dtype=np.int64)


def _decode(codes: np.ndarray, n: int, width: int) -> np.ndarray:
    return (codes[:, None] // (n ** np.arange(width, dtype=np.int64))[None, :]) % n


def _lift(g: np.ndarray, mask_rows: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Apply g on the coordinates flagged in ``mask_rows`` of every state tuple."""
    out = states.copy()
    out[:, mask_rows] = g[states[:, mask_rows]]
    return out


def _orbit_states(seeds: np.ndarray, maps, n: int) -> np.ndarray:
    width = seeds.shape[1]
    weights = n ** np.arange(width, dtype=np.int64)
    seen = set((seeds @ weights).tolist())
    frontier = seeds
    while len(frontier):
        new = []
        for g, rows in maps:
            img = _lift(g, rows, frontier)
            for code, st in zip((img @ weights).tolist(), img):
                if code not in seen:
                    seen.add(code)
                    new.append(st)
        frontier = np.array(new) if new else np.empty((0, width), dtype=np.int64)
    return _decode(np.array(sorted(seen), dtype=np.int64), n, width)


def _restricted_tables(states: np.ndarray, maps, n: int) -> list[np.ndarray]:
    weights = n ** np.arange(states.shape[1], dtype=np.int64)
    lookup = {c: i for i, c in enumerate((states @ weights).tolist())}
    tables = []
    for g, rows in maps:
        img = _lift(g, rows, states) @ weights
        tables.append(np.array([lookup[c] for c in img.tolist()], dtype=np.int64))
    return tables


def _lifted_generators(base, d: int, face_only: bool, star: bool):
    masks = np.arange(1 << d)
    if star:
        masks = masks[1:]
    maps = []
    for g in base:
        for i in range(d):
            maps.append((g, np.flatnonzero(masks >> i & 1)))
        if not face_only:
            maps.append((g, np.arange(len(masks))))
    return maps


def cube_semigroup(base, d: int, cap: int = DEFAULT_CAP):
    """States of Q^[d] (G_d-orbit of the diagonal) and the closure of the lifted G_d action."""
    base = [np.asarray(g, dtype=np.int64) for g in base]
    n = len(base[0])
    maps = _lifted_generators(base, d, face_only=False, star=False)
    diag = np.repeat(np.arange(n)[:, None], 1 << d, axis=1)
    states = _orbit_states(diag, maps, n)
    return states, closure(_restricted_tables(states, maps, n), cap=cap, include_identity=True)


def star_face_semigroup(base, d: int, x: int, cap: int = DEFAULT_CAP):
    """States of pi_*(Q_x^[d]) and the closure of the lifted F_d action on them."""
    base = [np.asarray(g, dtype=np.int64) for g in base]
    n = len(base[0])
    q_states, _ = cube_semigroup(base, d, cap)
    star = q_states[q_states[:, 0] == x][:, 1:]
    maps = _lifted_generators(base, d, face_only=True, star=True)
    # Q_x is face invariant, so no orbit step is needed
    return star, closure(_restricted_tables(star, maps, n), cap=cap, include_identity=True)


def _coordinatewise(states: np.ndarray, tables_per_coord, n: int, lookup) -> np.ndarray | None:
    img = np.empty_like(states)
    for c, t in enumerate(tables_per_coord):
        img[:, c] = t[states[:, c]]
    weights = n ** np.arange(states.shape[1], dtype=np.int64)
    out = []
    for code in (img @ weights).tolist():
        if code not in lookup:
            return None
        out.append(lookup[code])
    return np.array(out, dtype=np.int64)


def _lookup(states: np.ndarray, n: int) -> dict:
    weights = n ** np.arange(states.shape[1], dtype=np.int64)
    return {c: i for i, c in enumerate((states @ weights).tolist())}


@dataclass
class TildeReport:
    d: int
    n: int
    base_size: int
    cube_states: int
    cube_closure_size: int
    checked: int
    violations: list[dict]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self):
        return asdict(self)


def check_tilde_u(base, d: int, cap: int = DEFAULT_CAP) -> TildeReport:
    """Lift each minimal idempotent u of the base monoid to the diagonal tuple (u, ..., u)
    on Q^[d], and check it is a minimal idempotent of the cube closure."""
    base = [as_table(g) for g in base]
    n = len(base[0])
    S = closure(base, cap=cap, include_identity=True)
    states, E = cube_semigroup(base, d, cap)
    lookup = _lookup(states, n)
    cube_kernel = set(kernel(E).tolist())
    violations = []
    mins = minimal_idempotents(S)
    for u in mins:
        u_tab = S.elements[u]
        lifted = _coordinatewise(states, [u_tab] * states.shape[1], n, lookup)
        if lifted is None:
            violations.append({"u": u_tab.tolist(), "reason": "lift leaves Q^[d]"})
            continue
        idx = E.index(lifted)
        if idx is None:
            violations.append({"u": u_tab.tolist(), "reason": "lift not in the cube closure"})
        elif idx not in cube_kernel:
            violations.append({"u": u_tab.tolist(), "reason": "lift not in a minimal left ideal"})
        elif not is_idempotent(lifted):
            violations.append({"u": u_tab.tolist(), "reason": "lift not idempotent"})
    return TildeReport(d, n, len(S), len(states), len(E), len(mins), violations)


def q_epsilon_tables(ps, d: int) -> list[np.ndarray]:
    """q_eps = p_{n_k} ... p_{n_1} for every nonempty eps, ascending mask order."""
    ps = [np.asarray(p, dtype=np.int64) for p in ps]
    if len(ps) != d:
        raise ValueError(f"need {d} elements p_1..p_d, got {len(ps)}")
    out = []
    for mask in range(1, 1 << d):
        q = identity_table(len(ps[0]))
        for i in range(d):  # n_1 < ... < n_k: p_{n_1} is applied first
            if mask >> i & 1:
                q = compose(ps[i], q)
        out.append(q)
    return out


def q_epsilon_violations(base, d: int, ps, cap: int = DEFAULT_CAP) -> list[dict]:
    base = [as_table(g) for g in base]
    n = len(base[0])
    S = closure(base, cap=cap, include_identity=True)
    for p in ps:
        if as_table(p, n) not in S:
            raise ValueError(f"{np.asarray(p).tolist()} is not in the base monoid")
    qs = q_epsilon_tables(ps, d)
    bad = []
    for x in range(n):
        star, E = star_face_semigroup(base, d, x, cap)
        if len(star) == 0:
            continue
        lifted = _coordinatewise(star, qs, n, _lookup(star, n))
        if lifted is None or E.index(lifted) is None:
            bad.append({"x": x, "ps": [np.asarray(p).tolist() for p in ps]})
    return bad


def check_q_epsilon_lemma(base, d: int, ps, cap: int = DEFAULT_CAP) -> bool:
    return not q_epsilon_violations(base, d, ps, cap)


# generator I/O and random instances

def load_generators(path) -> list[np.ndarray]:
    doc = json.loads(Path(path).read_text())
    return parse_generators(doc)


def parse_generators(doc: dict) -> list[np.ndarray]:
    if "n" not in doc or "maps" not in doc:
        raise ValueError('generator document needs keys "n" and "maps"')
    n = int(doc["n"])
    maps = [as_table(m, n) for m in doc["maps"]]
    if not maps:
        raise ValueError("need at least one generator")
    return maps


def t3_generators() -> list[np.ndarray]:
    """Transposition, 3-cycle and a rank-2 map: they generate the full monoid T_3."""
    return [np.array([1, 0, 2]), np.array([1, 2, 0]), np.array([0, 0, 2])]


def random_maps(rng: np.random.Generator, n: int, count: int) -> list[np.ndarray]:
    return [rng.integers(0, n, size=n) for _ in range(count)]


def random_commuting_base(rng: np.random.Generator, n_max: int = 4, k_max: int = 2) -> list[np.ndarray]:
    """One or two commuting self-maps of a set of at most ``n_max`` states.

    A commuting partner is searched by rejection; failing that, a power of
    the first map is used.
    """
    n = int(rng.integers(2, n_max + 1))
    a = rng.integers(0, n, size=n)
    k = int(rng.integers(1, k_max + 1))
    if k == 1:
        return [a]
    for _ in range(500):
        b = rng.integers(0, n, size=n)
        if np.array_equal(a[b], b[a]):
            return [a, b]
    b = a.copy()
    for _ in range(int(rng.integers(1, 4))):
        b = a[b]
    return [a, b]
