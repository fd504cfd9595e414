"""Witness search and characterization probes for the regionally proximal relation RP^[d].

A witness for (x, y) at scale delta is a pair x', y' (delta-close to x and
y) and a face element (t_1..t_d) with ``sup_{eps != 0} rho(t_eps x', t_eps y')
< delta``. Approximants x', y' are taken from orbit segments of x and y, and
group elements are enumerated shell by shell (see
:func:`cubelab.actions.enumerate_elements`), so every search is a pure
function of its inputs and seed.

A failed search is only reported as ``not_found`` when an analytic bound
rules a witness out (isometric systems, or an isometric factor); otherwise
the status is ``inconclusive``.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .actions import coefficient_array, enumerate_elements
from .cube_index import CubePoint
from .systems import System

DELTA_LADDER = (0.2, 0.1, 0.05, 0.02)
ORBIT_SCAN = 200_000
_CHUNK_CELLS = 1 << 22
_MAX_COMBOS = 1 << 20

TAGS = {
    "witness": "Def-RP",
    "strengthened": "Rmk-RP-pinned",
    "lemma25": "Lemma-RP-via-Q",
    "prop_eq_Q": "Prop-eq",
    "prop_eq_F": "Prop-eq",
    "transitivity": "Thm-RP-transitivity",
    "factor": "Cor-fac",
    "proximal": "Rmk-proximal",
}


@dataclass(frozen=True)
class SearchBudget:
    """R: sup-norm radius of each t_i; M: approximant/candidate count.

    ``eta`` is the closeness threshold used to preselect candidates in the
    distance probes and ``scan`` caps the orbit segment searched for
    approximants.
    """

    R: int = 3000
    M: int = 64
    seed: int = 0
    eta: float = 0.05
    scan: int = ORBIT_SCAN

    def __post_init__(self):
        if self.R < 1 or self.M < 1:
            raise ValueError("budget needs R >= 1 and M >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def scaled(self, factor: int) -> "SearchBudget":
        return replace(self, R=self.R * factor, M=self.M * factor)

    def to_dict(self):
        return {"R": self.R, "M": self.M, "seed": self.seed, "eta": self.eta, "scan": self.scan}


DEFAULT_BUDGET = SearchBudget()


def _memory():
    loc = os.environ.get("CUBELAB_CACHE")
    if not loc:
        return None
    import joblib

    return joblib.Memory(loc, verbose=0)


def _orbit_hits(sys: System, source, target, tol, count, seed, scan):
    k = sys.rank
    els, _ = enumerate_elements(k, count=scan, seed=seed)
    hits_el, hits_pt = [], []
    found = 0
    for lo in range(0, len(els), 8192):
        chunk = els[lo : lo + 8192]
        pts = sys.act_many(chunk, source[None, :])
        ok = np.flatnonzero(sys.metric_many(pts, target[None, :]) < tol)
        ok = ok[: count - found]
        hits_el.append(chunk[ok])
        hits_pt.append(pts[ok])
        found += len(ok)
        if found >= count:
            break
    return np.concatenate(hits_el), np.concatenate(hits_pt)


def orbit_hits(sys: System, source, target, tol: float, count: int, seed: int = 0, scan: int = ORBIT_SCAN):
    """First ``count`` orbit points ``t . source`` (in enumeration order) within ``tol`` of ``target``.

    Returns ``(elements, points)``. Memoized on disk when ``CUBELAB_CACHE`` is set.
    """
    source = sys.check_points(source)
    target = sys.check_points(target)
    mem = _memory()
    fn = mem.cache(_orbit_hits) if mem is not None else _orbit_hits
    return fn(sys, source, target, float(tol), int(count), int(seed), int(scan))


def approximants(sys: System, x, tol: float, budget: SearchBudget):
    """Orbit points of x within ``tol`` of x; x itself comes first."""
    return orbit_hits(sys, x, x, tol, budget.M, budget.seed, budget.scan)


@dataclass
class WitnessRecord:
    x: np.ndarray
    y: np.ndarray
    d: int
    delta: float
    face: np.ndarray  # (d, k)
    x_prime: np.ndarray
    y_prime: np.ndarray
    achieved_sup: float
    budget_used: int
    x_element: np.ndarray | None = None  # x' = x_element . x
    y_element: np.ndarray | None = None
    pinned: bool = False

    def to_dict(self):
        def lst(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "x": lst(self.x),
            "y": lst(self.y),
            "d": self.d,
            "delta": self.delta,
            "face": lst(self.face),
            "x_prime": lst(self.x_prime),
            "y_prime": lst(self.y_prime),
            "achieved_sup": self.achieved_sup,
            "budget_used": self.budget_used,
            "x_element": lst(self.x_element),
            "y_element": lst(self.y_element),
            "pinned": self.pinned,
        }

    def swapped(self) -> "WitnessRecord":
        return replace(
            self,
            x=self.y,
            y=self.x,
            x_prime=self.y_prime,
            y_prime=self.x_prime,
            x_element=self.y_element,
            y_element=self.x_element,
            pinned=False,
        )


def witness_sup(sys: System, face, xp, yp) -> float:
    """``sup over nonempty eps of rho(t_eps x', t_eps y')``."""
    coeffs = coefficient_array(np.asarray(face, dtype=np.int64))[1:]
    return float(np.max(sys.metric_many(sys.act_many(coeffs, xp[None, :]), sys.act_many(coeffs, yp[None, :]))))


def validate_witness(sys: System, rec: WitnessRecord, pinned: bool | None = None) -> bool:
    """Re-evaluate every inequality of the witness from scratch."""
    face = np.asarray(rec.face)
    if face.shape != (rec.d, sys.rank):
        return False
    if sys.metric(rec.x, rec.x_prime) >= rec.delta or sys.metric(rec.y, rec.y_prime) >= rec.delta:
        return False
    if pinned and sys.rep_distance_many(rec.x, rec.x_prime) != 0:
        return False
    return witness_sup(sys, face, rec.x_prime, rec.y_prime) < rec.delta


def _search_d1(sys, xs, ys, delta, E):
    Mx, My = len(xs), len(ys)
    chunk = max(1, _CHUNK_CELLS // (Mx * My))
    used = 0
    for lo in range(0, len(E), chunk):
        ts = E[lo : lo + chunk]
        ox = sys.act_many(ts[:, None, :], xs[None, :, :])
        oy = sys.act_many(ts[:, None, :], ys[None, :, :])
        dist = sys.metric_many(ox[:, :, None, :], oy[:, None, :, :])
        hit = np.flatnonzero((dist < delta).ravel())
        if len(hit):
            f = int(hit[0])
            t_idx, rest = divmod(f, Mx * My)
            i, j = divmod(rest, My)
            used += f + 1
            return (ts[t_idx][None, :], i, j, float(dist[t_idx, i, j]), used)
        used += dist.size
    return None, -1, -1, np.inf, used


def _candidate_lists(sys, xs, ys, delta, E, cap):
    """Per pair, the first ``cap`` single elements t with rho(t x', t y') < delta."""
    out = {}
    for i, xp in enumerate(xs):
        ox = sys.act_many(E, xp[None, :])
        for j, yp in enumerate(ys):
            ok = np.flatnonzero(sys.metric_many(ox, sys.act_many(E, yp[None, :])) < delta)
            out[i, j] = ok[:cap]
    return out


def _search_combos(sys, xs, ys, d, delta, E, shells, cap):
    cands = _candidate_lists(sys, xs, ys, delta, E, cap)
    rows = []
    for (i, j), ok in cands.items():
        if not len(ok):
            continue
        combos = np.array(list(itertools.product(ok, repeat=d)), dtype=np.int64)
        key_shell = shells[combos].max(axis=1)
        rows.append(np.column_stack([key_shell, combos, np.full(len(combos), i), np.full(len(combos), j)]))
    if not rows:
        return None, -1, -1, np.inf, 0
    allc = np.concatenate(rows)
    order = np.lexsort(tuple(allc[:, c] for c in range(allc.shape[1] - 1, -1, -1)))
    allc = allc[order][:_MAX_COMBOS]
    used = 0
    for lo in range(0, len(allc), 65536):
        block = allc[lo : lo + 65536]
        faces = E[block[:, 1 : 1 + d]]
        coeffs = coefficient_array(faces)[:, 1:]
        xi, yj = block[:, -2], block[:, -1]
        ox = sys.act_many(coeffs, xs[xi][:, None, :])
        oy = sys.act_many(coeffs, ys[yj][:, None, :])
        sup = sys.metric_many(ox, oy).max(axis=1)
        hit = np.flatnonzero(sup < delta)
        if len(hit):
            h = int(hit[0])
            used += h + 1
            return faces[h], int(xi[h]), int(yj[h]), float(sup[h]), used
        used += len(block)
    return None, -1, -1, np.inf, used


def rp_witness(
    sys: System, x, y, d: int, delta: float, budget: SearchBudget = DEFAULT_BUDGET, pin_x: bool = False
) -> WitnessRecord | None:
    """Search for a delta-witness of (x, y) in RP^[d]; None when the budget is exhausted.

    The first witness in the order (face shell, face enumeration index,
    x'-index, y'-index) is returned. With ``pin_x`` the approximant x' is x.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if d < 1:
        raise ValueError("d must be >= 1")
    x = sys.check_points(x)
    y = sys.check_points(y)
    if pin_x:
        x_el, xs = np.zeros((1, sys.rank), dtype=np.int64), x[None, :].copy()
    else:
        x_el, xs = approximants(sys, x, delta, budget)
    y_el, ys = approximants(sys, y, delta, budget)
    if not len(xs) or not len(ys):
        return None
    E, shells = enumerate_elements(sys.rank, radius=budget.R, seed=budget.seed)
    if d == 1:
        face, i, j, sup, used = _search_d1(sys, xs, ys, delta, E)
    else:
        face, i, j, sup, used = _search_combos(sys, xs, ys, d, delta, E, shells, budget.M)
    if face is None:
        return None
    return WitnessRecord(
        x=x.copy(),
        y=y.copy(),
        d=d,
        delta=float(delta),
        face=np.asarray(face, dtype=np.int64).reshape(d, sys.rank),
        x_prime=xs[i].copy(),
        y_prime=ys[j].copy(),
        achieved_sup=sup,
        budget_used=int(used),
        x_element=x_el[i].copy(),
        y_element=y_el[j].copy(),
        pinned=pin_x,
    )


def rp_witness_strengthened(sys, x, y, d, delta, budget: SearchBudget = DEFAULT_BUDGET):
    """Witness search with x' pinned to x."""
    return rp_witness(sys, x, y, d, delta, budget, pin_x=True)


def non_membership_certificate(sys: System, x, y, delta: float) -> dict | None:
    """An analytic proof that no delta-witness exists, when one applies.

    For an isometry, rho(x, y) <= rho(x, x') + rho(t_1 x', t_1 y') + rho(y', y) < 3 delta
    for any witness. The same bound holds on an isometric factor, with delta
    replaced by the factor map's modulus of continuity.
    """
    x = sys.check_points(x)
    y = sys.check_points(y)
    if sys.isometric:
        dist = sys.metric(x, y)
        if dist >= 3 * delta:
            return {"kind": "isometry", "distance": dist, "bound": 3 * delta}
        return None
    base = sys.factor
    if base is not None and base.isometric:
        mod = sys.factor_modulus(delta)
        dist = base.metric(sys.factor_map(x), sys.factor_map(y))
        ok = dist >= 3 * mod if sys.factor_lipschitz else dist > 3 * mod
        if ok:
            return {"kind": "isometric_factor", "distance": dist, "bound": 3 * mod}
    return None


def _point_list(p):
    return np.asarray(p).tolist()


def rp_report(sys, x, y, d, delta, budget: SearchBudget = DEFAULT_BUDGET, pin_x: bool = False) -> dict:
    """Search plus interpretation, in the CLI report schema."""
    rec = rp_witness(sys, x, y, d, delta, budget, pin_x=pin_x)
    cert = None if rec is not None else non_membership_certificate(sys, x, y, delta)
    if rec is not None:
        status = "found"
    elif cert is not None:
        status = "not_found"
    else:
        status = "inconclusive"
    return {
        "tag": TAGS["strengthened" if pin_x else "witness"],
        "pair": [_point_list(x), _point_list(y)],
        "d": d,
        "delta": float(delta),
        "status": status,
        "witness": None if rec is None else rec.to_dict(),
        "certificate": cert,
        "budget": budget.to_dict(),
        "seed": budget.seed,
    }


def rp_ladder(sys, x, y, d, ladder=DELTA_LADDER, budget: SearchBudget = DEFAULT_BUDGET, pin_x=False) -> list[dict]:
    return [rp_report(sys, x, y, d, delta, budget, pin_x) for delta in ladder]


# sampled distances to Q^[D] and to face-orbit closures of diagonals

def _cube_dist(sys, pts, c):
    return sys.metric_many(pts, c[None, :, :] if pts.ndim == 3 else c).max(axis=-1)


def face_orbit_distance(sys: System, c: CubePoint, bases, budget: SearchBudget = DEFAULT_BUDGET):
    """Min over sampled z in ``bases`` and face elements F of the sup distance from F z^[D] to c.

    For each z and direction i, the candidates for t_i are the first M
    single elements t (identity always first) with rho(t z, c_{i}) < eta;
    all combinations are evaluated. Returns ``(distance, detail)``; the
    distance is an upper bound on the distance from c to the closure.
    """
    D = c.dim
    coords = sys.check_points(c.coords)
    bases = sys.check_points(np.atleast_2d(bases))
    E, _ = enumerate_elements(sys.rank, radius=budget.R, seed=budget.seed)
    per_list = max(1, min(budget.M, int(_MAX_COMBOS ** (1.0 / D))))
    best, detail = np.inf, None
    for b, z in enumerate(bases):
        d0 = float(sys.metric(z, coords[0]))
        if d0 >= best:
            continue
        orbit = sys.act_many(E, z[None, :])
        lists = []
        for i in range(D):
            target = coords[1 << i]
            ok = np.flatnonzero(sys.metric_many(orbit, target[None, :]) < budget.eta)
            ok = np.concatenate([[0], ok[ok != 0]])[:per_list]
            lists.append(ok)
        combos = np.array(list(itertools.product(*lists)), dtype=np.int64)
        for lo in range(0, len(combos), 65536):
            block = combos[lo : lo + 65536]
            faces = E[block]
            pts = sys.act_many(coefficient_array(faces), z[None, None, :])
            dist = _cube_dist(sys, pts, coords)
            h = int(np.argmin(dist))
            if dist[h] < best:
                best = float(dist[h])
                detail = {"base_index": b, "base": z.tolist(), "face": faces[h].tolist()}
    return best, detail


def q_distance(sys: System, c: CubePoint, budget: SearchBudget = DEFAULT_BUDGET) -> float:
    """Sampled upper bound on the distance from c to Q^[d].

    Uses Q^[d] = cls F_d(diagonal): base points are c's empty-set coordinate
    and its orbit approximants.
    """
    return q_distance_detail(sys, c, budget)[0]


def q_distance_detail(sys, c: CubePoint, budget: SearchBudget = DEFAULT_BUDGET):
    c0 = sys.check_points(c.coords)[0]
    _, bases = orbit_hits(sys, c0, c0, budget.eta, budget.M, budget.seed, budget.scan)
    return face_orbit_distance(sys, c, bases, budget)


def _target_xy(x, y, D):
    coords = np.repeat(np.asarray(y)[None, :], 1 << D, axis=0)
    coords[0] = x
    return CubePoint(D, coords)


def _lemma25_distance(sys, x, y, d, budget):
    """Sampled distance from (x, a, y, a) to Q^[d+1], minimized over sampled a.

    Q points are tau_{(t_1..t_d, t)} x'^[d+1] with x' near x on the orbit of x
    and y' = t x' near y; a is read off as (t_eps x')_eps.
    """
    E, shells = enumerate_elements(sys.rank, radius=budget.R, seed=budget.seed)
    _, xs = orbit_hits(sys, x, x, budget.eta, budget.M, budget.seed, budget.scan)
    best, detail = np.inf, None
    for xp in xs:
        dx = sys.metric(xp, x)
        if dx >= best:
            continue
        _, ys = orbit_hits(sys, xp, y, budget.eta, budget.M, budget.seed, budget.scan)
        if not len(ys):
            continue
        dy = sys.metric_many(ys, y[None, :])
        if d == 1:
            ox = sys.act_many(E, xp[None, :])
            oy = sys.act_many(E[:, None, :], ys[None, :, :])
            sup = sys.metric_many(ox[:, None, :], oy)  # (|E|, My)
            total = np.maximum(np.maximum(sup, dy[None, :]), dx)
            f, j = np.unravel_index(int(np.argmin(total)), total.shape)
            val, face = float(total[f, j]), E[f][None, :]
        else:
            val, face, j = np.inf, None, -1
            for jj, yp in enumerate(ys):
                ox = sys.act_many(E, xp[None, :])
                ok = np.flatnonzero(sys.metric_many(ox, sys.act_many(E, yp[None, :])) < budget.eta)
                ok = np.concatenate([[0], ok[ok != 0]])[: budget.M]
                combos = np.array(list(itertools.product(ok, repeat=d)))[:_MAX_COMBOS]
                faces = E[combos]
                coeffs = coefficient_array(faces)[:, 1:]
                sup = sys.metric_many(
                    sys.act_many(coeffs, xp[None, None, :]), sys.act_many(coeffs, yp[None, None, :])
                ).max(axis=1)
                tot = np.maximum(np.maximum(sup, dy[jj]), dx)
                h = int(np.argmin(tot))
                if tot[h] < val:
                    val, face, j = float(tot[h]), faces[h], jj
        if val < best:
            coeffs = coefficient_array(np.asarray(face)[None])[0, 1:]
            a_star = sys.act_many(coeffs, xp[None, :])
            best = val
            detail = {"x_prime": xp.tolist(), "y_prime": ys[j].tolist(), "face": np.asarray(face).tolist(), "a_star": a_star.tolist()}
    return best, detail


def characterization_probe(sys: System, x, y, d: int, mode: str, budget: SearchBudget = DEFAULT_BUDGET) -> dict:
    """Sampled distance of the mode's target point to the mode's target set.

    lemma25:   (x, a, y, a) to Q^[d+1], over sampled a
    prop_eq_Q: (x, y, ..., y) to Q^[d+1]
    prop_eq_F: (x, y, ..., y) to the face-orbit closure of x^[d+1]

    prop_eq_F samples a subset of what prop_eq_Q samples, so its distance is
    never smaller.
    """
    x = sys.check_points(x)
    y = sys.check_points(y)
    if mode == "lemma25":
        dist, detail = _lemma25_distance(sys, x, y, d, budget)
    elif mode in ("prop_eq_Q", "prop_eq_F"):
        target = _target_xy(x, y, d + 1)
        if mode == "prop_eq_Q":
            dist, detail = q_distance_detail(sys, target, budget)
        else:
            dist, detail = face_orbit_distance(sys, target, x[None, :], budget)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return {
        "tag": TAGS[mode],
        "mode": mode,
        "pair": [_point_list(x), _point_list(y)],
        "d": d,
        "distance": dist,
        "detail": detail,
        "budget": budget.to_dict(),
    }


def transitivity_probe(sys: System, x, y, z, d: int, delta: float, budget: SearchBudget = DEFAULT_BUDGET) -> dict:
    xy = rp_report(sys, x, y, d, delta / 2, budget)
    yz = rp_report(sys, y, z, d, delta / 2, budget)
    xz = rp_report(sys, x, z, d, delta, budget)
    premise = xy["status"] == "found" and yz["status"] == "found"
    if not premise:
        verdict = "premise_not_met"
    elif xz["status"] == "found":
        verdict = "consistent"
    elif xz["status"] == "not_found":
        verdict = "counterexample"
    else:
        verdict = "inconclusive"
    return {
        "tag": TAGS["transitivity"],
        "d": d,
        "delta": float(delta),
        "measurement": {"xy": xy, "yz": yz, "xz": xz},
        "interpretation": verdict,
    }


def push_witness(sys: System, rec: WitnessRecord) -> WitnessRecord:
    """Image of a witness under the factor map; same face element."""
    f = sys.factor_map
    base = sys.factor
    return WitnessRecord(
        x=f(rec.x),
        y=f(rec.y),
        d=rec.d,
        delta=rec.delta,
        face=rec.face,
        x_prime=f(rec.x_prime),
        y_prime=f(rec.y_prime),
        achieved_sup=witness_sup(base, rec.face, f(rec.x_prime), f(rec.y_prime)),
        budget_used=0,
        x_element=rec.x_element,
        y_element=rec.y_element,
        pinned=rec.pinned,
    )


def factor_image_check(sys: System, x, y, d: int, delta: float, budget: SearchBudget = DEFAULT_BUDGET) -> dict:
    """Push a found witness through the factor map and re-validate it downstairs.

    For a 1-Lipschitz factor the pushed record must be a witness at the same
    delta; otherwise it is checked at the factor map's modulus of continuity.
    """
    base = sys.factor
    if base is None:
        raise ValueError(f"{sys.kind} system has no declared factor")
    rec = rp_witness(sys, x, y, d, delta, budget)
    out = {"tag": TAGS["factor"], "d": d, "delta": float(delta), "upstairs": None, "downstairs": None}
    if rec is None:
        out["status"] = "no_witness"
        return out
    down = push_witness(sys, rec)
    if sys.factor_lipschitz:
        tol = float(delta)
        valid = validate_witness(base, down)
    else:
        tol = sys.factor_modulus(delta)
        slack = 1e-12
        valid = (
            base.metric(down.x, down.x_prime) <= tol + slack
            and base.metric(down.y, down.y_prime) <= tol + slack
            and down.achieved_sup <= tol + slack
        )
    out.update(upstairs=rec.to_dict(), downstairs=down.to_dict(), downstairs_delta=tol, status="valid" if valid else "invalid")
    return out


def proximal_probe(
    sys: System, x, y, horizon: int, eta: float = 2.0**-5, d: int = 1, budget: SearchBudget = DEFAULT_BUDGET
) -> dict:
    """inf over |t| <= horizon of rho(tx, ty); flagged pairs go to a witness search at 2 eta."""
    x = sys.check_points(x)
    y = sys.check_points(y)
    E, _ = enumerate_elements(sys.rank, radius=horizon, seed=budget.seed)
    dist = sys.metric_many(sys.act_many(E, x[None, :]), sys.act_many(E, y[None, :]))
    h = int(np.argmin(dist))
    inf = float(dist[h])
    out = {
        "tag": TAGS["proximal"],
        "pair": [_point_list(x), _point_list(y)],
        "horizon": int(horizon),
        "inf": inf,
        "argmin": E[h].tolist(),
        "eta": float(eta),
        "proximal": inf < eta,
        "rp": None,
    }
    if inf < eta:
        out["rp"] = rp_report(sys, x, y, d, 2 * eta, budget)
    return out
