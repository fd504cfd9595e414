import numpy as np
import pytest

from cubelab.actions import FaceElement, total_apply, TotalElement
from cubelab.cube_index import CubePoint, make_diagonal
from cubelab.rp_search import (
    DELTA_LADDER,
    SearchBudget,
    approximants,
    characterization_probe,
    factor_image_check,
    non_membership_certificate,
    orbit_hits,
    proximal_probe,
    q_distance,
    rp_ladder,
    rp_report,
    rp_witness,
    rp_witness_strengthened,
    transitivity_probe,
    validate_witness,
    witness_sup,
)
from cubelab.systems import GOLDEN, SkewProduct, Sturmian, TorusRotation, cyclic, circle_dist

ROT = TorusRotation([[GOLDEN]])
SKEW = SkewProduct()
STURM = Sturmian()
SMALL = SearchBudget(R=300, M=16)


def test_budget_validation():
    with pytest.raises(ValueError):
        SearchBudget(R=0)
    with pytest.raises(ValueError):
        SearchBudget(M=0)
    assert SearchBudget().scaled(2).R == 2 * SearchBudget().R


def test_approximants_start_with_the_point():
    els, pts = approximants(SKEW, np.array([0.3, 0.4]), 0.05, SMALL)
    assert np.all(els[0] == 0) and np.allclose(pts[0], [0.3, 0.4])
    assert len(pts) == SMALL.M
    assert np.all(SKEW.metric_many(pts, np.array([0.3, 0.4])[None]) < 0.05)
    assert np.allclose(SKEW.act_many(els, np.array([0.3, 0.4])[None]), pts)


def test_orbit_hits_cache(tmp_path, monkeypatch):
    plain = orbit_hits(SKEW, [0.1, 0.2], [0.5, 0.5], 0.05, 8)
    monkeypatch.setenv("CUBELAB_CACHE", str(tmp_path))
    first = orbit_hits(SKEW, [0.1, 0.2], [0.5, 0.5], 0.05, 8)
    again = orbit_hits(SKEW, [0.1, 0.2], [0.5, 0.5], 0.05, 8)
    for a, b, c in zip(plain, first, again):
        assert np.array_equal(a, b) and np.array_equal(b, c)
    assert any(tmp_path.rglob("*.pkl")) or any(tmp_path.iterdir())


@pytest.mark.parametrize("sys,x", [(ROT, [0.3]), (SKEW, [0.2, 0.9]), (STURM, [0.4, 1.0]), (cyclic(5), [2])])
@pytest.mark.parametrize("d", [1, 2])
def test_trivial_witness_for_equal_points(sys, x, d):
    rec = rp_witness(sys, x, x, d, 0.01, SMALL)
    assert rec is not None
    assert rec.achieved_sup == 0
    assert np.array_equal(rec.x_prime, rec.x) and np.array_equal(rec.y_prime, rec.x)
    assert validate_witness(sys, rec)


def test_rotation_far_pairs_are_certified():
    for x, y in [(0.1, 0.3), (0.0, 0.5), (0.9, 0.2)]:
        rep = rp_report(ROT, [x], [y], 1, 0.05)
        assert rep["status"] == "not_found"
        assert rep["certificate"]["kind"] == "isometry"
        assert rep["certificate"]["distance"] >= 0.15


def test_rotation_found_implies_close():
    rng = np.random.default_rng(0)
    for _ in range(10):
        x, y = rng.random(2)
        for delta in (0.2, 0.1):
            rec = rp_witness(ROT, [x], [y], 1, delta, SMALL)
            if rec is not None:
                assert ROT.metric([x], [y]) < 3 * delta


def test_skew_same_fiber_witness():
    rec = rp_witness(SKEW, [0.2, 0.1], [0.2, 0.7], 1, 0.05)
    assert rec is not None
    assert rec.achieved_sup < 0.05
    assert SKEW.metric(rec.x, rec.x_prime) < 0.05 and SKEW.metric(rec.y, rec.y_prime) < 0.05
    assert validate_witness(SKEW, rec)
    # the stored approximants are orbit points of x and y
    assert SKEW.metric(SKEW.act(rec.x_element, rec.x), rec.x_prime) == 0
    assert SKEW.metric(SKEW.act(rec.y_element, rec.y), rec.y_prime) == 0


def test_validation_purity_and_symmetry():
    rng = np.random.default_rng(1)
    for _ in range(10):
        x, a, b = rng.random(3)
        rec = rp_witness(SKEW, [x, a], [x, b], 1, 0.05)
        assert rec is not None
        assert abs(witness_sup(SKEW, rec.face, rec.x_prime, rec.y_prime) - rec.achieved_sup) < 1e-12
        sw = rec.swapped()
        assert np.array_equal(sw.x, rec.y) and np.array_equal(sw.x_prime, rec.y_prime)
        assert validate_witness(SKEW, sw)


def test_tampered_witness_fails_validation():
    rec = rp_witness(SKEW, [0.2, 0.1], [0.2, 0.7], 1, 0.05)
    bad = rec.swapped()
    bad.delta = rec.achieved_sup / 2
    assert not validate_witness(SKEW, bad)
    bad = rp_witness(SKEW, [0.2, 0.1], [0.2, 0.7], 1, 0.05)
    bad.face = np.array([[0]])
    assert not validate_witness(SKEW, bad)


def test_strengthened_witness():
    rec = rp_witness_strengthened(SKEW, [0.2, 0.1], [0.2, 0.7], 1, 0.05)
    assert rec is not None and rec.pinned
    assert np.array_equal(rec.x_prime, rec.x)
    assert validate_witness(SKEW, rec, pinned=True)
    # a pinned witness is also an unpinned one
    assert validate_witness(SKEW, rec, pinned=False)
    triv = rp_witness_strengthened(ROT, [0.4], [0.4], 2, 0.05, SMALL)
    assert triv.achieved_sup == 0


def test_budget_monotonicity():
    rng = np.random.default_rng(2)
    small = SearchBudget(R=50, M=8)
    for _ in range(10):
        x, a, b = rng.random(3)
        lo = rp_witness(SKEW, [x, a], [x, b], 1, 0.05, small)
        hi = rp_witness(SKEW, [x, a], [x, b], 1, 0.05, small.scaled(4))
        assert not (lo is not None and hi is None)


def test_skew_d2_search_is_never_a_verdict():
    rep = rp_report(SKEW, [0.2, 0.1], [0.2, 0.7], 2, 0.05, SMALL)
    assert rep["status"] in ("found", "inconclusive")
    assert rep["certificate"] is None


def test_certificates():
    assert non_membership_certificate(ROT, [0.1], [0.2], 0.05) is None
    cert = non_membership_certificate(SKEW, [0.1, 0.0], [0.4, 0.0], 0.05)
    assert cert["kind"] == "isometric_factor"
    assert non_membership_certificate(SKEW, [0.1, 0.0], [0.1, 0.5], 0.05) is None
    # sturmian: base distance must beat three times the coding modulus
    mod = STURM.factor_modulus(0.05)
    assert non_membership_certificate(STURM, STURM.point(0.0), STURM.point(0.45), 0.05) is not None
    assert 3 * mod < 0.45
    assert non_membership_certificate(STURM, STURM.point(0.0), STURM.point(0.01), 0.05) is None
    assert non_membership_certificate(cyclic(4), [0], [1], 0.3)["kind"] == "isometry"
    assert non_membership_certificate(cyclic(4), [0], [1], 0.5) is None


def test_ladder_reports():
    reps = rp_ladder(SKEW, [0.2, 0.1], [0.2, 0.7], 1)
    assert [r["delta"] for r in reps] == list(DELTA_LADDER)
    assert all(r["status"] == "found" for r in reps)
    assert all(r["tag"] == "Def-RP" for r in reps)
    assert set(reps[0]) >= {"pair", "d", "delta", "status", "witness", "budget", "seed"}


def test_q_distance_members_are_zero():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.random(2)
        g = TotalElement.from_array(rng.integers(-3, 4, size=(3, 1)))
        c = total_apply(SKEW, g, make_diagonal(x, 2))
        assert q_distance(SKEW, c, SMALL) < 1e-12


def _relation_breaker(x, s, t, m):
    return CubePoint(2, np.mod(np.array([x, x + s, x + t, x + s + t + m]), 1.0))


def test_q_distance_rotation_relation_margin():
    rng = np.random.default_rng(4)
    for _ in range(10):
        x, s, t = rng.random(3)
        m = float(rng.uniform(0.02, 0.4))
        c = _relation_breaker(x, s, t, m)
        for b in (SMALL, SearchBudget()):
            assert q_distance(ROT, c, b) >= m / 4 - 1e-12


def test_q_distance_monotone_in_budget():
    rng = np.random.default_rng(5)
    for _ in range(5):
        c = CubePoint(2, rng.random((4, 1)))
        a = q_distance(ROT, c, SearchBudget(R=100, M=8))
        b = q_distance(ROT, c, SearchBudget(R=200, M=16))
        assert b <= a
        c = CubePoint(1, rng.random((2, 2)))
        assert q_distance(SKEW, c, SearchBudget(R=200, M=16)) <= q_distance(SKEW, c, SearchBudget(R=100, M=8))


@pytest.mark.parametrize("mode", ["lemma25", "prop_eq_Q", "prop_eq_F"])
def test_characterization_equal_points(mode):
    rep = characterization_probe(SKEW, [0.3, 0.6], [0.3, 0.6], 1, mode, SMALL)
    assert rep["distance"] < 1e-12


def test_characterization_rotation_far_pair():
    for mode in ("lemma25", "prop_eq_Q", "prop_eq_F"):
        assert characterization_probe(ROT, [0.1], [0.4], 1, mode)["distance"] >= 0.05


def test_characterization_coherence_on_skew():
    rng = np.random.default_rng(6)
    for _ in range(5):
        x, a, b = rng.random(3)
        q = characterization_probe(SKEW, [x, a], [x, b], 1, "prop_eq_Q")["distance"]
        f = characterization_probe(SKEW, [x, a], [x, b], 1, "prop_eq_F")["distance"]
        assert f >= q
        assert f < 0.05


def test_unknown_mode():
    with pytest.raises(ValueError):
        characterization_probe(ROT, [0.1], [0.1], 1, "nope")


def test_transitivity_probe():
    triv = transitivity_probe(ROT, [0.2], [0.2], [0.2], 1, 0.1, SMALL)
    assert triv["interpretation"] == "consistent"
    fwd = transitivity_probe(SKEW, [0.3, 0.1], [0.3, 0.5], [0.3, 0.8], 1, 0.1)
    back = transitivity_probe(SKEW, [0.3, 0.8], [0.3, 0.5], [0.3, 0.1], 1, 0.1)
    assert fwd["interpretation"] == back["interpretation"] == "consistent"
    far = transitivity_probe(ROT, [0.1], [0.5], [0.9], 1, 0.1, SMALL)
    assert far["interpretation"] == "premise_not_met"


def test_factor_image_check():
    rep = factor_image_check(SKEW, [0.2, 0.1], [0.2, 0.7], 1, 0.05)
    assert rep["status"] == "valid"
    assert rep["downstairs"]["x"] == rep["downstairs"]["y"] == [0.2]
    rep = factor_image_check(STURM, STURM.point(0.0, 1), STURM.point(0.0, -1), 1, 0.05)
    assert rep["status"] == "valid"
    assert rep["downstairs_delta"] == STURM.factor_modulus(0.05)
    with pytest.raises(ValueError):
        factor_image_check(ROT, [0.1], [0.1], 1, 0.05)


def test_proximal_probe():
    rep = proximal_probe(ROT, [0.3], [0.3], 10)
    assert rep["inf"] == 0
    p, q = STURM.point(0.0, 1), STURM.point(0.0, -1)
    infs = [proximal_probe(STURM, p, q, h)["inf"] for h in (0, 2, 8, 32)]
    assert infs == sorted(infs, reverse=True) and infs[-1] == 0
    rep = proximal_probe(STURM, p, q, 100)
    assert rep["proximal"] and rep["rp"]["status"] == "found"
    rng = np.random.default_rng(7)
    for _ in range(10):
        x, y = SKEW.random_points(rng, 2)
        rep = proximal_probe(SKEW, x, y, 2000)
        # distal: the base distance is preserved, so it bounds the orbit distance from below
        assert rep["inf"] >= circle_dist(x[0], y[0]) - 1e-12
        assert not rep["proximal"] and rep["rp"] is None
