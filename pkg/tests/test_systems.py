from fractions import Fraction

import numpy as np
import pytest

from cubelab.systems import (
    GOLDEN,
    FinitePerm,
    SkewProduct,
    Sturmian,
    SystemMismatch,
    TorusRotation,
    circle_dist,
    continued_fraction,
    convergents,
    cyclic,
    frac_mul,
    load_system,
    system_from_config,
)

SYSTEMS = [
    TorusRotation([[GOLDEN]]),
    TorusRotation([[GOLDEN, np.sqrt(2) - 1]]),
    SkewProduct(),
    Sturmian(),
    cyclic(7),
]


def test_frac_mul_against_exact_rationals():
    rng = np.random.default_rng(0)
    a = rng.random(200)
    n = rng.integers(-(2**34), 2**34, size=200)
    got = frac_mul(n, a)
    for ni, ai, gi in zip(n, a, got):
        exact = (Fraction(int(ni)) * Fraction(float(ai))) % 1
        assert abs(float(exact) - gi) < 1e-12 or abs(abs(float(exact) - gi) - 1) < 1e-12


def test_rotation_action_examples():
    rot = TorusRotation([[GOLDEN]])
    assert abs(rot.act([5], [0.1])[0] - np.mod(0.1 + 5 * GOLDEN, 1)) < 1e-12
    assert rot.metric([0.1], [0.9]) == pytest.approx(0.2)
    assert rot.metric([0.3], [0.3]) == 0


@pytest.mark.parametrize("sys", SYSTEMS, ids=lambda s: s.kind)
def test_group_action_laws(sys):
    rng = np.random.default_rng(1)
    p = sys.random_points(rng, 1000)
    # the skew fiber coordinate amplifies base rounding by 2n, so keep |n| <= 1000 for 1e-12
    s = rng.integers(-1000, 1000, size=(1000, sys.rank))
    t = rng.integers(-1000, 1000, size=(1000, sys.rank))
    lhs = sys.act_many(s + t, p)
    rhs = sys.act_many(s, sys.act_many(t, p))
    assert np.max(sys.rep_distance_many(lhs, rhs)) < 1e-12
    assert np.max(sys.rep_distance_many(sys.act_many(np.zeros_like(s), p), p)) == 0


@pytest.mark.parametrize("sys", SYSTEMS, ids=lambda s: s.kind)
def test_metric_axioms(sys):
    rng = np.random.default_rng(2)
    p, q, r = (sys.random_points(rng, 10**4) for _ in range(3))
    dpq = sys.metric_many(p, q)
    assert np.array_equal(dpq, sys.metric_many(q, p))
    assert np.all(sys.metric_many(p, p) == 0)
    assert np.all(dpq >= 0)
    assert np.all(dpq <= sys.metric_many(p, r) + sys.metric_many(r, q) + 1e-15)


def test_skew_closed_form_against_steps():
    sk = SkewProduct(GOLDEN)
    rng = np.random.default_rng(3)
    for p in rng.random((20, 2)):
        q = p.copy()
        for n in range(1, 60):
            q = sk.step(q)
            assert sk.metric(q, sk.act([n], p)) < 1e-12
    x, y = 0.2, 0.1
    assert np.allclose(sk.act([1], [x, y]), np.mod([x + GOLDEN, y + 2 * x + GOLDEN], 1))


def test_rotation_isometry_and_skew_base_isometry():
    rng = np.random.default_rng(4)
    rot = TorusRotation([[GOLDEN, 0.3], [0.1, np.sqrt(2) - 1]])
    p, q = rot.random_points(rng, 1000), rot.random_points(rng, 1000)
    t = rng.integers(-10**5, 10**5, size=(1000, 2))
    assert np.max(np.abs(rot.metric_many(rot.act_many(t, p), rot.act_many(t, q)) - rot.metric_many(p, q))) < 1e-12
    sk = SkewProduct()
    p, q = sk.random_points(rng, 1000), sk.random_points(rng, 1000)
    t = rng.integers(-10**4, 10**4, size=(1000, 1))
    before = circle_dist(p[:, 0], q[:, 0])
    after = circle_dist(sk.act_many(t, p)[:, 0], sk.act_many(t, q)[:, 0])
    assert np.max(np.abs(before - after)) < 1e-12


@pytest.mark.parametrize("sys", [SkewProduct(), Sturmian()], ids=lambda s: s.kind)
def test_factor_equivariance(sys):
    rng = np.random.default_rng(5)
    p = sys.random_points(rng, 10**4)
    t = rng.integers(-10**4, 10**4, size=(10**4, 1))
    up = sys.factor_many(sys.act_many(t, p))
    down = sys.factor.act_many(t, sys.factor_many(p))
    assert np.max(sys.factor.metric_many(up, down)) < 1e-12


def test_no_factor_declared():
    with pytest.raises(SystemMismatch):
        TorusRotation([[GOLDEN]]).factor_map([0.1])


def _decode_window(st: Sturmian, window: np.ndarray, grid: int = 2**20):
    """Independent inversion: every angle on a fine grid whose coding reproduces the window."""
    theta = (np.arange(grid) + 0.5) / grid
    ok = np.ones(grid, dtype=bool)
    for n, s in zip(st.positions, window):
        r = np.mod(theta + n * st.alpha, 1.0)
        ok &= (r >= 1 - st.alpha) == s
    return theta[ok]


def test_sturmian_window_decodes_to_the_angle():
    st = Sturmian(GOLDEN, window=32)
    rng = np.random.default_rng(6)
    # three-gap bound: W positions cut the circle into arcs of length < 3 / W
    for theta in rng.random(20):
        p = st.point(theta)
        arc = _decode_window(st, st.render(p))
        assert arc.size
        assert arc.min() - 2**-20 <= theta <= arc.max() + 2**-20 or arc.max() - arc.min() > 0.5
        width = arc.max() - arc.min()
        assert width < 3 / st.window
        assert width <= st.factor_modulus(2.0 ** -(st.window // 2)) + 2**-19


def test_sturmian_asymptotic_pair():
    st = Sturmian()
    p, q = st.point(0.0, 1), st.point(0.0, -1)
    assert st.metric(p, q) == 1.0
    assert st.metric(st.act([1], p), st.act([1], q)) == 0.5
    assert st.metric(st.act([5], p), st.act([5], q)) == 2.0**-5
    assert st.metric(st.act([40], p), st.act([40], q)) == 0.0
    assert st.metric(st.act([-40], p), st.act([-40], q)) == 0.0


def test_sturmian_shift_is_window_shift():
    st = Sturmian()
    p = st.point(0.37)
    w0 = st.render(p)
    w1 = st.render(st.act([1], p))
    assert np.array_equal(w1[:-1], w0[1:])


def test_sturmian_factor_modulus_is_conservative():
    st = Sturmian()
    rng = np.random.default_rng(7)
    p = st.random_points(rng, 20000)
    q = st.random_points(rng, 20000)
    for delta in (0.2, 0.05, 2**-8):
        close = st.metric_many(p, q) < delta
        if close.any():
            base = circle_dist(p[close, 0], q[close, 0])
            assert base.max() <= st.factor_modulus(delta) + 1e-12


def test_finite_perm_validation():
    with pytest.raises(SystemMismatch):
        FinitePerm([[0, 0, 1]])
    with pytest.raises(SystemMismatch):
        FinitePerm([[1, 0, 2], [0, 2, 1]])
    with pytest.raises(SystemMismatch):
        FinitePerm([[1, 0, 2, 3]])
    fp = FinitePerm([[1, 0, 2, 3]], minimal=False)
    assert fp.orbit(0) == {0, 1}
    c = cyclic(5)
    assert c.orbit(3) == set(range(5))
    assert c.act([7], [1])[0] == 3


def test_convergents_of_golden_ratio():
    assert continued_fraction(GOLDEN, 6) == [0, 1, 1, 1, 1, 1]
    assert convergents(GOLDEN, 6)[-1] == Fraction(5, 8)
    rot = TorusRotation([[GOLDEN]])
    assert rot.convergents[0][:3] == [Fraction(0), Fraction(1), Fraction(1, 2)]


def test_system_configs_round_trip(tmp_path):
    for sys in SYSTEMS + [FinitePerm([[1, 2, 0]])]:
        again = system_from_config(sys.config())
        assert again.config() == sys.config()
    (tmp_path / "s.toml").write_text('[system]\nkind = "sturmian"\nalpha = 0.4142135623730951\nwindow = 16\n')
    st = load_system(tmp_path / "s.toml")
    assert st.kind == "sturmian" and st.window == 16
    with pytest.raises(SystemMismatch):
        system_from_config({"kind": "bogus"})
    with pytest.raises(SystemMismatch):
        system_from_config({"kind": "skew_product", "rank": 2})
    with pytest.raises(SystemMismatch):
        TorusRotation([[GOLDEN]]).check_points([0.1, 0.2])
