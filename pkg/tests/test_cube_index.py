import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cubelab.cube_index import (
    MAX_DIM,
    CubePoint,
    DimensionError,
    StarPoint,
    SubsetIndex,
    all_subsets,
    check_dim,
    join,
    make_diagonal,
    make_star_diagonal,
    membership_matrix,
    project_coord,
    project_star,
    split,
    split_positions,
    unstar,
)


def test_subset_index_bits():
    e = SubsetIndex.from_members([1, 3], 3)
    assert e.mask == 0b101
    assert e.members == (1, 3)
    assert 1 in e and 2 not in e and 3 in e
    assert len(e) == 2
    assert SubsetIndex(0, 4).is_empty()
    with pytest.raises(ValueError):
        SubsetIndex(8, 3)
    with pytest.raises(ValueError):
        SubsetIndex.from_members([4], 3)


def test_membership_matrix_matches_members():
    for d in range(1, 7):
        M = membership_matrix(d)
        for e in all_subsets(d):
            assert [i + 1 for i in np.flatnonzero(M[e.mask])] == list(e.members)


def test_make_diagonal_examples():
    c = make_diagonal(0.3, 2)
    assert np.array_equal(c.coords[:, 0], [0.3] * 4)
    c1 = make_diagonal([0.1, 0.2], 1)
    assert c1.coords.shape == (2, 2)
    c3 = make_diagonal([0.7], 3)
    for e in all_subsets(3):
        assert project_coord(c3, e)[0] == 0.7


def test_make_diagonal_rejects_zero_and_cap():
    with pytest.raises(DimensionError):
        make_diagonal(0.3, 0)
    with pytest.raises(DimensionError):
        check_dim(MAX_DIM + 1)
    assert check_dim(0, allow_zero=True) == 0


def test_project_star_drops_empty_coordinate():
    c = CubePoint(2, np.array([1.0, 2.0, 3.0, 4.0]))
    assert np.array_equal(project_star(c).coords[:, 0], [2.0, 3.0, 4.0])
    labels = np.arange(8.0)
    s = project_star(CubePoint(3, labels))
    assert np.array_equal(s.coords[:, 0], labels[1:])
    assert np.array_equal(unstar(0.0, s).coords, CubePoint(3, labels).coords)
    s = project_star(make_diagonal(0.4, 4))
    assert s == make_star_diagonal(0.4, 4)


def test_cube_point_length_checked():
    with pytest.raises(DimensionError):
        CubePoint(2, np.zeros(3))
    with pytest.raises(DimensionError):
        StarPoint(2, np.zeros(4))


def test_cube_point_is_read_only():
    c = CubePoint(1, np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        c.coords[0, 0] = 1.0


def test_split_d2_layout():
    c = CubePoint(2, np.array([10.0, 11.0, 12.0, 13.0]))  # (x_0, x_1, x_2, x_12)
    a, b = split(c)
    assert np.array_equal(a.coords[:, 0], [10.0, 11.0])
    assert np.array_equal(b.coords[:, 0], [12.0, 13.0])


def test_split_d1_returns_bare_points():
    a, b = split(CubePoint(1, np.array([[0.1, 0.2], [0.3, 0.4]])))
    assert a.shape == (2,) and b.shape == (2,)
    assert join(a, b) == CubePoint(1, np.array([[0.1, 0.2], [0.3, 0.4]]))


def test_split_diagonal_gives_diagonals():
    a, b = split(make_diagonal([0.5], 4))
    assert a == b == make_diagonal([0.5], 3)


@pytest.mark.parametrize("d", range(1, 11))
def test_split_positions_bijection(d):
    lo, hi = split_positions(d)
    both = np.concatenate([lo, hi])
    assert np.array_equal(np.sort(both), np.arange(1 << d))
    # eps in the first half lacks d, the second half is eps + {d}
    assert np.all(lo >> (d - 1) & 1 == 0)
    assert np.all(hi >> (d - 1) & 1 == 1)
    c = CubePoint(d, np.arange(1 << d, dtype=float))
    a, b = split(c) if d > 1 else (None, None)
    if d > 1:
        assert np.array_equal(a.coords[:, 0], lo)
        assert np.array_equal(b.coords[:, 0], hi)
        for mask in range(1 << (d - 1)):
            eps = SubsetIndex(mask, d - 1)
            with_d = SubsetIndex.from_members(eps.members + (d,), d)
            assert b[eps][0] == c[with_d][0]
            assert a[eps][0] == c[SubsetIndex.from_members(eps.members, d)][0]


def test_join_split_round_trip_random():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        d = int(rng.integers(1, 7))
        m = int(rng.integers(1, 3))
        c = CubePoint(d, rng.random((1 << d, m)))
        assert join(*split(c)) == c


@pytest.mark.parametrize("d", range(1, 7))
def test_project_coord_exhaustive(d):
    c = CubePoint(d, np.arange(1 << d, dtype=float) * 0.5)
    for mask, eps in itertools.product(range(1 << d), [None]):
        e = SubsetIndex(mask, d)
        assert project_coord(c, e)[0] == c.coords[mask, 0]
        assert c[e][0] == c[mask][0]
    with pytest.raises(DimensionError):
        project_coord(c, SubsetIndex(0, d + 1))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.floats(0, 1, exclude_max=True))
def test_star_of_diagonal_is_constant(d, x):
    s = project_star(make_diagonal(x, d))
    assert np.all(s.coords == x)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_split_join_property(d, seed):
    c = CubePoint(d, np.random.default_rng(seed).random(1 << d))
    a, b = split(c)
    assert a.dim == b.dim == d - 1
    assert join(a, b) == c
