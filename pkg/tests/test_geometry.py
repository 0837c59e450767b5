import numpy as np
import pytest
from hypothesis import given, strategies as st

from czlab.geometry import (Cube, DimensionError, contains_cube, contains_point, contains_points,
                            critical_dilations, cubes_intersect, dilate, sup_dist)


def test_dilate_examples():
    assert dilate(Cube((0.0,), 2.0), 3.0) == Cube((0.0,), 6.0)
    Q = Cube((0.0,), 2.0)
    assert dilate(Q, 1.0) == Q
    assert dilate(Cube((1.0, 1.0), 0.5), 6.0) == Cube((1.0, 1.0), 3.0)


def test_dilate_rejects_nonpositive():
    with pytest.raises(ValueError):
        dilate(Cube((0.0,), 1.0), 0.0)


def test_cube_validation():
    with pytest.raises(ValueError):
        Cube((0.0,), 0.0)
    with pytest.raises(ValueError):
        Cube((0.0,), -1.0)


def test_closed_membership():
    Q = Cube((0.0,), 2.0)
    assert contains_point(Q, 1.0)
    assert not contains_point(Q, 1.0001)
    assert contains_point(Cube((0.0, 0.0), 2.0), (1.0, 1.0))


def test_membership_dimension_mismatch():
    with pytest.raises(DimensionError):
        contains_point(Cube((0.0, 0.0), 2.0), (1.0,))
    with pytest.raises(DimensionError):
        contains_cube(Cube((0.0,), 1.0), Cube((0.0, 0.0), 1.0))


def test_contains_cube_examples():
    assert contains_cube(Cube((0.0,), 6.0), Cube((0.0,), 2.0))
    assert contains_cube(Cube((0.0,), 2.0), Cube((0.0,), 2.0))
    assert not contains_cube(Cube((0.0,), 2.0), Cube((1.5,), 3.0))


def test_cubes_intersect_touching():
    assert cubes_intersect(Cube((0.0,), 2.0), Cube((2.0,), 2.0))
    assert not cubes_intersect(Cube((0.0,), 2.0), Cube((2.5,), 2.0))


def test_critical_dilations_examples():
    pts = np.array([[0.0], [1.0], [3.0]])
    np.testing.assert_array_equal(critical_dilations(pts, Cube((0.0,), 1.0), 10.0), [2.0, 6.0])
    assert critical_dilations(np.array([[0.0]]), Cube((0.0,), 1.0), 10.0).size == 0
    corner = np.array([[0.5, 0.5]])
    assert 1.0 in critical_dilations(corner, Cube((0.0, 0.0), 1.0), 3.0)


def test_cube_json_roundtrip():
    Q = Cube((0.25, -1.5), 3.0)
    assert Cube.from_json(Q.to_json()) == Q


coords = st.floats(-100, 100, allow_nan=False)
sides = st.floats(1e-3, 100, allow_nan=False)


@given(coords, coords, sides, st.floats(0.1, 10), st.floats(0.1, 10))
def test_dilate_composition(x, y, s, a, b):
    Q = Cube((x, y), s)
    lhs = dilate(dilate(Q, a), b)
    rhs = dilate(Q, a * b)
    assert lhs.center == rhs.center
    assert lhs.side == pytest.approx(rhs.side, rel=1e-15)


@given(coords, sides, st.integers(-8, 8), st.integers(-8, 8))
def test_dilate_composition_exact_for_dyadic(x, s, i, j):
    Q = Cube((x,), s)
    assert dilate(dilate(Q, 2.0 ** i), 2.0 ** j) == dilate(Q, 2.0 ** (i + j))


@given(coords, coords, sides, st.floats(1.0, 10.0))
def test_dilation_is_monotone(x, y, s, eta):
    Q = Cube((x, y), s)
    assert contains_cube(dilate(Q, eta), Q)


@given(st.lists(st.tuples(coords, coords), min_size=1, max_size=30), coords, coords, sides)
def test_points_mask_matches_scalar(pts, cx, cy, s):
    P = np.array(pts)
    Q = Cube((cx, cy), s)
    mask = contains_points(Q, P)
    assert list(mask) == [contains_point(Q, p) for p in P]
    assert np.array_equal(mask, sup_dist(P, Q.center) <= Q.half)


@given(st.lists(coords, min_size=1, max_size=30), coords, sides, st.floats(1.0, 50.0))
def test_critical_dilations_are_jumps(xs, c, s, eta_max):
    P = np.array(xs)[:, None]
    Q = Cube((c,), s)
    for eta in critical_dilations(P, Q, eta_max):
        inside = contains_points(dilate(Q, eta), P).sum()
        just_below = contains_points(dilate(Q, eta * (1 - 1e-9)), P).sum()
        assert inside > just_below
