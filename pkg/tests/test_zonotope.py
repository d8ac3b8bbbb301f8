import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from zonofusion import (
    DegenerateWarning,
    DimensionError,
    EmptySetError,
    InvalidDirectionError,
    InvalidOrderError,
    InvalidWeightError,
    WeightMatrix,
    Zonotope,
    contains_point,
    halfspace_rep,
    interval_hull,
    linear_image,
    minkowski_sum,
    reduce,
    support,
    volume,
    weighted_norm_sq,
)
from zonofusion.stability import compute_mu

from conftest import lp_member, random_zonotope, sample_in

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def gen_matrix(n, r):
    return arrays(np.float64, (n, r), elements=finite)


# construction

def test_zonotope_is_immutable_copy():
    R = np.eye(2)
    z = Zonotope([0, 0], R)
    R[0, 0] = 5
    assert z.generators[0, 0] == 1
    with pytest.raises(ValueError):
        z.generators[0, 0] = 3


def test_zonotope_rejects_nonfinite_and_bad_shapes():
    with pytest.raises(ValueError):
        Zonotope([0, np.nan], np.eye(2))
    with pytest.raises(DimensionError):
        Zonotope([0, 0], np.eye(3))


def test_record_roundtrip_is_exact():
    rng = np.random.default_rng(0)
    z = random_zonotope(rng, 3, 5)
    z2 = Zonotope.from_record(z.to_record())
    assert np.array_equal(z.center, z2.center) and np.array_equal(z.generators, z2.generators)
    empty = Zonotope([1.0, 2.0], np.zeros((2, 0)))
    assert Zonotope.from_record(empty.to_record()).order == 0


def test_weight_matrix_validation():
    with pytest.raises(InvalidWeightError):
        WeightMatrix([[1, 2], [0, 1]])
    with pytest.raises(InvalidWeightError):
        WeightMatrix([[1, 0], [0, -1]])
    W = WeightMatrix(np.diag([4.0, 1.0]))
    assert W.lambda_min == 1 and W.lambda_max == 4 and W.condition == 4


# minkowski sum / linear image

def test_minkowski_sum_examples():
    s = minkowski_sum(Zonotope([0, 0], np.eye(2)), Zonotope([1, 1], np.eye(2)))
    assert np.allclose(s.center, [1, 1]) and np.allclose(s.generators, np.hstack([np.eye(2)] * 2))
    z = Zonotope([1, 2], [[1, 0, 2], [0, 1, 1]])
    s = minkowski_sum(z, Zonotope([0, 0], np.zeros((2, 0))))
    assert np.allclose(s.center, z.center) and np.allclose(s.generators, z.generators)
    s = minkowski_sum(Zonotope([1], [[2]]), Zonotope([-1], [[3]]))
    assert np.allclose(s.center, [0]) and np.allclose(s.generators, [[2, 3]])
    with pytest.raises(DimensionError):
        minkowski_sum(Zonotope([0], [[1]]), Zonotope([0, 0], np.eye(2)))


def test_linear_image_examples():
    z = Zonotope([1, 0], np.diag([1.0, 2.0]))
    rot = np.array([[0, -1], [1, 0]])
    out = linear_image(rot, z)
    assert np.allclose(out.center, [0, 1]) and np.allclose(out.generators, [[0, -2], [1, 0]])
    out = linear_image(2 * np.eye(2), z)
    assert np.allclose(out.center, 2 * z.center) and np.allclose(out.generators, 2 * z.generators)
    out = linear_image(np.zeros((2, 2)), z)
    assert np.allclose(out.center, 0) and np.allclose(out.generators, 0)
    with pytest.raises(DimensionError):
        linear_image(np.eye(3), z)


# reduction

def test_reduce_full_box_example():
    z = Zonotope([0, 0], [[1, 1, 0], [0, 1, 1]])
    assert np.allclose(reduce(z, 2).generators, np.diag([2, 2]))


def test_reduce_noop_reorders_columns():
    R = np.array([[1.0, 3, 0], [0, 0, 2]])
    out = reduce(Zonotope([0, 0], R), 3)
    assert np.allclose(out.generators, R[:, [1, 2, 0]])


def test_reduce_ties_keep_original_order():
    R = np.array([[1.0, 0, -1, 0.1], [0, 1, 0, 0]])
    out = reduce(Zonotope([0, 0], R), 4)
    assert np.allclose(out.generators, R)


def test_reduce_rejects_small_order():
    with pytest.raises(InvalidOrderError):
        reduce(Zonotope([0, 0], np.eye(2)), 1)


def test_reduce_contains_samples():
    rng = np.random.default_rng(3)
    z = random_zonotope(rng, 2, 6)
    red = reduce(z, 4)
    assert red.order == 4
    h = halfspace_rep(red)
    P = sample_in(z, rng, 10_000)
    assert np.all(h.H @ P <= h.b[:, None] + 1e-9)


@given(st.integers(2, 4), st.integers(0, 6), st.data())
def test_reduce_containment_and_loss_bound(n, extra, data):
    r = n + extra
    d = data.draw(st.integers(1, 4))
    R = data.draw(gen_matrix(n, r + d))
    seed = data.draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    diag = rng.uniform(0.5, 3.0, n)
    W = WeightMatrix(np.diag(diag))
    z = Zonotope(np.zeros(n), R)
    red = reduce(z, r, W)
    assert red.order == r
    mu = compute_mu(W.lambda_min, W.lambda_max, d, n)
    assert weighted_norm_sq(red.generators, W) <= (1 + mu / (d + r)) * weighted_norm_sq(R, W) + 1e-9
    # interval bounds are a cheap necessary check for containment
    lo, hi = z.interval_bounds()
    lo2, hi2 = red.interval_bounds()
    assert np.all(lo2 <= lo + 1e-9) and np.all(hi <= hi2 + 1e-9)
    for u in rng.uniform(-1, 1, size=(20, r + d)):
        assert lp_member(red, R @ u)


# norms

def test_weighted_norm_examples():
    assert weighted_norm_sq(np.eye(2), np.eye(2)) == pytest.approx(2)
    assert weighted_norm_sq(np.diag([1.0, 2.0]), np.eye(2)) == pytest.approx(5)
    assert weighted_norm_sq(np.eye(2), np.diag([4.0, 1.0])) == pytest.approx(5)
    assert weighted_norm_sq(np.zeros((2, 3))) == 0


@given(gen_matrix(3, 4), gen_matrix(3, 4), st.floats(0, 1))
def test_weighted_norm_is_convex(X, Y, theta):
    W = np.array([[2.0, 0.5, 0], [0.5, 1.0, 0.2], [0, 0.2, 3.0]])
    lhs = weighted_norm_sq(theta * X + (1 - theta) * Y, W)
    rhs = theta * weighted_norm_sq(X, W) + (1 - theta) * weighted_norm_sq(Y, W)
    assert lhs <= rhs + 1e-9 * max(1.0, rhs)


# support

def test_support_examples():
    box = Zonotope([0, 0], np.eye(2))
    assert support(box, [1, 0]) == pytest.approx(1)
    assert support(box, [1, 1]) == pytest.approx(2)
    assert support(Zonotope([1, 0], np.eye(2)), [1, 0]) == pytest.approx(2)
    with pytest.raises(InvalidDirectionError):
        support(box, [0, 0])


@given(arrays(np.float64, 3, elements=finite), arrays(np.float64, 3, elements=finite), st.integers(0, 1000))
def test_support_is_sublinear(d1, d2, seed):
    z = random_zonotope(np.random.default_rng(seed), 3, 5)
    if not (np.any(d1) and np.any(d2) and np.any(d1 + d2)):
        return
    assert support(z, d1 + d2) <= support(z, d1) + support(z, d2) + 1e-9


# volume

def test_volume_examples():
    assert volume(Zonotope([0, 0], np.eye(2))) == pytest.approx(4)
    assert volume(Zonotope([0, 0], [[1, 1, 0], [0, 1, 1]])) == pytest.approx(12)
    assert volume(Zonotope([0, 0, 0], np.ones((3, 2)))) == 0
    assert volume(Zonotope([0], [[1, 2]])) == pytest.approx(6)


def test_volume_monte_carlo_oracle():
    z = Zonotope([0, 0], [[1, 1, 0], [0, 1, 1]])
    rng = np.random.default_rng(7)
    lo, hi = z.interval_bounds()
    P = rng.uniform(lo, hi, size=(1_000_000, 2))
    # hexagon: |x| <= 2, |y| <= 2, |x - y| <= 2
    hit = (np.abs(P[:, 0]) <= 2) & (np.abs(P[:, 1]) <= 2) & (np.abs(P[:, 0] - P[:, 1]) <= 2)
    est = hit.mean() * np.prod(hi - lo)
    assert abs(est - volume(z)) / volume(z) <= 0.01


@given(st.integers(0, 10_000), st.integers(2, 3))
def test_volume_scales_with_determinant(seed, n):
    rng = np.random.default_rng(seed)
    z = random_zonotope(rng, n, n + 2)
    L = rng.normal(size=(n, n))
    if abs(np.linalg.det(L)) < 1e-3:
        return
    v = volume(z)
    assert volume(linear_image(L, z)) == pytest.approx(abs(np.linalg.det(L)) * v, rel=1e-9)


# membership

def test_contains_point_examples():
    box = Zonotope([0, 0], np.eye(2))
    assert contains_point(box, [1, 1])
    assert not contains_point(box, [1.001, 0])


def test_contains_point_constructive_oracle():
    rng = np.random.default_rng(11)
    z = random_zonotope(rng, 3, 6)
    P = sample_in(z, rng, 10_000)
    assert all(contains_point(z, p) for p in P.T)


def test_contains_point_agrees_with_lp():
    rng = np.random.default_rng(5)
    z = random_zonotope(rng, 2, 4)
    lo, hi = z.interval_bounds()
    for p in rng.uniform(lo, hi, size=(300, 2)):
        assert contains_point(z, p) == lp_member(z, p)


def test_contains_point_degenerate_fallback():
    flat = Zonotope([0, 0], [[1, 1], [0, 0]])
    with pytest.warns(DegenerateWarning):
        assert contains_point(flat, [1.5, 0])
    with pytest.warns(DegenerateWarning):
        assert not contains_point(flat, [2.5, 0])
    with pytest.warns(DegenerateWarning):
        assert not contains_point(flat, [0, 0.1])


# interval hull

def test_interval_hull_examples():
    V = np.array([[1, 1, -1, -1], [1, -1, 1, -1]], dtype=float)
    box = interval_hull(V)
    assert np.allclose(box.center, 0) and np.allclose(box.generators, np.eye(2))
    pt = interval_hull(np.array([[2.0], [3.0]]))
    assert np.allclose(pt.center, [2, 3]) and np.allclose(pt.generators, 0)
    with pytest.raises(EmptySetError):
        interval_hull(np.zeros((2, 0)))


def test_interval_hull_contains_points():
    rng = np.random.default_rng(2)
    P = rng.normal(size=(3, 25))
    box = interval_hull(P)
    assert all(contains_point(box, p) for p in P.T)
