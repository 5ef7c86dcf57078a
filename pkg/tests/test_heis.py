import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heisvp import heis
from heisvp.acceptance import word_distance_oracle

coord = st.floats(-50, 50, allow_nan=False)
point = st.tuples(coord, coord, coord)


@given(point, point, point)
def test_associativity(p, q, r):
    lhs = heis.mul(heis.mul(p, q), r)
    rhs = heis.mul(p, heis.mul(q, r))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-9)


@given(point)
def test_inverse_and_identity(p):
    np.testing.assert_allclose(heis.mul(p, heis.inv(p)), 0.0, atol=1e-12)
    assert heis.mul(heis.ORIGIN, p) == heis.HeisPoint(*map(float, p))


def test_commutator_is_central():
    # [X, Y] = X Y X^-1 Y^-1 = Z
    c = heis.mul(heis.mul(heis.X, heis.Y), heis.mul(heis.inv(heis.X), heis.inv(heis.Y)))
    assert c == pytest.approx((0.0, 0.0, 1.0))


@given(point)
def test_projection_idempotent_and_coset(p):
    v = heis.project_v0(p)
    assert v[1] == 0.0
    np.testing.assert_allclose(heis.project_v0(v), v, atol=1e-12)
    # Pi(p Y^t) = Pi(p)
    np.testing.assert_allclose(heis.project_v0(heis.mul(p, (0.0, 1.7, 0.0))), v, rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("lam", [0.5, 2.0, 3.0])
def test_dilation_is_homomorphism(lam):
    rng = np.random.default_rng(1)
    p, q = rng.normal(size=(2, 50, 3))
    lhs = heis.dilate(heis.mul(p, q), lam)
    rhs = heis.mul(heis.dilate(p, lam), heis.dilate(q, lam))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize(
    "aut",
    [heis.Stretch(2.0, -0.5), heis.Shear(1.3), heis.Rotate(0.7), heis.Stretch(1.0, 3.0).then(heis.Shear(-0.4))],
)
def test_automorphisms_respect_product(aut):
    rng = np.random.default_rng(2)
    p, q = rng.normal(size=(2, 40, 3))
    np.testing.assert_allclose(aut(heis.mul(p, q)), heis.mul(aut(p), aut(q)), rtol=1e-12, atol=1e-12)


def test_stretch_rejects_zero():
    with pytest.raises(ValueError):
        heis.Stretch(0.0, 1.0)


@pytest.mark.parametrize("aut", [heis.Stretch(2.0, 0.5), heis.Shear(0.8)])
def test_induced_map_fixes_projection(aut):
    # Pi(aut(p)) depends on p only through Pi(p) for coset-preserving maps
    rng = np.random.default_rng(3)
    p = rng.normal(size=(20, 3))
    v = heis.project_v0(p)
    np.testing.assert_allclose(heis.project_v0(aut(p)), heis.induced_v0(aut, v), atol=1e-12)


def test_induced_map_requires_plane_points():
    with pytest.raises(ValueError):
        heis.induced_v0(heis.Shear(1.0), (1.0, 1.0, 0.0))


@given(point, st.floats(-3, 3))
@settings(max_examples=50)
def test_horizontal_line_through_point(p, m):
    L = heis.HorizontalLine.through(p, m)
    np.testing.assert_allclose(L.point(p[0]), p, rtol=1e-9, atol=1e-7)
    # consecutive points differ by a horizontal step
    t = np.array([0.3, 1.1])
    a, b = L.point(t)
    step = heis.mul(heis.inv(a), b)
    assert step[2] == pytest.approx(0.0, abs=1e-9)
    assert L.g(p[0]) == pytest.approx(heis.project_v0(p)[2], rel=1e-9, abs=1e-7)


def test_horizontal_line_projection_is_parabola():
    L = heis.HorizontalLine(0.4, -0.2, 1.5)
    t = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(heis.project_v0(L.point(t))[:, 2], L.g(t), atol=1e-12)
    h = 1e-6
    np.testing.assert_allclose((L.g(t + h) - L.g(t - h)) / (2 * h), L.gprime(t), atol=1e-6)


@pytest.mark.parametrize(
    "p, norm",
    [((1.0, 0.0, 0.0), 1.0), ((0.0, -2.5, 0.0), 2.5), ((3.0, 4.0, 0.0), 5.0)],
)
def test_cc_bounds_on_horizontal_points(p, norm):
    lo, hi = heis.cc_bounds(p)
    assert lo <= norm <= hi
    assert lo == pytest.approx(norm)


def test_cc_bounds_center():
    # d(0, Z) = 2 sqrt(pi) (isoperimetric circle)
    lo, hi = heis.cc_bounds((0.0, 0.0, 1.0))
    assert lo <= 2 * math.sqrt(math.pi) <= hi
    assert heis.cc_upper_sharp((0.0, 0.0, 1.0)) == pytest.approx(2 * math.sqrt(math.pi))


@given(point)
@settings(max_examples=50)
def test_cc_bounds_homogeneous(p):
    lo, hi = heis.cc_bounds(p)
    lo2, hi2 = heis.cc_bounds(heis.dilate(p, 3.0))
    assert lo2 == pytest.approx(3 * lo, rel=1e-9, abs=1e-12)
    assert hi2 == pytest.approx(3 * hi, rel=1e-9, abs=1e-12)
    assert lo <= hi


def test_word_ball_radius_one():
    ball = heis.word_ball(1)
    assert len(ball) == 5
    pts = set(zip(ball.x.tolist(), ball.y.tolist(), ball.two_z.tolist()))
    assert pts == {(0, 0, 0), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)}


@pytest.mark.parametrize("n", [2, 3, 5])
def test_word_ball_matches_dictionary_search(n):
    ball = heis.word_ball(n)
    for x, y, z2, d in zip(ball.x, ball.y, ball.two_z, ball.dist):
        assert word_distance_oracle((x, y, z2), n) == d


def test_word_ball_layer_counts():
    # |B_1| = 5 and |B_2| = 17 by exhaustive enumeration
    counts = np.cumsum(heis.word_ball(3).layer_counts())
    assert counts[:3].tolist() == [1, 5, 17]


def test_word_ball_guard():
    with pytest.raises(heis.WordBallTooLarge):
        heis.word_ball(60, guard=1000)


def test_word_ball_csv(tmp_path):
    ball = heis.word_ball(2)
    path = tmp_path / "ball.csv"
    ball.to_csv(path)
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert rows.shape == (17, 4)


@pytest.mark.parametrize("p, q", [((1, 0, 0), (0, 1, 0)), ((2, -1, 3), (-1, 4, -2))])
def test_lattice_mul_matches_real_product(p, q):
    r = heis.lattice_mul(p, q)
    real = heis.mul((p[0], p[1], p[2] / 2), (q[0], q[1], q[2] / 2))
    assert (r[0], r[1], r[2] / 2) == pytest.approx(tuple(real))
