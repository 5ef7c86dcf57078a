import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heisvp import nonmono as N
from heisvp.field import PolyField, QuadRegion
from heisvp.heis import HorizontalLine


def parabola(k=0.5):
    return PolyField([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [k, 0.0, 0.0]])


def test_interval_set_validation():
    with pytest.raises(ValueError):
        N.IntervalSet(np.array([0.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        N.IntervalSet(np.array([0.0, 0.5]), np.array([1.0, 2.0]))


def test_from_crossings_and_complement():
    S = N.IntervalSet.from_crossings([1.0, 2.0, 4.0], positive_left=True)
    assert S.left_ray and not S.right_ray
    np.testing.assert_array_equal(S.bounded()[0], [2.0])
    C = S.complement()
    np.testing.assert_array_equal(C.lo, [1.0, 4.0])
    np.testing.assert_array_equal(C.hi, [2.0, np.inf])
    np.testing.assert_array_equal(C.complement().hi, S.hi)
    assert S.contains([0.0, 1.5, 3.0]).tolist() == [True, False, True]


def test_merge_crossings_drops_close_pairs():
    np.testing.assert_array_equal(N.merge_crossings(np.array([0.0, 1e-12, 1.0, 2.0])), [1.0, 2.0])


@pytest.mark.parametrize(
    "R, window, expect",
    [(2.0, None, 3.5), (1.5, None, 1.5), (0.25, None, 0.0), (2.0, (0.5, 3.2), 2.75), (2.0, [(-1, 0.5), (3.4, 4)], 0.75)],
)
def test_omega_hat_hand_cases(R, window, expect):
    # S = [0, 1] u [3, 3.5]; the complement has one bounded gap (1, 3)
    S = N.IntervalSet(np.array([0.0, 3.0]), np.array([1.0, 3.5]))
    assert N.omega_hat(S, R, window) == pytest.approx(expect)


def test_omega_hat_is_symmetric_under_complement():
    S = N.IntervalSet(np.array([0.0, 2.0, 5.0]), np.array([1.0, 2.5, 7.0]))
    assert N.omega_hat(S, 3.0) == N.omega_hat(S.complement(), 3.0)


def test_line_trace_on_parabola():
    # y0 + m t > 0.5 t^2 on the open interval between the quadratic roots
    L = HorizontalLine(1.0, 0.3, 0.5)
    S = N.line_trace(parabola(), L, (-4.0, 4.0))
    disc = math.sqrt(0.25 + 2.0)
    assert len(S) == 1
    assert S.lo[0] == pytest.approx(0.5 - disc, abs=1e-9)
    assert S.hi[0] == pytest.approx(0.5 + disc, abs=1e-9)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 2).map(lambda v: v * np.random.default_rng(0).choice([-1, 1])))
@settings(max_examples=40, deadline=None)
def test_line_meets_constant_epigraph_in_a_ray(c, y0, m):
    L = HorizontalLine(y0, 0.0, m)
    S = N.line_trace(PolyField.constant(c), L, (-60.0, 60.0))
    cross = (c - y0) / m
    if abs(cross) < 59:
        assert len(S) == 1 and (S.left_ray or S.right_ray)
        assert S.endpoints()[0] == pytest.approx(cross, abs=1e-8)


def test_line_window_of_flat_line():
    L = HorizontalLine(0.0, 0.5, 0.0)
    assert N.line_window(QuadRegion.unit_square(), L) == [(pytest.approx(0.0), pytest.approx(1.0))]
    assert N.line_window(QuadRegion.unit_square(), HorizontalLine(0.0, 3.0, 0.0)) == []


def brute_omega(k, reg, line, xc, R):
    """omega-hat of one line against psi = k x^2 from the quadratic formula."""
    m, yc, zc = line
    # yc + m s > k (xc + s)^2
    a, b, c = k, 2 * k * xc - m, k * xc * xc - yc
    disc = b * b - 4 * a * c
    if disc <= 0:
        return 0.0
    s1, s2 = (-b - math.sqrt(disc)) / (2 * a), (-b + math.sqrt(disc)) / (2 * a)
    ell = s2 - s1
    if ell > R:
        return 0.0
    inside = 0
    for s in (s1, s2):
        x = xc + s
        z = zc - yc * s - 0.5 * m * s * s
        inside += bool(reg.contains(np.array([x]), np.array([z]))[0])
    # each endpoint carries ell from the interval, the complement's rays carry nothing
    return 0.5 * ell * inside


@pytest.mark.parametrize("R", [0.5, 1.5, 4.0])
def test_omega_lines_against_closed_form(R):
    k = 0.5
    reg = QuadRegion.rect(-0.5, 0.7, -1.0, 1.0)
    box = N.line_box(parabola(k), reg, 1.0)
    lines, _ = N.sample_lines(box, 2048, seed=4)
    got = N.omega_lines(parabola(k), reg, lines, box.xc, [R])[:, 0]
    want = np.array([brute_omega(k, reg, ln, box.xc, R) for ln in lines])
    np.testing.assert_allclose(got, want, atol=1e-8)
    assert want.max() > 0


@pytest.mark.parametrize("c0, cx", [(0.0, 0.0), (0.1, 0.4), (-0.2, -1.0)])
def test_vertical_planes_have_no_omega(c0, cx):
    est = N.omega_p(PolyField.affine(c0, cx, 0.0), None, 2.0, nsamples=4096, m_max=2.0)
    assert est.value == 0.0 and est.stderr == 0.0


def test_omega_multi_is_monotone_in_R(standard_surface):
    ests = N.omega_p_multi(standard_surface.psi, None, [0.05, 0.2, 1.0, 4.0], nsamples=512, seed=1, m_max=1.0)
    vals = [e.value * e.R for e in ests]  # line means before the 1/R factor
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_kinematic_sum_adds_scales(standard_surface):
    total, se, ests = N.kinematic_sum(standard_surface.psi, None, (0, 3), 1.0, nsamples=256, seed=2, m_max=1.0)
    assert len(ests) == 4
    assert total == pytest.approx(sum(e.value for e in ests))
    assert [e.R for e in ests] == [1.0, 0.5, 0.25, 0.125]
    assert se >= 0


def test_omega_is_reproducible(standard_surface):
    e1 = N.omega_p(standard_surface.psi, None, 1.0, nsamples=256, seed=5, m_max=1.0)
    e2 = N.omega_p(standard_surface.psi, None, 1.0, nsamples=256, seed=5, m_max=1.0)
    assert e1.value == e2.value
    assert '"R": 1.0' in e1.to_json()


@pytest.mark.parametrize("bad", [dict(nsamples=0), dict(R=-1.0)])
def test_omega_rejects_bad_arguments(bad):
    kw = dict(nsamples=64, R=1.0, m_max=1.0)
    kw.update(bad)
    with pytest.raises(ValueError):
        N.omega_p(parabola(), QuadRegion.unit_square(), **kw)


def test_default_m_max_is_positive():
    assert N.default_m_max(PolyField.constant(0.3)) > 0
