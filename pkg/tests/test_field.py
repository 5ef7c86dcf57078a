import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heisvp import field as F
from heisvp import heis
from heisvp.field import DomainError, GridField, PolyField, QuadRegion


def quad_poly():
    return PolyField([[0.05, 0.2, -0.1], [0.3, 0.15, 0.0], [-0.2, 0.0, 0.0]])


def test_poly_eval_and_derivs():
    f = quad_poly()
    x, z = 0.4, -0.7
    v, vx, vz = f.eval_derivs(np.array([x]), np.array([z]))
    expect = 0.05 + 0.2 * z - 0.1 * z * z + 0.3 * x + 0.15 * x * z - 0.2 * x * x
    assert v[0] == pytest.approx(expect)
    assert vx[0] == pytest.approx(0.3 + 0.15 * z - 0.4 * x)
    assert vz[0] == pytest.approx(0.2 - 0.2 * z + 0.15 * x)


@pytest.mark.parametrize("w", [1e-12, 1e-6, 0.3])
def test_shift_diff_without_cancellation(w):
    f = PolyField.affine(0.0, 0.0, 1.0)
    z = np.array([0.1, 5.0, 1e4])
    np.testing.assert_allclose(f.shift_diff(np.zeros(3), z, w), w, rtol=1e-12)


@pytest.mark.parametrize(
    "aut",
    [heis.Shear(0.6), heis.Stretch(2.0, 0.5), heis.Stretch(-1.5, 2.0), heis.LeftTranslate((0.3, -0.2, 0.1)),
     heis.Stretch(0.5, 3.0).then(heis.Shear(-1.0))],
)
def test_transformed_graph_is_image_of_graph(aut):
    f = quad_poly()
    g = f.transform(aut)
    rng = np.random.default_rng(0)
    v = np.stack([rng.uniform(-1, 1, 50), np.zeros(50), rng.uniform(-1, 1, 50)], axis=1)
    q = aut(F.graph_point(f, v))
    w = heis.project_v0(q)
    np.testing.assert_allclose(F.graph_point(g, w), q, rtol=1e-10, atol=1e-12)


def test_transform_of_grid_field_stays_compiled(wave_grid):
    g = wave_grid.transform(heis.Stretch(2.0, 2.0))
    assert g.kernel() is not None
    assert g.period == pytest.approx((2.0, 4.0))


def test_grid_window_guard():
    g = GridField.from_function(lambda x, z: x + z, 8, 8)
    assert g.eval(0.5, 0.5) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        g.eval(1.5, 0.5)


@pytest.mark.parametrize("interp", ["bilinear", "bicubic"])
def test_grid_reproduces_nodes(interp):
    g = GridField.from_function(lambda x, z: np.sin(3 * x) * np.cos(2 * z), 17, 13, interp=interp)
    xs, zs = g.nodes()
    X, Z = np.meshgrid(xs, zs, indexing="ij")
    np.testing.assert_allclose(g.eval(X, Z), np.sin(3 * X) * np.cos(2 * Z), atol=1e-12)


def test_bicubic_is_more_accurate(wave_grid):
    exact = lambda x, z: 0.15 * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * z)
    rng = np.random.default_rng(1)
    x, z = rng.random((2, 2000))
    cubic = np.abs(wave_grid.eval(x, z) - exact(x, z)).max()
    lin = np.abs(wave_grid.with_interp("bilinear").eval(x, z) - exact(x, z)).max()
    assert cubic < lin / 10


def test_periodic_grid_repeats(wave_grid):
    rng = np.random.default_rng(2)
    x, z = rng.random((2, 100))
    np.testing.assert_allclose(wave_grid.eval(x + 3, z - 2), wave_grid.eval(x, z), atol=1e-12)


@pytest.mark.parametrize("fmt", ["binary", "csv"])
def test_grid_round_trip(tmp_path, wave_grid, fmt):
    path = tmp_path / ("f.csv" if fmt == "csv" else "f.field")
    if fmt == "csv":
        wave_grid.save_csv(path)
        back = GridField.load_csv(path)
    else:
        wave_grid.save(path)
        back = GridField.load(path)
    np.testing.assert_array_equal(back.samples, wave_grid.samples)
    assert back.header() == wave_grid.header()


def test_region_area_and_nodes():
    reg = QuadRegion.parabolic(-1.0, 2.0, (0.5, 0.2, -0.3), 0.25)
    assert reg.area == pytest.approx(3 * 0.5)
    xs, zs, ws = reg.midpoint_nodes(20, 5)
    assert ws.sum() == pytest.approx(reg.area)
    assert reg.contains(xs, zs).all()


@pytest.mark.parametrize(
    "aut, factor",
    [(heis.Shear(1.0), 1.0), (heis.Stretch(2.0, -0.5), 2.0), (heis.Stretch(3.0, 3.0), 27.0),
     (heis.LeftTranslate((1.0, 0.5, 0.0)), 1.0)],
)
def test_region_image_area(aut, factor):
    reg = QuadRegion.rect(0.0, 1.0, 0.0, 1.0)
    img = reg.apply(aut)
    xs, zs, _ = reg.midpoint_nodes(7, 7)
    v = np.stack([xs, np.zeros_like(xs), zs], axis=1)
    w = heis.induced_v0(aut, v)
    assert img.contains(w[:, 0], w[:, 2]).all()
    assert img.area == pytest.approx(factor * reg.area)


def test_epigraph_membership():
    f = PolyField.constant(0.25)
    assert F.in_epigraph(f, (0.3, 0.3, 0.0))
    assert not F.in_epigraph(f, (0.3, 0.2, 0.0))
    p = F.graph_point(f, (0.3, 0.0, 0.1))
    assert p.y == pytest.approx(0.25)


def test_horizontal_derivative_of_linear_field():
    # psi = z: d_psi psi = 0 - z * 1
    f = PolyField.affine(0.0, 0.0, 1.0)
    np.testing.assert_allclose(F.horiz_deriv(f, np.array([0.2, 0.9]), np.array([0.5, -1.0])), [-0.5, 1.0])


def test_characteristic_of_linear_field_is_exponential():
    # g' = -g  =>  g(t) = g0 exp(-t)
    f = PolyField.affine(0.0, 0.0, 1.0)
    c = F.flow_char(f, (0.0, 1.0), (-1.0, 2.0), 1e-2)
    np.testing.assert_allclose(c.g, np.exp(-c.x), rtol=1e-8)
    assert c.residual(f) < 1e-12
    assert c.integral(0.0, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-8)


def test_flow_step_divides_legs():
    c = F.flow_char(PolyField.constant(0.1), (0.5, 0.0), (0.0, 2.0), 0.3)
    assert 0.5 in c.x and c.x[0] == 0.0 and c.x[-1] == 2.0
    np.testing.assert_allclose(c.g, -0.1 * (c.x - 0.5), atol=1e-14)


def test_flow_rejects_start_outside_span():
    with pytest.raises(ValueError):
        F.flow_char(PolyField.constant(0.0), (3.0, 0.0), (0.0, 1.0))


@given(st.floats(-0.9, 0.9), st.floats(-0.5, 0.5))
@settings(max_examples=30, deadline=None)
def test_characteristic_is_projected_horizontal_line_for_affine_field(c0, cx):
    # psi = c0 + cx x: characteristics are projections of horizontal lines of slope cx
    f = PolyField.affine(c0, cx, 0.0)
    c = F.flow_char(f, (0.0, 0.2), (-1.0, 1.0), 1e-2)
    L = heis.HorizontalLine(c0, 0.2, cx)
    np.testing.assert_allclose(c.g, L.g(c.x), atol=1e-12)


@pytest.mark.parametrize("c0", [0.0, 0.3, -2.0])
def test_constant_fields_are_lipschitz_zero(c0):
    assert F.lipschitz_estimate(PolyField.constant(c0), npairs=2000) == pytest.approx(0.0, abs=1e-12)


def test_intrinsic_linear_constant_grows_with_slope():
    small = F.lipschitz_estimate(PolyField.affine(0.0, 0.2, 0.0), npairs=2000)
    big = F.lipschitz_estimate(PolyField.affine(0.0, 0.8, 0.0), npairs=2000)
    assert 0 < small < big


def test_lipschitz_estimate_grows_with_amplitude(wave_grid):
    lam1 = F.lipschitz_estimate(wave_grid, npairs=5000)
    big = GridField(3 * wave_grid.samples, (0, 1, 0, 1), True, "bicubic")
    assert 0 < lam1 < F.lipschitz_estimate(big, npairs=5000)


def test_slope_bound():
    assert F.slope_bound(0.6) == pytest.approx(0.75)
    assert math.isinf(F.slope_bound(1.0))


def test_area_energy_of_vertical_plane():
    assert F.area_energy(PolyField.affine(0.2, 0.5, 0.0)) == pytest.approx(math.sqrt(1.25))
