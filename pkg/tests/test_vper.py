import math

import numpy as np
import pytest

from heisvp import heis, vper
from heisvp.field import FunctionField, GridField, PolyField, QuadRegion


def sine_field(amp=0.1):
    return FunctionField(lambda x, z: amp * np.sin(2 * np.pi * z), period=(1.0, 1.0))


def sine_vpp(amp, a):
    # mean over z of |sin(2 pi z) - sin(2 pi (z - w))| is (4 / pi) |sin(pi w)|
    return 2.0**a * amp * 4.0 / math.pi * abs(math.sin(math.pi * 2.0 ** (-2 * a)))


@pytest.mark.parametrize("a", [-1.0, 0.0, 0.6, 2.0, 5.0])
@pytest.mark.parametrize("region", [None, QuadRegion.rect(0.2, 0.7, -1.0, 0.5), QuadRegion.parabolic(0.0, 1.0, (0.1, 0.3, 0.2), 0.5)])
def test_linear_z_closed_form(linear_z, a, region):
    reg = QuadRegion.unit_square() if region is None else region
    assert vper.vpp(linear_z, region, a) == pytest.approx(2.0 ** (-a) * reg.area, rel=1e-12)


@pytest.mark.parametrize("a", [0.25, 1.0, 3.0])
def test_sine_closed_form(a):
    assert vper.vpp(sine_field(), None, a, n=(16, 4096)) == pytest.approx(sine_vpp(0.1, a), rel=1e-6)


@pytest.mark.parametrize("c0, cx", [(0.0, 0.0), (0.5, -2.0)])
def test_z_independent_fields_vanish(c0, cx):
    f = PolyField.affine(c0, cx, 0.0)
    assert vper.vpp(f, QuadRegion.rect(-1, 1, -1, 1), 1.5) == 0.0


def test_periodic_reduction_matches_full_rectangle(wave_grid):
    big = QuadRegion.rect(0.0, 3.0, 0.0, 2.0)
    r = vper.vpp_detail(wave_grid, big, 0.5)
    one = vper.vpp(wave_grid, None, 0.5, n=r.nodes)
    assert r.value == pytest.approx(6 * one, rel=1e-12)


def test_stratified_agrees_with_midpoint(wave_grid):
    exact = vper.vpp(wave_grid, None, 1.0, method="midpoint", n=(512, 512))
    res = vper.vpp_detail(wave_grid, None, 1.0, method="stratified", nsamples=1 << 16, seed=3)
    assert res.stderr > 0
    assert abs(res.value - exact) < 5 * res.stderr + 1e-6 * exact


def test_stratified_is_reproducible(wave_grid):
    r1 = vper.vpp_detail(wave_grid, None, 0.3, method="stratified", nsamples=4096, seed=9)
    r2 = vper.vpp_detail(wave_grid, None, 0.3, method="stratified", nsamples=4096, seed=9)
    assert r1.value == r2.value


def test_bilinear_switches_to_bicubic_at_fine_shifts():
    g = GridField.from_function(lambda x, z: np.sin(2 * np.pi * z), 8, 32, (0, 1, 0, 1), periodic=True, interp="bilinear")
    assert not vper.vpp_detail(g, None, 0.5).bicubic
    assert vper.vpp_detail(g, None, 4.0).bicubic
    with pytest.raises(vper.ResolutionError):
        vper.vpp_detail(g, None, 4.0, auto_bicubic=False)


def test_non_periodic_domain_guard():
    g = GridField.from_function(lambda x, z: z, 8, 8, (0, 1, 0, 1), periodic=False)
    with pytest.raises(Exception, match="domain"):
        vper.vpp(g, None, 0.0)


@pytest.mark.parametrize(
    "aut", [heis.Shear(0.7), heis.Stretch(2.0, 2.0), heis.Stretch(3.0, 0.5), heis.Stretch(0.5, 3.0).then(heis.Shear(-1.2))]
)
def test_transformation_laws(aut):
    f = PolyField([[0.0, 0.3, 0.2], [0.1, -0.4, 0.0], [0.25, 0.0, 0.0]])
    assert vper.scaling_check(f, None, (-1.0, 0.0, 1.5), aut, n=(64, 64)) < 1e-12


@pytest.mark.parametrize("aut, factor, shift", [(heis.Shear(3.0), 1.0, 0.0), (heis.Stretch(2.0, 2.0), 8.0, 1.0), (heis.Stretch(4.0, 0.25), 1.0, 0.0)])
def test_law_constants(aut, factor, shift):
    assert vper._law(aut) == (pytest.approx(factor), pytest.approx(shift))


def test_law_rejects_orientation_reversal():
    with pytest.raises(ValueError):
        vper._law(heis.Stretch(-1.0, 1.0))


def test_envelope_bounds_values(wave_grid):
    a = np.linspace(-3, 6, 10)
    p = vper.profile(wave_grid, None, -3, 6, steps=10)
    assert p.envelope_ok()
    assert (p.values <= vper.envelope(wave_grid, None, a) * (1 + 1e-9)).all()


def test_profile_threads_do_not_change_values(wave_grid):
    p1 = vper.profile(wave_grid, None, 0, 2, steps=5, threads=1)
    p2 = vper.profile(wave_grid, None, 0, 2, steps=5, threads=3)
    np.testing.assert_array_equal(p1.values, p2.values)


def test_lq_norm_of_exponential(linear_z):
    # vpP(a) = 2^{-a}:  (int_0^A 2^{-qa} da)^{1/q}
    p = vper.profile(linear_z, None, 0.0, 4.0, steps=801)
    q = 2.0
    exact = ((1 - 2.0 ** (-q * 4.0)) / (q * math.log(2))) ** (1 / q)
    assert vper.lq_norm(p, q) == pytest.approx(exact, rel=1e-5)
    assert vper.lq_norm(p, 1.0, (1.0, 2.0)) == pytest.approx(0.25 / math.log(2), rel=1e-5)


@pytest.mark.parametrize("q, window", [(0.0, None), (2.0, (1.0, 1.0)), (2.0, (-1.0, 1.0))])
def test_lq_norm_rejects_bad_arguments(linear_z, q, window):
    p = vper.profile(linear_z, None, 0.0, 2.0, steps=5)
    with pytest.raises(ValueError):
        vper.lq_norm(p, q, window)


def test_profile_csv(tmp_path, linear_z):
    p = vper.profile(linear_z, None, 0.0, 1.0, steps=3)
    side = p.to_csv(tmp_path / "p.csv")
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0] == "a,vpP" and len(rows) == 4
    assert float(rows[-1].split(",")[1]) == pytest.approx(0.5)
    assert side.exists()


def test_default_grid_density():
    assert len(vper.a_grid(0.0, 10.0)) == vper.POINTS_PER_DECADE + 1
