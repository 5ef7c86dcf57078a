import json
import math

import numpy as np
import pytest

from heisvp import corona as C
from heisvp import nonmono
from heisvp.field import PolyField


def always(flag):
    return lambda Q, i: nonmono.ParamonotoneResult(flag, 0.0, 1.0, None)


def alternate(Q, i):
    return nonmono.ParamonotoneResult(Q.aspect < 0.9, 0.0, 1.0, None)


@pytest.fixture
def flat():
    return PolyField.constant(0.0)


def test_fit_quadratic_is_exact_on_quadratics():
    x = np.linspace(3.0, 5.0, 41)
    c = C.fit_quadratic(x, 1.5 - 2.0 * x + 0.25 * x * x)
    assert c == (pytest.approx(1.5), pytest.approx(-2.0), pytest.approx(0.25))


def test_flat_root_cell(flat):
    Q = C.unit_square_pseudoquad(flat)
    assert Q.area == pytest.approx(1.0)
    assert Q.h == (pytest.approx(0.5), pytest.approx(0.0, abs=1e-12), pytest.approx(0.0, abs=1e-12))
    assert Q.delta_z == pytest.approx(1.0) and Q.aspect == pytest.approx(1.0)
    assert Q.rectilinearity == pytest.approx(0.0, abs=1e-12)
    reg = Q.scaled_region(2.0)
    assert (reg.x0, reg.x1) == (-0.5, 1.5)
    assert reg.area == pytest.approx(8.0)


def test_curved_root_cell_tracks_characteristics(linear_z):
    # psi = z: characteristics z = c exp(-x)
    Q = C.unit_square_pseudoquad(linear_z)
    assert Q.area == pytest.approx(1.0 - math.exp(-1.0), rel=1e-8)
    assert float(Q.g2(0.5)) == pytest.approx(math.exp(-0.5), rel=1e-8)
    # over 4I = [-1.5, 2.5] exp(-x) is far from its quadratic model on I
    assert Q.rectilinearity > C.MU_SMALL


def test_crossing_seeds_are_rejected(flat):
    with pytest.raises(ValueError):
        C.make_pseudoquad(flat, (0.0, 1.0), (0.0, 1.0), (0.0, 0.0))


def test_vertical_children_halve_aspect(linear_z):
    Q = C.unit_square_pseudoquad(linear_z)
    L, R = C.vertical_children(Q)
    assert L.aspect == Q.aspect / 2 and R.aspect == Q.aspect / 2
    assert L.area + R.area == pytest.approx(Q.area, rel=1e-12)


def test_horizontal_children_split_height(linear_z):
    Q = C.unit_square_pseudoquad(linear_z)
    lo, hi, gc = C.horizontal_children(linear_z, Q, C._lattice_step(linear_z, None))
    assert lo.delta_z == hi.delta_z == Q.delta_z / 2
    assert lo.aspect / Q.aspect == pytest.approx(math.sqrt(2))
    assert lo.area + hi.area == pytest.approx(Q.area, rel=1e-10)
    # the cut passes through the middle of the cell above its center
    assert float(gc(0.5)) == pytest.approx(0.5 * math.exp(-0.5) + 0.5 * 0.0, rel=1e-8)


@pytest.mark.parametrize("depth", [1, 3, 5])
def test_all_vertical_tree_weights(flat, depth):
    tree = C.subdivide(flat, max_depth=depth, min_width=0.0, decide=always(False))
    assert len(tree) == 2 ** (depth + 1) - 1
    assert len(tree.leaves()) == 2**depth
    # a depth-k cell has area 2^-k and aspect 2^-k, so weight 8^k; there are 2^k of them
    assert C.weight(tree, tree.vertical()) == pytest.approx(sum(16.0**k for k in range(depth)))
    assert C.carleson_ratio(tree) == pytest.approx(sum(16.0**k for k in range(depth)))


def test_all_horizontal_tree_has_no_carleson_mass(flat):
    tree = C.subdivide(flat, max_depth=4, min_width=0.0, decide=always(True))
    assert C.carleson_ratio(tree) == 0.0
    assert C.weight(tree) == pytest.approx(sum(2.0**k * 8.0 ** (-k) for k in range(5)))


@pytest.mark.parametrize("field", ["flat", "linear_z", "wave_grid"])
def test_invariants_hold_on_mixed_trees(field, request):
    f = request.getfixturevalue(field)
    tree = C.subdivide(f, max_depth=6, min_width=0.0, decide=alternate)
    inv = C.check_invariants(tree)
    assert {k: inv[k] for k in ("tiling", "sibling_height", "height_monotone", "vertical_alpha", "horizontal_alpha")} == dict.fromkeys(
        ("tiling", "sibling_height", "height_monotone", "vertical_alpha", "horizontal_alpha"), 0
    )
    assert tree.vertical() and tree.horizontal()
    if field == "flat":
        assert inv["vertical_weight"] == inv["horizontal_weight"] == 0
        assert set(np.round(inv["vertical_weight_ratios"], 12)) == {8.0}
        assert set(np.round(inv["horizontal_weight_ratios"], 12)) == {0.125}


def test_descendants_and_json(flat, tmp_path):
    tree = C.subdivide(flat, max_depth=2, min_width=0.0, decide=alternate)
    assert tree.descendants(0) == list(range(len(tree)))
    rows = json.loads(tree.to_json(tmp_path / "t.json"))
    assert [r["id"] for r in rows] == list(range(len(tree)))
    assert rows[0]["omega_density"] == 0.0 and rows[-1]["omega_density"] is None
    assert all(n.quad.g1 is None for n in tree.nodes)


def test_paramonotone_decisions_on_a_plane():
    # vertical planes carry no Omega^P, so every cell is cut horizontally
    f = PolyField.affine(0.05, 0.1, 0.0)
    tree = C.subdivide(f, max_depth=3, min_width=0.0, nsamples=256, m_max=1.0)
    assert len(tree.vertical()) == 0 and len(tree.leaves()) == 8
    assert all(n.omega_density == 0.0 for n in tree.nodes if n.cut != "leaf")


def test_approx_plane_recovers_affine_fields():
    f = PolyField.affine(0.2, -0.3, 0.0)
    Q = C.unit_square_pseudoquad(f)
    p = C.approx_plane(f, Q, scale=2.0, n=(32, 32))
    assert p["a"] == pytest.approx(0.2) and p["b"] == pytest.approx(-0.3)
    assert p["sigma_residual"] == pytest.approx(0.0, abs=1e-12)


def test_vper_bound_check_on_flat_tree(flat):
    tree = C.subdivide(flat, max_depth=3, min_width=0.0, decide=alternate)
    out = C.vper_bound_check(tree, flat, steps=5)
    assert out["ratio"] == 0.0 and out["numerator"] == 0.0


def test_vper_bound_check_reports_positive_ratio(wave_grid):
    tree = C.subdivide(wave_grid, max_depth=4, min_width=0.0, decide=alternate)
    out = C.vper_bound_check(tree, wave_grid, steps=9)
    assert out["sigma"] > 0 and 0 < out["ratio"] < math.inf
    assert out["window"][0] == pytest.approx(-math.log(tree.root.quad.delta_z, 4))
