"""Parametric vertical perimeter.

    vpP_{E,psi}(a) = 2^a  int_E |psi(v) - psi(v Z^{-2^{-2a}})| dv

Right multiplication by Z^{-w} moves a plane point (x, z) to (x, z - w), so
the integrand is a vertical difference quotient of psi.

Spatial integrals use the column midpoint rule of the region.  When the
number of nodes needed to resolve the field exceeds a budget (layered bump
surfaces at fine scales), a stratified sample with one jittered point per
stratum is used instead and a standard error is reported.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from .field import DomainError, Field, GridField, QuadRegion, TransformedField, as_region
from .heis import Automorphism, Shear, Stretch, Compose

MAX_NODES = 1 << 22
DEFAULT_SAMPLES = 1 << 20
POINTS_PER_DECADE = 96


class ResolutionError(ValueError):
    """Vertical shift below the sampling resolution of a bilinear field."""


def shift_of(a) -> np.ndarray:
    """Vertical shift 2^{-2a} probed at scale a."""
    return 2.0 ** (-2.0 * np.asarray(a, dtype=float))


# ---------------------------------------------------------------------------
# field preparation


def _grid_of(f: Field) -> Optional[GridField]:
    if isinstance(f, GridField):
        return f
    if isinstance(f, TransformedField) and isinstance(f.base, GridField):
        return f.base
    return None


def prepare_field(f: Field, w: float, auto_bicubic: bool = True) -> Tuple[Field, bool]:
    """Return the field to integrate at shift w and whether bicubic was switched on.

    Bilinear differences at shifts below two grid cells are dominated by the
    interpolation error, so such fields are re-interpolated bicubically.
    """
    g = _grid_of(f)
    if g is None or g.interp == "bicubic":
        return f, False
    dz = g.dz
    if isinstance(f, TransformedField):
        dz *= abs(f.tpar[2])
    if w >= 2.0 * dz:
        return f, False
    if not auto_bicubic:
        raise ResolutionError(f"shift {w:.3g} is below two grid cells ({2 * dz:.3g}) of a bilinear field")
    gb = g.with_interp("bicubic")
    if isinstance(f, TransformedField):
        return TransformedField(gb, f.tpar), True
    return gb, True


def _check_region(f: Field, reg: QuadRegion, w: float) -> None:
    if f.periodic:
        return
    win = f.window if f.window is not None else getattr(f, "_base_window", None)
    if win is None:
        return
    xs = np.linspace(reg.x0, reg.x1, 33)
    for z in (reg.lower(xs), reg.upper(xs), reg.lower(xs) - w, reg.upper(xs) - w):
        try:
            f._check_domain(xs, z)
        except DomainError as exc:
            raise DomainError(f"region or its shift by {w:.3g} leaves the field domain") from exc


def _periodic_cell(f: Field, reg: QuadRegion) -> Tuple[QuadRegion, float]:
    """Reduce a rectangle tiled by whole periods to one period cell.

    Returns the region to integrate and the multiplicity factor.
    """
    if f.period is None or reg.lo[1:] != (0.0, 0.0) or reg.hi[1:] != (0.0, 0.0):
        return reg, 1.0
    px, pz = f.period
    nx = reg.width / px
    nz = (reg.hi[0] - reg.lo[0]) / pz
    if nx < 1 or nz < 1:
        return reg, 1.0
    if abs(nx - round(nx)) > 1e-12 * nx or abs(nz - round(nz)) > 1e-12 * nz:
        return reg, 1.0
    cell = QuadRegion.rect(reg.x0, reg.x0 + px, reg.lo[0], reg.lo[0] + pz)
    return cell, float(round(nx) * round(nz))


def node_counts(f: Field, reg: QuadRegion, oversample: float = 1.0) -> Tuple[int, int]:
    """Midpoint node counts resolving the field's features on the region."""
    dx, dz = f.resolution()
    zlo, zhi = reg.z_bounds()
    nx = max(16, int(math.ceil(oversample * reg.width / dx)))
    nz = max(16, int(math.ceil(oversample * (zhi - zlo) / dz)))
    return nx, nz


def stratified_nodes(reg: QuadRegion, nx: int, nz: int, rng: np.random.Generator):
    """One uniformly jittered point per stratum of an nx x nz column grid."""
    u = rng.random((nx, nz, 2))
    xs = reg.x0 + reg.width * (np.arange(nx)[:, None] + u[:, :, 0]) / nx
    lo = reg.lower(xs)
    hh = reg.upper(xs) - lo
    zs = lo + hh * (np.arange(nz)[None, :] + u[:, :, 1]) / nz
    ws = reg.width * hh / (nx * nz)
    return xs.ravel(), zs.ravel(), ws.ravel()


# ---------------------------------------------------------------------------
# vpP at one scale


@dataclass
class VppResult:
    value: float
    stderr: float
    method: str
    nodes: Tuple[int, int]
    bicubic: bool


def vpp_detail(
    f: Field,
    region=None,
    a: float = 0.0,
    method: str = "auto",
    n: Optional[Tuple[int, int]] = None,
    nsamples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    max_nodes: int = MAX_NODES,
    auto_bicubic: bool = True,
) -> VppResult:
    """vpP with quadrature metadata; see :func:`vpp`."""
    reg = as_region(region)
    w = float(shift_of(a))
    g, switched = prepare_field(f, w, auto_bicubic)
    _check_region(g, reg, w)
    cell, mult = _periodic_cell(g, reg)
    if method == "auto":
        nn = n or node_counts(g, cell)
        method = "midpoint" if nn[0] * nn[1] <= max_nodes else "stratified"
    if method == "midpoint":
        nn = n or node_counts(g, cell)
        xs, zs, ws = cell.midpoint_nodes(*nn)
        d = np.abs(g.shift_diff(xs, zs, w))
        total = float(np.sum(ws * d))
        err = 0.0
    elif method == "stratified":
        if n is None:
            rx, rz = node_counts(g, cell)
            ratio = rx / rz
            nx = int(min(nsamples, max(1, round(math.sqrt(nsamples * ratio)))))
            nn = (nx, max(2, nsamples // nx))
        else:
            nn = n
        rng = np.random.default_rng(seed)
        xs, zs, ws = stratified_nodes(cell, nn[0], nn[1], rng)
        c = ws * np.abs(g.shift_diff(xs, zs, w))
        total = float(np.sum(c))
        cc = c.reshape(nn[0], nn[1])
        m = nn[1] // 2
        diffs = cc[:, 0 : 2 * m : 2] - cc[:, 1 : 2 * m : 2]
        err = float(np.sqrt(np.sum(diffs * diffs)))
    else:
        raise ValueError(f"unknown method {method!r}")
    scale = 2.0**a * mult
    return VppResult(scale * total, scale * err, method, tuple(int(v) for v in nn), switched)


def vpp(f: Field, region=None, a: float = 0.0, **kw) -> float:
    """Parametric vertical perimeter of f over the region at scale a.

    Keyword arguments are those of :func:`vpp_detail` (quadrature method,
    node counts, sample budget and seed).
    """
    return vpp_detail(f, region, a, **kw).value


# ---------------------------------------------------------------------------
# a priori envelope


def envelope(f: Field, region, a) -> np.ndarray:
    """min(2^{a+1} sup|psi|, 2^{-a} sup|d psi/dz|) |E| at each scale a."""
    reg = as_region(region)
    a = np.asarray(a, dtype=float)
    sup = sup_abs(f, reg)
    sdz = f.sup_abs_dz()
    return np.minimum(2.0 ** (a + 1) * sup, 2.0 ** (-a) * sdz) * reg.area


def sup_abs(f: Field, reg: QuadRegion) -> float:
    """Upper estimate of sup |psi| over the region and its downward shifts."""
    band = f.value_band()
    if band is not None:
        lo, hi, slope = band
        ends = [lo + slope * reg.x0, lo + slope * reg.x1, hi + slope * reg.x0, hi + slope * reg.x1]
        return float(max(abs(v) for v in ends))
    xs, zs, _ = reg.midpoint_nodes(256, 256)
    return float(np.max(np.abs(f.eval(xs, zs))))


# ---------------------------------------------------------------------------
# scale profiles


@dataclass
class ScaleProfile:
    a: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    region: dict
    meta: dict = dc_field(default_factory=dict)

    def __len__(self):
        return len(self.a)

    def envelope_ok(self) -> bool:
        return bool(self.meta.get("envelope", {}).get("ok", True))

    def to_csv(self, path) -> Path:
        """Write (a, vpP) rows and a JSON sidecar next to them; returns the sidecar path."""
        path = Path(path)
        with open(path, "w") as fh:
            fh.write("a,vpP\n")
            for a, v in zip(self.a, self.values):
                fh.write(f"{a:.17g},{v:.17g}\n")
        side = path.with_suffix(path.suffix + ".json")
        side.write_text(json.dumps({"region": self.region, **self.meta}, indent=2, default=_jsonable))
        return side


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def a_grid(a_min: float, a_max: float, steps: Optional[int] = None) -> np.ndarray:
    """Uniform grid; the default density is 96 points per 10 units of a."""
    if steps is None:
        steps = max(2, int(math.ceil((a_max - a_min) * POINTS_PER_DECADE / 10.0)) + 1)
    return np.linspace(a_min, a_max, steps)


def profile(
    f: Field,
    region=None,
    a_min: float = 0.0,
    a_max: float = 10.0,
    steps: Optional[int] = None,
    threads: int = 1,
    envelope_tol: float = 1e-9,
    **kw,
) -> ScaleProfile:
    """Tabulate vpP on a uniform a-grid.

    Each scale uses the seed ``seed + index`` so results do not depend on
    ``threads``.
    """
    reg = as_region(region)
    a = a_grid(a_min, a_max, steps)
    seed = int(kw.pop("seed", 0))

    def one(i):
        return vpp_detail(f, reg, float(a[i]), seed=seed + i, **kw)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            res = list(ex.map(one, range(len(a))))
    else:
        res = [one(i) for i in range(len(a))]
    vals = np.array([r.value for r in res])
    errs = np.array([r.stderr for r in res])
    env = envelope(f, reg, a)
    slack = envelope_tol + 3.0 * errs + 1e-12 * np.abs(env)
    ok = bool(np.all(vals <= env + slack))
    meta = {
        "methods": sorted({r.method for r in res}),
        "nodes": [list(r.nodes) for r in res[:1]],
        "interp": "bicubic" if any(r.bicubic for r in res) else _interp_name(f),
        "bicubic_switched": any(r.bicubic for r in res),
        "seed": seed,
        "envelope": {"ok": ok, "max_ratio": float(np.max(np.where(env > 0, vals / np.maximum(env, 1e-300), 0.0)))},
    }
    return ScaleProfile(a, vals, errs, reg.to_dict(), meta)


def _interp_name(f: Field) -> str:
    g = _grid_of(f)
    return g.interp if g is not None else "exact"


# ---------------------------------------------------------------------------
# Lq norms in the scale variable


def lq_norm(p: ScaleProfile, q: float, window: Optional[Tuple[float, float]] = None) -> float:
    """Trapezoid value of (int_window vpP(a)^q da)^{1/q}."""
    if not q > 0:
        raise ValueError("q must be positive")
    a, v = np.asarray(p.a, dtype=float), np.asarray(p.values, dtype=float)
    lo, hi = (a[0], a[-1]) if window is None else window
    if hi <= lo:
        raise ValueError("empty window")
    if lo < a[0] - 1e-12 or hi > a[-1] + 1e-12:
        raise ValueError("window exceeds the tabulated scales")
    inside = (a > lo) & (a < hi)
    aa = np.concatenate([[lo], a[inside], [hi]])
    vv = np.concatenate([[np.interp(lo, a, v)], v[inside], [np.interp(hi, a, v)]])
    return float(np.trapezoid(vv**q, aa) ** (1.0 / q))


# ---------------------------------------------------------------------------
# transformation laws


def _law(aut: Automorphism):
    """(factor, shift) with vpP'(t) = factor vpP(t + shift)."""
    maps = aut.maps if isinstance(aut, Compose) else (aut,)
    factor, shift = 1.0, 0.0
    for m in maps:
        if isinstance(m, Stretch):
            ab = m.a * m.b
            if ab < 0:
                raise ValueError("the law is stated for stretches with ab > 0")
            factor *= ab**1.5
            shift += 0.5 * math.log2(ab)
        elif not isinstance(m, Shear):
            raise TypeError("scaling_check handles stretches and shears")
    return factor, shift


def scaling_check(
    f: Field,
    region=None,
    a_grid_: Sequence[float] = (0.0, 1.0, 2.0),
    aut: Automorphism = Shear(1.0),
    n: Optional[Tuple[int, int]] = None,
    **kw,
) -> float:
    """Max relative deviation of vpP of the transformed pair from the law.

    The transformed field has graph aut(graph f) and is integrated over the
    image region with the same node layout, so the law holds up to the
    quadrature of the original.
    """
    reg = as_region(region)
    factor, shift = _law(aut)
    g = f.transform(aut)
    reg2 = reg.apply(aut)
    if n is None:
        n = node_counts(f, reg)
        if n[0] * n[1] > MAX_NODES:
            s = math.sqrt(MAX_NODES / (n[0] * n[1]))
            n = (max(16, int(n[0] * s)), max(16, int(n[1] * s)))
    worst = 0.0
    for t in a_grid_:
        lhs = vpp(g, reg2, float(t), n=n, method="midpoint", **kw)
        rhs = factor * vpp(f, reg, float(t) + shift, n=n, method="midpoint", **kw)
        den = max(abs(rhs), 1e-300)
        worst = max(worst, abs(lhs - rhs) / den if rhs != 0 else abs(lhs))
    return worst
