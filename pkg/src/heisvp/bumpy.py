"""Layered bump surfaces psi_L = beta_0 + ... + beta_{L-1}.

Layer i tiles the unit square by cells bounded by the vertical lines
x = m rho^-i and by the characteristic curves of psi_i through the grid points
(m rho^-i, n alpha^-2 rho^-2i).  In flow coordinates (s, t) of a cell (s the
horizontal offset from the left edge, t the height of the characteristic at
the left edge above the cell's lower corner) the layer adds

    beta_i = alpha^-2 rho^-i  beta(rho^i s, alpha^2 rho^2i t).

Representation
--------------
Layer 0 is explicit.  For each layer j >= 1 a table stores, on nodes
(column, x-node, z-node), the displacement B - z of the backward
characteristic of psi_j to the left edge of the column together with dB/dz
(the variational equation).  Evaluation interpolates the table with cubic
Lagrange weights in x and cubic Hermite in z, then evaluates the bump
exactly, so the finest layer needs no sampling grid at all.  Every psi_j is
1-periodic in x and alpha^-2-periodic in z, which bounds the table size.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field as dc_field
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from numba import njit

from . import _kernels as K
from .field import Field, GridField, QuadRegion

BUMP_TARGET = 0.99
NORMALIZATION_GRID = 2048


class ResolutionError(ValueError):
    """Requested layers cannot be represented within the table budget."""


# ---------------------------------------------------------------------------
# prototype bump


def _profile(u: np.ndarray):
    out = np.array([K.bump1(float(v)) for v in np.asarray(u, dtype=float).ravel()])
    return out[:, 0], out[:, 1], out[:, 2]


@dataclass(frozen=True)
class BumpPrototype:
    """beta(x, z) = c b(x) b(z) with b(u) = exp(-1/(u(1-u))) on (0, 1).

    ``c`` scales the largest partial derivative of order <= 2 on the
    normalization grid to ``BUMP_TARGET``.
    """

    c: float
    sup: Dict[str, float]
    grid: int

    def __call__(self, x, z):
        return self.partials(x, z)["f"]

    def partials(self, x, z) -> Dict[str, np.ndarray]:
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        bx, bx1, bx2 = (a.reshape(x.shape) for a in _profile(x))
        bz, bz1, bz2 = (a.reshape(z.shape) for a in _profile(z))
        c = self.c
        return {
            "f": c * bx * bz,
            "x": c * bx1 * bz,
            "z": c * bx * bz1,
            "xx": c * bx2 * bz,
            "xz": c * bx1 * bz1,
            "zz": c * bx * bz2,
        }

    @property
    def max_value(self) -> float:
        return self.sup["f"]


def make_bump(grid: int = NORMALIZATION_GRID) -> BumpPrototype:
    """Fix the bump constant from the order-<=2 partials on a ``grid``^2 node set."""
    u = np.linspace(0.0, 1.0, grid)
    b, b1, b2 = _profile(u)
    # the partials are products of one-dimensional factors, so the grid maxima factor too
    m0, m1, m2 = np.abs(b).max(), np.abs(b1).max(), np.abs(b2).max()
    raw = {"f": m0 * m0, "x": m1 * m0, "z": m0 * m1, "xx": m2 * m0, "xz": m1 * m1, "zz": m0 * m2}
    c = BUMP_TARGET / max(raw.values())
    return BumpPrototype(c=c, sup={k: c * v for k, v in raw.items()}, grid=grid)


# ---------------------------------------------------------------------------
# calibration of the vpP window of the periodic extension


def _phi_shift_integral(w: np.ndarray, nz: int = 1 << 15) -> np.ndarray:
    """I(w) = int_0^1 |b(z) - b((z - w) mod 1)| dz by the midpoint rule."""
    zc = (np.arange(nz) + 0.5) / nz
    bz, _, _ = _profile(zc)
    out = np.empty(len(w))
    for i, wi in enumerate(np.asarray(w, dtype=float)):
        shifted = np.mod(zc - wi, 1.0)
        bs, _, _ = _profile(shifted)
        out[i] = np.abs(bz - bs).mean()
    return out


def phi_vpp(proto: BumpPrototype, a, nz: int = 1 << 15) -> np.ndarray:
    """vpP over U of the 1-periodic extension phi of beta."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    xc = (np.arange(nz) + 0.5) / nz
    bx, _, _ = _profile(xc)
    int_bx = bx.mean()
    return 2.0**a * proto.c * int_bx * _phi_shift_integral(2.0 ** (-2.0 * a), nz)


@dataclass(frozen=True)
class Calibration:
    eta: float
    r: float
    R: float
    rho: int
    s: float
    a_grid: np.ndarray = dc_field(repr=False)
    profile: np.ndarray = dc_field(repr=False)

    def to_dict(self) -> dict:
        return {"eta": self.eta, "r": self.r, "R": self.R, "rho": self.rho, "s": self.s}


def choose_window(a: np.ndarray, v: np.ndarray):
    """Window [a_i, a_j] maximizing min(v[i..j]) * min(1, a_j - a_i)."""
    best = (-1.0, 0, 0)
    n = len(a)
    for i in range(n):
        run = np.minimum.accumulate(v[i:])
        score = run * np.minimum(1.0, a[i:] - a[i])
        j = int(np.argmax(score))
        if score[j] > best[0]:
            best = (float(score[j]), i, i + j)
    _, i, j = best
    return float(a[i]), float(a[j]), float(np.min(v[i : j + 1]))


def rho_formula(eta: float, r: float, s: float) -> int:
    return int(math.ceil(max(8.0, 12.0 / (2.0**r * eta), 40.0 * 2.0**s / eta)))


def calibrate(
    proto: Optional[BumpPrototype] = None,
    a_min: float = -6.0,
    a_max: float = 10.0,
    per_unit: int = 32,
    rho_override: Optional[int] = None,
) -> Calibration:
    """Tabulate vpP of phi, then pick the window [r, R] with its lower bound eta and derive rho."""
    proto = proto or make_bump()
    a = np.linspace(a_min, a_max, int(round((a_max - a_min) * per_unit)) + 1)
    v = phi_vpp(proto, a)
    if not np.max(v) > 0:
        raise RuntimeError("vpP profile of the periodic bump is numerically zero")
    r, R, eta = choose_window(a, v)
    s = max(abs(r), abs(R))
    rho = rho_formula(eta, r, s) if rho_override is None else int(rho_override)
    if rho < 8:
        raise ValueError("rho must be at least 8")
    return Calibration(eta=eta, r=r, R=R, rho=rho, s=s, a_grid=a, profile=v)


# ---------------------------------------------------------------------------
# parameters and construction


@dataclass
class BumpyParams:
    alpha: int = 2
    rho: int = 8
    layers: Optional[int] = 3
    nodes_per_cell: int = 64  # z-nodes per cell height of the previous layer
    x_nodes: int = 8  # x-intervals per column
    substeps: int = 4  # RK4 substeps per x-interval
    max_table_entries: int = 40_000_000
    eta: Optional[float] = None
    r: Optional[float] = None
    R: Optional[float] = None

    def __post_init__(self):
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise ValueError("alpha must be a positive integer")
        if int(self.rho) != self.rho or self.rho < 8:
            raise ValueError("rho must be an integer >= 8")
        if self.layers is not None and self.layers > self.alpha**4:
            raise ValueError("at most alpha^4 layers")
        if self.nodes_per_cell < 16:
            raise ResolutionError("tables need at least 16 z-nodes per feature height")
        if self.x_nodes < 3:
            raise ValueError("need at least 3 x-intervals per column")


def table_entries(rho: int, j: int, nodes_per_cell: int, x_nodes: int) -> int:
    """Number of stored floats for layer j (two arrays)."""
    if j == 0:
        return 0
    return 2 * rho**j * (x_nodes + 1) * nodes_per_cell * rho ** (2 * (j - 1))


def layer_substeps(params: BumpyParams, j: int) -> int:
    """RK4 substeps per x-interval for layer j.

    psi_j varies on the x-scale rho^-(j-1), i.e. rho columns of layer j, so
    large rho needs fewer substeps for the same accuracy.
    """
    return max(1, int(math.ceil(params.substeps * 8.0 / params.rho)))


def feasible_layers(params: BumpyParams) -> int:
    total = 0
    L = 1
    while L < params.alpha**4:
        need = table_entries(params.rho, L, params.nodes_per_cell, params.x_nodes)
        if total + need > params.max_table_entries:
            break
        total += need
        L += 1
    return L


@njit(cache=True)
def _psi_and_dz(fpar, ipar, data, nl, x, z, out):
    K.layered_layers(fpar, ipar, data, nl, x, z, out)
    v = 0.0
    vz = 0.0
    for j in range(nl):
        v += out[j, 0]
        vz += out[j, 1]
    return v, vz


@njit(cache=True)
def _build_table(fpar, ipar, data, j, substeps):
    P = fpar[0]
    fo = K.LAYER_F0 + 4 * j
    io = K.LAYER_I0 + 4 * j
    colw = fpar[fo + 2]
    dzt = fpar[fo + 3]
    ncol = ipar[io]
    Kx = ipar[io + 1]
    nzt = ipar[io + 2]
    off = ipar[io + 3]
    blk = ncol * (Kx + 1) * nzt
    out = np.empty((j, 4))
    hstep = colw / Kx / substeps
    for m in range(ncol):
        xm = m * colw
        for k in range(Kx + 1):
            row = (m * (Kx + 1) + k) * nzt
            for iz in range(nzt):
                z0 = iz * dzt
                g = z0
                u = 1.0
                x = xm + k * colw / Kx
                nsteps = k * substeps
                h = -hstep
                for _ in range(nsteps):
                    v1, d1 = _psi_and_dz(fpar, ipar, data, j, x, g, out)
                    k1g = -v1
                    k1u = -d1 * u
                    v2, d2 = _psi_and_dz(fpar, ipar, data, j, x + 0.5 * h, g + 0.5 * h * k1g, out)
                    k2g = -v2
                    k2u = -d2 * (u + 0.5 * h * k1u)
                    v3, d3 = _psi_and_dz(fpar, ipar, data, j, x + 0.5 * h, g + 0.5 * h * k2g, out)
                    k3g = -v3
                    k3u = -d3 * (u + 0.5 * h * k2u)
                    v4, d4 = _psi_and_dz(fpar, ipar, data, j, x + h, g + h * k3g, out)
                    k4g = -v4
                    k4u = -d4 * (u + h * k3u)
                    g += h * (k1g + 2.0 * k2g + 2.0 * k3g + k4g) / 6.0
                    u += h * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
                    x += h
                data[off + row + iz] = g - z0
                data[off + blk + row + iz] = u


class LayeredField(Field):
    """psi_n = beta_0 + ... + beta_{n-1} of a built surface."""

    def __init__(self, surface: "BumpySurface", n: int):
        self.surface = surface
        self.n = n
        self.period = (1.0, surface.P)
        self._ipar = surface.ipar.copy()
        self._ipar[0] = n

    def kernel(self):
        s = self.surface
        return (K.KIND_LAYERED, s.fpar, self._ipar, s.data, K.IDENTITY_T.copy())

    def resolution(self):
        s = self.surface
        j = max(self.n - 1, 0)
        return (s.colw(j) / 32.0, s.h(j) / 32.0)

    def value_band(self):
        s = self.surface
        top = sum(s.A(j) for j in range(self.n)) * s.proto.max_value
        return (0.0, top, 0.0)

    def sup_abs_dz(self) -> float:
        s = self.surface
        return float(sum(s.layer_dz_bound(j) for j in range(self.n)))


@dataclass
class BumpySurface:
    params: BumpyParams
    proto: BumpPrototype
    layers: int
    fpar: np.ndarray
    ipar: np.ndarray
    data: np.ndarray
    build_seconds: float = 0.0

    @property
    def alpha(self) -> int:
        return self.params.alpha

    @property
    def rho(self) -> int:
        return self.params.rho

    @property
    def P(self) -> float:
        return float(self.fpar[0])

    def h(self, j: int) -> float:
        return float(self.fpar[K.LAYER_F0 + 4 * j])

    def A(self, j: int) -> float:
        return float(self.fpar[K.LAYER_F0 + 4 * j + 1])

    def colw(self, j: int) -> float:
        return float(self.fpar[K.LAYER_F0 + 4 * j + 2])

    def field(self, n: Optional[int] = None) -> LayeredField:
        """psi_n (default: the full surface psi_L)."""
        n = self.layers if n is None else n
        if not 0 <= n <= self.layers:
            raise ValueError(f"layer index must lie in [0, {self.layers}]")
        return LayeredField(self, n)

    @cached_property
    def psi(self) -> LayeredField:
        return self.field()

    def table(self, j: int):
        """(D, BZ) arrays of shape (ncol, x_nodes + 1, nzt) for layer j >= 1."""
        io = K.LAYER_I0 + 4 * j
        ncol, Kx, nzt, off = (int(v) for v in self.ipar[io : io + 4])
        blk = ncol * (Kx + 1) * nzt
        D = self.data[off : off + blk].reshape(ncol, Kx + 1, nzt)
        BZ = self.data[off + blk : off + 2 * blk].reshape(ncol, Kx + 1, nzt)
        return D, BZ

    def jacobian_range(self):
        """min and max of dz/dt = 1/(dB/dz) over all table nodes."""
        lo, hi = 1.0, 1.0
        for j in range(1, self.layers):
            _, BZ = self.table(j)
            J = 1.0 / BZ
            lo, hi = min(lo, float(J.min())), max(hi, float(J.max()))
        return lo, hi

    def layer_dz_bound(self, j: int) -> float:
        """sup |d beta_j / dz| from the prototype bounds and the table Jacobians."""
        bzmax = 1.0
        if j >= 1:
            bzmax = float(self.table(j)[1].max())
        return self.A(j) * self.proto.sup["z"] / self.h(j) * bzmax

    def to_grid(self, n: Optional[int] = None, nx: int = 512, nz: int = 512, interp: str = "bicubic") -> GridField:
        """Periodic samples of psi_n on [0,1] x [0, alpha^-2]."""
        f = self.field(n)
        return GridField.from_function(
            lambda x, z: f.eval(x, z), nx, nz, (0.0, 1.0, 0.0, self.P), periodic=True, interp=interp
        )

    def manifest(self, extra: Optional[dict] = None) -> dict:
        out = {
            "alpha": self.alpha,
            "rho": self.rho,
            "layers": self.layers,
            "eta": self.params.eta,
            "r": self.params.r,
            "R": self.params.R,
            "bump_constant": self.proto.c,
            "tables": {
                "nodes_per_cell": self.params.nodes_per_cell,
                "x_nodes": self.params.x_nodes,
                "substeps": self.params.substeps,
                "entries": int(self.data.size),
            },
            "build_seconds": self.build_seconds,
        }
        if extra:
            out.update(extra)
        return out


def build(params: BumpyParams, proto: Optional[BumpPrototype] = None) -> BumpySurface:
    """Construct the layered surface psi_L for ``params``."""
    import time

    t0 = time.perf_counter()
    proto = proto or make_bump()
    feas = feasible_layers(params)
    L = min(params.alpha**4, feas) if params.layers is None else params.layers
    if L > feas:
        raise ResolutionError(
            f"{L} layers at rho={params.rho} exceed the table budget of "
            f"{params.max_table_entries} entries (feasible: {feas})"
        )
    alpha, rho = params.alpha, params.rho
    P = 1.0 / alpha**2
    nmax = max(L, 1)
    fpar = np.zeros(K.LAYER_F0 + 4 * nmax)
    ipar = np.zeros(K.LAYER_I0 + 4 * nmax, dtype=np.int64)
    fpar[0], fpar[1], fpar[2] = P, proto.c, float(rho)
    ipar[0], ipar[1] = L, nmax
    off = 0
    for j in range(nmax):
        fo = K.LAYER_F0 + 4 * j
        io = K.LAYER_I0 + 4 * j
        h = P * float(rho) ** (-2 * j)
        colw = float(rho) ** (-j)
        fpar[fo : fo + 4] = [h, P * colw, colw, 0.0]
        if j >= 1:
            nzt = params.nodes_per_cell * rho ** (2 * (j - 1))
            fpar[fo + 3] = P / nzt
            ipar[io : io + 4] = [rho**j, params.x_nodes, nzt, off]
            off += table_entries(rho, j, params.nodes_per_cell, params.x_nodes)
        else:
            ipar[io : io + 4] = [1, 0, 0, 0]
    data = np.zeros(max(off, 1))
    for j in range(1, L):
        _build_table(fpar, ipar, data, j, layer_substeps(params, j))
    surf = BumpySurface(params, proto, L, fpar, ipar, data)
    surf.build_seconds = time.perf_counter() - t0
    return surf


# ---------------------------------------------------------------------------
# verification of the internal bounds


@njit(cache=True)
def _grid_report(fpar, ipar, data, L, nx, nz, stats, inner, l2):
    """Scan the nx x nz node grid of [0,1) x [0,P), one z-period of every layer.

    stats[j] = [max |beta_j|, max |d psi_{j+1}/dz|, max |D_j|, min dz/dt, max dz/dt]
    inner[m, k] accumulates <D_m, D_k> / n^2; l2[j] accumulates |d_{psi_j} psi_j|^2 / n^2.
    """
    out = np.empty((L, 4))
    D = np.empty(L)
    P = fpar[0]
    w = 1.0 / (nx * nz)
    for ix in range(nx):
        x = ix / nx
        for iz in range(nz):
            z = iz * P / nz
            K.layered_layers(fpar, ipar, data, L, x, z, out)
            dz_cum = 0.0
            hd = 0.0  # horizontal derivative of psi_j, telescoped
            for j in range(L):
                dz_cum += out[j, 1]
                Dj = out[j, 2] - out[j, 0] * dz_cum
                D[j] = Dj
                a = abs(out[j, 0])
                if a > stats[j, 0]:
                    stats[j, 0] = a
                if abs(dz_cum) > stats[j, 1]:
                    stats[j, 1] = abs(dz_cum)
                if abs(Dj) > stats[j, 2]:
                    stats[j, 2] = abs(Dj)
                J = 1.0 / out[j, 3]
                if J < stats[j, 3]:
                    stats[j, 3] = J
                if J > stats[j, 4]:
                    stats[j, 4] = J
                hd += Dj
                l2[j + 1] += hd * hd * w
            for m in range(L):
                for k in range(L):
                    inner[m, k] += D[m] * D[k] * w


def verify_internal(surface: BumpySurface, n: int = 2048, z_refine: int = 16) -> dict:
    """Measure the layer bounds on a node grid of the unit square.

    The grid has n columns and n * z_refine rows per z-period alpha^-2 (all
    layers share that period, so means over one period equal means over U).
    The refinement keeps the finest layer resolved: at rho = 8 its cells are
    far thinner than 1/n.  The report lists, per layer, the measured value
    next to the bound it is compared with; no assertion is made here.
    """
    L = surface.layers
    alpha, rho = surface.alpha, surface.rho
    stats = np.zeros((max(L, 1), 5))
    stats[:, 3] = np.inf
    stats[:, 4] = -np.inf
    inner = np.zeros((max(L, 1), max(L, 1)))
    l2 = np.zeros(L + 1)
    if L > 0:
        _grid_report(surface.fpar, surface.ipar, surface.data, L, n, n * z_refine, stats, inner, l2)
    a2 = alpha ** -2.0
    psi_sup = float(np.sum(stats[:L, 0])) if L else 0.0
    # |psi_L| <= sum of the layer maxima; the maximum itself is measured on the grid below
    psi_grid_max = 0.0
    if L:
        xs = np.arange(n) / n
        f = surface.psi
        psi_grid_max = max(float(np.max(np.abs(f.eval(np.full(n, x), xs)))) for x in xs[:: max(1, n // 256)])
    tj_lo, tj_hi = surface.jacobian_range()
    layers = []
    for j in range(L):
        layers.append(
            {
                "layer": j,
                "beta_sup": float(stats[j, 0]),
                "beta_sup_expected": surface.A(j) * surface.proto.max_value,
                "dpsi_dz_sup": float(stats[j, 1]),  # of psi_{j+1}
                "dpsi_dz_bound": 2.0 * rho ** float(j),
                "D_sup": float(stats[j, 2]),
                "D_bound": 3.0 * a2,
                "dzdt_min": float(stats[j, 3]),
                "dzdt_max": float(stats[j, 4]),
            }
        )
    ortho = []
    for m in range(L):
        for k in range(m + 1, L):
            ortho.append({"m": m, "n": k, "inner": float(inner[m, k]), "C": float(abs(inner[m, k]) / (a2 * a2 * float(rho) ** (m - k)))})
    sqrt_i = []
    for i in range(1, L + 1):
        norm = math.sqrt(l2[i])
        sqrt_i.append({"i": i, "l2": norm, "C_prime": norm / (math.sqrt(i) * a2)})
    return {
        "alpha": alpha,
        "rho": rho,
        "layers": L,
        "grid": [n, n * z_refine],
        "psi_sup_bound_sum": psi_sup,
        "psi_sup_sampled": psi_grid_max,
        "psi_sup_bound": a2 / (rho - 1),
        "table_dzdt_min": tj_lo,
        "table_dzdt_max": tj_hi,
        "per_layer": layers,
        "almost_orthogonality": ortho,
        "almost_orthogonality_C": max([o["C"] for o in ortho], default=0.0),
        "sqrt_i": sqrt_i,
        "C_prime": max([s["C_prime"] for s in sqrt_i], default=0.0),
    }


def save_surface(surface: BumpySurface, outdir, nx: int = 512, nz: int = 512, report: Optional[dict] = None) -> Path:
    """Write one sampled field file per psi_i plus a JSON manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    for i in range(surface.layers + 1):
        g = surface.to_grid(i, nx, nz)
        name = f"psi_{i}.field"
        g.save(outdir / name)
        files.append(name)
    man = surface.manifest({"grid": [nx, nz], "files": files, "report": report})
    path = outdir / "manifest.json"
    path.write_text(json.dumps(man, indent=2, default=float))
    return path
