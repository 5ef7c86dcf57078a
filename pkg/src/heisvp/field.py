"""Scalar functions psi on the vertical plane V0 and their intrinsic graphs.

The plane V0 = {y = 0} is identified with R^2 through (x, z).  A field psi
defines the intrinsic graph {v Y^psi(v)} whose projected horizontal curves
(characteristic curves) solve g'(t) = -psi(t, g(t)).

Field classes
-------------
PolyField        analytic quadratic polynomials in (x, z) (planes, psi = z, ...)
GridField        sampled values on a rectangle, bilinear or bicubic (Keys)
TransformedField a field pushed forward by a stretch / shear / left translation
FunctionField    any vectorized Python callable (slow paths only)

The first three compile to the kernels in ``_kernels``; so does the layered
bump surface defined in ``bumpy``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _kernels as K
from .heis import (
    Automorphism,
    Compose,
    LeftTranslate,
    Shear,
    Stretch,
    cc_upper_sharp,
    inv,
    mul,
)


class DomainError(ValueError):
    """Raised when a field is evaluated outside its window."""


# ---------------------------------------------------------------------------
# induced plane maps


def compose_tpar(tpar: np.ndarray, aut: Automorphism) -> np.ndarray:
    """Compose the induced-map parameters ``tpar`` with a further automorphism."""
    A, X0, C, P2, P1, P0, B, L1, L0 = (float(v) for v in tpar)
    if isinstance(aut, Compose):
        out = np.asarray(tpar, dtype=float)
        for m in aut.maps:
            out = compose_tpar(out, m)
        return out
    if isinstance(aut, Stretch):
        a, b = aut.a, aut.b
        return np.array([a * A, a * X0, a * b * C, a * b * P2, a * b * P1, a * b * P0, b * B, b * L1, b * L0])
    if isinstance(aut, Shear):
        b = aut.b
        return np.array(
            [
                A,
                X0,
                C,
                P2 - 0.5 * b * A * A,
                P1 - b * A * X0,
                P0 - 0.5 * b * X0 * X0,
                B,
                L1 + b * A,
                L0 + b * X0,
            ]
        )
    if isinstance(aut, LeftTranslate):
        x0, y0, z0 = aut.g
        return np.array(
            [
                A,
                X0 + x0,
                C,
                P2,
                P1 - y0 * A,
                P0 + z0 - y0 * X0 - 0.5 * x0 * y0,
                B,
                L1,
                L0 + y0,
            ]
        )
    raise TypeError(f"{type(aut).__name__} does not induce a map of V0 preserving graphs")


def apply_tpar_points(tpar: np.ndarray, x, z):
    """Image of plane points (x, z) under the induced map."""
    A, X0, C, P2, P1, P0 = tpar[:6]
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    return A * x + X0, C * z + P2 * x * x + P1 * x + P0


def _compose_quadratic(q: Sequence[float], a1: float, a0: float) -> Tuple[float, float, float]:
    # coefficients of q(a1 x + a0)
    q0, q1, q2 = q
    return (q0 + q1 * a0 + q2 * a0 * a0, q1 * a1 + 2.0 * q2 * a0 * a1, q2 * a1 * a1)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class QuadRegion:
    """{(x, z) : x0 <= x <= x1, lower(x) <= z <= upper(x)} with quadratic bounds.

    Bounds are coefficient triples (c0, c1, c2) for c0 + c1 x + c2 x^2.  The
    class is closed under the maps of V0 induced by stretches, shears and left
    translations.
    """

    x0: float
    x1: float
    lo: Tuple[float, float, float]
    hi: Tuple[float, float, float]

    @classmethod
    def rect(cls, x0, x1, z0, z1) -> "QuadRegion":
        return cls(float(x0), float(x1), (float(z0), 0.0, 0.0), (float(z1), 0.0, 0.0))

    @classmethod
    def unit_square(cls) -> "QuadRegion":
        return cls.rect(0.0, 1.0, 0.0, 1.0)

    @classmethod
    def parabolic(cls, x0, x1, h: Sequence[float], half_height: float) -> "QuadRegion":
        """Band of half-height ``half_height`` about the quadratic ``h``."""
        h = tuple(float(c) for c in h)
        return cls(float(x0), float(x1), (h[0] - half_height, h[1], h[2]), (h[0] + half_height, h[1], h[2]))

    def lower(self, x):
        c0, c1, c2 = self.lo
        x = np.asarray(x, dtype=float)
        return c0 + c1 * x + c2 * x * x

    def upper(self, x):
        c0, c1, c2 = self.hi
        x = np.asarray(x, dtype=float)
        return c0 + c1 * x + c2 * x * x

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def area(self) -> float:
        d = np.subtract(self.hi, self.lo)
        a, b = self.x0, self.x1
        return float(d[0] * (b - a) + d[1] * (b * b - a * a) / 2 + d[2] * (b**3 - a**3) / 3)

    def contains(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        return (x >= self.x0) & (x <= self.x1) & (z >= self.lower(x)) & (z <= self.upper(x))

    def z_bounds(self) -> Tuple[float, float]:
        xs = [self.x0, self.x1]
        for c in (self.lo, self.hi):
            if c[2] != 0:
                xc = -c[1] / (2 * c[2])
                if self.x0 < xc < self.x1:
                    xs.append(xc)
        xs = np.array(xs)
        return float(np.min(self.lower(xs))), float(np.max(self.upper(xs)))

    def midpoint_nodes(self, nx: int, nz: int):
        """Column midpoint rule: nodes (x, z) and weights summing to the area."""
        dx = self.width / nx
        xc = self.x0 + (np.arange(nx) + 0.5) * dx
        lo = self.lower(xc)
        hh = self.upper(xc) - lo
        frac = (np.arange(nz) + 0.5) / nz
        xs = np.repeat(xc, nz)
        zs = (lo[:, None] + hh[:, None] * frac[None, :]).ravel()
        ws = np.repeat(hh * dx / nz, nz)
        return xs, zs, ws

    def sample(self, n: int, rng: np.random.Generator):
        """Points with importance weights; the weighted mean of f estimates its integral."""
        u = rng.random((n, 2))
        xs = self.x0 + self.width * u[:, 0]
        lo = self.lower(xs)
        hh = self.upper(xs) - lo
        zs = lo + hh * u[:, 1]
        return xs, zs, self.width * hh

    def transformed(self, tpar: np.ndarray) -> "QuadRegion":
        A, X0, C, P2, P1, P0 = (float(v) for v in tpar[:6])
        a1, a0 = 1.0 / A, -X0 / A
        P = (P0, P1, P2)
        lo = tuple(C * c for c in _compose_quadratic(self.lo, a1, a0))
        hi = tuple(C * c for c in _compose_quadratic(self.hi, a1, a0))
        pp = _compose_quadratic(P, a1, a0)
        lo = tuple(u + v for u, v in zip(lo, pp))
        hi = tuple(u + v for u, v in zip(hi, pp))
        if C < 0:
            lo, hi = hi, lo
        xa, xb = A * self.x0 + X0, A * self.x1 + X0
        if xa > xb:
            xa, xb = xb, xa
        return QuadRegion(xa, xb, lo, hi)

    def apply(self, aut: Automorphism) -> "QuadRegion":
        return self.transformed(compose_tpar(K.IDENTITY_T, aut))

    def to_dict(self) -> dict:
        return {"x0": self.x0, "x1": self.x1, "lower": list(self.lo), "upper": list(self.hi)}


def as_region(region) -> QuadRegion:
    if region is None:
        return QuadRegion.unit_square()
    if isinstance(region, QuadRegion):
        return region
    vals = tuple(float(v) for v in region)
    if len(vals) != 4:
        raise ValueError("region must be a QuadRegion or (x0, x1, z0, z1)")
    return QuadRegion.rect(*vals)


# ---------------------------------------------------------------------------
# fields


class Field:
    """Base class for psi: V0 -> R."""

    #: (px, pz) when the field is periodic, else None
    period: Optional[Tuple[float, float]] = None
    #: evaluation window (x0, x1, z0, z1), None for the whole plane
    window: Optional[Tuple[float, float, float, float]] = None

    def kernel(self):
        """(kind, fpar, ipar, data, tpar) for compiled code, or None."""
        return None

    @property
    def periodic(self) -> bool:
        return self.period is not None

    def resolution(self) -> Tuple[float, float]:
        """Typical feature sizes (dx, dz) used for scan and flow steps."""
        return (1.0 / 256, 1.0 / 256)

    def value_band(self):
        """(lo, hi, slope) with lo + slope x <= psi(x, z) <= hi + slope x, or None."""
        return None

    def _check_domain(self, x, z):
        if self.window is None:
            return
        x0, x1, z0, z1 = self.window
        tol = 1e-9 * max(1.0, abs(x1 - x0), abs(z1 - z0))
        if np.any((x < x0 - tol) | (x > x1 + tol) | (z < z0 - tol) | (z > z1 + tol)):
            raise DomainError(f"point outside field window {self.window}")

    def eval(self, x, z):
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        self._check_domain(x, z)
        kern = self.kernel()
        out = K.eval_many(*kern, np.ascontiguousarray(x.ravel()), np.ascontiguousarray(z.ravel()), False)
        return out[:, 0].reshape(x.shape) if x.ndim else float(out[0, 0])

    def eval_derivs(self, x, z):
        """(psi, d psi/dx, d psi/dz) of the interpolant or analytic expression."""
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        self._check_domain(x, z)
        kern = self.kernel()
        out = K.eval_many(*kern, np.ascontiguousarray(x.ravel()), np.ascontiguousarray(z.ravel()), True)
        return tuple(out[:, i].reshape(x.shape) for i in range(3))

    def shift_diff(self, x, z, w: float):
        """psi(x, z) - psi(x, z - w), computed without cancellation where possible."""
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        self._check_domain(x, z)
        self._check_domain(x, z - w)
        kern = self.kernel()
        out = K.shift_diff_many(*kern, np.ascontiguousarray(x.ravel()), np.ascontiguousarray(z.ravel()), float(w))
        return out.reshape(x.shape)

    def __call__(self, x, z):
        return self.eval(x, z)

    def transform(self, aut: Automorphism) -> "Field":
        """The field whose intrinsic graph is aut(graph of self)."""
        return TransformedField(self, compose_tpar(K.IDENTITY_T, aut))

    def sup_abs_dz(self) -> float:
        """Upper estimate of sup |d psi / dz|."""
        return _sampled_sup(self, 2)


def _sampled_sup(f: Field, col: int, n: int = 256) -> float:
    if f.window is not None:
        x0, x1, z0, z1 = f.window
    elif f.period is not None:
        x0, z0 = 0.0, 0.0
        x1, z1 = f.period
    else:
        x0, x1, z0, z1 = 0.0, 1.0, 0.0, 1.0
    xs, zs = np.meshgrid(np.linspace(x0, x1, n), np.linspace(z0, z1, n), indexing="ij")
    d = f.eval_derivs(xs.ravel(), zs.ravel())
    return float(np.max(np.abs(d[col])))


class PolyField(Field):
    """psi(x, z) = sum_{i, j <= 2} c[i, j] x^i z^j."""

    def __init__(self, coeffs):
        c = np.zeros((3, 3))
        cc = np.asarray(coeffs, dtype=float)
        c[: cc.shape[0], : cc.shape[1]] = cc
        self.coeffs = c
        self._fpar = np.ascontiguousarray(c.ravel())

    @classmethod
    def constant(cls, c: float) -> "PolyField":
        return cls([[c]])

    @classmethod
    def affine(cls, c0: float = 0.0, cx: float = 0.0, cz: float = 0.0) -> "PolyField":
        return cls([[c0, cz], [cx, 0.0]])

    def kernel(self):
        return (K.KIND_POLY, self._fpar, np.zeros(1, dtype=np.int64), np.zeros(1), K.IDENTITY_T.copy())

    def value_band(self):
        c = self.coeffs
        if np.all(c[:, 1:] == 0) and c[2, 0] == 0:
            return (c[0, 0], c[0, 0], c[1, 0])
        return None

    def resolution(self):
        return (1.0 / 64, 1.0 / 64)

    def sup_abs_dz(self) -> float:
        c = self.coeffs
        if np.all(c[:, 2] == 0) and np.all(c[1:, 1] == 0):
            return abs(c[0, 1])
        return math.inf


class GridField(Field):
    """Samples ``samples[ix, iz]`` on a rectangle window.

    Periodic grids place node i at x0 + i (x1 - x0)/nx and repeat with period
    (x1 - x0) in x and (z1 - z0) in z.  Nonperiodic grids include both window
    edges as nodes and refuse evaluation outside the window.
    """

    def __init__(self, samples, window=(0.0, 1.0, 0.0, 1.0), periodic: bool = False, interp: str = "bilinear"):
        s = np.ascontiguousarray(np.asarray(samples, dtype=float))
        if s.ndim != 2:
            raise ValueError("samples must be a 2-D array indexed [ix, iz]")
        if interp not in ("bilinear", "bicubic"):
            raise ValueError("interp must be 'bilinear' or 'bicubic'")
        self.samples = s
        self.nx, self.nz = s.shape
        if (not periodic) and interp == "bicubic" and min(self.nx, self.nz) < 4:
            raise ValueError("bicubic interpolation needs at least 4 nodes per axis")
        if min(self.nx, self.nz) < 2:
            raise ValueError("need at least 2 nodes per axis")
        self.x0, self.x1, self.z0, self.z1 = (float(v) for v in window)
        self.periodic_flag = bool(periodic)
        self.interp = interp
        if periodic:
            self.dx = (self.x1 - self.x0) / self.nx
            self.dz = (self.z1 - self.z0) / self.nz
            self.period = (self.x1 - self.x0, self.z1 - self.z0)
            self.window = None
        else:
            self.dx = (self.x1 - self.x0) / (self.nx - 1)
            self.dz = (self.z1 - self.z0) / (self.nz - 1)
            self.period = None
            self.window = (self.x0, self.x1, self.z0, self.z1)
        self._fpar = np.array([self.x0, self.x1, self.z0, self.z1, self.dx, self.dz])
        self._ipar = np.array([self.nx, self.nz, int(periodic), int(interp == "bicubic")], dtype=np.int64)
        self._data = self.samples.ravel()

    # construction --------------------------------------------------------
    @classmethod
    def from_function(cls, func: Callable, nx: int, nz: int, window=(0.0, 1.0, 0.0, 1.0), periodic=False, interp="bilinear"):
        x0, x1, z0, z1 = window
        if periodic:
            xs = x0 + (x1 - x0) * np.arange(nx) / nx
            zs = z0 + (z1 - z0) * np.arange(nz) / nz
        else:
            xs = np.linspace(x0, x1, nx)
            zs = np.linspace(z0, z1, nz)
        X, Zg = np.meshgrid(xs, zs, indexing="ij")
        vals = func(X, Zg)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), X.shape)
        return cls(vals, window, periodic, interp)

    @classmethod
    def from_field(cls, f: Field, nx: int, nz: int, window=(0.0, 1.0, 0.0, 1.0), periodic=False, interp="bilinear"):
        return cls.from_function(lambda x, z: f.eval(x, z), nx, nz, window, periodic, interp)

    def with_interp(self, interp: str) -> "GridField":
        return GridField(self.samples, (self.x0, self.x1, self.z0, self.z1), self.periodic_flag, interp)

    def nodes(self):
        if self.periodic_flag:
            xs = self.x0 + self.dx * np.arange(self.nx)
            zs = self.z0 + self.dz * np.arange(self.nz)
        else:
            xs = np.linspace(self.x0, self.x1, self.nx)
            zs = np.linspace(self.z0, self.z1, self.nz)
        return xs, zs

    # evaluation ----------------------------------------------------------
    def kernel(self):
        return (K.KIND_GRID, self._fpar, self._ipar, self._data, K.IDENTITY_T.copy())

    def resolution(self):
        return (self.dx, self.dz)

    def value_band(self):
        lo, hi = float(self.samples.min()), float(self.samples.max())
        if self.interp == "bicubic":
            c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
            # Keys weights have absolute sum at most 1.25 per axis
            lo, hi = c - 1.5625 * r, c + 1.5625 * r
        return (lo, hi, 0.0)

    def sup_abs_dz(self) -> float:
        d = np.abs(np.diff(self.samples, axis=1)).max() / self.dz
        return float(d * (1.5625 if self.interp == "bicubic" else 1.0))

    # file formats --------------------------------------------------------
    def header(self) -> dict:
        return {
            "nx": self.nx,
            "nz": self.nz,
            "x0": self.x0,
            "x1": self.x1,
            "z0": self.z0,
            "z1": self.z1,
            "periodic": self.periodic_flag,
            "interp": self.interp,
            "dtype": "f64",
            "byte_order": "LE",
        }

    def save(self, path) -> None:
        path = Path(path)
        with open(path, "wb") as fh:
            fh.write((json.dumps(self.header()) + "\n").encode("ascii"))
            fh.write(self.samples.astype("<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path) -> "GridField":
        path = Path(path)
        with open(path, "rb") as fh:
            head = json.loads(fh.readline().decode("ascii"))
            if head.get("dtype", "f64") != "f64" or head.get("byte_order", "LE") != "LE":
                raise ValueError("only little-endian f64 payloads are supported")
            payload = fh.read()
        nx, nz = int(head["nx"]), int(head["nz"])
        vals = np.frombuffer(payload, dtype="<f8")
        if vals.size != nx * nz:
            raise ValueError(f"payload has {vals.size} values, header declares {nx * nz}")
        window = (head["x0"], head["x1"], head["z0"], head["z1"])
        return cls(vals.reshape(nx, nz).astype(float), window, bool(head["periodic"]), head.get("interp", "bilinear"))

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(self.header()) + "\n")
            np.savetxt(fh, self.samples, delimiter=",", fmt="%.17g")

    @classmethod
    def load_csv(cls, path) -> "GridField":
        with open(path) as fh:
            first = fh.readline()
            if not first.startswith("#"):
                raise ValueError("CSV field file must start with a '# {header}' line")
            head = json.loads(first[1:])
            vals = np.loadtxt(fh, delimiter=",", ndmin=2)
        window = (head["x0"], head["x1"], head["z0"], head["z1"])
        return cls(vals, window, bool(head["periodic"]), head.get("interp", "bilinear"))


class TransformedField(Field):
    """Lazy push-forward of ``base`` under an induced plane map (see ``compose_tpar``)."""

    def __init__(self, base: Field, tpar):
        if isinstance(base, TransformedField):
            raise TypeError("use base.transform(...) on the underlying field")
        self.base = base
        self.tpar = np.asarray(tpar, dtype=float)
        A, X0, C = self.tpar[:3]
        # the image of the base window is not a rectangle; domain checks pull back
        self.window = None
        self._base_window = base.window
        if base.period is not None and self.tpar[3] == 0 and self.tpar[4] == 0 and self.tpar[7] == 0:
            self.period = (abs(A) * base.period[0], abs(C) * base.period[1])
        else:
            self.period = None

    def transform(self, aut: Automorphism) -> "Field":
        return TransformedField(self.base, compose_tpar(self.tpar, aut))

    def preimage(self, x, z):
        A, X0, C, P2, P1, P0 = self.tpar[:6]
        xb = (np.asarray(x, dtype=float) - X0) / A
        zb = (np.asarray(z, dtype=float) - (P2 * xb * xb + P1 * xb + P0)) / C
        return xb, zb

    def _check_domain(self, x, z):
        if self._base_window is not None:
            self.base._check_domain(*self.preimage(x, z))

    def kernel(self):
        kind, fpar, ipar, data, _ = self.base.kernel()
        return (kind, fpar, ipar, data, self.tpar)

    def resolution(self):
        dx, dz = self.base.resolution()
        return (abs(self.tpar[0]) * dx, abs(self.tpar[2]) * dz)

    def value_band(self):
        band = self.base.value_band()
        if band is None:
            return None
        lo, hi, slope = band
        A, X0, B, L1, L0 = self.tpar[0], self.tpar[1], self.tpar[6], self.tpar[7], self.tpar[8]
        # psi' = B (band(x) ) + L1 x + L0 with x = (x' - X0) / A
        s = (B * slope + L1) / A
        off = L0 - (B * slope + L1) * X0 / A
        a, b = sorted((B * lo, B * hi))
        return (a + off, b + off, s)

    def sup_abs_dz(self) -> float:
        return abs(self.tpar[6] / self.tpar[2]) * self.base.sup_abs_dz()


class FunctionField(Field):
    """Field from a vectorized callable; derivatives by central differences."""

    def __init__(self, func: Callable, period=None, window=None, h: float = 1e-6):
        self.func = func
        self.period = period
        self.window = window
        self.h = h

    def eval(self, x, z):
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        self._check_domain(x, z)
        out = np.asarray(self.func(x, z), dtype=float)
        return out if out.ndim else float(out)

    def eval_derivs(self, x, z):
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        h = self.h
        v = self.eval(x, z)
        vx = (self.func(x + h, z) - self.func(x - h, z)) / (2 * h)
        vz = (self.func(x, z + h) - self.func(x, z - h)) / (2 * h)
        return v, vx, vz

    def shift_diff(self, x, z, w):
        return self.eval(x, z) - self.eval(x, np.asarray(z) - w)

    def transform(self, aut):
        raise NotImplementedError("FunctionField has no compiled form; wrap it in a GridField first")

    def sup_abs_dz(self) -> float:
        return _sampled_sup(self, 2)


# ---------------------------------------------------------------------------
# operations


def eval(f: Field, v) -> float:  # noqa: A001 - mirrors the operation name
    """Value of f at the plane point v = (x, 0, z) (or (x, z))."""
    x, z = _xz(v)
    return f.eval(x, z)


def _xz(v):
    a = np.asarray(v, dtype=float)
    if a.shape[-1] == 3:
        return a[..., 0], a[..., 2]
    if a.shape[-1] == 2:
        return a[..., 0], a[..., 1]
    raise ValueError("plane points are (x, 0, z) or (x, z)")


def horiz_deriv(f: Field, x, z):
    """d psi/dx - psi d psi/dz.

    Grid fields use central differences at the grid spacing (one-sided at
    window edges); the other fields use their exact derivatives.
    """
    x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
    if isinstance(f, GridField):
        dx, dz = f.dx, f.dz
        v = f.eval(x, z)
        if f.periodic:
            px = (f.eval(x + dx, z) - f.eval(x - dx, z)) / (2 * dx)
            pz = (f.eval(x, z + dz) - f.eval(x, z - dz)) / (2 * dz)
        else:
            px = _edge_diff(f, x, z, dx, f.x0, f.x1, axis=0)
            pz = _edge_diff(f, x, z, dz, f.z0, f.z1, axis=1)
        return px - v * pz
    v, vx, vz = f.eval_derivs(x, z)
    return vx - v * vz


def _edge_diff(f, x, z, h, lo, hi, axis):
    # central difference, shrunk to one-sided where the stencil would leave the window
    coord = x if axis == 0 else z

    def ev(c):
        return f.eval(c, z) if axis == 0 else f.eval(x, c)

    cm = np.maximum(coord - h, lo)
    cp = np.minimum(coord + h, hi)
    return (ev(cp) - ev(cm)) / (cp - cm)


def graph_point(f: Field, v):
    """v * Y^psi(v) = (x, psi, z + x psi / 2)."""
    x, z = _xz(v)
    p = f.eval(x, z)
    out = np.stack(np.broadcast_arrays(x, p, z + 0.5 * x * p), axis=-1)
    if out.ndim == 1:
        from .heis import HeisPoint

        return HeisPoint(*map(float, out))
    return out


def in_epigraph(f: Field, p) -> np.ndarray:
    """Whether p lies strictly above the intrinsic graph (y > psi(Pi(p)))."""
    a = np.asarray(p, dtype=float)
    x, y, z = a[..., 0], a[..., 1], a[..., 2]
    return y > f.eval(x, z - 0.5 * x * y)


# ---------------------------------------------------------------------------
# characteristic curves


@dataclass
class CharCurve:
    """Samples of a characteristic curve: heights g and slopes g' = -psi(x, g)."""

    x: np.ndarray
    g: np.ndarray
    gprime: np.ndarray

    def __post_init__(self):
        self._spline = None

    def __call__(self, t):
        if self._spline is None:
            self._spline = CubicHermiteSpline(self.x, self.g, self.gprime, extrapolate=False)
        return self._spline(t)

    @property
    def span(self):
        return float(self.x[0]), float(self.x[-1])

    def residual(self, f: Field) -> float:
        """max |g' + psi(x, g)| over the samples."""
        return float(np.max(np.abs(self.gprime + f.eval(self.x, self.g))))

    def integral(self, a: float, b: float) -> float:
        """Integral of g over [a, b] from the Hermite interpolant."""
        if self._spline is None:
            self(self.x[:1])
        return float(self._spline.integrate(a, b))


def default_flow_step(f: Field) -> float:
    return f.resolution()[0] / 4.0


def flow_char(f: Field, start, span: Tuple[float, float], step: Optional[float] = None) -> CharCurve:
    """RK4 solution of g'(t) = -psi(t, g(t)) through ``start`` over ``span``.

    The step is the largest value <= ``step`` that divides each of the two
    legs (start to span[0], start to span[1]) into equal substeps.
    """
    if step is None:
        step = default_flow_step(f)
    if not step > 0:
        raise ValueError("flow step must be positive")
    xs_, zs_ = _xz(start)
    xs_, zs_ = float(xs_), float(zs_)
    a, b = float(span[0]), float(span[1])
    if not a <= xs_ <= b:
        raise ValueError("start abscissa must lie inside the span")
    legs = []
    for end in (a, b):
        n = int(math.ceil(abs(end - xs_) / step - 1e-9))
        if n == 0:
            legs.append(None)
            continue
        h = (end - xs_) / n
        legs.append(_flow_leg(f, xs_, zs_, h, n))
    parts_x, parts_g, parts_p = [], [], []
    if legs[0] is not None:
        x, g, p = legs[0]
        parts_x.append(x[::-1][:-1])
        parts_g.append(g[::-1][:-1])
        parts_p.append(p[::-1][:-1])
    if legs[1] is not None:
        x, g, p = legs[1]
        parts_x.append(x)
        parts_g.append(g)
        parts_p.append(p)
    else:
        v = f.eval(xs_, zs_)
        parts_x.append(np.array([xs_]))
        parts_g.append(np.array([zs_]))
        parts_p.append(np.array([-v]))
    return CharCurve(np.concatenate(parts_x), np.concatenate(parts_g), np.concatenate(parts_p))


def _flow_leg(f: Field, x0, z0, h, n):
    kern = f.kernel()
    if kern is not None:
        x, g, p = K.rk4_flow(*kern, x0, z0, h, n)
        if np.any(np.isnan(g)):
            raise DomainError("characteristic left the field window")
        if f.window is not None or getattr(f, "_base_window", None) is not None:
            f._check_domain(x, g)
        return x, g, p
    xs = np.empty(n + 1)
    gs = np.empty(n + 1)
    x, g = x0, z0
    xs[0], gs[0] = x, g
    for i in range(n):
        k1 = -f.eval(x, g)
        k2 = -f.eval(x + h / 2, g + h / 2 * k1)
        k3 = -f.eval(x + h / 2, g + h / 2 * k2)
        k4 = -f.eval(x + h, g + h * k3)
        g = g + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        x = x0 + (i + 1) * h
        xs[i + 1], gs[i + 1] = x, g
    return xs, gs, -f.eval(xs, gs)


# ---------------------------------------------------------------------------
# intrinsic Lipschitz estimate and area


def lipschitz_estimate(f: Field, region=None, npairs: int = 20000, seed: int = 0) -> float:
    """Lower estimate of the intrinsic Lipschitz constant of the graph of f.

    Each pair (p, q) of graph points contributes |y(p) - y(q)| / u(p^-1 q)
    where u is an upper bound for the CC norm, so every ratio is a lower bound
    for the constant.  Half the pairs are displaced along the local
    characteristic direction (nearly horizontal p^-1 q), half in a random
    direction; offsets are log-uniform.  Row i of the random draw depends only
    on the seed, so a larger ``npairs`` evaluates a superset of pairs.
    """
    reg = as_region(region)
    if reg.area <= 0:
        raise ValueError("empty region")
    if npairs <= 0:
        return 0.0
    rng = np.random.default_rng(seed)
    u = rng.random((npairs, 6))
    x = reg.x0 + reg.width * u[:, 0]
    lo = reg.lower(x)
    z = lo + (reg.upper(x) - lo) * u[:, 1]
    size = max(reg.width, 1e-12)
    delta = size * 10.0 ** (-4.0 + 4.0 * u[:, 2])
    delta *= np.where(u[:, 3] < 0.5, -1.0, 1.0)
    psi_p = f.eval(x, z)
    along = u[:, 4] < 0.5
    kappa = 2.0 * u[:, 5] - 1.0
    dz_char = -psi_p * delta + kappa * delta * delta
    dz_rand = np.sign(kappa) * size * 10.0 ** (-8.0 + 8.0 * np.abs(kappa))
    x2 = x + np.where(along, delta, delta * (u[:, 5] - 0.5))
    z2 = z + np.where(along, dz_char, dz_rand)
    ok = np.ones(npairs, dtype=bool)
    if f.window is not None:
        x0, x1, z0, z1 = f.window
        ok = (x2 >= x0) & (x2 <= x1) & (z2 >= z0) & (z2 <= z1)
    x2c = np.where(ok, x2, x)
    z2c = np.where(ok, z2, z)
    p = graph_point(f, np.stack([x, np.zeros_like(x), z], axis=-1))
    q = graph_point(f, np.stack([x2c, np.zeros_like(x), z2c], axis=-1))
    d = cc_upper_sharp(mul(inv(p), q))
    num = np.abs(p[:, 1] - q[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(ok & (d > 0), num / d, 0.0)
    return float(np.max(r))


def slope_bound(lam: float) -> float:
    """lambda / sqrt(1 - lambda^2): the cone slope of an intrinsic lambda-Lipschitz graph."""
    if lam >= 1:
        return math.inf
    return lam / math.sqrt(1.0 - lam * lam)


def area_energy(f: Field, region=None, n: Optional[Tuple[int, int]] = None) -> float:
    """Midpoint value of the integral of sqrt(1 + (horizontal derivative)^2) over the region.

    The normalizing constant of the area formula is taken to be 1.
    """
    reg = as_region(region)
    if n is None:
        dx, dz = f.resolution()
        zlo, zhi = reg.z_bounds()
        n = (max(8, int(round(reg.width / dx))), max(8, int(round((zhi - zlo) / dz))))
    xs, zs, ws = reg.midpoint_nodes(*n)
    hd = horiz_deriv(f, xs, zs)
    return float(np.sum(ws * np.sqrt(1.0 + hd * hd)))
