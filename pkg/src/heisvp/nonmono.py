"""Line traces of epigraphs with their omega-hat masses, and Monte-Carlo Omega^P.

A horizontal line is sampled through its slope m and its position at a
reference abscissa x_c: y_c = y(x_c) and z_c = g_L(x_c).  The change of
variables from (m, y0, z0) is triangular with unit Jacobian, so Lebesgue
measure in (m, y_c, z_c) is the parametric line measure N_P.

The trace of the epigraph {y > psi(Pi(p))} on a line L is the set of t
with h(t) = y_L(t) - psi(t, g_L(t)) > 0.  Crossings are found by scanning
h at a constant step per line followed by bisection.  When the field
provides a value band lo + s x <= psi <= hi + s x, the sign of h outside
the band's zone is known and is never evaluated.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit
from numba.typed import List as NList

from . import _kernels as K
from .field import DomainError, Field, QuadRegion, as_region, lipschitz_estimate, slope_bound
from .heis import HorizontalLine

ROOT_TOL = 1e-10
EPS_MIN = 2 * ROOT_TOL
DEFAULT_R = 8.0
DEFAULT_r = 4.0
DEFAULT_ETA = 0.05
DEFAULT_LINES = 4096


# ---------------------------------------------------------------------------
# interval sets


@dataclass
class IntervalSet:
    """Sorted disjoint closed intervals; rays have an infinite endpoint."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if np.any(self.hi <= self.lo):
            raise ValueError("intervals must have positive length")
        if len(self.lo) > 1 and np.any(self.lo[1:] <= self.hi[:-1]):
            raise ValueError("intervals must be sorted and disjoint")

    def __len__(self):
        return len(self.lo)

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def from_crossings(cls, crossings, positive_left: bool, eps: float = EPS_MIN) -> "IntervalSet":
        """The set where a sign pattern is positive, given its sign changes."""
        c = merge_crossings(np.sort(np.asarray(crossings, dtype=float)), eps)
        edges = np.concatenate([[-np.inf], c, [np.inf]])
        pos = [(positive_left if k % 2 == 0 else not positive_left) for k in range(len(edges) - 1)]
        lo = [edges[k] for k in range(len(edges) - 1) if pos[k]]
        hi = [edges[k + 1] for k in range(len(edges) - 1) if pos[k]]
        return cls(np.array(lo), np.array(hi))

    @property
    def left_ray(self) -> bool:
        return len(self.lo) > 0 and self.lo[0] == -np.inf

    @property
    def right_ray(self) -> bool:
        return len(self.hi) > 0 and self.hi[-1] == np.inf

    @property
    def lengths(self) -> np.ndarray:
        return self.hi - self.lo

    def bounded(self):
        """(lo, hi) of the bounded intervals."""
        keep = np.isfinite(self.lo) & np.isfinite(self.hi)
        return self.lo[keep], self.hi[keep]

    def complement(self) -> "IntervalSet":
        edges_lo = np.concatenate([[-np.inf], self.hi])
        edges_hi = np.concatenate([self.lo, [np.inf]])
        keep = edges_hi > edges_lo
        return IntervalSet(edges_lo[keep], edges_hi[keep])

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=bool)
        for a, b in zip(self.lo, self.hi):
            out |= (t >= a) & (t <= b)
        return out

    def endpoints(self) -> np.ndarray:
        e = np.concatenate([self.lo, self.hi])
        return np.sort(e[np.isfinite(e)])


def merge_crossings(c: np.ndarray, eps: float = EPS_MIN) -> np.ndarray:
    """Drop pairs of sign changes closer than eps (sub-floor intervals merge into neighbors)."""
    out: List[float] = []
    for v in c:
        if out and v - out[-1] < eps:
            out.pop()
        else:
            out.append(float(v))
    return np.array(out)


# ---------------------------------------------------------------------------
# omega-hat


def _windows(window) -> List[Tuple[float, float]]:
    if window is None:
        return [(-np.inf, np.inf)]
    if isinstance(window, IntervalSet):
        return list(zip(window.lo, window.hi))
    w = list(window)
    if len(w) == 2 and np.isscalar(w[0]):
        return [(float(w[0]), float(w[1]))]
    return [(float(a), float(b)) for a, b in w]


def omega_hat(S: IntervalSet, R: float, window=None) -> float:
    """Mass in the window of (omega_{S,R} + omega_{complement,R}) / 2.

    omega_{S,R} places the length of every bounded interval of S of length
    at most R on each of its two endpoints; rays carry nothing.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    wins = _windows(window)

    def inside(t):
        return any(a <= t <= b for a, b in wins)

    total = 0.0
    for part in (S, S.complement()):
        lo, hi = part.bounded()
        for a, b in zip(lo, hi):
            ell = b - a
            if ell <= R:
                total += ell * (inside(a) + inside(b))
    return 0.5 * total


# ---------------------------------------------------------------------------
# compiled line scanning


@njit(cache=True)
def _h(kind, fpar, ipar, data, tpar, yc, zc, m, xc, t):
    s = t - xc
    y = yc + m * s
    g = zc - yc * s - 0.5 * m * s * s
    return y - K.field_value(kind, fpar, ipar, data, tpar, t, g)


@njit(cache=True)
def _pred(kind, fpar, ipar, data, tpar, yc, zc, m, xc, t, za, zb, left_pos, right_pos, err):
    if t < za:
        return left_pos
    if t > zb:
        return right_pos
    v = _h(kind, fpar, ipar, data, tpar, yc, zc, m, xc, t)
    if math.isnan(v):
        err[0] = 1
        return False
    return v > 0.0


@njit(cache=True)
def _bisect(kind, fpar, ipar, data, tpar, yc, zc, m, xc, ta, tb, pa, za, zb, lp, rp, tol, err):
    while tb - ta > tol:
        tm = 0.5 * (ta + tb)
        if _pred(kind, fpar, ipar, data, tpar, yc, zc, m, xc, tm, za, zb, lp, rp, err) == pa:
            ta = tm
        else:
            tb = tm
    return 0.5 * (ta + tb)


@njit(cache=True)
def _zone(yc, m, xc, lo, hi, slope, has_band):
    """Interval where psi's band allows a crossing, and the known signs outside it."""
    if not has_band:
        return -np.inf, np.inf, False, False
    k = m - slope
    c = yc - m * xc
    if k == 0.0:
        if lo <= c <= hi:
            return -np.inf, np.inf, False, False
        pos = c > hi
        return np.inf, -np.inf, pos, pos
    t1 = (lo - c) / k
    t2 = (hi - c) / k
    if k > 0.0:
        return t1, t2, False, True
    return t2, t1, True, False


@njit(cache=True)
def _quad_roots(a, b, c, x0, x1, buf, n):
    # roots of a t^2 + b t + c strictly inside (x0, x1), appended to buf
    scale = abs(a) + abs(b) + abs(c)
    if scale == 0.0:
        return n
    if abs(a) <= 1e-14 * scale:
        if b != 0.0:
            r = -c / b
            if x0 < r < x1:
                buf[n] = r
                n += 1
        return n
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return n
    sq = math.sqrt(disc)
    q = -0.5 * (b + sq) if b >= 0.0 else -0.5 * (b - sq)
    r1 = q / a
    r2 = c / q if q != 0.0 else r1
    for r in (r1, r2):
        if x0 < r < x1:
            buf[n] = r
            n += 1
    return n


@njit(cache=True)
def _line_window(reg, yc, zc, m, xc, out):
    """Components of {t in [x0, x1] : lower(t) <= g_L(t) <= upper(t)}; returns the count."""
    x0 = reg[0]
    x1 = reg[1]
    g0 = zc + yc * xc - 0.5 * m * xc * xc
    g1 = -yc + m * xc
    g2 = -0.5 * m
    buf = np.empty(8)
    buf[0] = x0
    n = 1
    n = _quad_roots(g2 - reg[4], g1 - reg[3], g0 - reg[2], x0, x1, buf, n)
    n = _quad_roots(reg[7] - g2, reg[6] - g1, reg[5] - g0, x0, x1, buf, n)
    buf[n] = x1
    n += 1
    pts = np.sort(buf[:n])
    cnt = 0
    for i in range(n - 1):
        a = pts[i]
        b = pts[i + 1]
        if b <= a:
            continue
        t = 0.5 * (a + b)
        g = g0 + g1 * t + g2 * t * t
        lo = reg[2] + reg[3] * t + reg[4] * t * t
        hi = reg[5] + reg[6] * t + reg[7] * t * t
        if lo <= g <= hi:
            if cnt > 0 and out[cnt - 1, 1] == a:
                out[cnt - 1, 1] = b
            else:
                out[cnt, 0] = a
                out[cnt, 1] = b
                cnt += 1
    return cnt


@njit(cache=True)
def _scan(kind, fpar, ipar, data, tpar, yc, zc, m, xc, s0, s1, lim_lo, lim_hi,
          za, zb, lp, rp, dt, tol, err):
    """Crossings on [s0, s1] plus the nearest one beyond each end (within the limits)."""
    cr = NList()
    cr.append(0.0)
    cr.pop()
    # leftward from s0
    t_prev = s0
    p_prev = _pred(kind, fpar, ipar, data, tpar, yc, zc, m, xc, s0, za, zb, lp, rp, err)
    p0 = p_prev
    k = 1
    while True:
        t = s0 - k * dt
        if t < lim_lo:
            t = lim_lo
        p = _pred(kind, fpar, ipar, data, tpar, yc, zc, m, xc, t, za, zb, lp, rp, err)
        if p != p_prev:
            c = _bisect(kind, fpar, ipar, data, tpar, yc, zc, m, xc, t, t_prev, p, za, zb, lp, rp, tol, err)
            cr.append(c)
            break
        if t <= lim_lo or t < za:
            break
        t_prev = t
        p_prev = p
        k += 1
    # inner and rightward
    t_prev = s0
    p_prev = p0
    k = 1
    while True:
        t = s0 + k * dt
        if t > lim_hi:
            t = lim_hi
        if t <= t_prev:
            break
        p = _pred(kind, fpar, ipar, data, tpar, yc, zc, m, xc, t, za, zb, lp, rp, err)
        if p != p_prev:
            c = _bisect(kind, fpar, ipar, data, tpar, yc, zc, m, xc, t_prev, t, p_prev, za, zb, lp, rp, tol, err)
            cr.append(c)
            if c > s1:
                break
        if t >= lim_hi or (t > s1 and t > zb):
            break
        t_prev = t
        p_prev = p
        k += 1
    out = np.empty(len(cr))
    for i in range(len(cr)):
        out[i] = cr[i]
    out.sort()
    return out


@njit(cache=True)
def _merge(c, eps):
    out = np.empty(len(c))
    n = 0
    for i in range(len(c)):
        if n > 0 and c[i] - out[n - 1] < eps:
            n -= 1
        else:
            out[n] = c[i]
            n += 1
    return out[:n]


@njit(cache=True)
def _omega_lines(kind, fpar, ipar, data, tpar, lines, xc, reg, band, has_band,
                 dx, dz, Rs, tol, eps, res, err):
    """omega-hat of the epigraph trace for each line, one column per R.

    lines[i] = (m, yc, zc); reg = (x0, x1, lower[3], upper[3]); band = (lo, hi, slope).
    """
    nR = Rs.shape[0]
    Rmax = 0.0
    for r in range(nR):
        if Rs[r] > Rmax:
            Rmax = Rs[r]
    win = np.empty((4, 2))
    for i in range(lines.shape[0]):
        m = lines[i, 0]
        yc = lines[i, 1]
        zc = lines[i, 2]
        for r in range(nR):
            res[i, r] = 0.0
        nw = _line_window(reg, yc, zc, m, xc, win)
        if nw == 0:
            continue
        wa = win[0, 0]
        wb = win[nw - 1, 1]
        za, zb, lp, rp = _zone(yc, m, xc, band[0], band[1], band[2], has_band)
        s0 = max(za, wa)
        s1 = min(zb, wb)
        if s0 > s1:
            continue
        # |g'| = |y| bounds the vertical speed along the line
        lim_lo = max(wa - Rmax, za - 1e-9 * (1.0 + abs(za)))
        lim_hi = min(wb + Rmax, zb + 1e-9 * (1.0 + abs(zb)))
        ya = abs(yc + m * (lim_lo - xc))
        yb = abs(yc + m * (lim_hi - xc))
        ymax = max(ya, yb)
        if has_band:
            ymax = min(ymax, max(abs(band[0]), abs(band[1])) + abs(band[2]) * max(abs(lim_lo), abs(lim_hi)))
        dt = dx
        if ymax * dx > dz:
            dt = dz / ymax
        dt *= 0.5
        c = _scan(kind, fpar, ipar, data, tpar, yc, zc, m, xc, s0, s1, lim_lo, lim_hi,
                  za, zb, lp, rp, dt, tol, err)
        if err[0] != 0:
            return
        c = _merge(c, eps)
        nc = len(c)
        for j in range(nc):
            t = c[j]
            inwin = False
            for w in range(nw):
                if win[w, 0] <= t <= win[w, 1]:
                    inwin = True
            if not inwin:
                continue
            for side in range(2):
                if side == 0 and j == 0:
                    continue
                if side == 1 and j == nc - 1:
                    continue
                ell = c[j] - c[j - 1] if side == 0 else c[j + 1] - c[j]
                for r in range(nR):
                    if ell <= Rs[r]:
                        res[i, r] += 0.5 * ell


@njit(cache=True)
def _trace_span(kind, fpar, ipar, data, tpar, y0, z0, m, t0, t1, band, has_band, dt, tol, err):
    za, zb, lp, rp = _zone(y0, m, 0.0, band[0], band[1], band[2], has_band)
    s0 = max(t0, za)
    s1 = min(t1, zb)
    p_left = _pred(kind, fpar, ipar, data, tpar, y0, z0, m, 0.0, t0, za, zb, lp, rp, err)
    if s0 > s1:
        return np.empty(0), p_left
    c = _scan(kind, fpar, ipar, data, tpar, y0, z0, m, 0.0, s0, s1, t0, t1, za, zb, lp, rp, dt, tol, err)
    return c, p_left


# ---------------------------------------------------------------------------
# Python front ends


def _band(f: Field):
    b = f.value_band()
    if b is None:
        return np.zeros(3), False
    return np.array(b, dtype=float), True


def _kernel_of(f: Field):
    kern = f.kernel()
    if kern is None:
        raise TypeError(f"{type(f).__name__} has no compiled form; sample it into a GridField")
    kind, fpar, ipar, data, tpar = kern
    return kind, fpar, ipar, data, np.asarray(tpar, dtype=float)


def trace_step(f: Field, ymax: float) -> float:
    dx, dz = f.resolution()
    return 0.5 * (dx if ymax * dx <= dz else dz / ymax)


def line_trace(f: Field, L: HorizontalLine, t_span: Tuple[float, float], step: Optional[float] = None) -> IntervalSet:
    """{t in t_span : y_L(t) > psi(t, g_L(t))} as an IntervalSet.

    Intervals reaching an end of the span are returned as rays on that side.
    """
    t0, t1 = (float(v) for v in t_span)
    if not t1 > t0:
        raise ValueError("empty span")
    band, has = _band(f)
    ymax = max(abs(L.y0 + L.m * t0), abs(L.y0 + L.m * t1))
    dt = step if step is not None else trace_step(f, ymax)
    f._check_domain(np.array([t0, t1]), L.g(np.array([t0, t1])))
    err = np.zeros(1, dtype=np.int64)
    c, p_left = _trace_span(*_kernel_of(f), L.y0, L.z0, L.m, t0, t1, band, has, dt, ROOT_TOL, err)
    if err[0]:
        raise DomainError("line trace left the field domain")
    return IntervalSet.from_crossings(c, bool(p_left))


def line_window(region, L: HorizontalLine) -> List[Tuple[float, float]]:
    """Parameter intervals of L whose projection lies in the region."""
    reg = as_region(region)
    out = np.empty((4, 2))
    n = _line_window(_reg_array(reg), L.y0, L.z0, L.m, 0.0, out)
    return [(float(out[i, 0]), float(out[i, 1])) for i in range(n)]


def _reg_array(reg: QuadRegion) -> np.ndarray:
    return np.array([reg.x0, reg.x1, *reg.lo, *reg.hi], dtype=float)


# ---------------------------------------------------------------------------
# Omega^P


@dataclass
class LineBox:
    """Sampling box of lines: slope m, y and z at the abscissa xc."""

    xc: float
    m: Tuple[float, float]
    y: Tuple[float, float]
    z: Tuple[float, float]

    @property
    def volume(self) -> float:
        return (self.m[1] - self.m[0]) * (self.y[1] - self.y[0]) * (self.z[1] - self.z[0])

    def to_dict(self) -> dict:
        return {"xc": self.xc, "m": list(self.m), "y": list(self.y), "z": list(self.z)}


def line_box(f: Field, region, m_max: float) -> LineBox:
    """Lines that can cross the graph above the region.

    A line contributes only through a crossing t in the region's x-range,
    where y_L(t) lies in the value range of psi; with |m| <= m_max this
    bounds y at the center, and then g_L over the region bounds z.
    """
    reg = as_region(region)
    w = reg.width
    xc = 0.5 * (reg.x0 + reg.x1)
    b = f.value_band()
    if b is None:
        xs, zs, _ = reg.midpoint_nodes(128, 128)
        v = f.eval(xs, zs)
        pad = 0.05 * (float(v.max() - v.min()) + 1e-12)
        vlo, vhi = float(v.min()) - pad, float(v.max()) + pad
    else:
        lo, hi, s = b
        vlo = min(lo + s * reg.x0, lo + s * reg.x1)
        vhi = max(hi + s * reg.x0, hi + s * reg.x1)
    ylo, yhi = vlo - m_max * w / 2, vhi + m_max * w / 2
    Y = max(abs(ylo), abs(yhi))
    zlo, zhi = reg.z_bounds()
    dz = Y * w / 2 + m_max * w * w / 8
    return LineBox(xc, (-m_max, m_max), (ylo, yhi), (zlo - dz, zhi + dz))


def default_m_max(f: Field, region=None, npairs: int = 20000, seed: int = 0) -> float:
    """Twice the cone slope of the estimated intrinsic Lipschitz constant."""
    lam = lipschitz_estimate(f, region, npairs, seed)
    sb = slope_bound(lam)
    if not math.isfinite(sb):
        raise ValueError("estimated Lipschitz constant >= 1; pass m_max explicitly")
    return max(2.0 * sb, 1e-6)


@dataclass
class OmegaEstimate:
    value: float
    stderr: float
    nsamples: int
    box: dict
    seed: int
    R: float
    extra: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "nsamples": self.nsamples,
            "box": self.box,
            "seed": self.seed,
            "R": self.R,
            **self.extra,
        }

    def to_json(self, path=None) -> str:
        s = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s)
        return s


MAX_STRATA = 4096


def _strata(nsamples: int) -> Tuple[int, int, int]:
    ns = max(1, min(MAX_STRATA, nsamples // 4))
    per = max(1, nsamples // ns)
    sm = max(1, int(math.sqrt(ns)))
    sy = max(1, ns // sm)
    return sm, sy, per


def sample_lines(box: LineBox, nsamples: int, seed: int):
    """Stratified (m, y) with z uniform; stratum k draws from its own stream.

    Returns the lines (n, 3) and the stratum index of each line.
    """
    sm, sy, per = _strata(nsamples)
    ss = np.random.SeedSequence(seed).spawn(sm * sy)
    lines = np.empty((sm * sy * per, 3))
    strat = np.repeat(np.arange(sm * sy), per)
    (m0, m1), (y0, y1), (z0, z1) = box.m, box.y, box.z
    for k in range(sm * sy):
        i, j = divmod(k, sy)
        u = np.random.default_rng(ss[k]).random((per, 3))
        sl = slice(k * per, (k + 1) * per)
        lines[sl, 0] = m0 + (m1 - m0) * (i + u[:, 0]) / sm
        lines[sl, 1] = y0 + (y1 - y0) * (j + u[:, 1]) / sy
        lines[sl, 2] = z0 + (z1 - z0) * u[:, 2]
    return lines, strat


def omega_lines(f: Field, region, lines: np.ndarray, xc: float, Rs: Sequence[float]) -> np.ndarray:
    """omega-hat of the epigraph trace on each line (rows) for each R (columns)."""
    reg = as_region(region)
    band, has = _band(f)
    dx, dz = f.resolution()
    Rs = np.asarray(Rs, dtype=float)
    res = np.zeros((len(lines), len(Rs)))
    err = np.zeros(1, dtype=np.int64)
    if f.window is not None or getattr(f, "_base_window", None) is not None:
        _check_lines_in_domain(f, reg, lines, xc, float(Rs.max()))
    _omega_lines(*_kernel_of(f), np.ascontiguousarray(lines), float(xc), _reg_array(reg), band, has,
                 dx, dz, Rs, ROOT_TOL, EPS_MIN, res, err)
    if err[0]:
        raise DomainError("a sampled line left the field domain")
    return res


def _check_lines_in_domain(f, reg, lines, xc, R):
    t = np.linspace(reg.x0 - R, reg.x1 + R, 9)
    for m, yc, zc in lines[:: max(1, len(lines) // 64)]:
        s = t - xc
        g = zc - yc * s - 0.5 * m * s * s
        inreg = reg.contains(np.clip(t, reg.x0, reg.x1), g)
        if np.any(inreg):
            f._check_domain(t, g)


def omega_p_multi(
    f: Field,
    region=None,
    Rs: Sequence[float] = (DEFAULT_R,),
    nsamples: int = DEFAULT_LINES,
    seed: int = 0,
    m_max: Optional[float] = None,
) -> List[OmegaEstimate]:
    """Omega^P of the epigraph over the region for several R from one set of lines."""
    if nsamples <= 0:
        raise ValueError("nsamples must be positive")
    reg = as_region(region)
    if m_max is None:
        m_max = default_m_max(f, reg)
    box = line_box(f, reg, m_max)
    if not box.volume > 0:
        raise ValueError("empty sampling box")
    lines, strat = sample_lines(box, nsamples, seed)
    Rs = np.asarray(Rs, dtype=float)
    if np.any(Rs <= 0):
        raise ValueError("R must be positive")
    w = omega_lines(f, reg, lines, box.xc, Rs)
    nstrata = int(strat[-1]) + 1
    per = len(lines) // nstrata
    out = []
    for r, R in enumerate(Rs):
        v = w[:, r].reshape(nstrata, per)
        mean = v.mean(axis=1)
        var = v.var(axis=1, ddof=1) if per > 1 else np.zeros(nstrata)
        est = box.volume * float(mean.mean()) / R
        se = box.volume * float(np.sqrt(var.sum() / per)) / nstrata / R
        out.append(OmegaEstimate(est, se, len(lines), box.to_dict(), seed, float(R), {"m_max": m_max}))
    return out


def omega_p(f: Field, region=None, R: float = DEFAULT_R, nsamples: int = DEFAULT_LINES, seed: int = 0,
            m_max: Optional[float] = None) -> OmegaEstimate:
    """Monte-Carlo estimate of Omega^P_{epigraph, R}(region)."""
    return omega_p_multi(f, region, [R], nsamples, seed, m_max)[0]


def kinematic_sum(f: Field, region=None, i_range=(-4, 12), R0: float = 1.0, nsamples: int = DEFAULT_LINES,
                  seed: int = 0, m_max: Optional[float] = None):
    """Sum over i of Omega^P at R = R0 2^-i, with the per-scale estimates."""
    i0, i1 = i_range
    Rs = [R0 * 2.0 ** (-i) for i in range(i0, i1 + 1)]
    ests = omega_p_multi(f, region, Rs, nsamples, seed, m_max)
    total = sum(e.value for e in ests)
    se = math.sqrt(sum(e.stderr**2 for e in ests))
    return total, se, ests


# ---------------------------------------------------------------------------
# paramonotonicity


@dataclass
class ParamonotoneResult:
    paramonotone: bool
    density: float
    threshold: float
    estimate: OmegaEstimate

    def __bool__(self):
        return self.paramonotone


def paramonotone_density(f: Field, Q, R: float, r: float, nsamples: int = DEFAULT_LINES, seed: int = 0,
                         m_max: Optional[float] = None) -> OmegaEstimate:
    """Omega^P at radius R delta_x(Q) over rQ, divided by |Q|."""
    est = omega_p(f, Q.scaled_region(r), R * Q.delta_x, nsamples, seed, m_max)
    area = Q.area
    est.extra["density"] = est.value / area
    est.extra["density_stderr"] = est.stderr / area
    return est


def is_paramonotone(f: Field, Q, eta: float = DEFAULT_ETA, R: float = DEFAULT_R, r: float = DEFAULT_r,
                    nsamples: int = DEFAULT_LINES, seed: int = 0, m_max: Optional[float] = None) -> ParamonotoneResult:
    """Whether the Omega^P density of f on rQ is at most eta / alpha(Q)^4."""
    est = paramonotone_density(f, Q, R, r, nsamples, seed, m_max)
    thr = eta / Q.aspect**4
    dens = est.extra["density"]
    return ParamonotoneResult(bool(dens <= thr), float(dens), float(thr), est)
