"""Cut semimetrics of a periodic intrinsic epigraph and the metric Delta built from them.

For p in H, lambda_p(h1, h2) is 1 when exactly one of p h1, p h2 lies in the
epigraph Gamma^+ = {y > psi(Pi(.))}.  Averaging over a fundamental domain
P = {X^a Z^c Y^b : a, c in [0, 1)} of the period lattice gives ell; M
averages ell over rotations about the z-axis, Lambda integrates 2^a M over
dilations, and

    Delta(h1, h2) = k alpha Lambda(s_{1/(k alpha)} h1, s_{1/(k alpha)} h2) + |pi(h1) - pi(h2)|.

The b-integral over each Y-fiber is done exactly where the fiber map is
monotone (it is then the distance between two roots) and by fixed stratified
samples otherwise.  All node sets are fixed per (budget, seed), so Delta is a
deterministic pseudometric.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from numba import njit
from scipy.stats import qmc

from . import heis
from ._kernels import field_eval, field_value
from .field import Field

DEFAULT_K = 2.0**16
DEFAULT_ANGLES = 32
DEFAULT_SCALES = 64
DEFAULT_NODES = 256
DEFAULT_B_NODES = 32
ALPHA_MIN = 2


# ---------------------------------------------------------------------------
# single cuts


def in_epigraph(f: Field, g) -> np.ndarray:
    """Whether the points g lie in Gamma^+, i.e. y(g) > psi(Pi(g))."""
    g = np.asarray(g, dtype=float)
    v = heis.project_v0(g)
    v = np.asarray(v, dtype=float)
    return g[..., 1] > f.eval(v[..., 0], v[..., 2])


def lambda_cut(p, h1, h2, f: Field) -> int:
    """1 iff exactly one of p h1, p h2 lies in Gamma^+."""
    a = bool(in_epigraph(f, heis.mul(p, h1)))
    b = bool(in_epigraph(f, heis.mul(p, h2)))
    return int(a != b)


def fiber_point(a: float, c: float, b: float):
    """The element X^a Z^c Y^b of the fundamental domain."""
    return heis.HeisPoint(a, b, c + 0.5 * a * b)


# ---------------------------------------------------------------------------
# compiled fiber integrals


@njit(cache=True)
def _root(kind, fpar, ipar, data, tpar, X, Z0, hx, hy, lo, hi):
    """Root of G(b) = b + hy - psi(X, Z0 - hx b), increasing on [lo, hi].

    Newton steps from b = psi(X, Z0) - hy, falling back to bisection when a
    step leaves the bracket.
    """
    a0, a1 = lo, hi
    b = field_value(kind, fpar, ipar, data, tpar, X, Z0) - hy
    if hx == 0.0:
        return b
    for _ in range(200):
        v, _, vz = field_eval(kind, fpar, ipar, data, tpar, X, Z0 - hx * b)
        g = b + hy - v
        if g > 0.0:
            a1 = min(a1, b)
        else:
            a0 = max(a0, b)
        bn = b - g / (1.0 + hx * vz)
        if not (a0 < bn < a1):
            bn = 0.5 * (a0 + a1)
        if abs(bn - b) <= 1e-15 * (1.0 + abs(b)) or a1 - a0 <= 1e-15 * (1.0 + abs(b)):
            return bn
        b = bn
    return b


@njit(cache=True)
def _fiber_measures(kind, fpar, ipar, data, tpar, ac, boff, h1, h2, vlo, vhi, dzb, out):
    """out[k] = |{b : exactly one of X^a Z^c Y^b h_i lies in Gamma^+}| at node k = (a, c)."""
    h1x, h1y, h1z = h1[0], h1[1], h1[2]
    h2x, h2y, h2z = h2[0], h2[1], h2[2]
    lo = vlo - max(h1y, h2y)
    hi = vhi - min(h1y, h2y)
    q1 = abs(h1x) * dzb
    q2 = abs(h2x) * dzb
    mono = q1 < 1.0 and q2 < 1.0
    nb = boff.shape[1]
    L = hi - lo
    n = ac.shape[0]
    for k in range(n):
        a = ac[k, 0]
        c = ac[k, 1]
        X1 = a + h1x
        Z1 = c + h1z - 0.5 * h1x * h1y
        X2 = a + h2x
        Z2 = c + h2z - 0.5 * h2x * h2y
        if mono:
            b1 = _root(kind, fpar, ipar, data, tpar, X1, Z1, h1x, h1y, lo, hi)
            b2 = _root(kind, fpar, ipar, data, tpar, X2, Z2, h2x, h2y, lo, hi)
            out[k] = abs(b1 - b2)
        else:
            s = 0
            for j in range(nb):
                b = lo + L * (j + boff[k, j]) / nb
                g1 = b + h1y - field_value(kind, fpar, ipar, data, tpar, X1, Z1 - h1x * b) > 0.0
                g2 = b + h2y - field_value(kind, fpar, ipar, data, tpar, X2, Z2 - h2x * b) > 0.0
                if g1 != g2:
                    s += 1
            out[k] = L * s / nb


@njit(cache=True)
def _lambda_nodes(kind, fpar, ipar, data, tpar, ac, boff, h1, h2, vlo, vhi, dzb, thetas, avals, totals):
    """totals[i, k] += 2^a ell-integrand of the rotated and dilated pair, per (theta, a) node.

    totals has shape (len(thetas) * len(avals), n_nodes); rows are theta-major.
    """
    n = ac.shape[0]
    buf = np.empty(n)
    g1 = np.empty(3)
    g2 = np.empty(3)
    row = 0
    for t in range(thetas.shape[0]):
        ct = math.cos(thetas[t])
        st = math.sin(thetas[t])
        for i in range(avals.shape[0]):
            lam = 2.0 ** (-avals[i])
            g1[0] = lam * (ct * h1[0] - st * h1[1])
            g1[1] = lam * (st * h1[0] + ct * h1[1])
            g1[2] = lam * lam * h1[2]
            g2[0] = lam * (ct * h2[0] - st * h2[1])
            g2[1] = lam * (st * h2[0] + ct * h2[1])
            g2[2] = lam * lam * h2[2]
            _fiber_measures(kind, fpar, ipar, data, tpar, ac, boff, g1, g2, vlo, vhi, dzb, buf)
            for k in range(n):
                totals[row, k] = buf[k] / lam
            row += 1


# ---------------------------------------------------------------------------
# node sets


@lru_cache(maxsize=16)
def _nodes(n: int, nb: int, seed: int):
    rng = np.random.default_rng(seed)
    if n & (n - 1) == 0:
        ac = qmc.Sobol(2, scramble=True, seed=rng).random(n)
    else:
        ac = rng.random((n, 2))
    boff = rng.random((n, nb))
    ac.setflags(write=False)
    boff.setflags(write=False)
    return ac, boff


def _field_args(f: Field):
    kern = f.kernel()
    if kern is None:
        raise TypeError(f"{type(f).__name__} has no compiled form")
    band = f.value_band()
    if band is None or band[2] != 0.0:
        raise ValueError("the cut metric needs a bounded field (value band with zero slope)")
    if f.period is None or tuple(f.period)[0] != 1.0 or not float(1.0 / f.period[1]).is_integer():
        raise ValueError("the cut metric needs a field periodic under the integer lattice in x and z")
    kind, fpar, ipar, data, tpar = kern
    dzb = float(f.sup_abs_dz())
    return (kind, fpar, ipar, data, np.asarray(tpar, dtype=float)), float(band[0]), float(band[1]), dzb


@dataclass
class EllResult:
    value: float
    stderr: float
    monotone: bool
    nodes: int


def ell(h1, h2, f: Field, budget: int = 2**16, seed: int = 0, b_nodes: int = DEFAULT_B_NODES,
        detail: bool = False):
    """Integral over the fundamental domain of lambda_p(h1, h2).

    ``budget`` (a, c) nodes are a scrambled Sobol set when a power of two;
    the stderr is the sample standard deviation over nodes / sqrt(budget).
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    kern, vlo, vhi, dzb = _field_args(f)
    ac, boff = _nodes(int(budget), int(b_nodes), int(seed))
    out = np.empty(len(ac))
    p1 = np.asarray(h1, dtype=float).reshape(3)
    p2 = np.asarray(h2, dtype=float).reshape(3)
    _fiber_measures(*kern, ac, boff, p1, p2, vlo, vhi, dzb, out)
    val = float(np.mean(out))
    if not detail:
        return val
    se = float(np.std(out, ddof=1) / math.sqrt(len(out))) if len(out) > 1 else math.inf
    mono = bool(abs(p1[0]) * dzb < 1 and abs(p2[0]) * dzb < 1)
    return EllResult(val, se, mono, len(out))


# ---------------------------------------------------------------------------
# Delta


def auto_alpha(k: float, rho: float, alpha_min: int = ALPHA_MIN) -> int:
    """The integer alpha with q <= alpha < 1 + q for q = log_rho(k / 8)^{1/4}, raised to alpha_min."""
    if not k > 8:
        raise ValueError("k must exceed 8")
    q = (math.log(k / 8.0) / math.log(rho)) ** 0.25
    a = math.ceil(q)
    if a - q >= 1.0:
        a -= 1
    return max(int(a), int(alpha_min))


@dataclass
class CutMetricConfig:
    """Parameters of Delta: the field, k, alpha, the Lambda scale window and the node budgets."""

    field: Field
    k: float = DEFAULT_K
    alpha: float = 2.0
    a_lo: float = 0.0
    a_hi: float = 1.0
    nodes: int = DEFAULT_NODES
    b_nodes: int = DEFAULT_B_NODES
    angles: int = DEFAULT_ANGLES
    scales: int = DEFAULT_SCALES
    seed: int = 0
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if not self.k > 1:
            raise ValueError("k must exceed 1")
        if self.nodes <= 0 or self.angles < 2 or self.scales < 4 or self.b_nodes <= 0:
            raise ValueError("invalid budgets")
        if not self.a_hi > self.a_lo:
            raise ValueError("empty scale window")

    @classmethod
    def from_surface(cls, surface, k: float = DEFAULT_K, alpha: Optional[float] = None, layers: Optional[int] = None,
                     **kw) -> "CutMetricConfig":
        """Config on a built bumpy surface with the window [r - log2 rho, R + log2 rho] of its calibration."""
        p = surface.params
        r, R = p.r, p.R
        if r is None or R is None:
            from .bumpy import calibrate

            cal = calibrate(surface.proto)
            r, R = cal.r, cal.R
        lg = math.log2(p.rho)
        meta = {"rho": p.rho, "r": r, "R": R, "auto_alpha": auto_alpha(k, p.rho)}
        a = float(p.alpha if alpha is None else alpha)
        return cls(field=surface.field(layers), k=k, alpha=a, a_lo=r - lg, a_hi=R + lg, meta=meta, **kw)

    def to_dict(self) -> dict:
        return {"k": self.k, "alpha": self.alpha, "a_lo": self.a_lo, "a_hi": self.a_hi, "nodes": self.nodes,
                "b_nodes": self.b_nodes, "angles": self.angles, "scales": self.scales, "seed": self.seed,
                **self.meta}

    def grids(self):
        th = 2.0 * math.pi * np.arange(self.angles) / self.angles
        av = np.linspace(self.a_lo, self.a_hi, self.scales)
        return th, av


@dataclass
class DeltaResult:
    value: float
    mc_stderr: float
    quad_err: float

    @property
    def error(self) -> float:
        return math.hypot(self.mc_stderr, self.quad_err)


def _trap_weights(n: int, h: float, step: int = 1) -> np.ndarray:
    w = np.zeros(n)
    idx = np.arange(0, n, step)
    w[idx] = h * step
    w[idx[0]] *= 0.5
    w[idx[-1]] *= 0.5
    return w


def lambda_detail(h1, h2, cfg: CutMetricConfig) -> DeltaResult:
    """Lambda(h1, h2) with its Monte Carlo stderr and a quadrature error estimate.

    The quadrature error compares the full rule with 16 of the angles and
    with every third scale node (trapezoid error scales as h^2, so the
    scale difference is divided by 8).
    """
    kern, vlo, vhi, dzb = _field_args(cfg.field)
    ac, boff = _nodes(cfg.nodes, cfg.b_nodes, cfg.seed)
    th, av = cfg.grids()
    totals = np.empty((len(th) * len(av), len(ac)))
    p1 = np.asarray(h1, dtype=float).reshape(3)
    p2 = np.asarray(h2, dtype=float).reshape(3)
    _lambda_nodes(*kern, ac, boff, p1, p2, vlo, vhi, dzb, th, av, totals)
    T = totals.reshape(len(th), len(av), len(ac))
    ha = (cfg.a_hi - cfg.a_lo) / (len(av) - 1)
    wa = _trap_weights(len(av), ha)
    wth = np.full(len(th), 2.0 * math.pi / len(th))
    per_node = np.einsum("t,a,tak->k", wth, wa, T)
    value = float(np.mean(per_node))
    mc = float(np.std(per_node, ddof=1) / math.sqrt(len(per_node))) if len(per_node) > 1 else 0.0
    S = T.mean(axis=2)
    quad = 0.0
    if len(th) % 2 == 0:
        wth2 = np.zeros(len(th))
        wth2[::2] = 4.0 * math.pi / len(th)
        quad = abs(float(wth2 @ S @ wa) - value)
    if (len(av) - 1) % 3 == 0:
        wa3 = _trap_weights(len(av), ha, 3)
        quad = max(quad, abs(float(wth @ S @ wa3) - value) / 8.0)
    return DeltaResult(value, mc, quad)


def big_lambda(h1, h2, cfg: CutMetricConfig) -> float:
    return lambda_detail(h1, h2, cfg).value


def delta_detail(h1, h2, cfg: CutMetricConfig) -> DeltaResult:
    s = 1.0 / (cfg.k * cfg.alpha)
    p1 = np.asarray(heis.dilate(h1, s), dtype=float)
    p2 = np.asarray(heis.dilate(h2, s), dtype=float)
    lam = lambda_detail(p1, p2, cfg)
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    horiz = math.hypot(h1[0] - h2[0], h1[1] - h2[1])
    ka = cfg.k * cfg.alpha
    return DeltaResult(ka * lam.value + horiz, ka * lam.mc_stderr, ka * lam.quad_err)


def big_delta(h1, h2, cfg: CutMetricConfig) -> float:
    """Delta(h1, h2) = k alpha Lambda(s h1, s h2) + |pi(h1) - pi(h2)| with s = 1 / (k alpha)."""
    return delta_detail(h1, h2, cfg).value


def big_m(h1, h2, cfg: CutMetricConfig) -> DeltaResult:
    """M(h1, h2): the rotation integral of ell on the configured angle grid (no dilation)."""
    kern, vlo, vhi, dzb = _field_args(cfg.field)
    ac, boff = _nodes(cfg.nodes, cfg.b_nodes, cfg.seed)
    th, _ = cfg.grids()
    totals = np.empty((len(th), len(ac)))
    p1 = np.asarray(h1, dtype=float).reshape(3)
    p2 = np.asarray(h2, dtype=float).reshape(3)
    _lambda_nodes(*kern, ac, boff, p1, p2, vlo, vhi, dzb, th, np.zeros(1), totals)
    per_node = totals.sum(axis=0) * (2.0 * math.pi / len(th))
    value = float(per_node.mean())
    mc = float(np.std(per_node, ddof=1) / math.sqrt(len(per_node)))
    S = totals.mean(axis=1)
    quad = abs(float(S[::2].sum() * 4.0 * math.pi / len(th)) - value) if len(th) % 2 == 0 else 0.0
    return DeltaResult(value, mc, quad)


def formula_side(g, h, alpha: float) -> float:
    """|x - chi| + |y - upsilon| + sqrt|2z - 2 zeta - x upsilon + y chi| / alpha."""
    x, y, z = (float(v) for v in g)
    c, u, w = (float(v) for v in h)
    return abs(x - c) + abs(y - u) + math.sqrt(abs(2 * z - 2 * w - x * u + y * c)) / alpha


def _spread(r: np.ndarray) -> float:
    """max / min, infinite when the minimum vanishes."""
    lo = float(r.min())
    return float(r.max()) / lo if lo > 0 else math.inf


def center_band(cfg: CutMetricConfig, cs: Sequence[float]) -> dict:
    """Delta(0, Z^c) over the given c, divided by min(sqrt c, k) / alpha and by min(sqrt c / alpha, alpha^-2)."""
    vals, errs = [], []
    for c in cs:
        d = delta_detail(heis.ORIGIN, (0.0, 0.0, float(c)), cfg)
        vals.append(d.value)
        errs.append(d.error)
    cs = np.asarray(cs, dtype=float)
    vals = np.asarray(vals)
    scaled = vals / (np.minimum(np.sqrt(cs), cfg.k) / cfg.alpha)
    literal = vals / np.minimum(np.sqrt(cs) / cfg.alpha, cfg.alpha**-2.0)
    return {
        "c": cs.tolist(),
        "delta": vals.tolist(),
        "error": errs,
        "ratio": scaled.tolist(),
        "band": [float(scaled.min()), float(scaled.max())],
        "spread": _spread(scaled),
        "literal_ratio": literal.tolist(),
        "literal_spread": _spread(literal),
    }


# ---------------------------------------------------------------------------
# word-ball harness


@dataclass
class HarnessReport:
    n: int
    npoints: int
    npairs: int
    exhaustive: bool
    ratio_min: float
    ratio_max: float
    rows: list = dc_field(repr=False, default_factory=list)
    config: dict = dc_field(default_factory=dict)

    def summary(self) -> dict:
        return {"n": self.n, "points": self.npoints, "pairs": self.npairs, "exhaustive": self.exhaustive,
                "ratio_min": self.ratio_min, "ratio_max": self.ratio_max, "config": self.config}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["g", "h", "delta", "formula_side", "ratio"])
            for g, h, d, fs, r in self.rows:
                w.writerow([" ".join(repr(float(v)) for v in g), " ".join(repr(float(v)) for v in h),
                            repr(d), repr(fs), repr(r)])

    def to_json(self, path=None) -> str:
        s = json.dumps(self.summary(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s)
        return s


def distortion_harness(n: int, cfg: CutMetricConfig, max_pairs: int = 10_000, sample_pairs: int = 256,
                       seed: int = 0) -> HarnessReport:
    """Delta against the word-metric formula side on the ball B_n.

    All pairs are used when there are at most ``max_pairs`` of them;
    otherwise ``sample_pairs`` distinct pairs are drawn with ``seed``.
    """
    ball = heis.word_ball(n)
    pts = np.stack([ball.x, ball.y, 0.5 * ball.two_z], axis=1).astype(float)
    m = len(pts)
    total = m * (m - 1) // 2
    if total <= max_pairs:
        pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
        exhaustive = True
    else:
        rng = np.random.default_rng(seed)
        chosen = set()
        while len(chosen) < min(sample_pairs, total):
            i, j = rng.integers(0, m, 2)
            if i != j:
                chosen.add((int(min(i, j)), int(max(i, j))))
        pairs = sorted(chosen)
        exhaustive = False
    rows = []
    for i, j in pairs:
        g, h = pts[i], pts[j]
        d = big_delta(g, h, cfg)
        fs = formula_side(g, h, cfg.alpha)
        rows.append((g, h, d, fs, d / fs))
    r = np.array([row[4] for row in rows])
    return HarnessReport(n, m, len(pairs), exhaustive, float(r.min()), float(r.max()), rows, cfg.to_dict())
