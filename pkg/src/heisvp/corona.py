"""Pseudoquads and their greedy subdivision into a foliated patchwork, with diagnostics.

A pseudoquad over I = [a, b] is bounded by the verticals x = a, x = b and by
two characteristic curves g1 < g2.  Its parabolic model is a quadratic h
and a half-gap d, so that g1 ~ h - d and g2 ~ h + d; the height is
delta_z = 2 d and the aspect ratio delta_x / sqrt(delta_z).

Curves are integrated on one dyadic x-lattice shared by the whole tree, so
a child's boundary curves are restrictions of its parent's and both cut
types tile the parent up to rounding.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import nonmono
from .field import CharCurve, Field, QuadRegion, default_flow_step, flow_char
from .vper import lq_norm, profile

MU_SMALL = 1.0 / 32


# ---------------------------------------------------------------------------
# pseudoquads


def _lattice_step(f: Field, step: Optional[float]) -> float:
    s = default_flow_step(f) if step is None else step
    return 2.0 ** math.floor(math.log2(s))


def fit_quadratic(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    """Least-squares (c0, c1, c2) of c0 + c1 x + c2 x^2, fitted about the center for conditioning."""
    xm = 0.5 * (x[0] + x[-1])
    p2, p1, p0 = np.polyfit(x - xm, y, 2)
    return (float(p0 - p1 * xm + p2 * xm * xm), float(p1 - 2 * p2 * xm), float(p2))


def _quad(c, x):
    return c[0] + c[1] * x + c[2] * x * x


@dataclass
class Pseudoquad:
    a: float
    b: float
    g1: Optional[CharCurve]
    g2: Optional[CharCurve]
    h: Tuple[float, float, float]
    d: float
    area: float = 0.0
    rectilinearity: float = 0.0

    @property
    def delta_x(self) -> float:
        return self.b - self.a

    @property
    def delta_z(self) -> float:
        return 2.0 * self.d

    @property
    def aspect(self) -> float:
        return self.delta_x / math.sqrt(self.delta_z)

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def weight(self) -> float:
        return self.area / self.aspect**4

    def model(self) -> Tuple[Tuple[float, float, float], Tuple[float, float, float]]:
        """Coefficients of the model curves h - d and h + d."""
        h = self.h
        return (h[0] - self.d, h[1], h[2]), (h[0] + self.d, h[1], h[2])

    def scaled_region(self, r: float) -> QuadRegion:
        """rQ: the model rescaled by r horizontally and r^2 vertically about its center."""
        c = self.center
        half = 0.5 * r * self.delta_x
        return QuadRegion.parabolic(c - half, c + half, self.h, r * r * self.d)

    def extended(self, k: float = 4.0) -> Tuple[float, float]:
        c, half = self.center, 0.5 * k * self.delta_x
        return c - half, c + half

    def measure(self) -> "Pseudoquad":
        """Fill in the area over I and the rectilinearity over 4I."""
        self.area = self.g2.integral(self.a, self.b) - self.g1.integral(self.a, self.b)
        lo, hi = self.extended(4.0)
        x = self.g1.x
        sel = (x >= lo - 1e-12) & (x <= hi + 1e-12)
        xs = x[sel]
        m1, m2 = self.model()
        dev = np.maximum(np.abs(self.g1.g[sel] - _quad(m1, xs)), np.abs(self.g2(xs) - _quad(m2, xs)))
        self.rectilinearity = float(np.max(dev) / self.delta_z)
        return self

    def drop_curves(self) -> None:
        self.g1 = None
        self.g2 = None


def _samples_on(c: CharCurve, a: float, b: float):
    sel = (c.x >= a - 1e-12) & (c.x <= b + 1e-12)
    return c.x[sel], c.g[sel]


def make_pseudoquad(f: Field, I: Tuple[float, float], lower_seed, upper_seed, step: Optional[float] = None) -> Pseudoquad:
    """Pseudoquad bounded by the characteristics through two seeds, flowed over 4I.

    The model h is the least-squares quadratic of the mid-curve over I and
    d the mean half-gap over I.
    """
    a, b = (float(v) for v in I)
    if not b > a:
        raise ValueError("empty base interval")
    st = _lattice_step(f, step)
    w = b - a
    span = (a - 1.5 * w, b + 1.5 * w)
    g1 = flow_char(f, lower_seed, span, st)
    g2 = flow_char(f, upper_seed, span, st)
    x, v1 = _samples_on(g1, a, b)
    v2 = g2(x)
    if np.any(v2 <= v1):
        raise ValueError("boundary curves cross over the base interval")
    h = fit_quadratic(x, 0.5 * (v1 + v2))
    d = float(np.mean(0.5 * (v2 - v1)))
    return Pseudoquad(a, b, g1, g2, h, d).measure()


def unit_square_pseudoquad(f: Field, step: Optional[float] = None) -> Pseudoquad:
    """Root cell over [0, 1] bounded by the characteristics through (0, 0) and (0, 1)."""
    return make_pseudoquad(f, (0.0, 1.0), (0.0, 0.0), (0.0, 1.0), step)


def vertical_children(Q: Pseudoquad) -> Tuple[Pseudoquad, Pseudoquad]:
    """Cut at the midpoint of I; the children keep the parent's curves and model."""
    m = Q.center
    left = Pseudoquad(Q.a, m, Q.g1, Q.g2, Q.h, Q.d).measure()
    right = Pseudoquad(m, Q.b, Q.g1, Q.g2, Q.h, Q.d).measure()
    return left, right


def horizontal_children(f: Field, Q: Pseudoquad, step: float):
    """Cut along the characteristic through the midpoint of the two boundary points above the center.

    Both children get the model of the cut curve k (least-squares quadratic
    over I) shifted by -+ delta_z / 4, with half-gap delta_z / 4, so they have
    equal heights delta_z / 2.
    """
    xm = Q.center
    u1 = float(Q.g1(xm))
    u2 = float(Q.g2(xm))
    zm = 0.5 * (u1 + u2)
    gc = flow_char(f, (xm, zm), (float(Q.g1.x[0]), float(Q.g1.x[-1])), step)
    x, vc = _samples_on(gc, Q.a, Q.b)
    k = fit_quadratic(x, vc)
    q = 0.5 * Q.d
    lower = Pseudoquad(Q.a, Q.b, Q.g1, gc, (k[0] - q, k[1], k[2]), q).measure()
    upper = Pseudoquad(Q.a, Q.b, gc, Q.g2, (k[0] + q, k[1], k[2]), q).measure()
    return lower, upper, gc


# ---------------------------------------------------------------------------
# patchwork trees


@dataclass
class Node:
    id: int
    parent: Optional[int]
    depth: int
    quad: Pseudoquad
    cut: str = "leaf"
    children: List[int] = dc_field(default_factory=list)
    omega_density: float = float("nan")
    omega_stderr: float = float("nan")
    threshold: float = float("nan")
    tiling_defect: float = 0.0
    plane: Optional[dict] = None

    @property
    def weight(self) -> float:
        return self.quad.weight


@dataclass
class PatchworkTree:
    nodes: List[Node]
    config: dict = dc_field(default_factory=dict)

    def __len__(self):
        return len(self.nodes)

    @property
    def root(self) -> Node:
        return self.nodes[0]

    def vertical(self) -> List[int]:
        return [n.id for n in self.nodes if n.cut == "vertical"]

    def horizontal(self) -> List[int]:
        return [n.id for n in self.nodes if n.cut == "horizontal"]

    def leaves(self) -> List[int]:
        return [n.id for n in self.nodes if n.cut == "leaf"]

    def descendants(self, i: int) -> List[int]:
        """D(v): the node itself and everything below it."""
        out, stack = [], [i]
        while stack:
            j = stack.pop()
            out.append(j)
            stack.extend(self.nodes[j].children)
        return sorted(out)

    def to_json(self, path=None) -> str:
        rows = []
        for n in self.nodes:
            q = n.quad
            rows.append(
                {
                    "id": n.id,
                    "parent": n.parent,
                    "cut": n.cut,
                    "x0": q.a,
                    "x1": q.b,
                    "delta_z": q.delta_z,
                    "aspect": q.aspect,
                    "area": q.area,
                    "omega_density": _finite_or_none(n.omega_density),
                    "weight": q.weight,
                    "rectilinearity": q.rectilinearity,
                    "plane": n.plane,
                }
            )
        s = json.dumps(rows, indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s)
        return s


def _finite_or_none(v):
    return float(v) if math.isfinite(v) else None


def subdivide(
    f: Field,
    root: Optional[Pseudoquad] = None,
    eta: float = nonmono.DEFAULT_ETA,
    R: float = nonmono.DEFAULT_R,
    r: float = nonmono.DEFAULT_r,
    max_depth: int = 10,
    min_width: Optional[float] = None,
    nsamples: int = 1024,
    seed: int = 0,
    m_max: Optional[float] = None,
    step: Optional[float] = None,
    keep_curves: bool = False,
    decide: Optional[Callable[[Pseudoquad, int], nonmono.ParamonotoneResult]] = None,
) -> PatchworkTree:
    """Greedy patchwork: paramonotone cells are cut horizontally, the others vertically.

    Node k uses the line-sample seed ``seed + k``.  Recursion stops at
    ``max_depth`` or when the cell is narrower than ``min_width`` (default
    four field resolution cells).  ``decide`` replaces the paramonotonicity
    test (used for deterministic shapes in tests).
    """
    st = _lattice_step(f, step)
    if root is None:
        root = unit_square_pseudoquad(f, st)
    if min_width is None:
        min_width = 4.0 * f.resolution()[0]
    if m_max is None and decide is None:
        m_max = nonmono.default_m_max(f)
    nodes = [Node(0, None, 0, root)]
    stack = [0]
    while stack:
        i = stack.pop()
        node = nodes[i]
        Q = node.quad
        if node.depth >= max_depth or Q.delta_x < min_width:
            if not keep_curves:
                Q.drop_curves()
            continue
        if decide is None:
            res = nonmono.is_paramonotone(f, Q, eta, R, r, nsamples, seed + i, m_max)
        else:
            res = decide(Q, i)
        node.omega_density = res.density
        node.threshold = res.threshold
        if res.estimate is not None:
            node.omega_stderr = res.estimate.extra.get("density_stderr", float("nan"))
        if res.paramonotone:
            lower, upper, _ = horizontal_children(f, Q, st)
            node.cut = "horizontal"
            kids = (lower, upper)
        else:
            kids = vertical_children(Q)
            node.cut = "vertical"
        node.tiling_defect = abs(Q.area - sum(k.area for k in kids))
        for k in kids:
            j = len(nodes)
            nodes.append(Node(j, i, node.depth + 1, k))
            node.children.append(j)
        # depth-first, lower/left child first
        stack.extend(reversed(node.children))
        if not keep_curves:
            Q.drop_curves()
    cfg = {"eta": eta, "R": R, "r": r, "max_depth": max_depth, "min_width": min_width,
           "nsamples": nsamples, "seed": seed, "m_max": m_max, "step": st}
    return PatchworkTree(nodes, cfg)


# ---------------------------------------------------------------------------
# weights and the Carleson diagnostic


def weight(tree: PatchworkTree, selector=None) -> float:
    """Sum of |Q|/alpha(Q)^4 over the selected node ids (all nodes when None)."""
    ids = range(len(tree.nodes)) if selector is None else selector
    return float(sum(tree.nodes[i].weight for i in ids))


def carleson_ratio(tree: PatchworkTree) -> float:
    """max over nodes v of W(D(v) and vertically cut) / |Q_v|."""
    n = len(tree.nodes)
    below = np.zeros(n)
    # children have larger ids than parents, so a reverse sweep accumulates subtrees
    for node in reversed(tree.nodes):
        own = node.weight if node.cut == "vertical" else 0.0
        below[node.id] = own + sum(below[c] for c in node.children)
    ratios = [below[i] / tree.nodes[i].quad.area for i in range(n)]
    return float(max(ratios))


def check_invariants(tree: PatchworkTree, tiling_tol: float = 1e-6) -> dict:
    """Per-node structural checks of a patchwork; returns counts of violations and the extremes."""
    out = {"tiling": 0, "sibling_height": 0, "height_monotone": 0, "vertical_weight": 0,
           "horizontal_weight": 0, "vertical_alpha": 0, "horizontal_alpha": 0, "checked_weight": 0,
           "max_tiling_defect": 0.0, "vertical_weight_ratios": [], "horizontal_weight_ratios": []}
    s2 = math.sqrt(2.0)
    for node in tree.nodes:
        if not node.children:
            continue
        Q = node.quad
        kids = [tree.nodes[c].quad for c in node.children]
        rel = node.tiling_defect / Q.area
        out["max_tiling_defect"] = max(out["max_tiling_defect"], rel)
        if rel >= tiling_tol:
            out["tiling"] += 1
        if kids[0].delta_z != kids[1].delta_z:
            out["sibling_height"] += 1
        if any(k.delta_z > Q.delta_z for k in kids):
            out["height_monotone"] += 1
        for k in kids:
            ratio = k.weight / Q.weight
            am = k.aspect / Q.aspect
            if node.cut == "vertical":
                out["vertical_weight_ratios"].append(ratio)
                if abs(am - 0.5) > 1e-12:
                    out["vertical_alpha"] += 1
            else:
                out["horizontal_weight_ratios"].append(ratio)
                if not (s2 - 0.25 <= am <= s2 + 0.25):
                    out["horizontal_alpha"] += 1
            if Q.rectilinearity <= MU_SMALL:
                out["checked_weight"] += 1
                if node.cut == "vertical" and not (4.0 <= ratio <= 16.0):
                    out["vertical_weight"] += 1
                if node.cut == "horizontal" and ratio > 3.0 / 7.0:
                    out["horizontal_weight"] += 1
    return out


# ---------------------------------------------------------------------------
# approximating planes


def approx_plane(f: Field, Q: Pseudoquad, scale: float = 10.0, n: Tuple[int, int] = (96, 96)) -> dict:
    """Least-squares plane F = a + b x of f on scale*Q and its sigma-residual.

    residual = ||F - f||_{L1(scale Q)} delta_x / (|Q| delta_z)
    """
    reg = Q.scaled_region(scale)
    xs, zs, ws = reg.midpoint_nodes(*n)
    v = f.eval(xs, zs)
    sw = np.sqrt(ws)
    A = np.stack([np.ones_like(xs), xs - Q.center], axis=1) * sw[:, None]
    coef, *_ = np.linalg.lstsq(A, v * sw, rcond=None)
    a = float(coef[0] - coef[1] * Q.center)
    b = float(coef[1])
    l1 = float(np.sum(ws * np.abs(a + b * xs - v)))
    res = l1 * Q.delta_x / (Q.area * Q.delta_z)
    return {"a": a, "b": b, "sigma_residual": res}


def attach_planes(tree: PatchworkTree, f: Field, ids=None, **kw) -> None:
    for i in tree.horizontal() if ids is None else ids:
        tree.nodes[i].plane = approx_plane(f, tree.nodes[i].quad, **kw)


def vper_bound_check(tree: PatchworkTree, f: Field, steps: Optional[int] = None, extra_span: float = 2.0,
                     **vpp_kw) -> dict:
    """||vpP_{Q,f}||_{L4([t0, t0 + span])} / (sigma |Q|^{3/4} W(V)^{1/4}) for the root Q.

    t0 = -log_4 delta_z(Q); the span reaches ``extra_span`` past the finest
    height in the tree.  sigma is the largest residual over horizontally cut
    nodes (planes are attached where missing).
    """
    Q = tree.root.quad
    t0 = -math.log(Q.delta_z, 4)
    dmin = min(n.quad.delta_z for n in tree.nodes)
    t1 = -math.log(dmin, 4) + extra_span
    region = Q.scaled_region(1.0)
    prof = profile(f, region, t0, t1, steps, **vpp_kw)
    num = lq_norm(prof, 4.0)
    hids = tree.horizontal()
    for i in hids:
        if tree.nodes[i].plane is None:
            tree.nodes[i].plane = approx_plane(f, tree.nodes[i].quad)
    sigma = max((tree.nodes[i].plane["sigma_residual"] for i in hids), default=0.0)
    W = weight(tree)
    den = sigma * Q.area**0.75 * W**0.25
    if num == 0.0:
        ratio = 0.0
    elif den == 0.0:
        ratio = math.inf
    else:
        ratio = num / den
    return {"ratio": ratio, "numerator": num, "sigma": sigma, "area": Q.area, "weight": W,
            "window": [t0, t1]}


def weight_vs_omega(tree: PatchworkTree, f: Field, ids: Sequence[int], i_range=(0, 6), nsamples: int = 1024,
                    seed: int = 0) -> List[dict]:
    """For each node v: W(vertically cut nodes below v) next to sum_i Omega^P_{2^-i R delta_x}(rQ_v)."""
    R, r, m_max = tree.config["R"], tree.config["r"], tree.config.get("m_max")
    vset = set(tree.vertical())
    out = []
    for v in ids:
        Q = tree.nodes[v].quad
        wv = weight(tree, [j for j in tree.descendants(v) if j in vset])
        Rs = [2.0 ** (-i) * R * Q.delta_x for i in range(i_range[0], i_range[1] + 1)]
        ests = nonmono.omega_p_multi(f, Q.scaled_region(r), Rs, nsamples, seed + v, m_max)
        out.append({"node": v, "weight_below": wv, "omega_sum": sum(e.value for e in ests)})
    return out
