"""Heisenberg group arithmetic, automorphisms, horizontal lines and word metric.

Points are coordinate triples ``(x, y, z)`` with the product

    (x, y, z) * (u, v, w) = (x + u, y + v, z + w + (x v - y u) / 2).

All functions accept a single point or an array of points with trailing
dimension 3 and broadcast over the leading dimensions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np


class HeisPoint(NamedTuple):
    x: float
    y: float
    z: float

    def __mul__(self, other):  # type: ignore[override]
        return mul(self, other)

    def inv(self) -> "HeisPoint":
        return inv(self)


ORIGIN = HeisPoint(0.0, 0.0, 0.0)
X = HeisPoint(1.0, 0.0, 0.0)
Y = HeisPoint(0.0, 1.0, 0.0)
Z = HeisPoint(0.0, 0.0, 1.0)

PointLike = Union[HeisPoint, Sequence[float], np.ndarray]


def _arr(p: PointLike) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape[-1] != 3:
        raise ValueError(f"expected trailing dimension 3, got shape {a.shape}")
    return a


def _out(a: np.ndarray):
    if a.ndim == 1:
        return HeisPoint(float(a[0]), float(a[1]), float(a[2]))
    return a


def mul(p: PointLike, q: PointLike):
    """Group product p*q."""
    a, b = _arr(p), _arr(q)
    x = a[..., 0] + b[..., 0]
    y = a[..., 1] + b[..., 1]
    z = a[..., 2] + b[..., 2] + 0.5 * (a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])
    return _out(np.stack(np.broadcast_arrays(x, y, z), axis=-1))


def inv(p: PointLike):
    return _out(-_arr(p))


def power(p: PointLike, t: float):
    """One-parameter subgroup through a horizontal point: (x, y, z)^t for z = 0.

    For general p the element exp(t log p) is returned, which in exponential
    coordinates is simply t*p.
    """
    return _out(t * _arr(p))


def project_v0(p: PointLike):
    """Projection to the xz-plane along cosets of <Y>: (x, 0, z - x y / 2)."""
    a = _arr(p)
    out = np.stack(
        [a[..., 0], np.zeros_like(a[..., 0]), a[..., 2] - 0.5 * a[..., 0] * a[..., 1]], axis=-1
    )
    return _out(out)


def dilate(p: PointLike, lam: float):
    """Heisenberg dilation (x, y, z) -> (lam x, lam y, lam^2 z)."""
    a = _arr(p)
    return _out(a * np.array([lam, lam, lam * lam]))


# ---------------------------------------------------------------------------
# automorphisms and left translations


class Automorphism:
    """Base class; subclasses act on points through ``__call__``."""

    preserves_cosets = True

    def __call__(self, p: PointLike):
        raise NotImplementedError

    def then(self, other: "Automorphism") -> "Compose":
        """Composition: first ``self``, then ``other``."""
        return Compose((self, other))


@dataclass(frozen=True)
class Stretch(Automorphism):
    a: float
    b: float

    def __post_init__(self):
        if self.a == 0 or self.b == 0:
            raise ValueError("stretch parameters must be nonzero")

    def __call__(self, p):
        return _out(_arr(p) * np.array([self.a, self.b, self.a * self.b]))


@dataclass(frozen=True)
class Shear(Automorphism):
    b: float

    def __call__(self, p):
        a = _arr(p)
        out = a.copy()
        out[..., 1] = a[..., 1] + self.b * a[..., 0]
        return _out(out)


@dataclass(frozen=True)
class Rotate(Automorphism):
    theta: float
    preserves_cosets = False

    def __call__(self, p):
        a = _arr(p)
        c, s = math.cos(self.theta), math.sin(self.theta)
        out = np.stack(
            [c * a[..., 0] - s * a[..., 1], s * a[..., 0] + c * a[..., 1], a[..., 2]], axis=-1
        )
        return _out(out)


@dataclass(frozen=True)
class LeftTranslate(Automorphism):
    g: tuple

    def __init__(self, g: PointLike):
        object.__setattr__(self, "g", tuple(float(c) for c in np.asarray(g, dtype=float)))

    def __call__(self, p):
        return mul(np.asarray(self.g), p)


@dataclass(frozen=True)
class Compose(Automorphism):
    maps: tuple

    def __call__(self, p):
        for m in self.maps:
            p = m(p)
        return p

    @property
    def preserves_cosets(self):  # type: ignore[override]
        return all(m.preserves_cosets for m in self.maps)


def apply(aut: Automorphism, p: PointLike):
    return aut(p)


def induced_v0(aut: Automorphism, v: PointLike):
    """Map of the vertical plane V0 induced by ``aut``: v -> Pi(aut(v))."""
    a = _arr(v)
    if np.any(a[..., 1] != 0):
        raise ValueError("induced_v0 expects points with y = 0")
    return project_v0(aut(a))


# ---------------------------------------------------------------------------
# horizontal lines


@dataclass(frozen=True)
class HorizontalLine:
    """Line through (0, y0, z0) with direction (1, m, 0)."""

    y0: float
    z0: float
    m: float

    def point(self, t):
        t = np.asarray(t, dtype=float)
        out = np.stack(np.broadcast_arrays(t, self.y0 + self.m * t, self.z0 - 0.5 * self.y0 * t), axis=-1)
        return _out(out)

    def g(self, t):
        """Projected height: z-coordinate of Pi(point(t))."""
        t = np.asarray(t, dtype=float)
        return self.z0 - self.y0 * t - 0.5 * self.m * t * t

    def gprime(self, t):
        t = np.asarray(t, dtype=float)
        return -self.y0 - self.m * t

    def y(self, t):
        return self.y0 + self.m * np.asarray(t, dtype=float)

    @classmethod
    def through(cls, p: PointLike, m: float) -> "HorizontalLine":
        """The horizontal line through p with slope m."""
        x, y, z = (float(c) for c in _arr(p))
        y0 = y - m * x
        # p = (0, y0, z0) * (x, m x, 0)  =>  z = z0 - y0 x / 2
        return cls(y0, z + 0.5 * y0 * x, m)


# ---------------------------------------------------------------------------
# metric bounds


def cc_bounds(p: PointLike):
    """Ball-box bounds (lower, upper) for the Carnot-Caratheodory norm."""
    a = _arr(p)
    x, y, z = a[..., 0], a[..., 1], a[..., 2]
    upper = np.abs(x) + np.abs(y) + 4.0 * np.sqrt(np.abs(z))
    lower = np.maximum(np.hypot(x, y), upper / 4.0)
    if a.ndim == 1:
        return float(lower), float(upper)
    return lower, upper


def cc_upper_sharp(p: PointLike):
    """min of the ball-box upper bound and |(x,y)| + 2 sqrt(pi |z|).

    The second term is the length of a segment to (x, y, 0) followed by a
    circle enclosing area |z|.
    """
    a = _arr(p)
    x, y, z = a[..., 0], a[..., 1], a[..., 2]
    box = np.abs(x) + np.abs(y) + 4.0 * np.sqrt(np.abs(z))
    loop = np.hypot(x, y) + 2.0 * np.sqrt(np.pi * np.abs(z))
    out = np.minimum(box, loop)
    return float(out) if a.ndim == 1 else out


# ---------------------------------------------------------------------------
# word metric on the integer Heisenberg group

WORD_BALL_GUARD = 10_000_000

# generators in BFS order X, X^-1, Y, Y^-1 acting on the right, as (dx, dy)
_GENS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class WordBallTooLarge(MemoryError):
    pass


@dataclass
class WordBall:
    """Lattice points within word distance n of ``center`` (stored as x, y, 2z)."""

    n: int
    center: tuple
    x: np.ndarray
    y: np.ndarray
    two_z: np.ndarray
    dist: np.ndarray

    def __len__(self):
        return len(self.dist)

    def _lookup(self):
        if not hasattr(self, "_table"):
            self._table = {
                (int(a), int(b), int(c)): int(d)
                for a, b, c, d in zip(self.x, self.y, self.two_z, self.dist)
            }
        return self._table

    def distance(self, x: int, y: int, two_z: int):
        """Word distance from the center, or None if outside the ball."""
        return self._lookup().get((int(x), int(y), int(two_z)))

    def layer_counts(self) -> np.ndarray:
        return np.bincount(self.dist, minlength=self.n + 1)

    def to_csv(self, path) -> None:
        arr = np.stack([self.x, self.y, self.two_z, self.dist], axis=1)
        np.savetxt(path, arr, fmt="%d", delimiter=",", header="x,y,two_z,dist", comments="")


def estimate_ball_size(n: int) -> int:
    # |B_n| grows like n^4; the leading constant is below 1/2 for the standard generators
    return int(0.5 * n**4 + 10 * n**3 + 10)


def word_ball(n: int, center: tuple = (0, 0, 0), guard: int = WORD_BALL_GUARD) -> WordBall:
    """Breadth-first search of the Cayley graph with generators X^{+-1}, Y^{+-1}.

    ``center`` is a lattice point given as (x, y, 2z); the returned distances
    are d_W(center, g) for g in center * B_n.
    """
    if n < 0:
        raise ValueError("radius must be nonnegative")
    if estimate_ball_size(n) > guard:
        raise WordBallTooLarge(f"ball of radius {n} exceeds guard of {guard} elements")
    cx, cy, cz2 = (int(c) for c in center)
    # box containing center * B_n, in coordinates relative to the center
    span_xy = n
    span_z = n * n + n * (abs(cx) + abs(cy)) + 2
    nx = 2 * span_xy + 1
    nz = 2 * span_z + 1
    size = nx * nx * nz
    if size > 40 * guard:
        raise WordBallTooLarge(f"search box of {size} cells exceeds memory guard")
    dist = np.full(size, -1, dtype=np.int16)

    def encode(x, y, z2):
        return ((x - cx + span_xy) * nx + (y - cy + span_xy)) * nz + (z2 - cz2 + span_z)

    fx = np.array([cx], dtype=np.int64)
    fy = np.array([cy], dtype=np.int64)
    fz = np.array([cz2], dtype=np.int64)
    dist[encode(fx, fy, fz)] = 0
    xs, ys, zs, ds = [fx], [fy], [fz], [np.zeros(1, dtype=np.int64)]
    for d in range(1, n + 1):
        cand = []
        for gx, gy in _GENS:
            # right multiplication by (gx, gy, 0): 2z += x*gy - y*gx
            cand.append((fx + gx, fy + gy, fz + fx * gy - fy * gx))
        nxs = np.concatenate([c[0] for c in cand])
        nys = np.concatenate([c[1] for c in cand])
        nzs = np.concatenate([c[2] for c in cand])
        keys = encode(nxs, nys, nzs)
        keys, first = np.unique(keys, return_index=True)
        fresh = dist[keys] < 0
        keys, first = keys[fresh], first[fresh]
        dist[keys] = d
        fx, fy, fz = nxs[first], nys[first], nzs[first]
        xs.append(fx)
        ys.append(fy)
        zs.append(fz)
        ds.append(np.full(len(fx), d, dtype=np.int64))
        if sum(len(a) for a in ds) > guard:
            raise WordBallTooLarge(f"ball of radius {n} exceeds guard of {guard} elements")
    return WordBall(
        n=n,
        center=(cx, cy, cz2),
        x=np.concatenate(xs),
        y=np.concatenate(ys),
        two_z=np.concatenate(zs),
        dist=np.concatenate(ds).astype(np.int64),
    )


def lattice_mul(p: tuple, q: tuple) -> tuple:
    """Product of lattice points given as (x, y, 2z)."""
    return (p[0] + q[0], p[1] + q[1], p[2] + q[2] + p[0] * q[1] - p[1] * q[0])
