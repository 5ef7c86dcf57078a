"""Compiled evaluation kernels shared by the field, bumpy, nonmono and embed modules.

A field is handed to compiled code as ``(kind, fpar, ipar, data, tpar)``:

* ``kind`` selects the evaluator (polynomial, grid, layered bump surface),
* ``fpar``/``ipar``/``data`` hold its float parameters, integer parameters and
  bulk arrays,
* ``tpar`` is a 9-vector describing an induced plane map composed on top of the
  base field (stretch, shear, left translation and their compositions).

The induced map sends (x, z) to (A x + X0, C z + P2 x^2 + P1 x + P0) and the
transformed field is  B psi(x, z) + L1 x + L0  at the image point.
"""
import math

import numpy as np
from numba import njit

KIND_POLY = 0
KIND_GRID = 1
KIND_LAYERED = 2

IDENTITY_T = np.array([1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0])

# ---------------------------------------------------------------------------
# one-dimensional bump profile u -> exp(-1/(u(1-u))) and its derivatives


@njit(cache=True)
def bump1(u):
    if u <= 0.0 or u >= 1.0:
        return 0.0, 0.0, 0.0
    q = u * (1.0 - u)
    b = math.exp(-1.0 / q)
    if b == 0.0:
        return 0.0, 0.0, 0.0
    qp = 1.0 - 2.0 * u
    iq = 1.0 / q
    d1 = b * qp * iq * iq
    d2 = b * (qp * qp * iq**4 - 2.0 * iq * iq - 2.0 * qp * qp * iq**3)
    return b, d1, d2


# ---------------------------------------------------------------------------
# polynomial fields: psi = sum_{i,j<=2} c[3 i + j] x^i z^j


@njit(cache=True)
def poly_eval(c, x, z):
    v = 0.0
    vx = 0.0
    vz = 0.0
    xp = (1.0, x, x * x)
    zp = (1.0, z, z * z)
    dxp = (0.0, 1.0, 2.0 * x)
    dzp = (0.0, 1.0, 2.0 * z)
    for i in range(3):
        for j in range(3):
            cij = c[3 * i + j]
            if cij != 0.0:
                v += cij * xp[i] * zp[j]
                vx += cij * dxp[i] * zp[j]
                vz += cij * xp[i] * dzp[j]
    return v, vx, vz


@njit(cache=True)
def poly_shift_diff(c, x, z, w):
    # psi(x, z) - psi(x, z - w) without cancellation
    out = 0.0
    xp = (1.0, x, x * x)
    for i in range(3):
        out += c[3 * i + 1] * xp[i] * w + c[3 * i + 2] * xp[i] * (2.0 * z * w - w * w)
    return out


# ---------------------------------------------------------------------------
# sampled grids; fpar = [x0, x1, z0, z1, dx, dz], ipar = [nx, nz, periodic, bicubic]


@njit(cache=True)
def _keys_w(u):
    u2 = u * u
    u3 = u2 * u
    w0 = 0.5 * (-u3 + 2.0 * u2 - u)
    w1 = 0.5 * (3.0 * u3 - 5.0 * u2 + 2.0)
    w2 = 0.5 * (-3.0 * u3 + 4.0 * u2 + u)
    w3 = 0.5 * (u3 - u2)
    d0 = 0.5 * (-3.0 * u2 + 4.0 * u - 1.0)
    d1 = 0.5 * (9.0 * u2 - 10.0 * u)
    d2 = 0.5 * (-9.0 * u2 + 8.0 * u + 1.0)
    d3 = 0.5 * (3.0 * u2 - 2.0 * u)
    return (w0, w1, w2, w3), (d0, d1, d2, d3)


@njit(cache=True)
def _grid_col(data, nx, nz, i, j):
    # node (i, j) with i in range; z ghost nodes use the quadratic-reproducing
    # rule f[-1] = 3 f[0] - 3 f[1] + f[2]
    if j < 0:
        return 3.0 * data[i * nz] - 3.0 * data[i * nz + 1] + data[i * nz + 2]
    if j >= nz:
        return 3.0 * data[i * nz + nz - 1] - 3.0 * data[i * nz + nz - 2] + data[i * nz + nz - 3]
    return data[i * nz + j]


@njit(cache=True)
def _grid_sample(data, nx, nz, periodic, i, j):
    """Value at node (i, j), with periodic wrap or ghost nodes outside the range."""
    if periodic:
        return data[(i % nx) * nz + (j % nz)]
    if i < 0:
        return (
            3.0 * _grid_col(data, nx, nz, 0, j)
            - 3.0 * _grid_col(data, nx, nz, 1, j)
            + _grid_col(data, nx, nz, 2, j)
        )
    if i >= nx:
        return (
            3.0 * _grid_col(data, nx, nz, nx - 1, j)
            - 3.0 * _grid_col(data, nx, nz, nx - 2, j)
            + _grid_col(data, nx, nz, nx - 3, j)
        )
    return _grid_col(data, nx, nz, i, j)


@njit(cache=True)
def grid_eval(fpar, ipar, data, x, z):
    x0 = fpar[0]
    z0 = fpar[2]
    dx = fpar[4]
    dz = fpar[5]
    nx = ipar[0]
    nz = ipar[1]
    periodic = ipar[2] != 0
    bicubic = ipar[3] != 0
    xi = (x - x0) / dx
    zi = (z - z0) / dz
    if periodic:
        i = int(math.floor(xi))
        j = int(math.floor(zi))
    else:
        if xi < -1e-9 or xi > nx - 1 + 1e-9 or zi < -1e-9 or zi > nz - 1 + 1e-9:
            return np.nan, np.nan, np.nan
        i = min(max(int(math.floor(xi)), 0), nx - 2)
        j = min(max(int(math.floor(zi)), 0), nz - 2)
    u = xi - i
    w = zi - j
    if not bicubic:
        f00 = _grid_sample(data, nx, nz, periodic, i, j)
        f01 = _grid_sample(data, nx, nz, periodic, i, j + 1)
        f10 = _grid_sample(data, nx, nz, periodic, i + 1, j)
        f11 = _grid_sample(data, nx, nz, periodic, i + 1, j + 1)
        v = (1 - u) * ((1 - w) * f00 + w * f01) + u * ((1 - w) * f10 + w * f11)
        vx = ((1 - w) * (f10 - f00) + w * (f11 - f01)) / dx
        vz = ((1 - u) * (f01 - f00) + u * (f11 - f10)) / dz
        return v, vx, vz
    wu, du = _keys_w(u)
    ww, dw = _keys_w(w)
    v = 0.0
    vx = 0.0
    vz = 0.0
    for a in range(4):
        colv = 0.0
        cold = 0.0
        for b in range(4):
            f = _grid_sample(data, nx, nz, periodic, i - 1 + a, j - 1 + b)
            colv += ww[b] * f
            cold += dw[b] * f
        v += wu[a] * colv
        vx += du[a] * colv
        vz += wu[a] * cold
    return v, vx / dx, vz / dz


# ---------------------------------------------------------------------------
# layered bump surfaces (see bumpy.py for the construction)
#
# fpar = [P, cbump, rho] followed by 4 floats per layer j = 0..nmax-1:
#        [h_j, A_j, colw_j, dzt_j]
# ipar = [nl, nmax] followed by 4 ints per layer: [ncol_j, K_j, nzt_j, off_j]
# data = concatenated tables; layer j >= 1 stores D then BZ, each of shape
#        (ncol_j, K_j + 1, nzt_j), where D = B - z is the displacement of the
#        backward characteristic to the left column edge and BZ = dB/dz.

LAYER_F0 = 3
LAYER_I0 = 2


@njit(cache=True)
def layer_displacement(fpar, ipar, data, j, x, zr):
    """(B - z, dB/dz) for layer j at x in [0,1) and z reduced mod P."""
    fo = LAYER_F0 + 4 * j
    io = LAYER_I0 + 4 * j
    colw = fpar[fo + 2]
    dzt = fpar[fo + 3]
    ncol = ipar[io]
    K = ipar[io + 1]
    nzt = ipar[io + 2]
    off = ipar[io + 3]
    m = int(math.floor(x / colw))
    if m >= ncol:
        m = ncol - 1
    if m < 0:
        m = 0
    s = x - m * colw
    xi = s / colw * K
    k0 = int(math.floor(xi)) - 1
    if k0 < 0:
        k0 = 0
    if k0 > K - 3:
        k0 = K - 3
    # Lagrange weights on nodes k0..k0+3
    t0 = xi - k0
    t1 = xi - k0 - 1
    t2 = xi - k0 - 2
    t3 = xi - k0 - 3
    lw0 = t1 * t2 * t3 / (-6.0)
    lw1 = t0 * t2 * t3 / 2.0
    lw2 = t0 * t1 * t3 / (-2.0)
    lw3 = t0 * t1 * t2 / 6.0
    s_ = zr / dzt
    iz = int(math.floor(s_))
    w = s_ - iz
    if iz >= nzt:
        iz -= nzt
        if iz >= nzt:
            iz = nzt - 1
    if iz < 0:
        iz += nzt
    iz1 = iz + 1
    if iz1 >= nzt:
        iz1 -= nzt
    blk = ncol * (K + 1) * nzt
    h00 = (1.0 + 2.0 * w) * (1.0 - w) * (1.0 - w)
    h10 = w * (1.0 - w) * (1.0 - w)
    h01 = w * w * (3.0 - 2.0 * w)
    h11 = w * w * (w - 1.0)
    g00 = 6.0 * w * w - 6.0 * w
    g10 = 3.0 * w * w - 4.0 * w + 1.0
    g01 = -g00
    g11 = 3.0 * w * w - 2.0 * w
    d = 0.0
    dd = 0.0
    for q in range(4):
        if q == 0:
            lw = lw0
        elif q == 1:
            lw = lw1
        elif q == 2:
            lw = lw2
        else:
            lw = lw3
        row = (m * (K + 1) + k0 + q) * nzt
        a0 = data[off + row + iz]
        a1 = data[off + row + iz1]
        s0 = (data[off + blk + row + iz] - 1.0) * dzt
        s1 = (data[off + blk + row + iz1] - 1.0) * dzt
        d += lw * (h00 * a0 + h10 * s0 + h01 * a1 + h11 * s1)
        dd += lw * (g00 * a0 + g10 * s0 + g01 * a1 + g11 * s1)
    return d, 1.0 + dd / dzt


@njit(cache=True)
def layered_layers(fpar, ipar, data, nl, x, z, out):
    """Per-layer quantities at (x, z) for layers 0..nl-1.

    out[j] = [beta_j, d beta_j/dz, derivative of beta_j along the
    characteristics of psi_j (with unit x-speed), dB_j/dz].
    """
    P = fpar[0]
    cb = fpar[1]
    xr = x - math.floor(x)
    zr = z - math.floor(z / P) * P
    if zr >= P:
        zr -= P
    for j in range(nl):
        fo = LAYER_F0 + 4 * j
        h = fpar[fo]
        A = fpar[fo + 1]
        colw = fpar[fo + 2]
        if j == 0:
            d = 0.0
            bz = 1.0
        else:
            d, bz = layer_displacement(fpar, ipar, data, j, xr, zr)
        m = math.floor(xr / colw)
        s = (xr - m * colw) / colw
        B = zr + d
        n = math.floor(B / h)
        t = (B - n * h) / h
        bs, bs1, _ = bump1(s)
        bt, bt1, _ = bump1(t)
        out[j, 0] = A * cb * bs * bt
        out[j, 1] = A * cb * bs * bt1 * bz / h
        out[j, 2] = A * cb * bs1 * bt / colw
        out[j, 3] = bz


@njit(cache=True)
def layered_eval(fpar, ipar, data, x, z):
    nl = ipar[0]
    out = np.empty((max(nl, 1), 4))
    layered_layers(fpar, ipar, data, nl, x, z, out)
    v = 0.0
    vx = 0.0
    vz = 0.0
    for j in range(nl):
        # d beta_j/dx = (derivative along characteristics) + psi_j * d beta_j/dz
        vx += out[j, 2] + v * out[j, 1]
        v += out[j, 0]
        vz += out[j, 1]
    return v, vx, vz


# ---------------------------------------------------------------------------
# dispatch with the induced-map wrapper


@njit(cache=True)
def base_eval(kind, fpar, ipar, data, x, z):
    if kind == KIND_POLY:
        return poly_eval(fpar, x, z)
    elif kind == KIND_GRID:
        return grid_eval(fpar, ipar, data, x, z)
    else:
        return layered_eval(fpar, ipar, data, x, z)


@njit(cache=True)
def field_eval(kind, fpar, ipar, data, tpar, x, z):
    """(psi, psi_x, psi_z) of the transformed field at the plane point (x, z)."""
    A = tpar[0]
    X0 = tpar[1]
    C = tpar[2]
    xb = (x - X0) / A
    Px = tpar[3] * xb * xb + tpar[4] * xb + tpar[5]
    zb = (z - Px) / C
    v, vx, vz = base_eval(kind, fpar, ipar, data, xb, zb)
    Bm = tpar[6]
    dP = 2.0 * tpar[3] * xb + tpar[4]
    val = Bm * v + tpar[7] * xb + tpar[8]
    dz = Bm * vz / C
    dx = (Bm * (vx - vz * dP / C) + tpar[7]) / A
    return val, dx, dz


@njit(cache=True)
def field_value(kind, fpar, ipar, data, tpar, x, z):
    v, _, _ = field_eval(kind, fpar, ipar, data, tpar, x, z)
    return v


@njit(cache=True)
def field_shift_diff(kind, fpar, ipar, data, tpar, x, z, w):
    """psi(x, z) - psi(x, z - w) for the transformed field."""
    A = tpar[0]
    C = tpar[2]
    xb = (x - tpar[1]) / A
    Px = tpar[3] * xb * xb + tpar[4] * xb + tpar[5]
    zb = (z - Px) / C
    wb = w / C
    if kind == KIND_POLY:
        return tpar[6] * poly_shift_diff(fpar, xb, zb, wb)
    v1, _, _ = base_eval(kind, fpar, ipar, data, xb, zb)
    v2, _, _ = base_eval(kind, fpar, ipar, data, xb, zb - wb)
    return tpar[6] * (v1 - v2)


@njit(cache=True)
def eval_many(kind, fpar, ipar, data, tpar, xs, zs, deriv):
    n = xs.shape[0]
    out = np.empty((n, 3 if deriv else 1))
    for i in range(n):
        v, vx, vz = field_eval(kind, fpar, ipar, data, tpar, xs[i], zs[i])
        out[i, 0] = v
        if deriv:
            out[i, 1] = vx
            out[i, 2] = vz
    return out


@njit(cache=True)
def shift_diff_many(kind, fpar, ipar, data, tpar, xs, zs, w):
    n = xs.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = field_shift_diff(kind, fpar, ipar, data, tpar, xs[i], zs[i], w)
    return out


# ---------------------------------------------------------------------------
# characteristic flow g' = -psi(t, g), classical RK4


@njit(cache=True)
def rk4_flow(kind, fpar, ipar, data, tpar, x0, z0, h, nsteps):
    """Integrate from (x0, z0) with signed step h; returns x, g, g' arrays."""
    xs = np.empty(nsteps + 1)
    gs = np.empty(nsteps + 1)
    gp = np.empty(nsteps + 1)
    x = x0
    g = z0
    xs[0] = x
    gs[0] = g
    gp[0] = -field_value(kind, fpar, ipar, data, tpar, x, g)
    for i in range(nsteps):
        k1 = gp[i]
        k2 = -field_value(kind, fpar, ipar, data, tpar, x + 0.5 * h, g + 0.5 * h * k1)
        k3 = -field_value(kind, fpar, ipar, data, tpar, x + 0.5 * h, g + 0.5 * h * k2)
        k4 = -field_value(kind, fpar, ipar, data, tpar, x + h, g + h * k3)
        g = g + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        x = x0 + (i + 1) * h
        xs[i + 1] = x
        gs[i + 1] = g
        gp[i + 1] = -field_value(kind, fpar, ipar, data, tpar, x, g)
    return xs, gs, gp
