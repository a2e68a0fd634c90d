"""Hot kernels, each in a numba and a pure-numpy flavour.

The public names in the dispatch block at the bottom (``d1_stack``,
``christoffel2``, ``ricci_from_gamma``, ``rate_dk``, ``sq_norm``,
``shortest_paths`` and the rest) dispatch on ``evth._jit.USE_NUMBA``. Both flavours use the same arithmetic expressions so
the stencil results agree bitwise; the reductions may differ by round-off.

Array conventions: the last three axes are (x, y, z). Symmetric 2-tensors are
stored as 6 components in the order 11, 12, 13, 22, 23, 33 along the first
axis. ``gamma`` is stored compactly as ``(3, 6, ...)``: upper index first,
symmetric lower pair second.
"""

import heapq
import math

import numpy as np

from ._jit import USE_NUMBA, njit, prange

SYM = np.array([[0, 1, 2], [1, 3, 4], [2, 4, 5]], dtype=np.int64)
PAIRS = np.array([[0, 0], [0, 1], [0, 2], [1, 1], [1, 2], [2, 2]], dtype=np.int64)


# --------------------------------------------------------------------------
# first derivatives, 4th-order centred, periodic


def d1_numpy(u, h, axis):
    ax = u.ndim - 3 + axis
    return (
        8.0 * (np.roll(u, -1, ax) - np.roll(u, 1, ax))
        - (np.roll(u, -2, ax) - np.roll(u, 2, ax))
    ) / (12.0 * h)


def d1_stack_numpy(u, h):
    return np.stack([d1_numpy(u, h, a) for a in range(3)])


@njit
def _neighbours(n):
    # periodic index tables for offsets +1, +2, -1, -2 (avoids % in hot loops)
    t = np.empty((4, n), dtype=np.int64)
    for i in range(n):
        t[0, i] = (i + 1) % n
        t[1, i] = (i + 2) % n
        t[2, i] = (i - 1 + n) % n
        t[3, i] = (i - 2 + n) % n
    return t


@njit(parallel=True)
def _d1_stack_nb(u, h):
    m, n0, n1, n2 = u.shape
    out = np.empty((3, m, n0, n1, n2))
    den = 12.0 * h
    t0 = _neighbours(n0)
    t1 = _neighbours(n1)
    t2 = _neighbours(n2)
    for i in prange(n0):
        ip1 = t0[0, i]
        ip2 = t0[1, i]
        im1 = t0[2, i]
        im2 = t0[3, i]
        for c in range(m):
            for j in range(n1):
                jp1 = t1[0, j]
                jp2 = t1[1, j]
                jm1 = t1[2, j]
                jm2 = t1[3, j]
                for k in range(n2):
                    out[0, c, i, j, k] = (
                        8.0 * (u[c, ip1, j, k] - u[c, im1, j, k])
                        - (u[c, ip2, j, k] - u[c, im2, j, k])
                    ) / den
                    out[1, c, i, j, k] = (
                        8.0 * (u[c, i, jp1, k] - u[c, i, jm1, k])
                        - (u[c, i, jp2, k] - u[c, i, jm2, k])
                    ) / den
                for k in range(n2):
                    out[2, c, i, j, k] = (
                        8.0 * (u[c, i, j, t2[0, k]] - u[c, i, j, t2[2, k]])
                        - (u[c, i, j, t2[1, k]] - u[c, i, j, t2[3, k]])
                    ) / den
    return out


def d1_stack_numba(u, h):
    lead = u.shape[:-3]
    flat = np.ascontiguousarray(u, dtype=np.float64).reshape((-1,) + u.shape[-3:])
    return _d1_stack_nb(flat, float(h)).reshape((3,) + lead + u.shape[-3:])


# --------------------------------------------------------------------------
# pointwise 3x3 inverse and determinant


def inv_det_numpy(g):
    a, b, c, d, e, f = g
    i00 = d * f - e * e
    i01 = c * e - b * f
    i02 = b * e - c * d
    i11 = a * f - c * c
    i12 = b * c - a * e
    i22 = a * d - b * b
    det = a * i00 + b * i01 + c * i02
    inv = np.stack([i00 / det, i01 / det, i02 / det, i11 / det, i12 / det, i22 / det])
    return inv, det


@njit(parallel=True)
def _inv_det_nb(g):
    n = g.shape[1]
    inv = np.empty((6, n))
    det = np.empty(n)
    for p in prange(n):
        a = g[0, p]
        b = g[1, p]
        c = g[2, p]
        d = g[3, p]
        e = g[4, p]
        f = g[5, p]
        i00 = d * f - e * e
        i01 = c * e - b * f
        i02 = b * e - c * d
        i11 = a * f - c * c
        i12 = b * c - a * e
        i22 = a * d - b * b
        dt = a * i00 + b * i01 + c * i02
        det[p] = dt
        inv[0, p] = i00 / dt
        inv[1, p] = i01 / dt
        inv[2, p] = i02 / dt
        inv[3, p] = i11 / dt
        inv[4, p] = i12 / dt
        inv[5, p] = i22 / dt
    return inv, det


def inv_det_numba(g):
    shape = g.shape[1:]
    flat = np.ascontiguousarray(g, dtype=np.float64).reshape(6, -1)
    inv, det = _inv_det_nb(flat)
    return inv.reshape((6,) + shape), det.reshape(shape)


# --------------------------------------------------------------------------
# Christoffel symbols of the second kind from g^{-1} and dg


def christoffel2_numpy(ginv, dg):
    """``dg[a, p]`` is the derivative along axis ``a`` of component ``p``."""
    dgf = dg[:, SYM]  # dgf[x, y, z] = d_x g_yz
    gi = ginv[SYM]
    out = np.empty((3,) + dg.shape[1:])
    for p in range(6):
        a, b = PAIRS[p]
        low = [0.5 * (dgf[a, d, b] + dgf[b, d, a] - dgf[d, a, b]) for d in range(3)]
        for c in range(3):
            out[c, p] = gi[c, 0] * low[0] + gi[c, 1] * low[1] + gi[c, 2] * low[2]
    return out


@njit(parallel=True)
def _christoffel2_nb(ginv, dg, sym, pairs):
    # plane-wise loops: the point index is innermost so each loop streams a
    # few contiguous planes instead of striding across all of them
    n = ginv.shape[1]
    out = np.empty((3, 6, n))
    for pc in prange(18):
        p = pc // 3
        c = pc % 3
        a = pairs[p, 0]
        b = pairs[p, 1]
        g0 = ginv[sym[c, 0]]
        g1 = ginv[sym[c, 1]]
        g2 = ginv[sym[c, 2]]
        x0 = dg[a, sym[0, b]]
        y0 = dg[b, sym[0, a]]
        z0 = dg[0, p]
        x1 = dg[a, sym[1, b]]
        y1 = dg[b, sym[1, a]]
        z1 = dg[1, p]
        x2 = dg[a, sym[2, b]]
        y2 = dg[b, sym[2, a]]
        z2 = dg[2, p]
        o = out[c, p]
        for q in range(n):
            o[q] = (
                g0[q] * (0.5 * (x0[q] + y0[q] - z0[q]))
                + g1[q] * (0.5 * (x1[q] + y1[q] - z1[q]))
                + g2[q] * (0.5 * (x2[q] + y2[q] - z2[q]))
            )
    return out


def christoffel2_numba(ginv, dg):
    shape = ginv.shape[1:]
    gi = np.ascontiguousarray(ginv, dtype=np.float64).reshape(6, -1)
    d = np.ascontiguousarray(dg, dtype=np.float64).reshape(3, 6, -1)
    return _christoffel2_nb(gi, d, SYM, PAIRS).reshape((3, 6) + shape)


# --------------------------------------------------------------------------
# Ricci tensor from compact Christoffel symbols


def ricci_from_gamma_numpy(gam, h):
    full = gam[:, SYM]  # full[c, a, b]
    trace = full[0, 0] + full[1, 1] + full[2, 2]  # Gamma^c_{cb}
    dtr = d1_stack_numpy(trace, h)  # dtr[a, b] = d_a Gamma^c_{cb}
    div = d1_numpy(gam[0], h, 0) + d1_numpy(gam[1], h, 1) + d1_numpy(gam[2], h, 2)
    out = np.empty((6,) + gam.shape[2:])
    for p in range(6):
        a, b = PAIRS[p]
        t3 = trace[0] * full[0, a, b] + trace[1] * full[1, a, b] + trace[2] * full[2, a, b]
        t4 = 0.0
        for c in range(3):
            for d in range(3):
                t4 = t4 + full[c, a, d] * full[d, c, b]
        out[p] = div[p] - 0.5 * (dtr[a, b] + dtr[b, a]) + t3 - t4
    return out


@njit(parallel=True)
def _gamma_trace_nb(gam, sym):
    n0, n1, n2 = gam.shape[2:]
    out = np.empty((3, n0, n1, n2))
    for i in prange(n0):
        for j in range(n1):
            for k in range(n2):
                for b in range(3):
                    out[b, i, j, k] = (
                        gam[0, sym[0, b], i, j, k]
                        + gam[1, sym[1, b], i, j, k]
                        + gam[2, sym[2, b], i, j, k]
                    )
    return out


@njit(parallel=True)
def _ricci_nb(gam, trace, dtr, h, sym, pairs):
    # same summation order as the numpy twin:
    # div - (d_a tr_b + d_b tr_a) / 2 + tr_c G^c_ab - G^c_ad G^d_cb
    n0, n1, n2 = gam.shape[2:]
    npt = n0 * n1 * n2
    out = np.empty((6, n0, n1, n2))
    den = 12.0 * h
    t0 = _neighbours(n0)
    t1 = _neighbours(n1)
    t2 = _neighbours(n2)
    for p in prange(6):
        a = pairs[p, 0]
        b = pairs[p, 1]
        u0 = gam[0, p]
        u1 = gam[1, p]
        u2 = gam[2, p]
        div = np.empty((n0, n1, n2))
        for i in range(n0):
            ip1 = t0[0, i]
            ip2 = t0[1, i]
            im1 = t0[2, i]
            im2 = t0[3, i]
            for j in range(n1):
                jp1 = t1[0, j]
                jp2 = t1[1, j]
                jm1 = t1[2, j]
                jm2 = t1[3, j]
                for k in range(n2):
                    div[i, j, k] = (
                        (8.0 * (u0[ip1, j, k] - u0[im1, j, k]) - (u0[ip2, j, k] - u0[im2, j, k])) / den
                        + (8.0 * (u1[i, jp1, k] - u1[i, jm1, k]) - (u1[i, jp2, k] - u1[i, jm2, k])) / den
                    )
                for k in range(n2):
                    div[i, j, k] += (
                        8.0 * (u2[i, j, t2[0, k]] - u2[i, j, t2[2, k]])
                        - (u2[i, j, t2[1, k]] - u2[i, j, t2[3, k]])
                    ) / den
        dv = div.reshape(npt)
        dab = dtr[a, b].reshape(npt)
        dba = dtr[b, a].reshape(npt)
        tr0 = trace[0].reshape(npt)
        tr1 = trace[1].reshape(npt)
        tr2 = trace[2].reshape(npt)
        g0 = u0.reshape(npt)
        g1 = u1.reshape(npt)
        g2 = u2.reshape(npt)
        t4 = np.zeros(npt)
        for c in range(3):
            for d in range(3):
                x = gam[c, sym[a, d]].reshape(npt)
                y = gam[d, sym[c, b]].reshape(npt)
                for q in range(npt):
                    t4[q] = t4[q] + x[q] * y[q]
        o = out[p].reshape(npt)
        for q in range(npt):
            t3 = tr0[q] * g0[q] + tr1[q] * g1[q] + tr2[q] * g2[q]
            o[q] = dv[q] - 0.5 * (dab[q] + dba[q]) + t3 - t4[q]
    return out


def ricci_from_gamma_numba(gam, h):
    gam = np.ascontiguousarray(gam, dtype=np.float64)
    trace = _gamma_trace_nb(gam, SYM)
    dtr = _d1_stack_nb(trace, float(h))
    return _ricci_nb(gam, trace, dtr, float(h), SYM, PAIRS)


# --------------------------------------------------------------------------
# eigenvalues of symmetric 3x3 fields, ascending


def eig3_numpy(g):
    full = np.moveaxis(g[SYM], (0, 1), (-2, -1))
    return np.moveaxis(np.linalg.eigvalsh(full), -1, 0)


@njit
def _eig3_sym(a00, a01, a02, a11, a12, a22):
    # closed-form (trigonometric) eigenvalues of a symmetric 3x3, ascending
    p1 = a01 * a01 + a02 * a02 + a12 * a12
    if p1 == 0.0:
        x, y, z = a00, a11, a22
    else:
        q = (a00 + a11 + a22) / 3.0
        b00 = a00 - q
        b11 = a11 - q
        b22 = a22 - q
        p = math.sqrt((b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * p1) / 6.0)
        detb = (
            b00 * (b11 * b22 - a12 * a12)
            - a01 * (a01 * b22 - a12 * a02)
            + a02 * (a01 * a12 - b11 * a02)
        )
        r = detb / (2.0 * p * p * p)
        if r <= -1.0:
            phi = math.pi / 3.0
        elif r >= 1.0:
            phi = 0.0
        else:
            phi = math.acos(r) / 3.0
        z = q + 2.0 * p * math.cos(phi)
        x = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
        y = 3.0 * q - x - z
    if x > y:
        x, y = y, x
    if y > z:
        y, z = z, y
    if x > y:
        x, y = y, x
    return x, y, z


@njit(parallel=True)
def _eig3_nb(g):
    n = g.shape[1]
    out = np.empty((3, n))
    for q in prange(n):
        x, y, z = _eig3_sym(g[0, q], g[1, q], g[2, q], g[3, q], g[4, q], g[5, q])
        out[0, q] = x
        out[1, q] = y
        out[2, q] = z
    return out


def eig3_numba(g):
    shape = g.shape[1:]
    flat = np.ascontiguousarray(g, dtype=np.float64).reshape(6, -1)
    return _eig3_nb(flat).reshape((3,) + shape)


# --------------------------------------------------------------------------
# pointwise algebra of the k equation


def rate_dk_numpy(ginv, gamma, ricci, k, n, dn, ddn):
    """``dk = -Hess n + n (R + tr k k - 2 k.g^-1.k)`` and ``tr k``.

    ``dn[c]`` is ``d_c n``, ``ddn[b, a]`` is ``d_b d_a n``.
    """
    gi = ginv[SYM]
    kf = k[SYM]
    kmix = [[gi[a, 0] * kf[0, j] + gi[a, 1] * kf[1, j] + gi[a, 2] * kf[2, j] for j in range(3)] for a in range(3)]
    trk = kmix[0][0] + kmix[1][1] + kmix[2][2]
    dk = np.empty_like(k)
    for p in range(6):
        i, j = PAIRS[p]
        kk = kf[i, 0] * kmix[0][j] + kf[i, 1] * kmix[1][j] + kf[i, 2] * kmix[2][j]
        hess = ddn[j, i] - (gamma[0, p] * dn[0] + gamma[1, p] * dn[1] + gamma[2, p] * dn[2])
        dk[p] = -hess + n * (ricci[p] + trk * k[p] - 2.0 * kk)
    return dk, trk


@njit(parallel=True)
def _rate_dk_nb(ginv, gamma, ricci, k, n, dn, ddn, sym, pairs):
    npt = n.shape[0]
    kmix = np.empty((3, 3, npt))
    for aj in prange(9):
        a = aj // 3
        j = aj % 3
        ga0 = ginv[sym[a, 0]]
        ga1 = ginv[sym[a, 1]]
        ga2 = ginv[sym[a, 2]]
        k0 = k[sym[0, j]]
        k1 = k[sym[1, j]]
        k2 = k[sym[2, j]]
        o = kmix[a, j]
        for q in range(npt):
            o[q] = ga0[q] * k0[q] + ga1[q] * k1[q] + ga2[q] * k2[q]
    trk = np.empty(npt)
    for q in range(npt):
        trk[q] = kmix[0, 0, q] + kmix[1, 1, q] + kmix[2, 2, q]
    dk = np.empty((6, npt))
    for p in prange(6):
        i = pairs[p, 0]
        j = pairs[p, 1]
        ki0 = k[sym[i, 0]]
        ki1 = k[sym[i, 1]]
        ki2 = k[sym[i, 2]]
        m0 = kmix[0, j]
        m1 = kmix[1, j]
        m2 = kmix[2, j]
        gm0 = gamma[0, p]
        gm1 = gamma[1, p]
        gm2 = gamma[2, p]
        hh = ddn[j, i]
        r = ricci[p]
        kp = k[p]
        o = dk[p]
        for q in range(npt):
            kk = ki0[q] * m0[q] + ki1[q] * m1[q] + ki2[q] * m2[q]
            hess = hh[q] - (gm0[q] * dn[0, q] + gm1[q] * dn[1, q] + gm2[q] * dn[2, q])
            o[q] = -hess + n[q] * (r[q] + trk[q] * kp[q] - 2.0 * kk)
    return dk, trk


def rate_dk_numba(ginv, gamma, ricci, k, n, dn, ddn):
    shape = n.shape
    f = lambda a, lead: np.ascontiguousarray(a, dtype=np.float64).reshape(lead + (-1,))
    dk, trk = _rate_dk_nb(
        f(ginv, (6,)), f(gamma, (3, 6)), f(ricci, (6,)), f(k, (6,)), f(n, ()), f(dn, (3,)), f(ddn, (3, 3)),
        SYM, PAIRS,
    )
    return dk.reshape((6,) + shape), trk.reshape(shape)


# --------------------------------------------------------------------------
# pointwise squared norms with g^{-1}


def sq_norm_numpy(t, ginv):
    """``|t|^2_g`` for covector ``(3,...)``, symmetric ``(6,...)`` or rank-3 ``(3,6,...)``."""
    lead = t.shape[:-3]
    gi = ginv[SYM]
    if lead == (3,):
        return np.einsum("ab...,a...,b...->...", gi, t, t)
    if lead == (6,):
        m = t[SYM]
        up2 = np.einsum("ab...,bc...,cd...->ad...", gi, m, gi)
        return np.einsum("ab...,ab...->...", up2, m)
    if lead == (3, 6):
        full = t[:, SYM]
        raised = np.einsum("ab...,bij...->aij...", gi, full)
        raised = np.einsum("ic...,acj...->aij...", gi, raised)
        raised = np.einsum("jd...,aid...->aij...", gi, raised)
        return np.einsum("aij...,aij...->...", raised, full)
    raise ValueError(f"unsupported tensor shape {t.shape}")


@njit
def _mixed_planes(ginv, t, sym, out):
    # out[i, j] = g^{ia} t_aj, plane-wise
    npt = t.shape[1]
    for i in range(3):
        for j in range(3):
            g0 = ginv[sym[i, 0]]
            g1 = ginv[sym[i, 1]]
            g2 = ginv[sym[i, 2]]
            t0 = t[sym[0, j]]
            t1 = t[sym[1, j]]
            t2 = t[sym[2, j]]
            o = out[i, j]
            for q in range(npt):
                o[q] = g0[q] * t0[q] + g1[q] * t1[q] + g2[q] * t2[q]


@njit
def _trace_prod_acc(m1, m2, w, out):
    # out += w * m1^i_j m2^j_i
    npt = out.shape[0]
    for i in range(3):
        for j in range(3):
            a = m1[i, j]
            b = m2[j, i]
            for q in range(npt):
                out[q] += w[q] * a[q] * b[q]


@njit
def _sq_norm_sym_nb(t, ginv, sym):
    npt = t.shape[1]
    m = np.empty((3, 3, npt))
    _mixed_planes(ginv, t, sym, m)
    out = np.zeros(npt)
    for i in range(3):
        for j in range(3):
            a = m[i, j]
            b = m[j, i]
            for q in range(npt):
                out[q] += a[q] * b[q]
    return out


@njit
def _sq_norm_vec_nb(t, ginv, sym):
    npt = t.shape[1]
    out = np.zeros(npt)
    for a in range(3):
        for b in range(3):
            g = ginv[sym[a, b]]
            ta = t[a]
            tb = t[b]
            for q in range(npt):
                out[q] += g[q] * ta[q] * tb[q]
    return out


@njit
def _sq_norm_rank3_nb(t, ginv, sym):
    npt = t.shape[2]
    m = np.empty((3, 3, 3, npt))
    for a in range(3):
        _mixed_planes(ginv, t[a], sym, m[a])
    out = np.zeros(npt)
    for a in range(3):
        for b in range(3):
            _trace_prod_acc(m[a], m[b], ginv[sym[a, b]], out)
    return out


def sq_norm_numba(t, ginv):
    lead = t.shape[:-3]
    shape = t.shape[-3:]
    gi = np.ascontiguousarray(ginv, dtype=np.float64).reshape(6, -1)
    tf = np.ascontiguousarray(t, dtype=np.float64).reshape(lead + (-1,))
    if lead == (3,):
        out = _sq_norm_vec_nb(tf, gi, SYM)
    elif lead == (6,):
        out = _sq_norm_sym_nb(tf, gi, SYM)
    elif lead == (3, 6):
        out = _sq_norm_rank3_nb(tf, gi, SYM)
    else:
        raise ValueError(f"unsupported tensor shape {t.shape}")
    return out.reshape(shape)


# --------------------------------------------------------------------------
# Runge-Kutta combinations


def lincomb_numpy(base, coefs, terms):
    """``base + sum_i coefs[i] * terms[i]`` (the sum is formed first)."""
    acc = coefs[0] * terms[0]
    for c, t in zip(coefs[1:], terms[1:]):
        acc = acc + c * t
    return base + acc


@njit
def _lincomb_nb(base, coefs, terms, out):
    m = len(terms)
    for q in range(base.shape[0]):
        acc = coefs[0] * terms[0][q]
        for i in range(1, m):
            acc = acc + coefs[i] * terms[i][q]
        out[q] = base[q] + acc


def lincomb_numba(base, coefs, terms):
    base = np.ascontiguousarray(base, dtype=np.float64)
    t = tuple(np.ascontiguousarray(x, dtype=np.float64).ravel() for x in terms)
    out = np.empty(base.size)
    _lincomb_nb(base.ravel(), np.asarray(coefs, dtype=np.float64), t, out)
    return out.reshape(base.shape)


# --------------------------------------------------------------------------
# contractions used by the constraint and curvature diagnostics


def kgk_numpy(k, ginv):
    """``k_ia g^{ab} k_bj`` in symmetric storage."""
    kf = k[SYM]
    gi = ginv[SYM]
    kk = np.einsum("ia...,ab...,bj...->ij...", kf, gi, kf)
    return np.stack([kk[i, j] for i, j in PAIRS])


@njit
def _kgk_nb(k, ginv, sym, pairs):
    npt = k.shape[1]
    m = np.empty((3, 3, npt))
    _mixed_planes(ginv, k, sym, m)  # m[a, j] = g^{ab} k_bj
    out = np.zeros((6, npt))
    for p in range(6):
        i = pairs[p, 0]
        j = pairs[p, 1]
        o = out[p]
        for a in range(3):
            x = k[sym[i, a]]
            y = m[a, j]
            for q in range(npt):
                o[q] += x[q] * y[q]
    return out


def kgk_numba(k, ginv):
    shape = k.shape[1:]
    f = lambda a, lead: np.ascontiguousarray(a, dtype=np.float64).reshape(lead + (-1,))
    return _kgk_nb(f(k, (6,)), f(ginv, (6,)), SYM, PAIRS).reshape((6,) + shape)


def div_sym_numpy(dk, ginv):
    """``g^{ja} nabla_a k_ij`` from ``dk[a, p] = nabla_a k_p``; shape ``(3, ...)``."""
    return np.einsum("ja...,aij...->i...", ginv[SYM], dk[:, SYM])


@njit
def _div_sym_nb(dk, ginv, sym):
    npt = dk.shape[2]
    out = np.zeros((3, npt))
    for i in range(3):
        o = out[i]
        for j in range(3):
            for a in range(3):
                x = ginv[sym[j, a]]
                y = dk[a, sym[i, j]]
                for q in range(npt):
                    o[q] += x[q] * y[q]
    return out


def div_sym_numba(dk, ginv):
    shape = dk.shape[2:]
    f = lambda a, lead: np.ascontiguousarray(a, dtype=np.float64).reshape(lead + (-1,))
    return _div_sym_nb(f(dk, (3, 6)), f(ginv, (6,)), SYM).reshape((3,) + shape)


def curl_sym_numpy(dk, g, det):
    """``sym(eps_i^{ab} nabla_a k_bj)`` with ``eps^{cab} = [cab] / sqrt(det g)``."""
    full = dk[:, SYM]
    curl = np.stack([full[(c + 1) % 3, (c + 2) % 3] - full[(c + 2) % 3, (c + 1) % 3] for c in range(3)])
    x = np.einsum("ic...,cj...->ij...", g[SYM], curl) / np.sqrt(det)
    return np.stack([0.5 * (x[i, j] + x[j, i]) for i, j in PAIRS])


@njit
def _curl_sym_nb(dk, g, det, sym, pairs):
    npt = dk.shape[2]
    curl = np.empty((3, 3, npt))
    for c in range(3):
        c1 = (c + 1) % 3
        c2 = (c + 2) % 3
        for j in range(3):
            x = dk[c1, sym[c2, j]]
            y = dk[c2, sym[c1, j]]
            o = curl[c, j]
            for q in range(npt):
                o[q] = x[q] - y[q]
    xm = np.zeros((3, 3, npt))
    for i in range(3):
        for j in range(3):
            o = xm[i, j]
            for c in range(3):
                gg = g[sym[i, c]]
                cc = curl[c, j]
                for q in range(npt):
                    o[q] += gg[q] * cc[q]
    out = np.empty((6, npt))
    for p in range(6):
        i = pairs[p, 0]
        j = pairs[p, 1]
        a = xm[i, j]
        b = xm[j, i]
        o = out[p]
        for q in range(npt):
            o[q] = 0.5 * (a[q] / math.sqrt(det[q]) + b[q] / math.sqrt(det[q]))
    return out


def curl_sym_numba(dk, g, det):
    shape = det.shape
    f = lambda a, lead: np.ascontiguousarray(a, dtype=np.float64).reshape(lead + (-1,))
    return _curl_sym_nb(f(dk, (3, 6)), f(g, (6,)), f(det, ()), SYM, PAIRS).reshape((6,) + shape)


# --------------------------------------------------------------------------
# covariant derivative of a symmetric covariant tensor


def cov_deriv_sym_numpy(dt, gamma, t):
    """``nabla_a t_ij = d_a t_ij - G^c_ai t_cj - G^c_aj t_ic`` from ``dt = d_a t_p``."""
    gfull = gamma[:, SYM]
    tfull = t[SYM]
    corr = np.einsum("cai...,cj...->aij...", gfull, tfull)
    out = np.empty_like(dt)
    for p in range(6):
        i, j = PAIRS[p]
        out[:, p] = dt[:, p] - corr[:, i, j] - corr[:, j, i]
    return out


@njit(parallel=True)
def _cov_deriv_sym_nb(dt, gamma, t, sym, pairs):
    npt = t.shape[1]
    out = np.empty((3, 6, npt))
    for ap in prange(18):
        a = ap // 6
        p = ap % 6
        i = pairs[p, 0]
        j = pairs[p, 1]
        o = out[a, p]
        d = dt[a, p]
        for q in range(npt):
            o[q] = d[q]
        for c in range(3):
            gi_ = gamma[c, sym[a, i]]
            tj = t[sym[c, j]]
            gj = gamma[c, sym[a, j]]
            ti = t[sym[c, i]]
            for q in range(npt):
                o[q] -= gi_[q] * tj[q] + gj[q] * ti[q]
    return out


def cov_deriv_sym_numba(dt, gamma, t):
    shape = t.shape[1:]
    f = lambda a, lead: np.ascontiguousarray(a, dtype=np.float64).reshape(lead + (-1,))
    out = _cov_deriv_sym_nb(f(dt, (3, 6)), f(gamma, (3, 6)), f(t, (6,)), SYM, PAIRS)
    return out.reshape((3, 6) + shape)


# --------------------------------------------------------------------------
# single-source shortest paths on the periodic grid graph


def _quad_at(g, x, y, z, wx, wy, wz):
    # w^T g w with g trilinearly interpolated at a fractional grid position
    n0, n1, n2 = g.shape[1:]
    fx = math.floor(x)
    fy = math.floor(y)
    fz = math.floor(z)
    tx = x - fx
    ty = y - fy
    tz = z - fz
    i0 = int(fx) % n0
    j0 = int(fy) % n1
    k0 = int(fz) % n2
    total = 0.0
    for corner in range(8):
        di = corner & 1
        dj = (corner >> 1) & 1
        dk = (corner >> 2) & 1
        wgt = (tx if di else 1.0 - tx) * (ty if dj else 1.0 - ty) * (tz if dk else 1.0 - tz)
        if wgt == 0.0:
            continue
        i = (i0 + di) % n0
        j = (j0 + dj) % n1
        k = (k0 + dk) % n2
        total += wgt * (
            g[0, i, j, k] * wx * wx
            + g[3, i, j, k] * wy * wy
            + g[5, i, j, k] * wz * wz
            + 2.0 * (g[1, i, j, k] * wx * wy + g[2, i, j, k] * wx * wz + g[4, i, j, k] * wy * wz)
        )
    return total


def _segment_length(g, h, i, j, k, wx, wy, wz):
    # composite midpoint rule along the straight coordinate segment
    nsub = max(abs(wx), abs(wy), abs(wz))
    if nsub < 1:
        return 0.0
    total = 0.0
    for q in range(nsub):
        s = (q + 0.5) / nsub
        total += math.sqrt(_quad_at(g, i + s * wx, j + s * wy, k + s * wz, wx, wy, wz))
    return total * h / nsub


_quad_at_nb = njit(_quad_at)


@njit
def _segment_length_nb(g, h, i, j, k, wx, wy, wz):
    nsub = max(abs(wx), abs(wy), abs(wz))
    if nsub < 1:
        return 0.0
    total = 0.0
    for q in range(nsub):
        s = (q + 0.5) / nsub
        total += math.sqrt(_quad_at_nb(g, i + s * wx, j + s * wy, k + s * wz, wx, wy, wz))
    return total * h / nsub


@njit
def _heap_push(keys, nodes, pos, size, node, key):
    p = pos[node]
    if p < 0:
        p = size
        size += 1
        nodes[p] = node
        pos[node] = p
    keys[p] = key
    # sift up
    while p > 0:
        parent = (p - 1) // 2
        if keys[parent] <= keys[p]:
            break
        keys[parent], keys[p] = keys[p], keys[parent]
        a = nodes[parent]
        b = nodes[p]
        nodes[parent] = b
        nodes[p] = a
        pos[b] = parent
        pos[a] = p
        p = parent
    return size


@njit
def _heap_pop(keys, nodes, pos, size):
    top = nodes[0]
    key = keys[0]
    pos[top] = -2
    size -= 1
    if size > 0:
        keys[0] = keys[size]
        nodes[0] = nodes[size]
        pos[nodes[0]] = 0
        p = 0
        while True:
            l = 2 * p + 1
            r = l + 1
            best = p
            if l < size and keys[l] < keys[best]:
                best = l
            if r < size and keys[r] < keys[best]:
                best = r
            if best == p:
                break
            keys[best], keys[p] = keys[p], keys[best]
            a = nodes[best]
            b = nodes[p]
            nodes[best] = b
            nodes[p] = a
            pos[b] = best
            pos[a] = p
            p = best
    return top, key, size


@njit
def _shortest_paths_nb(g, h, src, offsets, limit, any_angle):
    n0, n1, n2 = g.shape[1:]
    ntot = n0 * n1 * n2
    dist = np.full(ntot, np.inf)
    parent = np.full(ntot, -1, dtype=np.int64)
    # unwrapped grid vector from parent to node
    pvec = np.zeros((ntot, 3), dtype=np.int64)
    keys = np.empty(ntot)
    nodes = np.empty(ntot, dtype=np.int64)
    pos = np.full(ntot, -1, dtype=np.int64)
    s = (src[0] * n1 + src[1]) * n2 + src[2]
    dist[s] = 0.0
    parent[s] = s
    size = _heap_push(keys, nodes, pos, 0, s, 0.0)
    while size > 0:
        u, du, size = _heap_pop(keys, nodes, pos, size)
        if du > limit:
            break
        ui = u // (n1 * n2)
        uj = (u // n2) % n1
        uk = u % n2
        pu = parent[u]
        pi = pu // (n1 * n2)
        pj = (pu // n2) % n1
        pk = pu % n2
        for o in range(offsets.shape[0]):
            ox = offsets[o, 0]
            oy = offsets[o, 1]
            oz = offsets[o, 2]
            vi = (ui + ox + n0) % n0
            vj = (uj + oy + n1) % n1
            vk = (uk + oz + n2) % n2
            v = (vi * n1 + vj) * n2 + vk
            if pos[v] == -2:
                continue
            cand = du + _segment_length_nb(g, h, ui, uj, uk, ox, oy, oz)
            best_parent = u
            bx = ox
            by = oy
            bz = oz
            if any_angle and pu != u:
                wx = pvec[u, 0] + ox
                wy = pvec[u, 1] + oy
                wz = pvec[u, 2] + oz
                alt = dist[pu] + _segment_length_nb(g, h, pi, pj, pk, wx, wy, wz)
                if alt < cand:
                    cand = alt
                    best_parent = pu
                    bx = wx
                    by = wy
                    bz = wz
            if cand < dist[v]:
                dist[v] = cand
                parent[v] = best_parent
                pvec[v, 0] = bx
                pvec[v, 1] = by
                pvec[v, 2] = bz
                size = _heap_push(keys, nodes, pos, size, v, cand)
    return dist.reshape((n0, n1, n2))


def edge_weights_numpy(g, h, offsets):
    """Metric length of every grid edge, evaluated with the midpoint metric.

    The midpoint of a unit edge is the centre of the box spanned by the
    offset, so the interpolated metric is the mean over the box corners.
    """
    out = []
    for o in offsets:
        nz = [a for a in range(3) if o[a] != 0]
        acc = np.zeros_like(g)
        ncorner = 0
        for mask in range(1 << len(nz)):
            shift = [0, 0, 0]
            for bit, a in enumerate(nz):
                if mask >> bit & 1:
                    shift[a] = -int(o[a])
            acc = acc + np.roll(g, shift, axis=(1, 2, 3))
            ncorner += 1
        m = acc / ncorner
        wx, wy, wz = (float(c) for c in o)
        quad = (
            m[0] * wx * wx + m[3] * wy * wy + m[5] * wz * wz
            + 2.0 * (m[1] * wx * wy + m[2] * wx * wz + m[4] * wy * wz)
        )
        out.append(np.sqrt(quad) * h)
    return out


def shortest_paths_scipy(g, h, src, offsets, limit):
    """Plain graph distances through ``scipy.sparse.csgraph.dijkstra``."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra

    shape = g.shape[1:]
    ntot = int(np.prod(shape))
    idx = np.arange(ntot).reshape(shape)
    weights = edge_weights_numpy(g, h, offsets)
    rows, cols, vals = [], [], []
    for o, w in zip(offsets, weights):
        rows.append(idx.ravel())
        cols.append(np.roll(idx, [-int(c) for c in o], axis=(0, 1, 2)).ravel())
        vals.append(w.ravel())
    graph = csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ntot, ntot),
    )
    start = int(np.ravel_multi_index(tuple(int(c) for c in src), shape))
    lim = np.inf if not np.isfinite(limit) else limit
    return dijkstra(graph, indices=start, limit=lim).reshape(shape)


def shortest_paths_numba(g, h, src, offsets, limit, any_angle):
    return _shortest_paths_nb(
        np.ascontiguousarray(g, dtype=np.float64),
        float(h),
        np.asarray(src, dtype=np.int64),
        np.asarray(offsets, dtype=np.int64),
        float(limit),
        bool(any_angle),
    )


def _shortest_paths_py(g, h, src, offsets, limit):
    """Interpreted any-angle search on ``heapq`` (the no-numba path)."""
    n0, n1, n2 = g.shape[1:]
    dist = {}
    parent = {}
    pvec = {}
    done = set()
    s = (int(src[0]), int(src[1]), int(src[2]))
    dist[s] = 0.0
    parent[s] = s
    pvec[s] = (0, 0, 0)
    heap = [(0.0, s)]
    offs = [tuple(int(c) for c in o) for o in offsets]
    while heap:
        du, u = heapq.heappop(heap)
        if u in done or du > dist[u]:
            continue
        if du > limit:
            break
        done.add(u)
        pu = parent[u]
        for ox, oy, oz in offs:
            v = ((u[0] + ox) % n0, (u[1] + oy) % n1, (u[2] + oz) % n2)
            if v in done:
                continue
            cand = du + _segment_length(g, h, u[0], u[1], u[2], ox, oy, oz)
            best = (u, (ox, oy, oz))
            if pu != u:
                w = (pvec[u][0] + ox, pvec[u][1] + oy, pvec[u][2] + oz)
                alt = dist[pu] + _segment_length(g, h, pu[0], pu[1], pu[2], *w)
                if alt < cand:
                    cand = alt
                    best = (pu, w)
            if cand < dist.get(v, math.inf):
                dist[v] = cand
                parent[v], pvec[v] = best
                heapq.heappush(heap, (cand, v))
    out = np.full((n0, n1, n2), np.inf)
    for node, d in dist.items():
        out[node] = d
    return out


def shortest_paths_numpy(g, h, src, offsets, limit, any_angle):
    if not any_angle:
        return shortest_paths_scipy(g, h, src, offsets, limit)
    # no vectorised any-angle search exists
    return _shortest_paths_py(np.asarray(g, dtype=np.float64), float(h), src, offsets, float(limit))


# --------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    d1_stack = d1_stack_numba
    inv_det = inv_det_numba
    christoffel2 = christoffel2_numba
    ricci_from_gamma = ricci_from_gamma_numba
    eig3 = eig3_numba
    rate_dk = rate_dk_numba
    sq_norm = sq_norm_numba
    cov_deriv_sym = cov_deriv_sym_numba
    kgk = kgk_numba
    lincomb = lincomb_numba
    div_sym = div_sym_numba
    curl_sym = curl_sym_numba
    shortest_paths = shortest_paths_numba
else:
    d1_stack = d1_stack_numpy
    inv_det = inv_det_numpy
    christoffel2 = christoffel2_numpy
    ricci_from_gamma = ricci_from_gamma_numpy
    eig3 = eig3_numpy
    rate_dk = rate_dk_numpy
    sq_norm = sq_norm_numpy
    cov_deriv_sym = cov_deriv_sym_numpy
    kgk = kgk_numpy
    lincomb = lincomb_numpy
    div_sym = div_sym_numpy
    curl_sym = curl_sym_numpy
    shortest_paths = shortest_paths_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
