"""Hot numerical kernels: tensor oscillatory sums and sublevel grid counts.

Every kernel has a numba version (loops, explicit real/imag arithmetic,
parallel over the outermost axis) and a numpy version (chunked broadcasting).
Both are deterministic for a fixed backend: the numba kernels write one
partial sum per outer index regardless of thread count and the partials are
combined by a fixed pairwise tree, so results are bit-identical across runs
and thread counts.

The central primitive is the "rotor" evaluation of sums

    S(om) = sum_{segments s} sum_{panels p} sum_{nodes q}
            G[p, q] * exp(i om (u0_s + p h_s + h_s d_q))

in which consecutive panels differ by the fixed twiddle exp(i om h_s); a
running complex multiply replaces a sin/cos pair per node.  It applies
whenever the phase is affine in the innermost axis, which covers every
registered 3D phase.
"""

import numpy as np

from .backend import HAVE_NUMBA

if HAVE_NUMBA:
    from numba import njit, prange


def pairwise_sum(values):
    """Deterministic pairwise tree reduction of a complex 1D array."""
    vals = np.asarray(values)
    n = vals.shape[0]
    if n == 0:
        return complex(0.0)
    buf = vals.astype(complex).copy()
    while n > 1:
        half = n // 2
        m = n - half
        buf[:half] += buf[m: n]  # fold upper half onto lower half
        n = m
    return complex(buf[0])


# ----------------------------------------------------------------------
# tensor-product oscillatory sums, 3D
#
# Axes are passed pre-separated: two "outer" axes with complex node
# weights (gauss weight x witness value, possibly with absorbed per-axis
# log factors) and one "inner" axis given either as rotor segments (phase
# affine in that axis) or as plain nodes (direct path).
#
# A and B are the inner-affine split of the polynomial phase:
#     phi(u, v, w) = A(u, v) * w + B(u, v)
# tabulated as  A = sum_t cA[t] pAu[t, a] pAv[t, b]  on the outer grids.
# ----------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(parallel=True, fastmath=True, cache=True)
    def _t3_affine_nb(lam, Wure, Wuim, Wvre, Wvim,
                      cA, pAu, pAv, cB, pBu, pBv,
                      seg_u0, seg_h, seg_row, seg_np,
                      Gre, Gim, gl01, outre, outim):
        nu = Wure.shape[0]
        nv = Wvre.shape[0]
        nseg = seg_u0.shape[0]
        ng = gl01.shape[0]
        nA = cA.shape[0]
        nB = cB.shape[0]
        for a in prange(nu):
            acc_re = 0.0
            acc_im = 0.0
            for b in range(nv):
                Av = 0.0
                for t in range(nA):
                    Av += cA[t] * pAu[t, a] * pAv[t, b]
                Bv = 0.0
                for t in range(nB):
                    Bv += cB[t] * pBu[t, a] * pBv[t, b]
                om = lam * Av
                Sre = 0.0
                Sim = 0.0
                for s in range(nseg):
                    h = seg_h[s]
                    base = om * seg_u0[s]
                    pre = np.cos(base)
                    pim = np.sin(base)
                    rre = np.cos(om * h)
                    rim = np.sin(om * h)
                    row0 = seg_row[s]
                    npan = seg_np[s]
                    dre = np.empty(ng)
                    dim = np.empty(ng)
                    for q in range(ng):
                        ang = om * h * gl01[q]
                        dre[q] = np.cos(ang)
                        dim[q] = np.sin(ang)
                    for p in range(npan):
                        tre = 0.0
                        tim = 0.0
                        for q in range(ng):
                            gr = Gre[row0 + p, q]
                            gi = Gim[row0 + p, q]
                            tre += gr * dre[q] - gi * dim[q]
                            tim += gr * dim[q] + gi * dre[q]
                        Sre += pre * tre - pim * tim
                        Sim += pre * tim + pim * tre
                        tmp = pre * rre - pim * rim
                        pim = pre * rim + pim * rre
                        pre = tmp
                # multiply by exp(i lam B) and the outer weights
                ang = lam * Bv
                cb = np.cos(ang)
                sb = np.sin(ang)
                vre = Sre * cb - Sim * sb
                vim = Sre * sb + Sim * cb
                wre = Wure[a] * Wvre[b] - Wuim[a] * Wvim[b]
                wim = Wure[a] * Wvim[b] + Wuim[a] * Wvre[b]
                acc_re += wre * vre - wim * vim
                acc_im += wre * vim + wim * vre
            outre[a] = acc_re
            outim[a] = acc_im

    @njit(parallel=True, fastmath=True, cache=True)
    def _t3_direct_nb(lam, W1re, W1im, W2re, W2im, W3re, W3im,
                      cT, p1, p2, p3, outre, outim):
        n1 = W1re.shape[0]
        n2 = W2re.shape[0]
        n3 = W3re.shape[0]
        nT = cT.shape[0]
        for a in prange(n1):
            acc_re = 0.0
            acc_im = 0.0
            for b in range(n2):
                wre = W1re[a] * W2re[b] - W1im[a] * W2im[b]
                wim = W1re[a] * W2im[b] + W1im[a] * W2re[b]
                for c in range(n3):
                    ph = 0.0
                    for t in range(nT):
                        ph += cT[t] * p1[t, a] * p2[t, b] * p3[t, c]
                    ang = lam * ph
                    cs = np.cos(ang)
                    sn = np.sin(ang)
                    vre = wre * W3re[c] - wim * W3im[c]
                    vim = wre * W3im[c] + wim * W3re[c]
                    acc_re += vre * cs - vim * sn
                    acc_im += vre * sn + vim * cs
            outre[a] = acc_re
            outim[a] = acc_im

    @njit(parallel=True, fastmath=True, cache=True)
    def _grid_count3_nb(c1, p1u, p1v, p1w, c2, p2u, p2v, p2w,
                        c3, p3u, p3v, p3w, h1, h2, h3, eps, counts):
        n1 = h1.shape[0]
        n2 = h2.shape[0]
        n3 = h3.shape[0]
        for a in prange(n1):
            cnt = 0
            for b in range(n2):
                for c in range(n3):
                    r = 0.0
                    for t in range(c1.shape[0]):
                        r += c1[t] * p1u[t, a] * p1v[t, b] * p1w[t, c]
                    if abs(r - h1[a]) > eps:
                        continue
                    r = 0.0
                    for t in range(c2.shape[0]):
                        r += c2[t] * p2u[t, a] * p2v[t, b] * p2w[t, c]
                    if abs(r - h2[b]) > eps:
                        continue
                    r = 0.0
                    for t in range(c3.shape[0]):
                        r += c3[t] * p3u[t, a] * p3v[t, b] * p3w[t, c]
                    if abs(r - h3[c]) <= eps:
                        cnt += 1
            counts[a] = cnt


def _chunks(n, size):
    for lo in range(0, n, size):
        yield lo, min(lo + size, n)


def _t3_affine_np(lam, Wu, Wv, cA, pAu, pAv, cB, pBu, pBv,
                  seg_u0, seg_h, seg_row, seg_np_, G, gl01):
    """Numpy rotor path: Horner in the panel twiddle, chunked over axis u."""
    nu = Wu.shape[0]
    nv = Wv.shape[0]
    ng = gl01.shape[0]
    partials = np.zeros(nu, dtype=complex)
    chunk = max(1, int(2_000_000 // max(nv, 1)))
    for lo, hi in _chunks(nu, chunk):
        cu = hi - lo
        A = np.zeros((cu, nv))
        for t in range(cA.shape[0]):
            A += cA[t] * np.outer(pAu[t, lo:hi], pAv[t])
        B = np.zeros((cu, nv))
        for t in range(cB.shape[0]):
            B += cB[t] * np.outer(pBu[t, lo:hi], pBv[t])
        om = lam * A
        S = np.zeros((cu, nv), dtype=complex)
        for s in range(seg_u0.shape[0]):
            h = seg_h[s]
            rot = np.exp(1j * om * h)
            row0 = seg_row[s]
            npan = seg_np_[s]
            # Horner over panels: val_q = sum_p G[p, q] rot^p
            val = np.broadcast_to(G[row0 + npan - 1], (cu, nv, ng)).copy()
            for p in range(npan - 2, -1, -1):
                val *= rot[..., None]
                val += G[row0 + p]
            dq = np.exp(1j * om[..., None] * (h * gl01))
            S += np.exp(1j * om * seg_u0[s]) * np.sum(val * dq, axis=-1)
        contrib = Wu[lo:hi, None] * Wv[None, :] * np.exp(1j * lam * B) * S
        partials[lo:hi] = contrib.sum(axis=1)
    return partials


def _t3_direct_np(lam, W1, W2, W3, cT, p1, p2, p3):
    n1, n2, n3 = W1.shape[0], W2.shape[0], W3.shape[0]
    partials = np.zeros(n1, dtype=complex)
    chunk = max(1, int(4_000_000 // max(n2 * n3, 1)))
    for lo, hi in _chunks(n1, chunk):
        cu = hi - lo
        ph = np.zeros((cu, n2, n3))
        for t in range(cT.shape[0]):
            ph += cT[t] * (p1[t, lo:hi, None, None] * p2[t, None, :, None] * p3[t, None, None, :])
        vals = np.exp(1j * lam * ph)
        vals *= W2[None, :, None]
        vals *= W3[None, None, :]
        partials[lo:hi] = W1[lo:hi] * vals.sum(axis=(1, 2))
    return partials


def _grid_count3_np(c1, p1u, p1v, p1w, c2, p2u, p2v, p2w,
                    c3, p3u, p3v, p3w, h1, h2, h3, eps):
    n1, n2, n3 = h1.shape[0], h2.shape[0], h3.shape[0]
    total = 0
    chunk = max(1, int(8_000_000 // max(n2 * n3, 1)))
    for lo, hi in _chunks(n1, chunk):
        cu = hi - lo
        def resid(cc, pu, pv, pw):
            r = np.zeros((cu, n2, n3))
            for t in range(cc.shape[0]):
                r += cc[t] * (pu[t, lo:hi, None, None] * pv[t, None, :, None] * pw[t, None, None, :])
            return r
        ok = np.abs(resid(c1, p1u, p1v, p1w) - h1[lo:hi, None, None]) <= eps
        ok &= np.abs(resid(c2, p2u, p2v, p2w) - h2[None, :, None]) <= eps
        ok &= np.abs(resid(c3, p3u, p3v, p3w) - h3[None, None, :]) <= eps
        total += int(ok.sum())
    return total


# -- public dispatchers ---------------------------------------------------

def t3_affine_sum(lam, Wu, Wv, cA, pAu, pAv, cB, pBu, pBv,
                  seg_u0, seg_h, seg_row, seg_np_, G, gl01):
    if HAVE_NUMBA:
        outre = np.empty(Wu.shape[0])
        outim = np.empty(Wu.shape[0])
        _t3_affine_nb(lam, np.ascontiguousarray(Wu.real), np.ascontiguousarray(Wu.imag),
                      np.ascontiguousarray(Wv.real), np.ascontiguousarray(Wv.imag),
                      cA, pAu, pAv, cB, pBu, pBv,
                      seg_u0, seg_h, seg_row, seg_np_,
                      np.ascontiguousarray(G.real), np.ascontiguousarray(G.imag),
                      gl01, outre, outim)
        partials = outre + 1j * outim
    else:
        partials = _t3_affine_np(lam, Wu, Wv, cA, pAu, pAv, cB, pBu, pBv,
                                 seg_u0, seg_h, seg_row, seg_np_, G, gl01)
    return pairwise_sum(partials)


def t3_direct_sum(lam, W1, W2, W3, cT, p1, p2, p3):
    if HAVE_NUMBA:
        outre = np.empty(W1.shape[0])
        outim = np.empty(W1.shape[0])
        _t3_direct_nb(lam, np.ascontiguousarray(W1.real), np.ascontiguousarray(W1.imag),
                      np.ascontiguousarray(W2.real), np.ascontiguousarray(W2.imag),
                      np.ascontiguousarray(W3.real), np.ascontiguousarray(W3.imag),
                      cT, p1, p2, p3, outre, outim)
        partials = outre + 1j * outim
    else:
        partials = _t3_direct_np(lam, W1, W2, W3, cT, p1, p2, p3)
    return pairwise_sum(partials)


def grid_count3(c1, t1, c2, t2, c3, t3, h1, h2, h3, eps):
    """Count grid cells of a 3-component separable residual system.

    Component j reads  sum_t c[t] pu[t,a] pv[t,b] pw[t,c]  - h_j(axis_j).
    """
    args = (c1, *t1, c2, *t2, c3, *t3, h1, h2, h3, float(eps))
    if HAVE_NUMBA:
        counts = np.zeros(h1.shape[0], dtype=np.int64)
        _grid_count3_nb(*args, counts)
        return int(counts.sum())
    return _grid_count3_np(*args)
