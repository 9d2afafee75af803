"""Oscillation-resolving quadrature for the forms T_lambda and S_lambda.

T evaluates  int_box exp(i lam phi(x)) f1(x1) f2(x2) f3(x3) dx  over the
phase's 3D box; S evaluates the 2D analogue with three composed factors
f_j(phi_j(x, y)).

Panel policy: each axis gets  max(1, ceil(oversample * lam * Lip_j * len_j
/ (2 pi)))  uniform Gauss-Legendre panels, where Lip_j is a sampled sup of
|d phi / d x_j| on a 17^d grid.  Panels additionally split at every witness
breakpoint, so sharp indicator cutoffs are integrated exactly; segments on
which a witness vanishes identically are skipped (their contribution is
exactly zero).  Every evaluation is repeated at half resolution and the
difference is reported as ``two_resolution_delta``.

Log terms of Builtin phases factor per axis (exp(i lam L ln u) = u^{i lam L})
and are absorbed into the witness node values, so the kernels only ever see
the polynomial part of the phase.  Negative lam is handled by conjugation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import pairwise_sum, t3_affine_sum, t3_direct_sum
from .errors import BudgetExceeded, DegenerateGradient, OutOfDomain, ResolutionTooLow
from .phases import eval_poly_vec, partial_monos, sampled_lipschitz
from .witnesses import Constant

__all__ = ["QuadConfig", "IntegralResult", "eval_T3", "eval_S2",
           "eval_oracle_T3", "eval_oracle_S2"]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class QuadConfig:
    gauss_order: int = 8
    oversample: float = 4.0
    max_nodes: int = 200_000_000_000
    split_at_breakpoints: bool = True

    def __post_init__(self):
        if not 2 <= self.gauss_order <= 32:
            raise ValueError("gauss_order must lie in [2, 32]")
        if self.oversample < 1.0:
            raise ValueError("oversample must be >= 1")


@dataclass(frozen=True)
class IntegralResult:
    value: complex
    lam: float
    nodes_used: int
    two_resolution_delta: float

    def reliable(self, rel=1e-3):
        floor = abs(self.value) + max(self.lam, 1.0) ** -1.5
        return self.two_resolution_delta <= rel * floor


class _Axis:
    """Per-axis quadrature data: segments of uniform panels with node values."""

    __slots__ = ("seg_u0", "seg_h", "seg_np", "nodes", "weights", "fvals", "ng", "gl01")

    def __init__(self, lo, hi, base_panels, f, gl_nodes, gl_weights, split):
        cuts = [lo, hi]
        if split:
            cuts = sorted({lo, hi} | {b for b in f.breakpoints if lo < b < hi})
        panel_width = (hi - lo) / base_panels
        seg_u0, seg_h, seg_np = [], [], []
        nodes, weights, fvals = [], [], []
        self.ng = len(gl_nodes)
        self.gl01 = (gl_nodes + 1.0) / 2.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            mid = 0.5 * (a + b)
            if split:
                piece = f.piece_at(mid)
                if piece is None or (isinstance(piece, Constant) and piece.value == 0):
                    continue  # witness vanishes on the whole segment
            n = max(1, int(math.ceil((b - a) / panel_width - 1e-9)))
            h = (b - a) / n
            starts = a + h * np.arange(n)
            xs = starts[:, None] + h * self.gl01[None, :]
            ws = np.broadcast_to(0.5 * h * gl_weights, (n, self.ng))
            vs = f(xs.ravel()).reshape(n, self.ng)
            seg_u0.append(a)
            seg_h.append(h)
            seg_np.append(n)
            nodes.append(xs)
            weights.append(ws)
            fvals.append(vs)
        self.seg_u0 = np.array(seg_u0)
        self.seg_h = np.array(seg_h)
        self.seg_np = np.array(seg_np, dtype=np.int64)
        if nodes:
            self.nodes = np.concatenate([x.ravel() for x in nodes])
            self.weights = np.concatenate([w.ravel() for w in weights])
            self.fvals = np.concatenate([v.ravel() for v in fvals])
        else:
            self.nodes = np.empty(0)
            self.weights = np.empty(0)
            self.fvals = np.empty(0, dtype=complex)

    @classmethod
    def uniform(cls, lo, hi, n, f):
        """Composite-midpoint axis (used by the oracle integrator)."""
        self = object.__new__(cls)
        h = (hi - lo) / n
        self.ng = 1
        self.gl01 = np.array([0.5])
        self.seg_u0 = np.array([lo])
        self.seg_h = np.array([h])
        self.seg_np = np.array([n], dtype=np.int64)
        self.nodes = lo + h * (np.arange(n) + 0.5)
        self.weights = np.full(n, h)
        self.fvals = f(self.nodes)
        return self

    @property
    def count(self):
        return self.nodes.shape[0]

    def absorb_log(self, lam, coeff):
        if coeff != 0.0:
            if np.any(self.nodes <= 0):
                raise OutOfDomain("log phase requires positive coordinates")
            self.fvals = self.fvals * np.exp(1j * lam * coeff * np.log(self.nodes))

    def cweights(self):
        return self.weights * self.fvals

    def seg_rows(self):
        rows = np.zeros(len(self.seg_np), dtype=np.int64)
        if len(self.seg_np) > 1:
            rows[1:] = np.cumsum(self.seg_np[:-1])
        return rows

    def gmatrix(self):
        total = int(self.seg_np.sum())
        return (self.weights * self.fvals).reshape(total, self.ng)


def _pow_table(monos, axis, nodes):
    table = np.empty((len(monos), nodes.shape[0]))
    for t, (alpha, _) in enumerate(monos):
        table[t] = nodes ** alpha[axis]
    return table


def _split_affine(monos, inner):
    """Split monomials into A (degree 1 in inner) and B (degree 0) parts."""
    A, B = [], []
    for alpha, c in monos:
        k = alpha[inner]
        if k == 0:
            B.append((alpha, float(c)))
        elif k == 1:
            A.append((alpha, float(c)))
        else:
            return None
    return A, B


def _tensor_sum(lam, monos_float, axes):
    """Dispatch the 3D tensor sum to the affine rotor or the direct kernel."""
    dim = len(axes)
    assert dim == 3
    if any(ax.count == 0 for ax in axes):
        return 0.0 + 0.0j
    # inner axis: largest node count among axes the phase is affine in
    candidates = []
    for j in range(3):
        if all(alpha[j] <= 1 for alpha, _ in monos_float):
            candidates.append(j)
    if candidates:
        inner = max(candidates, key=lambda j: axes[j].count)
        outer = sorted([j for j in range(3) if j != inner],
                       key=lambda j: -axes[j].count)
        A, B = _split_affine(monos_float, inner)
        cA = np.array([c for _, c in A])
        cB = np.array([c for _, c in B])
        pAu = _pow_table(A, outer[0], axes[outer[0]].nodes)
        pAv = _pow_table(A, outer[1], axes[outer[1]].nodes)
        pBu = _pow_table(B, outer[0], axes[outer[0]].nodes)
        pBv = _pow_table(B, outer[1], axes[outer[1]].nodes)
        ax_in = axes[inner]
        return t3_affine_sum(lam, axes[outer[0]].cweights(), axes[outer[1]].cweights(),
                             cA, pAu, pAv, cB, pBu, pBv,
                             ax_in.seg_u0, ax_in.seg_h, ax_in.seg_rows(), ax_in.seg_np,
                             ax_in.gmatrix(), ax_in.gl01)
    order = sorted(range(3), key=lambda j: -axes[j].count)
    cT = np.array([float(c) for _, c in monos_float])
    tables = [_pow_table(monos_float, j, axes[j].nodes) for j in order]
    return t3_direct_sum(lam, axes[order[0]].cweights(), axes[order[1]].cweights(),
                         axes[order[2]].cweights(), cT, *tables)


def _conjugated(fs):
    return tuple(f.conjugate() for f in fs)


def _panel_counts(phase, lam, oversample):
    counts = []
    for j in range(phase.dimension):
        lip = sampled_lipschitz(phase, j)
        length = phase.domain[j][1] - phase.domain[j][0]
        counts.append(max(1, int(math.ceil(oversample * lam * lip * length / TWO_PI))))
    return counts


def eval_T3(phase, f1, f2, f3, lam, cfg=None):
    """Tensor Gauss-Legendre evaluation of the trilinear form."""
    cfg = cfg or QuadConfig()
    if phase.dimension != 3:
        raise OutOfDomain("eval_T3 requires a 3D phase")
    if lam < 0:
        res = eval_T3(phase, *_conjugated((f1, f2, f3)), -lam, cfg)
        return IntegralResult(np.conjugate(res.value), lam, res.nodes_used,
                              res.two_resolution_delta)

    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(cfg.gauss_order)
    fs = (f1, f2, f3)
    monos_float = [(alpha, float(c)) for alpha, c in phase.monomials]
    logc = [float(c) for c in (phase.log_coeffs or (0,) * 3)]

    def run(oversample):
        base = _panel_counts(phase, lam, oversample)
        axes = []
        for j in range(3):
            lo, hi = phase.domain[j]
            ax = _Axis(lo, hi, base[j], fs[j], gl_nodes, gl_weights,
                       cfg.split_at_breakpoints)
            ax.absorb_log(lam, logc[j])
            axes.append(ax)
        estimate = axes[0].count * axes[1].count * axes[2].count
        if estimate > cfg.max_nodes:
            raise BudgetExceeded(f"node estimate {estimate} exceeds budget {cfg.max_nodes}")
        return _tensor_sum(lam, monos_float, axes), estimate

    value, nodes = run(cfg.oversample)
    half, _ = run(max(1.0, cfg.oversample / 2.0))
    return IntegralResult(value, lam, nodes, abs(value - half))


def eval_oracle_T3(phase, f1, f2, f3, lam, resolution):
    """Trusted reference: composite midpoint plus one Richardson step.

    Requires at least 10 midpoint cells per unit of phase oscillation
    (lam times the sampled Lipschitz constant per axis).
    """
    if phase.dimension != 3:
        raise OutOfDomain("eval_oracle_T3 requires a 3D phase")
    if resolution < 8:
        raise ResolutionTooLow("resolution must be at least 8")
    if lam < 0:
        res = eval_oracle_T3(phase, *_conjugated((f1, f2, f3)), -lam, resolution)
        return IntegralResult(np.conjugate(res.value), lam, res.nodes_used,
                              res.two_resolution_delta)

    maxlip = max(sampled_lipschitz(phase, j) for j in range(3))
    if lam * maxlip > resolution / 10.0:
        raise ResolutionTooLow(
            f"resolution {resolution} under-resolves lam*Lip = {lam * maxlip:.3g}")
    monos_float = [(alpha, float(c)) for alpha, c in phase.monomials]
    logc = [float(c) for c in (phase.log_coeffs or (0,) * 3)]
    fs = (f1, f2, f3)

    def midpoint(n):
        axes = []
        for j in range(3):
            lo, hi = phase.domain[j]
            ax = _Axis.uniform(lo, hi, n, fs[j])
            ax.absorb_log(lam, logc[j])
            axes.append(ax)
        return _tensor_sum(lam, monos_float, axes)

    n2 = resolution // 2
    v_full = midpoint(resolution)
    v_half = midpoint(n2)
    value = (4.0 * v_full - v_half) / 3.0
    return IntegralResult(value, lam, resolution ** 3 + n2 ** 3, abs(v_full - v_half))


# ----------------------------------------------------------------------
# 2D form with composed factors
# ----------------------------------------------------------------------

def _check_submersions(maps, domain, n=17):
    xs = np.linspace(domain[0][0], domain[0][1], n)
    ys = np.linspace(domain[1][0], domain[1][1], n)
    mesh = np.stack([m.ravel() for m in np.meshgrid(xs, ys, indexing="ij")], axis=1)
    for phi in maps:
        gx = eval_poly_vec(partial_monos(phi, (1, 0)), 2, mesh)
        gy = eval_poly_vec(partial_monos(phi, (0, 1)), 2, mesh)
        norms = np.hypot(gx, gy)
        scale = max(np.max(norms), 1.0)
        if np.min(norms) < 1e-6 * scale:
            raise DegenerateGradient("map gradient vanishes on the sampled box")


def _map_range(phi, x0, x1, y0, y1):
    xs = np.array([x0, 0.5 * (x0 + x1), x1])
    ys = np.array([y0, 0.5 * (y0 + y1), y1])
    pts = np.stack([m.ravel() for m in np.meshgrid(xs, ys, indexing="ij")], axis=1)
    vals = eval_poly_vec(phi.monomials, 2, pts)
    lo, hi = float(vals.min()), float(vals.max())
    pad = 0.05 * (hi - lo) + 1e-12
    return lo - pad, hi + pad


def eval_S2(psi, maps, f1, f2, f3, lam, cfg=None):
    """2D tensor-panel evaluation of  int exp(i lam psi) prod f_j(phi_j)."""
    cfg = cfg or QuadConfig()
    if psi.dimension != 2 or any(m.dimension != 2 for m in maps):
        raise OutOfDomain("eval_S2 requires 2D descriptors")
    if not psi.is_polynomial or any(not m.is_polynomial for m in maps):
        raise OutOfDomain("eval_S2 supports polynomial phases and maps only")
    if lam < 0:
        res = eval_S2(psi, maps, *_conjugated((f1, f2, f3)), -lam, cfg)
        return IntegralResult(np.conjugate(res.value), lam, res.nodes_used,
                              res.two_resolution_delta)
    _check_submersions(maps, psi.domain)

    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(cfg.gauss_order)
    gl01 = (gl_nodes + 1.0) / 2.0
    wq = 0.5 * gl_weights
    fs = (f1, f2, f3)
    breakpoints = [np.array(f.breakpoints) for f in fs]

    def run(oversample):
        base = _panel_counts(psi, lam, oversample)
        (xlo, xhi), (ylo, yhi) = psi.domain
        hx = (xhi - xlo) / base[0]
        hy = (yhi - ylo) / base[1]
        stack = [(xlo + i * hx, xlo + (i + 1) * hx, ylo + j * hy, ylo + (j + 1) * hy, 0)
                 for i in range(base[0]) for j in range(base[1])]
        leaves = []
        while stack:
            x0, x1, y0, y1, depth = stack.pop()
            crossed = False
            if depth < 6 and cfg.split_at_breakpoints:
                for phi, bps in zip(maps, breakpoints):
                    if bps.size == 0:
                        continue
                    lo, hi = _map_range(phi, x0, x1, y0, y1)
                    if np.any((bps > lo) & (bps < hi)):
                        crossed = True
                        break
            if crossed:
                xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
                stack.extend([(x0, xm, y0, ym, depth + 1), (xm, x1, y0, ym, depth + 1),
                              (x0, xm, ym, y1, depth + 1), (xm, x1, ym, y1, depth + 1)])
            else:
                leaves.append((x0, x1, y0, y1))
        leaves.sort()
        if not leaves:
            return 0.0 + 0.0j, 0
        ng = cfg.gauss_order
        total_nodes = len(leaves) * ng * ng
        if total_nodes > cfg.max_nodes:
            raise BudgetExceeded(f"node estimate {total_nodes} exceeds budget {cfg.max_nodes}")

        sums = np.zeros(len(leaves), dtype=complex)
        batch = max(1, 200_000 // (ng * ng))
        rect = np.array(leaves).reshape(-1, 4)
        for lo_i in range(0, len(leaves), batch):
            hi_i = min(lo_i + batch, len(leaves))
            r = rect[lo_i:hi_i]
            X = r[:, 0, None, None] + (r[:, 1] - r[:, 0])[:, None, None] * gl01[None, :, None]
            Y = r[:, 2, None, None] + (r[:, 3] - r[:, 2])[:, None, None] * gl01[None, None, :]
            W = ((r[:, 1] - r[:, 0])[:, None, None] * wq[None, :, None]
                 * (r[:, 3] - r[:, 2])[:, None, None] * wq[None, None, :])
            pts = np.stack([np.broadcast_to(X, W.shape).ravel(),
                            np.broadcast_to(Y, W.shape).ravel()], axis=1)
            integrand = np.exp(1j * lam * eval_poly_vec(psi.monomials, 2, pts))
            for phi, f in zip(maps, fs):
                integrand *= f(eval_poly_vec(phi.monomials, 2, pts))
            sums[lo_i:hi_i] = (integrand.reshape(W.shape) * W).sum(axis=(1, 2))
        return pairwise_sum(sums), total_nodes

    value, nodes = run(cfg.oversample)
    half, _ = run(max(1.0, cfg.oversample / 2.0))
    return IntegralResult(value, lam, nodes, abs(value - half))


def eval_oracle_S2(psi, maps, f1, f2, f3, lam, resolution):
    """Composite midpoint + Richardson oracle for the 2D composed form."""
    if psi.dimension != 2 or any(m.dimension != 2 for m in maps):
        raise OutOfDomain("eval_oracle_S2 requires 2D descriptors")
    if resolution < 8:
        raise ResolutionTooLow("resolution must be at least 8")
    if lam < 0:
        res = eval_oracle_S2(psi, maps, *_conjugated((f1, f2, f3)), -lam, resolution)
        return IntegralResult(np.conjugate(res.value), lam, res.nodes_used,
                              res.two_resolution_delta)
    maxlip = max(sampled_lipschitz(psi, j) for j in range(2))
    if lam * maxlip > resolution / 10.0:
        raise ResolutionTooLow(
            f"resolution {resolution} under-resolves lam*Lip = {lam * maxlip:.3g}")
    fs = (f1, f2, f3)

    def midpoint(n):
        (xlo, xhi), (ylo, yhi) = psi.domain
        hx = (xhi - xlo) / n
        hy = (yhi - ylo) / n
        xs = xlo + hx * (np.arange(n) + 0.5)
        ys = ylo + hy * (np.arange(n) + 0.5)
        rows = np.zeros(n, dtype=complex)
        for i in range(n):
            pts = np.stack([np.full(n, xs[i]), ys], axis=1)
            vals = np.exp(1j * lam * eval_poly_vec(psi.monomials, 2, pts))
            for phi, f in zip(maps, fs):
                vals *= f(eval_poly_vec(phi.monomials, 2, pts))
            rows[i] = vals.sum() * hx * hy
        return pairwise_sum(rows)

    n2 = resolution // 2
    v_full = midpoint(resolution)
    v_half = midpoint(n2)
    value = (4.0 * v_full - v_half) / 3.0
    return IntegralResult(value, lam, resolution ** 2 + n2 ** 2, abs(v_full - v_half))
