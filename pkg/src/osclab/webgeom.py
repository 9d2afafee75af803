"""3-web curvature and rank-one degeneracy diagnostics.

Curvature proxy.  For a web given in graph form (x, y, phi3(x, y)) the
linearizability obstruction used here is

    K = d^2/dxdy  ln | (d phi3/dx) / (d phi3/dy) |,

expanded by the quotient rule into exact partial derivatives of phi3 up to
order 3 (no finite differences).  K vanishes identically on an open set iff
the partial-derivative ratio factors as a product of one-variable functions,
i.e. iff the web is equivalent to three families of parallel lines.  Only
the zero set of K is meaningful; the sign convention is an artifact of the
proxy.

Rank-one degeneracy.  A 3D phase is rank-one degenerate near a basepoint if
some hypersurface x3 = kappa(x1, x2) through it supports functions h_j(x_j)
with grad(phi - sum h_j) = 0 on the surface.  The candidate surface is
forced: d kappa/dx1 = -phi_21/phi_23 along the base horizontal line, then
d kappa/dx2 = -phi_12/phi_13 along verticals (classical RK4 both stages).
The degeneracy score then measures how far each d_j phi restricted to the
surface is from depending on the single required variable; a score near
zero certifies a consistent (kappa, h_1, h_2, h_3), a large score certifies
none exists on the patch.  Cross-differentiating the two kappa equations
also yields an algebraic relation among second and third partials that must
hold (in one of its three coordinate permutations) at any point of
degeneracy; ``ugly_residual`` evaluates it directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGradient, DegenerateMixedPartial, OdeSingularity
from .phases import eval_partial, eval_partial_vec

__all__ = ["WebTriple", "SurfacePatch", "graph_web", "web_curvature",
           "is_linearizable", "ugly_residual", "rank1_candidate_surface",
           "rank1_degeneracy_score"]

MARGIN = 1e-6  # relative to the sampled derivative scale


@dataclass(frozen=True)
class WebTriple:
    maps: tuple  # three 2D PhaseDescriptors
    domain: tuple

    def __post_init__(self):
        if len(self.maps) != 3 or any(m.dimension != 2 for m in self.maps):
            raise ValueError("a web needs three 2D maps")
        # pairwise transversality, sampled
        pts = _grid_points(self.domain, 17)
        grads = []
        for m in self.maps:
            gx = eval_partial_vec(m, (1, 0), pts)
            gy = eval_partial_vec(m, (0, 1), pts)
            grads.append((gx, gy))
        scale = max(max(np.max(np.abs(g[0])), np.max(np.abs(g[1]))) for g in grads)
        scale = max(scale, 1e-300)
        for j in range(3):
            for k in range(j + 1, 3):
                cross = grads[j][0] * grads[k][1] - grads[j][1] * grads[k][0]
                if np.min(np.abs(cross)) < MARGIN * scale * scale:
                    raise DegenerateGradient(
                        f"maps {j} and {k} have near-parallel gradients on the box")


@dataclass(frozen=True)
class SurfacePatch:
    basepoint: tuple
    x1: np.ndarray
    x2: np.ndarray
    kappa: np.ndarray  # shape (len(x1), len(x2))
    step: float


def _grid_points(domain, n):
    axes = [np.linspace(lo, hi, n) for lo, hi in domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


_IDENTITY_X = (((1, 0), 1),)
_IDENTITY_Y = (((0, 1), 1),)


def graph_web(phi3, domain=None):
    """Web (x, y, phi3) over phi3's domain (or an override box)."""
    from .phases import poly_phase
    dom = tuple(domain) if domain is not None else phi3.domain
    px = poly_phase(2, [((1, 0), 1)], dom)
    py = poly_phase(2, [((0, 1), 1)], dom)
    if domain is not None:
        phi3 = phi3.with_domain(dom)
    return WebTriple((px, py, phi3), dom)


def _is_graph_form(web):
    m0 = tuple((a, c) for a, c in web.maps[0].monomials if c != 0)
    m1 = tuple((a, c) for a, c in web.maps[1].monomials if c != 0)
    return m0 == _IDENTITY_X and m1 == _IDENTITY_Y


def _curvature_from_partials(d):
    """K from a dict of phi3 partials keyed by multi-index."""
    p1, p2 = d[(1, 0)], d[(0, 1)]
    p11, p12, p22 = d[(2, 0)], d[(1, 1)], d[(0, 2)]
    p112, p122 = d[(2, 1)], d[(1, 2)]
    return (p112 * p1 - p12 * p11) / p1 ** 2 - (p122 * p2 - p12 * p22) / p2 ** 2


_CURV_ORDERS = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (2, 1), (1, 2)]


def web_curvature(web, point):
    """Curvature proxy at one point, from exact partials of phi3."""
    if not _is_graph_form(web):
        raise ValueError("web_curvature requires graph form (x, y, phi3)")
    phi3 = web.maps[2]
    d = {a: eval_partial(phi3, a, point) for a in _CURV_ORDERS}
    scale = max(abs(d[(1, 0)]), abs(d[(0, 1)]), 1e-300)
    if min(abs(d[(1, 0)]), abs(d[(0, 1)])) < MARGIN * scale:
        raise DegenerateGradient(f"a partial of phi3 vanishes near {point}")
    return _curvature_from_partials(d)


def curvature_grid(web, n=65):
    """Vectorized |K| on an n x n grid; returns (points, K values)."""
    if not _is_graph_form(web):
        raise ValueError("curvature requires graph form (x, y, phi3)")
    phi3 = web.maps[2]
    pts = _grid_points(web.domain, n)
    d = {a: eval_partial_vec(phi3, a, pts) for a in _CURV_ORDERS}
    scale = max(np.max(np.abs(d[(1, 0)])), np.max(np.abs(d[(0, 1)])), 1e-300)
    if min(np.min(np.abs(d[(1, 0)])), np.min(np.abs(d[(0, 1)]))) < MARGIN * scale:
        raise DegenerateGradient("a partial of phi3 vanishes on the grid")
    return pts, _curvature_from_partials(d)


def is_linearizable(web, tol=1e-9, n=65):
    _, K = curvature_grid(web, n)
    return bool(np.max(np.abs(K)) <= tol)


# -- the algebraic degeneracy relation ---------------------------------

def _ugly_one_variant(phase, point, i, j, g):
    """Residual of the cross-derivative relation for graph axis g."""
    def d(*alpha_axes):
        alpha = [0, 0, 0]
        for ax in alpha_axes:
            alpha[ax] += 1
        return eval_partial(phase, tuple(alpha), point)

    pij = d(i, j)
    pig = d(i, g)
    pjg = d(j, g)
    lhs = pjg ** 2 * (d(i, j, i) * pig - pij * d(i, g, i))
    rhs = pig ** 2 * (d(i, j, j) * pjg - pij * d(j, g, j))
    return abs(lhs - rhs), (pij, pig, pjg)


_VARIANTS = (("x3-graph", 0, 1, 2), ("x1-graph", 1, 2, 0), ("x2-graph", 0, 2, 1))


def ugly_residual(phase, point):
    """Minimum over the three coordinate-permuted relation residuals.

    A clearly nonzero minimum certifies rank-one nondegeneracy near the
    point; zero is inconclusive (the relation is necessary only).
    """
    if phase.dimension != 3:
        raise ValueError("ugly_residual requires a 3D phase")
    mixed = {}
    for (a, b) in ((0, 1), (0, 2), (1, 2)):
        alpha = [0, 0, 0]
        alpha[a] += 1
        alpha[b] += 1
        mixed[(a, b)] = eval_partial(phase, tuple(alpha), point)
    scale = max(max(abs(v) for v in mixed.values()), 1e-300)
    if min(abs(v) for v in mixed.values()) < MARGIN * scale:
        raise DegenerateMixedPartial(
            f"a mixed second partial vanishes at {tuple(point)}")
    best = None
    best_name = None
    for name, i, j, g in _VARIANTS:
        r, _ = _ugly_one_variant(phase, point, i, j, g)
        if best is None or r < best:
            best = r
            best_name = name
    return best, best_name


# -- candidate surface construction -------------------------------------

def _rhs_factory(phase, num_alpha, den_alpha, margin_abs):
    def rhs(x1, x2, kappa):
        x1v = np.broadcast_to(x1, np.shape(kappa)) if np.ndim(kappa) else x1
        x2v = np.broadcast_to(x2, np.shape(kappa)) if np.ndim(kappa) else x2
        pts = np.stack([np.atleast_1d(x1v).ravel(), np.atleast_1d(x2v).ravel(),
                        np.atleast_1d(kappa).ravel()], axis=1)
        num = eval_partial_vec(phase, num_alpha, pts)
        den = eval_partial_vec(phase, den_alpha, pts)
        if np.min(np.abs(den)) < margin_abs:
            raise OdeSingularity(
                f"|d^2 phi / {den_alpha}| fell below margin along the integration path")
        out = -num / den
        return out.reshape(np.shape(kappa)) if np.ndim(kappa) else float(out[0])
    return rhs


def _rk4_march(rhs_eval, t0, y0, step, n_steps):
    """Classical RK4; rhs_eval(t, y) may be scalar or vectorized in y."""
    t, y = t0, y0
    out = [y0]
    for _ in range(n_steps):
        k1 = rhs_eval(t, y)
        k2 = rhs_eval(t + step / 2.0, y + step * k1 / 2.0)
        k3 = rhs_eval(t + step / 2.0, y + step * k2 / 2.0)
        k4 = rhs_eval(t + step, y + step * k3)
        y = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + step
        out.append(y)
    return out


def _derivative_scale(phase, basepoint, halfwidth):
    box = [(c - halfwidth, c + halfwidth) for c in basepoint]
    pts = _grid_points(box, 7)
    scale = 0.0
    for (a, b) in ((0, 1), (0, 2), (1, 2)):
        alpha = [0, 0, 0]
        alpha[a] += 1
        alpha[b] += 1
        scale = max(scale, float(np.max(np.abs(eval_partial_vec(phase, tuple(alpha), pts)))))
    return max(scale, 1e-300)


def rank1_candidate_surface(phase, basepoint, halfwidth, step):
    """kappa on a centered grid via the forced first-order system.

    Stage 1 marches kappa along x2 = basepoint_2 using
    d kappa/dx1 = -phi_21/phi_23; stage 2 fills each vertical line using
    d kappa/dx2 = -phi_12/phi_13 (all columns marched together).
    """
    if phase.dimension != 3:
        raise ValueError("rank1_candidate_surface requires a 3D phase")
    b1, b2, b3 = (float(c) for c in basepoint)
    n = max(1, int(round(halfwidth / step)))
    margin_abs = MARGIN * _derivative_scale(phase, basepoint, halfwidth)
    rhs1 = _rhs_factory(phase, (1, 1, 0), (0, 1, 1), margin_abs)  # -phi_21/phi_23
    rhs2 = _rhs_factory(phase, (1, 1, 0), (1, 0, 1), margin_abs)  # -phi_12/phi_13

    x1 = b1 + step * np.arange(-n, n + 1)
    x2 = b2 + step * np.arange(-n, n + 1)

    # stage 1: horizontal line through the basepoint
    right = _rk4_march(lambda t, y: rhs1(t, b2, y), b1, b3, step, n)
    left = _rk4_march(lambda t, y: rhs1(t, b2, y), b1, b3, -step, n)
    line = np.array(left[::-1] + right[1:])

    # stage 2: all columns at once, up then down
    kappa = np.empty((2 * n + 1, 2 * n + 1))
    kappa[:, n] = line

    def rhs_cols(t, y):
        return rhs2(x1, t, y)

    up = _rk4_march(rhs_cols, b2, line.copy(), step, n)
    down = _rk4_march(rhs_cols, b2, line.copy(), -step, n)
    for k in range(1, n + 1):
        kappa[:, n + k] = up[k]
        kappa[:, n - k] = down[k]
    return SurfacePatch((b1, b2, b3), x1, x2, kappa, float(step))


def rank1_degeneracy_score(phase, basepoint, halfwidth, step):
    """Oscillation of each d_j phi on the candidate surface, transverse to
    its required dependence (x1 for j=1, x2 for j=2, kappa-level for j=3)."""
    patch = rank1_candidate_surface(phase, basepoint, halfwidth, step)
    n1, n2 = patch.kappa.shape
    X1 = np.broadcast_to(patch.x1[:, None], (n1, n2))
    X2 = np.broadcast_to(patch.x2[None, :], (n1, n2))
    pts = np.stack([X1.ravel(), X2.ravel(), patch.kappa.ravel()], axis=1)
    g1 = eval_partial_vec(phase, (1, 0, 0), pts).reshape(n1, n2)
    g2 = eval_partial_vec(phase, (0, 1, 0), pts).reshape(n1, n2)
    g3 = eval_partial_vec(phase, (0, 0, 1), pts).reshape(n1, n2)

    s1 = float(np.max(g1.max(axis=1) - g1.min(axis=1)))  # within rows: vary x2
    s2 = float(np.max(g2.max(axis=0) - g2.min(axis=0)))  # within cols: vary x1

    # g3 must be a function of kappa alone: bin the surface into kappa bands
    # of width = step and measure the within-band oscillation after removing
    # the in-band linear trend in kappa (a genuine h3(kappa) is locally
    # linear, so its trend is not oscillation; kappa-independent variation
    # survives the detrend in full).
    kv = patch.kappa.ravel()
    bands = np.floor((kv - kv.min()) / patch.step).astype(np.int64)
    g3v = g3.ravel()
    s3 = 0.0
    order = np.argsort(bands, kind="stable")
    bs = bands[order]
    edges = np.flatnonzero(np.diff(bs)) + 1
    for ks, gs in zip(np.split(kv[order], edges), np.split(g3v[order], edges)):
        if gs.size < 2:
            continue
        dk = ks - ks.mean()
        sxx = float(dk @ dk)
        resid = gs - gs.mean()
        if sxx > 0:
            resid = resid - (float(dk @ resid) / sxx) * dk
        s3 = max(s3, float(resid.max() - resid.min()))
    return max(s1, s2, s3)
