"""Sublevel-set measures, the extremal multiprogression witness, and
H^sigma chirp energies.

Residual systems.  A SublevelSystem packages a vector residual map R on a
box with a tolerance eps; membership is the closed condition |R_i| <= eps
for every component (the source material mixes strict and non-strict
inequalities, which is immaterial for measures; non-strict is fixed here
for determinism).  Builders cover the three studied shapes:

    system_9_1      (h1(x) + phi_x h3(phi) + psi_x,  h2(y) + phi_y h3(phi) + psi_y)
    system_12       (d_j phi(x) - h_j(x_j))_{j=1,2,3}
    scalar_sublevel sum_j a_j(x) f_j(phi_j(x))

"Arbitrary measurable" inputs h_j are represented by seeded random
staircases (measurable functions are approximated in measure by
staircases, and the systems only read pointwise values).

Measures are estimated by Monte Carlo with the counter-based Philox
generator (reproducible for a given seed regardless of chunking) or by a
deterministic grid count; the 3D separable grid count runs on the compiled
backend.

The multiprogression witness is the rank-2 construction making the
two-inequality system's set as large as c eps^(1/2): on the eps^(1/2) grid
f(x) = k eps^(1/2) - x, g(y) = k eps^(1/2) + k eps, and on the nested eps
grid h(t) = n eps^(1/2) + n eps.  Blocks E(m, n) are squares of side
eps^(1/2) cut by a diagonal strip of width eps; their exact measures are

    |E(m, n)| = eps^(3/2) - n eps^2         (1 <= n < N)

(the uniform eps^(3/2) + O(eps^2) approximation is accurate only for
bounded n, but the total over blocks still reaches c' eps^(1/2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._kernels import grid_count3
from .errors import (DegenerateGradient, DegenerateMixedPartial, NonSquareInverse,
                     UnderResolved)
from .phases import eval_partial_vec, partial_monos

__all__ = ["StepFunction", "SublevelSystem", "MeasureEstimate",
           "MultiprogressionWitness", "random_staircase", "estimate_measure",
           "grid_measure", "system_9_1", "system_12", "scalar_sublevel",
           "value_concentration", "hsigma_chirp_energy",
           "build_multiprogression_witness", "multiprogression_measure",
           "witness_system", "witness_block", "with_eps", "measure_exponent"]


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-linear real function: pieces (lo, hi, slope, intercept).

    Value on [lo, hi) is slope * x + intercept; outside all pieces the
    value is 0.  A staircase is the slope-0 case.
    """

    pieces: tuple

    def __post_init__(self):
        prev = -math.inf
        for lo, hi, _, _ in self.pieces:
            if not lo < hi:
                raise ValueError("empty step piece")
            if lo < prev - 1e-15:
                raise ValueError("pieces must be sorted")
            prev = hi

    @property
    def domain(self):
        return (self.pieces[0][0], self.pieces[-1][1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        lows = np.array([p[0] for p in self.pieces])
        idx = np.searchsorted(lows, x, side="right") - 1
        idx = np.clip(idx, 0, len(self.pieces) - 1)
        lo = lows[idx]
        hi = np.array([p[1] for p in self.pieces])[idx]
        slope = np.array([p[2] for p in self.pieces])[idx]
        inter = np.array([p[3] for p in self.pieces])[idx]
        inside = (x >= lo) & (x < hi)
        # close the final piece on the right
        inside |= (idx == len(self.pieces) - 1) & np.isclose(x, self.domain[1])
        return np.where(inside, slope * x + inter, 0.0)

    def lipschitz(self):
        return max(abs(p[2]) for p in self.pieces)

    @staticmethod
    def constant(value, lo, hi):
        return StepFunction(((float(lo), float(hi), 0.0, float(value)),))

    @staticmethod
    def identity(lo, hi):
        return StepFunction(((float(lo), float(hi), 1.0, 0.0),))


def random_staircase(lo, hi, n_steps, value_lo, value_hi, seed):
    """Seeded staircase with n_steps equal cells and iid uniform values."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    vals = rng.uniform(value_lo, value_hi, n_steps)
    edges = np.linspace(lo, hi, n_steps + 1)
    return StepFunction(tuple((float(edges[i]), float(edges[i + 1]), 0.0, float(vals[i]))
                              for i in range(n_steps)))


@dataclass(frozen=True)
class SublevelSystem:
    residual: object          # callable (n, d) -> (n, k)
    domain: tuple             # per-axis (lo, hi)
    eps: float
    label: str = "generic"
    grid_data: tuple | None = None  # separable fast-path payload

    @property
    def volume(self):
        return math.prod(hi - lo for lo, hi in self.domain)


def with_eps(sys, eps):
    return replace(sys, eps=float(eps))


@dataclass(frozen=True)
class MeasureEstimate:
    estimate: float
    half_width_95: float
    samples: int
    method: str


def estimate_measure(sys, n_samples, seed):
    """Monte Carlo membership fraction times box volume (Philox stream)."""
    if n_samples < 1000:
        raise ValueError("use at least 10^3 samples")
    rng = np.random.Generator(np.random.Philox(key=seed))
    dim = len(sys.domain)
    lo = np.array([d[0] for d in sys.domain])
    span = np.array([d[1] - d[0] for d in sys.domain])
    hits = 0
    done = 0
    chunk = 262144
    while done < n_samples:
        take = min(chunk, n_samples - done)
        pts = lo + span * rng.random((take, dim))
        r = np.atleast_2d(sys.residual(pts))
        ok = np.all(np.abs(r) <= sys.eps, axis=-1)
        hits += int(ok.sum())
        done += take
    p = hits / n_samples
    vol = sys.volume
    hw = 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / n_samples) * vol
    return MeasureEstimate(p * vol, hw, n_samples, "MonteCarlo")


def grid_measure(sys, cells_per_axis):
    """Deterministic cell-center count; compiled path for separable 3D."""
    dim = len(sys.domain)
    axes = [d[0] + (d[1] - d[0]) * (np.arange(cells_per_axis) + 0.5) / cells_per_axis
            for d in sys.domain]
    cell_vol = sys.volume / cells_per_axis ** dim
    if dim == 3 and sys.grid_data is not None:
        terms, hs = sys.grid_data
        packed = []
        for monos in terms:
            c = np.array([float(cc) for _, cc in monos])
            tabs = tuple(np.stack([axes[j] ** alpha[j] for alpha, _ in monos])
                         if monos else np.zeros((0, cells_per_axis))
                         for j in range(3))
            packed.append((c, tabs))
        htabs = [np.ascontiguousarray(h(axes[j])) for j, h in enumerate(hs)]
        count = grid_count3(packed[0][0], packed[0][1], packed[1][0], packed[1][1],
                            packed[2][0], packed[2][1], *htabs, sys.eps)
        return MeasureEstimate(count * cell_vol, 0.0,
                               cells_per_axis ** 3, "Grid")
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    count = 0
    chunk = 4_000_000
    for lo_i in range(0, pts.shape[0], chunk):
        r = np.atleast_2d(sys.residual(pts[lo_i:lo_i + chunk]))
        count += int(np.all(np.abs(r) <= sys.eps, axis=-1).sum())
    return MeasureEstimate(count * cell_vol, 0.0, cells_per_axis ** dim, "Grid")


# -- system builders -----------------------------------------------------

def _check_nonvanishing(phase, alphas, exc, what, n=17):
    grids = [np.linspace(lo, hi, n) for lo, hi in phase.domain]
    mesh = np.meshgrid(*grids, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = [eval_partial_vec(phase, a, pts) for a in alphas]
    scale = max(max(np.max(np.abs(v)) for v in vals), 1e-300)
    for a, v in zip(alphas, vals):
        if np.min(np.abs(v)) < 1e-6 * scale:
            raise exc(f"{what} {a} vanishes on the sampled box")


def system_9_1(phi, psi, h1, h2, h3, eps):
    """The two-inequality curved system with unknown h_j."""
    if phi.dimension != 2 or psi.dimension != 2:
        raise ValueError("system_9_1 needs 2D phi and psi")
    _check_nonvanishing(phi, [(1, 0), (0, 1)], DegenerateGradient, "phi partial")

    def residual(pts):
        pv = eval_partial_vec(phi, (0, 0), pts)
        p1 = eval_partial_vec(phi, (1, 0), pts)
        p2 = eval_partial_vec(phi, (0, 1), pts)
        s1 = eval_partial_vec(psi, (1, 0), pts)
        s2 = eval_partial_vec(psi, (0, 1), pts)
        h3v = h3(pv)
        return np.stack([h1(pts[:, 0]) + p1 * h3v + s1,
                         h2(pts[:, 1]) + p2 * h3v + s2], axis=-1)

    return SublevelSystem(residual, phi.domain, float(eps), "system_9_1")


def system_12(phi, h1, h2, h3, eps):
    """|d_j phi(x) - h_j(x_j)| <= eps for j = 1, 2, 3."""
    if phi.dimension != 3:
        raise ValueError("system_12 needs a 3D phase")
    mixed = [(1, 1, 0), (1, 0, 1), (0, 1, 1)]
    _check_nonvanishing(phi, mixed, DegenerateMixedPartial, "mixed partial")
    hs = (h1, h2, h3)

    def residual(pts):
        cols = [eval_partial_vec(phi, tuple(int(i == j) for i in range(3)), pts)
                - hs[j](pts[:, j]) for j in range(3)]
        return np.stack(cols, axis=-1)

    grads = [partial_monos(phi, tuple(int(i == j) for i in range(3))) for j in range(3)]
    return SublevelSystem(residual, phi.domain, float(eps), "system_12",
                          grid_data=(tuple(grads), hs))


def scalar_sublevel(coeffs, maps, fs, eps, domain=None):
    """|sum_j a_j(x) f_j(phi_j(x))| <= eps; a_j constants or 2D phases."""
    if len(maps) != 3 or len(fs) != 3:
        raise ValueError("need three maps and three functions")
    dom = tuple(domain) if domain is not None else maps[0].domain

    def coeff_vals(a, pts):
        if np.isscalar(a) or isinstance(a, (int, float)):
            return float(a)
        return eval_partial_vec(a, (0, 0), pts)

    def residual(pts):
        total = np.zeros(pts.shape[0])
        for a, phi, f in zip(coeffs, maps, fs):
            total = total + coeff_vals(a, pts) * f(eval_partial_vec(phi, (0, 0), pts))
        return total[:, None]

    return SublevelSystem(residual, dom, float(eps), "scalar")


# -- value concentration and the H^sigma chirp energy --------------------

def value_concentration(f, r):
    """sup_t |{x : |f(x) - t| <= r}|, exact for piecewise-linear f.

    The measure as a function of t is piecewise linear with kinks where a
    window edge t +- r meets a piece's value range, so the sup is attained
    at one of those candidate t values.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    ranges = []
    for lo, hi, slope, inter in f.pieces:
        v0 = slope * lo + inter
        v1 = slope * hi + inter
        ranges.append((min(v0, v1), max(v0, v1), abs(slope), hi - lo))
    cands = set()
    for vlo, vhi, _, _ in ranges:
        for v in (vlo, vhi):
            cands.add(v - r)
            cands.add(v + r)
            cands.add(v)

    def measure(t):
        total = 0.0
        for vlo, vhi, slope, length in ranges:
            olo = max(vlo, t - r)
            ohi = min(vhi, t + r)
            if ohi < olo:
                continue
            if slope == 0.0:
                total += length  # constant piece fully in or out
            else:
                total += (ohi - olo) / slope
        return total

    return max(measure(t) for t in cands)


def hsigma_chirp_energy(f, sigma, A, M=8192):
    """(lhs, rhs) of the averaged negative-Sobolev chirp bound.

    lhs: trapezoid rule over 64 nodes lam in [0, A] of the discrete
         H^sigma norm squared of 1_I exp(i lam f), via a size-M DFT on
         [0, 1] with frequencies 2 pi k;
    rhs: A times value_concentration(f, 1/A)^|sigma|.
    """
    if M < 4096:
        raise ValueError("DFT size must be at least 4096")
    if not -1.0 <= sigma <= -0.05:
        raise ValueError("sigma must lie in [-1, -0.05]")
    lo, hi = f.domain
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError("f must live on a subinterval of [0, 1]")
    lip = f.lipschitz()
    if lip > 0 and A > M / (20.0 * (hi - lo) * lip):
        raise UnderResolved(
            f"A = {A} exceeds M / (20 |I| Lip f) = {M / (20 * (hi - lo) * lip):.3g}")
    xs = np.arange(M) / M
    inside = (xs >= lo) & (xs <= hi)
    fx = f(xs)
    k = np.fft.fftfreq(M, d=1.0 / M)
    weight = (1.0 + (2.0 * math.pi * k) ** 2) ** sigma
    lams = np.linspace(0.0, A, 64)
    norms = np.empty(lams.shape[0])
    for i, lam in enumerate(lams):
        g = np.where(inside, np.exp(1j * lam * fx), 0.0)
        c = np.fft.fft(g) / M
        norms[i] = float(np.sum(weight * np.abs(c) ** 2))
    lhs = float(np.trapezoid(norms, lams))
    rhs = float(A) * value_concentration(f, 1.0 / A) ** abs(sigma)
    return lhs, rhs


# -- the rank-2 multiprogression witness ---------------------------------

@dataclass(frozen=True)
class MultiprogressionWitness:
    eps: float
    n_blocks_per_axis: int  # N = eps^(-1/2)
    f: StepFunction
    g: StepFunction
    h: StepFunction


def build_multiprogression_witness(eps):
    """Exact piecewise descriptors of the extremal (f, g, h)."""
    n_float = 1.0 / math.sqrt(eps)
    n = round(n_float)
    if abs(n * n * eps - 1.0) > 1e-9:
        raise NonSquareInverse(f"eps^(-1/2) = {n_float} is not an integer")
    if eps > 1.0 / 16.0 + 1e-15:
        raise NonSquareInverse("eps must be at most 1/16")
    s = math.sqrt(eps)
    # f: ramps k s - x on |x - k s| < s/2, covering [0, 1]
    f = StepFunction(tuple((k * s - s / 2, k * s + s / 2, -1.0, k * s)
                           for k in range(n + 1)))
    g = StepFunction(tuple((k * s - s / 2, k * s + s / 2, 0.0, k * s + k * eps)
                           for k in range(n + 1)))
    # h: cells |t - (k s + n' eps)| < eps/2, value n' s + n' eps, t in [-eps/2, 2]
    hp = []
    for k in range(2 * n + 1):
        for j in range(n):
            center = k * s + j * eps
            if center - eps / 2 > 2.0:
                break
            hp.append((center - eps / 2, center + eps / 2, 0.0, j * s + j * eps))
    h = StepFunction(tuple(hp))
    return MultiprogressionWitness(float(eps), n, f, g, h)


def witness_block(w, m, n):
    """Geometry of E(m, n): x/y squares and the diagonal strip."""
    s = math.sqrt(w.eps)
    return {
        "x": ((m - n) * s - s / 2, (m - n) * s + s / 2),
        "y": (n * s - s / 2, n * s + s / 2),
        "u": (m * s + n * w.eps - w.eps / 2, m * s + n * w.eps + w.eps / 2),
    }


def _block_measure(w, m, n):
    """Exact area of the strip-in-square intersection."""
    s = math.sqrt(w.eps)
    eps = w.eps
    # offset of the strip center from the square's diagonal center
    lo, hi = n * eps - eps / 2.0, n * eps + eps / 2.0

    def ell_integral(a, b):
        # integral of max(s - |v|, 0) over [a, b]
        def anti(v):
            v = max(min(v, s), -s)
            return s * v - 0.5 * v * abs(v)
        return anti(b) - anti(a)

    return ell_integral(lo, hi)


def witness_system(w):
    """The two residuals |g(y) - h(x+y)| and |y - f(x) - h(x+y)| on [0,1]^2."""
    def residual(pts):
        x = pts[:, 0]
        y = pts[:, 1]
        hv = w.h(x + y)
        return np.stack([w.g(y) - hv, y - w.f(x) - hv], axis=-1)
    return SublevelSystem(residual, ((0.0, 1.0), (0.0, 1.0)), w.eps,
                          "multiprogression")


def multiprogression_measure(w, corner_check=True):
    """(exact lower bound from enumerated blocks, block count).

    Enumerates the blocks contained in [0,1]^2, optionally verifies both
    residuals at four strip-edge extreme points and the center of each
    block, and sums the exact block measures.
    """
    n_ax = w.n_blocks_per_axis
    s = math.sqrt(w.eps)
    total = 0.0
    count = 0
    for n in range(1, n_ax):
        for k in range(1, n_ax):  # k = m - n
            m = k + n
            blk = witness_block(w, m, n)
            if not (0.0 <= blk["x"][0] and blk["x"][1] <= 1.0
                    and 0.0 <= blk["y"][0] and blk["y"][1] <= 1.0):
                continue
            if corner_check and not _block_ok(w, blk):
                continue
            total += _block_measure(w, m, n)
            count += 1
    return total, count


def _block_ok(w, blk):
    (xlo, xhi), (ylo, yhi), (ulo, uhi) = blk["x"], blk["y"], blk["u"]
    pts = []
    for u_edge in (ulo + 1e-12, uhi - 1e-12):
        a = max(xlo, u_edge - yhi)
        b = min(xhi, u_edge - ylo)
        if a > b:
            continue
        pts.append((a + 1e-12, u_edge - a - 1e-12))
        pts.append((b - 1e-12, u_edge - b + 1e-12))
    umid = 0.5 * (ulo + uhi)
    xm = 0.5 * (max(xlo, umid - yhi) + min(xhi, umid - ylo))
    pts.append((xm, umid - xm))
    pts = np.array(pts)
    r = witness_system(w).residual(pts)
    return bool(np.all(np.abs(r[:, 0]) <= 1e-9) and np.all(np.abs(r[:, 1]) < w.eps / 2))


def measure_exponent(system_for_eps, eps_ladder, n_samples, seed):
    """Fit the decay exponent of eps -> measure over a ladder (shared seed).

    Zero-hit rungs are dropped from the fit; if fewer than two rungs remain
    the decay outran the sampler and +inf is returned.
    """
    xs, ys = [], []
    for eps in eps_ladder:
        est = estimate_measure(system_for_eps(eps), n_samples, seed)
        if est.estimate > 0:
            xs.append(math.log(eps))
            ys.append(math.log(est.estimate))
    if len(xs) < 2:
        return math.inf
    xs = np.array(xs)
    ys = np.array(ys)
    return float(np.sum((xs - xs.mean()) * (ys - ys.mean())) / np.sum((xs - xs.mean()) ** 2))
