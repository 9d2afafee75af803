"""Phase-space decomposition of functions on [0, 1].

The unit interval is tiled by M = round(sqrt(lambda)) intervals I_m of
length 1/M.  Each window eta_m is a squared-cosine bump supported on the
doubled concentric interval I_m*, with sum_m eta_m^2 = 1 exactly (adjacent
cos^2 tapers telescope).  [0, 1] is treated as a circle: the edge windows
wrap, which keeps the tiling identity exact and lets lattice-aligned modes
stay single DFT coefficients on every interval.

Per interval, the restriction of f to I_m* is expanded in the discrete
Fourier basis of the doubled interval, whose frequencies are exactly the
lattice pi*M*Z.  Coefficients above lambda^-sigma * sup|f| (at most
N = ceil(lambda^(2 sigma)) of them, by Parseval) form the structured part
g_m = eta_m^2 * (kept series); everything else is the pseudorandom part
h_m.  An optional max_freq moves all coefficients with |xi| > max_freq
into a separate tail component F instead.  Since the series is the exact
inverse DFT of the samples, g_m + h_m (+ F_m) reproduces f * eta_m^2 on
the sample grid to rounding error, and reconstruction sums the series.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import LambdaTooSmall, MismatchedLambda, UnderSampled

__all__ = ["BumpPartition", "Decomposition", "build_partition", "decompose",
           "reconstruct", "sample_count_for"]


@dataclass(frozen=True)
class BumpPartition:
    lam: float
    m_count: int
    deriv_consts: tuple  # (C0, C1, C2): sup |eta^(k)| / lam^(k/2)

    @property
    def delta(self):
        return 1.0 / self.m_count

    def intervals(self):
        d = self.delta
        return [(m * d, (m + 1) * d) for m in range(self.m_count)]

    def center(self, m):
        return (m + 0.5) * self.delta

    def eta(self, m, x):
        """Window value; circular distance from the interval center."""
        x = np.asarray(x, dtype=float)
        v = (x - self.center(m)) % 1.0
        v = np.where(v > 0.5, v - 1.0, v) / self.delta
        return np.where(np.abs(v) < 1.0, np.cos(0.5 * np.pi * v), 0.0)

    def eta_sq(self, m, x):
        e = self.eta(m, x)
        return e * e


def build_partition(lam):
    """M = round(sqrt(lam)) cos^2 windows with an exact squared tiling."""
    if lam < 4:
        raise LambdaTooSmall("partition requires lambda >= 4")
    m_count = int(round(math.sqrt(lam)))
    delta = 1.0 / m_count
    # recorded constants: sup|eta| = 1, sup|eta'| = (pi/2)/delta,
    # sup|eta''| = (pi/2)^2/delta^2, normalized by lam^(k/2)
    c0 = 1.0
    c1 = (0.5 * math.pi / delta) / math.sqrt(lam)
    c2 = (0.5 * math.pi / delta) ** 2 / lam
    return BumpPartition(float(lam), m_count, (c0, c1, c2))


def sample_count_for(lam, min_mult=16):
    """Smallest aligned sample count: a multiple of 2M that is
    >= min_mult * lam^(3/2)."""
    m_count = int(round(math.sqrt(lam)))
    need = min_mult * lam ** 1.5
    per = int(math.ceil(need / (2 * m_count)))
    return 2 * m_count * per


@dataclass(frozen=True)
class Decomposition:
    lam: float
    sigma: float
    m_count: int
    n_samples: int
    sup_norm: float
    kept: tuple      # per interval: (n indices array, coefficients array)
    residual: tuple  # per interval: (n indices array, coefficients array)
    tail: tuple      # per interval: coefficients beyond max_freq
    reconstruction_error: float

    @property
    def cap(self):
        return int(math.ceil(self.lam ** (2.0 * self.sigma)))

    def xi(self, n):
        """Frequency of lattice index n (exactly pi lam^(1/2) Z for square lam)."""
        return math.pi * self.m_count * n

    def to_json(self):
        def pack(tier):
            return [{"n": [int(v) for v in ns],
                     "re": [float(c.real) for c in cs],
                     "im": [float(c.imag) for c in cs]}
                    for ns, cs in tier]
        doc = {
            "lambda": self.lam, "sigma": self.sigma, "m_count": self.m_count,
            "n_samples": self.n_samples, "sup_norm": self.sup_norm,
            "reconstruction_error": self.reconstruction_error,
            "kept": pack(self.kept), "residual": pack(self.residual),
            "tail": pack(self.tail),
        }
        return json.dumps(doc, sort_keys=True)


def _window_indices(m, q, n_samples):
    """Sample indices of I_m* = [(m - 1/2) delta, (m + 3/2) delta), wrapped."""
    start = (2 * m - 1) * q // 2
    return (start + np.arange(2 * q)) % n_samples


def decompose(samples, lam, sigma, max_freq=None):
    """Split sampled f into structured/pseudorandom parts per interval.

    ``samples`` must be f on the uniform grid j/S, with S a multiple of 2M
    and S >= 16 lam^(3/2); ``sample_count_for`` gives the canonical S.
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim != 1:
        raise UnderSampled("samples must be a 1D array")
    if lam < 4:
        raise LambdaTooSmall("decompose requires lambda >= 4")
    if not 0.0 <= sigma <= 0.5:
        raise ValueError("sigma must lie in [0, 1/2]")
    m_count = int(round(math.sqrt(lam)))
    s_count = samples.shape[0]
    if s_count < 16 * lam ** 1.5 - 1e-9:
        raise UnderSampled(
            f"need at least 16 lam^(3/2) = {16 * lam ** 1.5:.0f} samples, got {s_count}")
    if s_count % (2 * m_count) != 0:
        raise UnderSampled(
            f"sample count must be a multiple of 2M = {2 * m_count} "
            f"(use sample_count_for)")
    q = s_count // m_count
    sup = float(np.max(np.abs(samples)))
    threshold = lam ** (-sigma) * sup
    cap = int(math.ceil(lam ** (2.0 * sigma)))

    kept, residual, tail = [], [], []
    recon = np.zeros(s_count, dtype=complex)
    partition = build_partition(lam)
    xs = np.arange(s_count) / s_count
    for m in range(m_count):
        idx = _window_indices(m, q, s_count)
        w = samples[idx]
        c = np.fft.fft(w) / (2 * q)
        ns = np.fft.fftfreq(2 * q, d=1.0 / (2 * q)).astype(np.int64)
        # rotate to global phase convention exp(i pi M n x)
        x_start = (2 * m - 1) / (2.0 * m_count)
        c = c * np.exp(-1j * math.pi * m_count * ns * x_start)

        in_band = np.ones(ns.shape, dtype=bool)
        if max_freq is not None:
            in_band = np.abs(math.pi * m_count * ns) <= max_freq
        big = (np.abs(c) > threshold) & in_band
        big_idx = np.flatnonzero(big)
        if big_idx.size > cap:
            order = sorted(big_idx, key=lambda i: (-abs(c[i]), abs(ns[i]), ns[i]))
            big_idx = np.array(order[:cap], dtype=np.int64)
            big = np.zeros(ns.shape, dtype=bool)
            big[big_idx] = True
        small = in_band & ~big

        kept.append((ns[big].copy(), c[big].copy()))
        residual.append((ns[small].copy(), c[small].copy()))
        tail.append((ns[~in_band].copy(), c[~in_band].copy()))

        # reconstruct this window from the split tiers (exact inverse DFT)
        series = _series_from_tiers(
            (kept[-1], residual[-1], tail[-1]), m, m_count, q)
        recon[idx] += partition.eta_sq(m, xs[idx]) * series

    err = float(np.max(np.abs(recon - samples)))
    return Decomposition(float(lam), float(sigma), m_count, s_count, sup,
                         tuple(kept), tuple(residual), tuple(tail), err)


def _series_from_tiers(tiers, m, m_count, q):
    """Inverse DFT of the recombined coefficient tiers on window m."""
    x_start = (2 * m - 1) / (2.0 * m_count)
    coeffs = np.zeros(2 * q, dtype=complex)
    for ns, cs in tiers:
        if len(ns):
            np.add.at(coeffs, np.asarray(ns) % (2 * q), cs)
    ns_all = np.fft.fftfreq(2 * q, d=1.0 / (2 * q)).astype(np.int64)
    coeffs = coeffs * np.exp(1j * math.pi * m_count * ns_all * x_start)
    return np.fft.ifft(coeffs * (2 * q))


def reconstruct(dec, partition):
    """sum_m eta_m^2 * (kept + residual + tail series) on the sample grid."""
    if partition.lam != dec.lam or partition.m_count != dec.m_count:
        raise MismatchedLambda("partition and decomposition lambdas differ")
    s_count = dec.n_samples
    q = s_count // dec.m_count
    xs = np.arange(s_count) / s_count
    out = np.zeros(s_count, dtype=complex)
    for m in range(dec.m_count):
        idx = _window_indices(m, q, s_count)
        series = _series_from_tiers(
            (dec.kept[m], dec.residual[m], dec.tail[m]), m, dec.m_count, q)
        out[idx] += partition.eta_sq(m, xs[idx]) * series
    return out
