"""Piecewise test functions used as lower-bound witnesses.

A TestFunction1D is a finite list of disjoint intervals, each carrying one
piece kind:

    Constant(c)            value c
    Chirp(a, b, c)         value exp(i (a x^2 + b x + c))
    LogChirp(a)            value exp(i a ln x), requires x > 0
    BandLimited(w, coeffs) value sum_k c_k exp(i k w x)

Outside its pieces a function is identically zero.  Indicators are
represented exactly (no mollification); the quadrature module splits its
panels at the breakpoints so the sharp cutoffs cost nothing in accuracy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInterval, NonPositiveSupport

__all__ = [
    "TestFunction1D",
    "make_indicator",
    "make_chirp",
    "make_log_chirp",
    "make_constant",
    "make_band_limited",
    "norm_N_lambda",
]


@dataclass(frozen=True)
class Constant:
    value: complex

    def eval(self, x):
        return np.full(np.shape(x), complex(self.value))

    def conjugate(self):
        return Constant(np.conjugate(self.value))

    def sup_bound(self):
        return abs(self.value)

    def to_doc(self):
        return {"kind": "constant", "re": self.value.real, "im": self.value.imag}


@dataclass(frozen=True)
class Chirp:
    a: float
    b: float
    c: float

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(1j * (self.a * x * x + self.b * x + self.c))

    def conjugate(self):
        return Chirp(-self.a, -self.b, -self.c)

    def sup_bound(self):
        return 1.0

    def to_doc(self):
        return {"kind": "chirp", "a": self.a, "b": self.b, "c": self.c}


@dataclass(frozen=True)
class LogChirp:
    a: float

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(1j * self.a * np.log(x))

    def conjugate(self):
        return LogChirp(-self.a)

    def sup_bound(self):
        return 1.0

    def to_doc(self):
        return {"kind": "log_chirp", "a": self.a}


@dataclass(frozen=True)
class BandLimited:
    omega: float
    coeffs: tuple  # of (k: int, c: complex)

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for k, c in self.coeffs:
            out += c * np.exp(1j * k * self.omega * x)
        return out

    def conjugate(self):
        return BandLimited(self.omega, tuple((-k, np.conjugate(c)) for k, c in self.coeffs))

    def sup_bound(self):
        return float(sum(abs(c) for _, c in self.coeffs))

    def to_doc(self):
        return {"kind": "band_limited", "omega": self.omega,
                "coeffs": [[k, c.real, c.imag] for k, c in self.coeffs]}


_PIECE_KINDS = {"constant", "chirp", "log_chirp", "band_limited"}


def _piece_from_doc(doc):
    kind = doc["kind"]
    if kind == "constant":
        return Constant(complex(doc["re"], doc["im"]))
    if kind == "chirp":
        return Chirp(doc["a"], doc["b"], doc["c"])
    if kind == "log_chirp":
        return LogChirp(doc["a"])
    if kind == "band_limited":
        return BandLimited(doc["omega"], tuple((int(k), complex(re, im))
                                               for k, re, im in doc["coeffs"]))
    raise ValueError(f"unknown piece kind {kind!r}")


@dataclass(frozen=True)
class TestFunction1D:
    """Piecewise function; ``pieces`` is a tuple of ((lo, hi), piece)."""

    pieces: tuple

    def __post_init__(self):
        prev = -np.inf
        for (lo, hi), piece in self.pieces:
            if not lo < hi:
                raise EmptyInterval(f"piece interval [{lo}, {hi}] is empty")
            if lo < prev - 1e-15:
                raise ValueError("pieces must be sorted and non-overlapping")
            if isinstance(piece, LogChirp) and lo <= 0:
                raise NonPositiveSupport("log-chirp piece requires support in x > 0")
            prev = hi

    @property
    def breakpoints(self):
        pts = []
        for (lo, hi), _ in self.pieces:
            pts.append(lo)
            pts.append(hi)
        return tuple(sorted(set(pts)))

    @property
    def support(self):
        if not self.pieces:
            return None
        return (self.pieces[0][0][0], self.pieces[-1][0][1])

    def sup_bound(self):
        return max((p.sup_bound() for _, p in self.pieces), default=0.0)

    def piece_at(self, x):
        """Piece covering x, or None (endpoints resolve to the piece)."""
        for (lo, hi), piece in self.pieces:
            if lo <= x <= hi:
                return piece
        return None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for (lo, hi), piece in self.pieces:
            mask = (x >= lo) & (x <= hi)
            if np.any(mask):
                out[mask] = piece.eval(x[mask])
        return out

    def conjugate(self):
        return TestFunction1D(tuple((iv, p.conjugate()) for iv, p in self.pieces))

    def is_zero(self):
        return all(isinstance(p, Constant) and p.value == 0 for _, p in self.pieces)

    def to_json(self):
        return json.dumps(
            {"pieces": [{"lo": lo, "hi": hi, **piece.to_doc()}
                        for (lo, hi), piece in self.pieces]},
            sort_keys=True)

    @staticmethod
    def from_json(text):
        doc = json.loads(text)
        pieces = tuple(((p["lo"], p["hi"]), _piece_from_doc(p)) for p in doc["pieces"])
        return TestFunction1D(pieces)


# -- constructors ---------------------------------------------------------

def make_indicator(a, b):
    if not a < b:
        raise EmptyInterval(f"[{a}, {b}] is empty")
    return TestFunction1D((((float(a), float(b)), Constant(1.0 + 0j)),))


def make_constant(value, a, b):
    if not a < b:
        raise EmptyInterval(f"[{a}, {b}] is empty")
    return TestFunction1D((((float(a), float(b)), Constant(complex(value))),))


def make_chirp(a, b, c, support):
    lo, hi = support
    if not lo < hi:
        raise EmptyInterval(f"[{lo}, {hi}] is empty")
    return TestFunction1D((((float(lo), float(hi)), Chirp(float(a), float(b), float(c))),))


def make_log_chirp(a, support):
    lo, hi = support
    if not lo < hi:
        raise EmptyInterval(f"[{lo}, {hi}] is empty")
    if lo <= 0:
        raise NonPositiveSupport("log-chirp support must lie in x > 0")
    return TestFunction1D((((float(lo), float(hi)), LogChirp(float(a))),))


def make_band_limited(omega, coeffs, support):
    lo, hi = support
    if not lo < hi:
        raise EmptyInterval(f"[{lo}, {hi}] is empty")
    return TestFunction1D((((float(lo), float(hi)),
                            BandLimited(float(omega), tuple((int(k), complex(c)) for k, c in coeffs))),))


# -- the lambda-adapted norm ----------------------------------------------

def _piece_derivative_sup(piece, lo, hi, order, grid=4096):
    """sup over [lo, hi] of |piece^(order)|, symbolic per kind.

    Chirp derivatives take the form p_k(x) * exp(i g(x)) with p_k a complex
    polynomial built from the recursion p_{k+1} = p_k' + i g' p_k, so the
    sup reduces to maximizing |p_k| on the interval: dense grid plus one
    golden-section refinement around the best point.
    """
    if isinstance(piece, Constant):
        return abs(piece.value) if order == 0 else 0.0

    if isinstance(piece, Chirp):
        # p as ascending coefficient list
        p = np.array([1.0 + 0j])
        gprime = np.array([piece.b, 2.0 * piece.a], dtype=complex)  # b + 2 a x
        for _ in range(order):
            dp = np.polynomial.polynomial.polyder(p) if len(p) > 1 else np.array([0j])
            p = np.polynomial.polynomial.polyadd(dp, 1j * np.polynomial.polynomial.polymul(gprime, p))
        fn = lambda x: np.abs(np.polynomial.polynomial.polyval(x, p))
    elif isinstance(piece, LogChirp):
        c = 1.0 + 0j
        for k in range(order):
            c = c * (1j * piece.a - k)
        fn = lambda x: np.abs(c) * np.asarray(x, dtype=float) ** (-order)
    elif isinstance(piece, BandLimited):
        def fn(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros(np.shape(x), dtype=complex)
            for k, cc in piece.coeffs:
                out += cc * (1j * k * piece.omega) ** order * np.exp(1j * k * piece.omega * x)
            return np.abs(out)
    else:  # pragma: no cover
        raise TypeError(f"unknown piece {piece!r}")

    xs = np.linspace(lo, hi, grid)
    vals = np.atleast_1d(fn(xs))
    i = int(np.argmax(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, grid - 1)]
    # golden-section refinement of the local maximum
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    for _ in range(40):
        if fn(np.array([c]))[0] > fn(np.array([d]))[0]:
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
    best = 0.5 * (a + b)
    return float(max(vals[i], fn(np.array([best]))[0]))


def norm_N_lambda(f, N, lam):
    """sum_{k=0..N} lam^-k * sup |f^(k)|, sup taken piecewise."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    total = 0.0
    for k in range(N + 1):
        sup_k = 0.0
        for (lo, hi), piece in f.pieces:
            sup_k = max(sup_k, _piece_derivative_sup(piece, lo, hi, k))
        total += lam ** (-k) * sup_k
    return total
