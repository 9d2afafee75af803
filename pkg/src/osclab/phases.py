"""Phase functions with exact derivatives, plus the registry of named phases.

A phase is a sparse multivariate polynomial with rational coefficients,
optionally extended by logarithmic terms ``sum_j L_j * ln(x_j)`` (the only
non-polynomial analytic phases supported; their derivative rules are
hand-coded).  Polynomial differentiation and point evaluation are exact in
rational arithmetic, with one final rounding to float, so derivative
identities can be tested to machine precision.

Conventions: a monomial is ``(alpha, coeff)`` where ``alpha`` is a tuple of
nonnegative integer exponents of length ``dimension`` and ``coeff`` is a
``Fraction``.  Partial derivatives are requested by multi-index, total
order at most 3.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import OutOfDomain, UnknownName, UnsupportedOrder

__all__ = [
    "PhaseDescriptor",
    "PhaseRegistryEntry",
    "eval_partial",
    "registry_get",
    "registry_names",
    "poly_phase",
]

_DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class PhaseDescriptor:
    """A smooth real phase on an axis-aligned box.

    ``monomials`` holds the polynomial part; ``log_coeffs`` (one Fraction
    per axis, or None) holds coefficients of ``ln(x_j)``.  Axes carrying a
    log term restrict the analytic sub-box to ``x_j > 0``.
    """

    dimension: int
    monomials: tuple[tuple[tuple[int, ...], Fraction], ...]
    domain: tuple[tuple[float, float], ...]
    log_coeffs: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("phase dimension must be at least 2")
        if len(self.domain) != self.dimension:
            raise ValueError("domain must have one interval per axis")
        for alpha, _ in self.monomials:
            if len(alpha) != self.dimension or any(a < 0 for a in alpha):
                raise ValueError(f"bad multi-index {alpha!r}")
        if self.log_coeffs is not None and len(self.log_coeffs) != self.dimension:
            raise ValueError("log_coeffs must have one entry per axis")

    # -- structure ------------------------------------------------------

    @property
    def is_polynomial(self):
        return self.log_coeffs is None or all(c == 0 for c in self.log_coeffs)

    def degree_in(self, axis):
        """Largest exponent of x_axis over the polynomial part."""
        deg = max((alpha[axis] for alpha, _ in self.monomials), default=0)
        if not self.is_polynomial and self.log_coeffs[axis] != 0:
            return None  # not polynomial in this axis
        return deg

    def with_domain(self, domain):
        return replace(self, domain=tuple((float(a), float(b)) for a, b in domain))

    def box_lengths(self):
        return tuple(hi - lo for lo, hi in self.domain)

    def contains(self, point, tol=_DOMAIN_TOL):
        if len(point) != self.dimension:
            return False
        for x, (lo, hi) in zip(point, self.domain):
            if x < lo - tol or x > hi + tol:
                return False
        if self.log_coeffs is not None:
            for x, c in zip(point, self.log_coeffs):
                if c != 0 and x <= 0:
                    return False
        return True

    # -- differentiation (exact) -----------------------------------------

    def differentiate(self, multi_index):
        """Exact polynomial part of the partial derivative d^alpha.

        Returns a new monomial tuple; the log-term contribution is handled
        separately in evaluation since it is not polynomial.
        """
        monos = self.monomials
        for axis, order in enumerate(multi_index):
            for _ in range(order):
                nxt = []
                for alpha, coeff in monos:
                    k = alpha[axis]
                    if k == 0:
                        continue
                    beta = alpha[:axis] + (k - 1,) + alpha[axis + 1:]
                    nxt.append((beta, coeff * k))
                monos = tuple(nxt)
        return monos

    # -- serialization ----------------------------------------------------

    def to_json(self):
        doc = {
            "dimension": self.dimension,
            "monomials": [
                {"alpha": list(alpha), "num": c.numerator, "den": c.denominator}
                for alpha, c in self.monomials
            ],
            "domain": [[lo, hi] for lo, hi in self.domain],
        }
        if not self.is_polynomial:
            doc["log_terms"] = [
                {"axis": j, "num": c.numerator, "den": c.denominator}
                for j, c in enumerate(self.log_coeffs)
                if c != 0
            ]
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text):
        doc = json.loads(text)
        dim = int(doc["dimension"])
        monos = tuple(
            (tuple(int(a) for a in m["alpha"]), Fraction(int(m["num"]), int(m["den"])))
            for m in doc["monomials"]
        )
        domain = tuple((float(a), float(b)) for a, b in doc["domain"])
        log_coeffs = None
        if "log_terms" in doc:
            coeffs = [Fraction(0)] * dim
            for t in doc["log_terms"]:
                coeffs[int(t["axis"])] = Fraction(int(t["num"]), int(t["den"]))
            log_coeffs = tuple(coeffs)
        return PhaseDescriptor(dim, monos, domain, log_coeffs)


def poly_phase(dimension, terms, domain=None, logs=None):
    """Build a PhaseDescriptor from ``{alpha: coeff}`` style terms.

    ``terms`` is an iterable of (alpha, coeff) with coeff anything Fraction
    accepts exactly (int, Fraction, or "p/q" string).  Default domain is the
    unit box.
    """
    if domain is None:
        domain = ((0.0, 1.0),) * dimension
    monos = tuple((tuple(alpha), Fraction(c)) for alpha, c in terms)
    log_coeffs = None
    if logs is not None:
        coeffs = [Fraction(0)] * dimension
        for axis, c in logs.items():
            coeffs[axis] = Fraction(c)
        log_coeffs = tuple(coeffs)
    return PhaseDescriptor(dimension, monos, tuple(tuple(map(float, iv)) for iv in domain), log_coeffs)


# -- evaluation ----------------------------------------------------------

def _eval_monos_exact(monos, point_fracs):
    total = Fraction(0)
    for alpha, coeff in monos:
        term = coeff
        for x, k in zip(point_fracs, alpha):
            if k:
                term *= x ** k
        total += term
    return total


def eval_partial(phase, multi_index, point):
    """Evaluate d^alpha(phase) at a point; exact rationals, one rounding.

    Raises UnsupportedOrder for |alpha| > 3 and OutOfDomain for points
    outside the analytic sub-box.
    """
    multi_index = tuple(int(k) for k in multi_index)
    if len(multi_index) != phase.dimension or any(k < 0 for k in multi_index):
        raise UnsupportedOrder(f"bad multi-index {multi_index!r}")
    if sum(multi_index) > 3:
        raise UnsupportedOrder(f"|alpha| = {sum(multi_index)} exceeds 3")
    if not phase.contains(point):
        raise OutOfDomain(f"point {tuple(point)!r} outside analytic sub-box")

    point_fracs = [Fraction(float(x)) for x in point]
    value = _eval_monos_exact(phase.differentiate(multi_index), point_fracs)
    out = float(value)

    if phase.log_coeffs is not None:
        active = [j for j in range(phase.dimension) if multi_index[j] > 0]
        if len(active) == 0:
            for j, c in enumerate(phase.log_coeffs):
                if c != 0:
                    out += float(c) * math.log(point[j])
        elif len(active) == 1:
            j = active[0]
            c = phase.log_coeffs[j]
            if c != 0:
                k = multi_index[j]
                # d^k/dx^k ln x = (-1)^(k-1) (k-1)! x^(-k)
                coeff = c * Fraction((-1) ** (k - 1) * math.factorial(k - 1))
                out += float(coeff * Fraction(float(point[j])) ** (-k))
        # mixed partials of single-variable log terms vanish
    return out


def _mono_arrays(monos, dimension):
    """Split monomials into float coefficient and exponent arrays."""
    n = len(monos)
    coeffs = np.empty(n)
    expo = np.zeros((n, dimension), dtype=np.int64)
    for t, (alpha, c) in enumerate(monos):
        coeffs[t] = float(c)
        expo[t] = alpha
    return coeffs, expo


def eval_poly_vec(monos, dimension, points):
    """Vectorized float evaluation of a monomial list at ``points`` (n, dim).

    Uses Neumaier-compensated summation over terms so that near-cancelling
    coefficient combinations stay accurate.
    """
    points = np.asarray(points, dtype=float)
    coeffs, expo = _mono_arrays(monos, dimension)
    total = np.zeros(points.shape[0])
    comp = np.zeros(points.shape[0])
    for t in range(len(coeffs)):
        term = np.full(points.shape[0], coeffs[t])
        for j in range(dimension):
            k = expo[t, j]
            if k:
                term = term * points[:, j] ** k
        s = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - s) + term, (term - s) + total)
        total = s
    return total + comp


def partial_monos(phase, multi_index):
    """Monomial list of a partial derivative (cached helper)."""
    return _partial_monos_cached(phase, tuple(multi_index))


@lru_cache(maxsize=512)
def _partial_monos_cached(phase, multi_index):
    return phase.differentiate(multi_index)


def eval_partial_vec(phase, multi_index, points):
    """Float vectorized partial-derivative evaluation (no log terms)."""
    if not phase.is_polynomial:
        # log terms appear only in 1D directions; vectorize via eval_partial
        return np.array([eval_partial(phase, multi_index, p) for p in np.asarray(points)])
    monos = partial_monos(phase, multi_index)
    return eval_poly_vec(monos, phase.dimension, points)


def sampled_lipschitz(phase, axis, samples_per_axis=17):
    """Sampled sup of |d phase / d x_axis| over the domain box."""
    grids = [np.linspace(lo, hi, samples_per_axis) for lo, hi in phase.domain]
    if phase.log_coeffs is not None and phase.log_coeffs[axis] != 0:
        lo, hi = phase.domain[axis]
        if lo <= 0:
            raise OutOfDomain("log phase sampled at nonpositive coordinate")
    mesh = np.meshgrid(*grids, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    alpha = tuple(1 if j == axis else 0 for j in range(phase.dimension))
    vals = eval_poly_vec(partial_monos(phase, alpha), phase.dimension, pts)
    if phase.log_coeffs is not None and phase.log_coeffs[axis] != 0:
        vals = vals + float(phase.log_coeffs[axis]) / pts[:, axis]
    return float(np.max(np.abs(vals)))


# -- registry ------------------------------------------------------------

@dataclass(frozen=True)
class PhaseRegistryEntry:
    name: str
    descriptor: PhaseDescriptor
    reference_exponent: Fraction | None = None
    note: str = ""


def _chain_monos(n):
    return [((0,) * i + (1, 1) + (0,) * (n - i - 2), 1) for i in range(n - 1)]


def _build_entry(name, params):
    if name == "ex_first":
        # x2 (x1 + x3)
        desc = poly_phase(3, [((1, 1, 0), 1), ((0, 1, 1), 1)])
        return PhaseRegistryEntry(name, desc, Fraction(1), "sharp on L^inf x L^inf x L^inf")
    if name == "chain3":
        desc = poly_phase(3, [((1, 1, 0), 1), ((0, 1, 1), 1)])
        return PhaseRegistryEntry(name, desc, Fraction(1), "chain of length 3")
    if name == "cyclic":
        desc = poly_phase(3, [((1, 1, 0), 1), ((0, 1, 1), 1), ((1, 0, 1), 1)])
        return PhaseRegistryEntry(name, desc, Fraction(1, 2), "optimal exponent 1/2")
    if name == "cyclic_r":
        r = Fraction(params.get("r", 1)).limit_denominator(10**9)
        desc = poly_phase(3, [((1, 1, 0), 1), ((0, 1, 1), 1), ((1, 0, 1), r)])
        return PhaseRegistryEntry(f"cyclic_r(r={params.get('r', 1)})", desc, Fraction(1, 2),
                                  "one-parameter degenerate family")
    if name == "triple_product":
        desc = poly_phase(3, [((1, 1, 1), 1)])
        return PhaseRegistryEntry(name, desc, Fraction(1, 2), "Mellin-type example")
    if name == "x3k":
        k = int(params.get("k", 3))
        if k < 2:
            raise UnknownName(f"x3k requires k >= 2, got {k}")
        desc = poly_phase(3, [((1, 1, 0), 1), ((0, 1, k), 1)])
        ref = Fraction(1, 2) + Fraction(1, k) if k >= 3 else None
        note = "sharp 1/2 + 1/k" if k >= 3 else "k=2: every exponent below 1 holds"
        return PhaseRegistryEntry(f"x3k(k={k})", desc, ref, note)
    if name == "chain_n":
        n = int(params.get("n", 3))
        if n not in (3, 4, 5):
            raise UnknownName(f"chain_n requires n in {{3,4,5}}, got {n}")
        desc = poly_phase(n, _chain_monos(n))
        return PhaseRegistryEntry(f"chain_n(n={n})", desc, Fraction(n - 1, 2),
                                  "exponent (n-1)/2 realized")
    if name == "gx":
        desc = poly_phase(2, [((2, 1), 1), ((1, 2), -1)])
        return PhaseRegistryEntry(name, desc, Fraction(1, 4),
                                  "proved bound 1/4; optimal exponent unknown")
    if name == "bourgain":
        # x + (y - x)^2
        desc = poly_phase(2, [((1, 0), 1), ((0, 2), 1), ((1, 1), -2), ((2, 0), 1)])
        return PhaseRegistryEntry(name, desc, None, "curved-web exemplar")
    if name == "linear_sum":
        desc = poly_phase(2, [((1, 0), 1), ((0, 1), 1)])
        return PhaseRegistryEntry(name, desc, None, "flat web")
    raise UnknownName(name)


_BARE_NAMES = ("ex_first", "chain3", "cyclic", "cyclic_r", "triple_product",
               "x3k", "chain_n", "gx", "bourgain", "linear_sum")


def _parse_name(name):
    """Split 'x3k(k=3)' into ('x3k', {'k': 3}); bare names get defaults."""
    name = name.strip()
    if "(" not in name:
        return name, {}
    if not name.endswith(")"):
        raise UnknownName(name)
    base, _, rest = name.partition("(")
    params = {}
    for item in rest[:-1].split(","):
        if not item.strip():
            continue
        key, _, val = item.partition("=")
        key = key.strip()
        val = val.strip()
        try:
            params[key] = int(val)
        except ValueError:
            params[key] = float(val)
    return base.strip(), params


def registry_get(name, **overrides):
    """Look up a phase by name; parameterized names use 'x3k(k=4)' syntax."""
    base, params = _parse_name(name)
    params.update(overrides)
    if base not in _BARE_NAMES:
        raise UnknownName(name)
    return _build_entry(base, params)


def registry_names():
    """All registry rows at default parameters, for listings."""
    rows = []
    for base in _BARE_NAMES:
        if base == "x3k":
            rows.append(registry_get("x3k(k=3)"))
        elif base == "cyclic_r":
            rows.append(registry_get("cyclic_r(r=1)"))
        elif base == "chain_n":
            for n in (3, 4, 5):
                rows.append(registry_get(f"chain_n(n={n})"))
        else:
            rows.append(registry_get(base))
    return rows
