"""Lambda-ladder decay experiments and slope fits.

A DecayExperiment names a registry phase, a witness rule (a named
constructor so experiments stay serializable), and a ladder of lambda
values.  Running it produces one IntegralResult per rung; fitting runs
ordinary least squares on (ln lambda, ln |value|) over the tail rungs, where
the power law has shaken off its lower-order contamination.

Witness rules
-------------
All constructed witnesses have sup norm at most 1, so magnitudes need no
norm correction.  The sharp rules place the critical set of the net phase
inside the integration box, not at its corner:

* ``indicator_f2``     f1 = f3 = 1, f2 = indicator of [0, pi/(4 lam)].
* ``degenerate_chirp`` for x1x2 + x2x3 + r x3x1: unimodular quadratic
  factors cancelling the phase gradient on the plane
  x2 + r(x1 + x3) = c through the box center.
* ``log_chirp``        exp(-i lam u* ln x) with u* the product of the axis
  midpoints, putting the stationary hypersurface x1x2x3 = u* mid-box.
* ``x3k_sharp``        quadratic chirp in x1, the matching stationary-value
  cancellation exp(-i lam Psi(x2)) on [1/8, 3/8] with
  Psi(t) = -t^2/2 + t/2 - 1/8, and an indicator of length
  (pi/4)^{1/k} lam^{-1/k} in x3.
* ``chain3_sharp``     stationary chirps centered at 1/2 for x1, x2 and the
  2D stationary-value cancellation in x3 (supports [1/4, 3/4]).
* ``plain_chirp``      exp(i lam a x^2) in every factor (diagnostic rule).
* ``ones``             all three factors identically 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import DegeneratePoints, UnknownName
from .phases import registry_get
from .quadrature import QuadConfig, eval_T3
from .witnesses import make_chirp, make_indicator, make_log_chirp

__all__ = ["DecayExperiment", "DecayFit", "Verdict", "run_ladder", "fit_slope",
           "compare", "witness_rule", "WITNESS_RULES"]


def _rule_ones(lam, box, params):
    fs = tuple(make_indicator(lo, hi) for lo, hi in box)
    return fs


def _rule_indicator_f2(lam, box, params):
    f1 = make_indicator(*box[0])
    f3 = make_indicator(*box[2])
    f2 = make_indicator(0.0, math.pi / (4.0 * lam))
    return f1, f2, f3


def _rule_degenerate_chirp(lam, box, params):
    r = float(params.get("r", 1.0))
    centers = [0.5 * (lo + hi) for lo, hi in box]
    c = centers[1] + r * (centers[0] + centers[2])
    # h_j cancelling the gradient of phi_r on {x2 + r(x1+x3) = c}
    a = (r / 2.0, 1.0 / (2.0 * r), r / 2.0)
    b = (-c, -c / r, -c)
    return tuple(make_chirp(lam * a[j], lam * b[j], 0.0, box[j]) for j in range(3))


def _rule_log_chirp(lam, box, params):
    ustar = params.get("ustar")
    if ustar is None:
        ustar = math.prod(0.5 * (lo + hi) for lo, hi in box)
    return tuple(make_log_chirp(-lam * float(ustar), box[j]) for j in range(3))


def _rule_x3k_sharp(lam, box, params):
    k = int(params.get("k", 3))
    f1 = make_chirp(lam / 2.0, -lam / 2.0, 0.0, (0.0, 1.0))
    # cancels the stationary value Psi(t) = -t^2/2 + t/2 - 1/8 of the x1 block
    f2 = make_chirp(lam / 2.0, -lam / 2.0, lam / 8.0, (0.125, 0.375))
    f3 = make_indicator(0.0, (math.pi / 4.0) ** (1.0 / k) * lam ** (-1.0 / k))
    return f1, f2, f3


def _rule_chain3_sharp(lam, box, params):
    # tau = 1, expansion center 1/2; inner 2D stationary value
    # Psi(x3) = 1/2 + (x3 - 1/2)/2 - (x3 - 1/2)^2/3
    f1 = make_chirp(lam, -1.5 * lam, 0.5 * lam, (0.25, 0.75))
    f2 = make_chirp(lam, -2.0 * lam, 0.75 * lam, (0.25, 0.75))
    f3 = make_chirp(lam / 3.0, -5.0 * lam / 6.0, -lam / 6.0, (0.25, 0.75))
    return f1, f2, f3


def _rule_plain_chirp(lam, box, params):
    a = float(params.get("a", 0.5))
    return tuple(make_chirp(a * lam, 0.0, 0.0, box[j]) for j in range(3))


WITNESS_RULES = {
    "ones": _rule_ones,
    "indicator_f2": _rule_indicator_f2,
    "degenerate_chirp": _rule_degenerate_chirp,
    "log_chirp": _rule_log_chirp,
    "x3k_sharp": _rule_x3k_sharp,
    "chain3_sharp": _rule_chain3_sharp,
    "plain_chirp": _rule_plain_chirp,
}


def witness_rule(name, lam, box, params=None):
    if name not in WITNESS_RULES:
        raise UnknownName(f"unknown witness rule {name!r}")
    return WITNESS_RULES[name](lam, box, params or {})


@dataclass(frozen=True)
class DecayExperiment:
    phase_name: str
    witness: str
    ladder: tuple
    witness_params: dict = field(default_factory=dict)
    form: str = "T3"
    box: tuple | None = None  # overrides the registry phase's domain

    def __post_init__(self):
        lad = tuple(self.ladder)
        if len(lad) < 4 or any(b <= a for a, b in zip(lad, lad[1:])):
            raise ValueError("ladder must be strictly increasing with length >= 4")
        object.__setattr__(self, "ladder", lad)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    stderr: float
    r_squared: float
    points: tuple  # of (ln lam, ln |value|)


class Verdict(Enum):
    MATCH = "Match"
    MISMATCH = "Mismatch"
    INCONCLUSIVE = "Inconclusive"


def resolve_phase(exp):
    entry = registry_get(exp.phase_name)
    desc = entry.descriptor
    if exp.box is not None:
        desc = desc.with_domain(exp.box)
    return entry, desc


def run_ladder(exp, cfg=None):
    """One IntegralResult per rung; a rung failure aborts naming the lambda."""
    cfg = cfg or QuadConfig()
    if exp.form != "T3":
        raise ValueError("only the T3 form is wired into ladder runs")
    _, desc = resolve_phase(exp)
    results = []
    for lam in exp.ladder:
        fs = witness_rule(exp.witness, lam, desc.domain, exp.witness_params)
        try:
            results.append(eval_T3(desc, *fs, lam, cfg))
        except Exception as exc:
            raise type(exc)(f"rung lam={lam} failed: {exc}") from exc
    return results


def fit_slope(points, tail=4):
    """OLS fit on the last ``tail`` points of (ln lam, ln |value|)."""
    if tail < 3:
        raise ValueError("tail must be at least 3")
    pts = list(points)
    if len(pts) < tail:
        raise ValueError(f"need at least {tail} points, got {len(pts)}")
    for x, y in pts:
        if not np.isfinite(y):
            raise DegeneratePoints(f"zero magnitude at ln lam = {x:.6g}")
    xs = np.array([p[0] for p in pts[-tail:]])
    ys = np.array([p[1] for p in pts[-tail:]])
    n = len(xs)
    xbar = xs.mean()
    sxx = float(np.sum((xs - xbar) ** 2))
    slope = float(np.sum((xs - xbar) * (ys - ys.mean())) / sxx)
    intercept = float(ys.mean() - slope * xbar)
    resid = ys - (intercept + slope * xs)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    stderr = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 else 0.0
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(slope, intercept, stderr, r2, tuple(map(tuple, pts)))


def points_from_results(results):
    pts = []
    for r in results:
        mag = abs(r.value)
        pts.append((math.log(r.lam), math.log(mag) if mag > 0 else -math.inf))
    return pts


def compare(fit, reference_gamma, tol):
    """Match / Mismatch / Inconclusive against a reference exponent."""
    gamma = float(Fraction(reference_gamma)) if not isinstance(reference_gamma, float) \
        else reference_gamma
    if abs(fit.slope + gamma) <= tol:
        return Verdict.MATCH
    if fit.stderr > tol:
        return Verdict.INCONCLUSIVE
    return Verdict.MISMATCH
