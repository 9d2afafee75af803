import math

import numpy as np
import pytest

from osclab.errors import EmptyInterval, NonPositiveSupport
from osclab.witnesses import (TestFunction1D, make_band_limited, make_chirp,
                              make_constant, make_indicator, make_log_chirp,
                              norm_N_lambda)


def test_indicator_values():
    f = make_indicator(0.0, 1.0)
    assert f(np.array([0.5]))[0] == 1.0
    lam = 64.0
    g = make_indicator(0.0, math.pi / (4 * lam))
    assert g(np.array([0.01]))[0] == 1.0  # pi/256 > 0.01
    assert g(np.array([0.5]))[0] == 0.0


def test_indicator_empty():
    with pytest.raises(EmptyInterval):
        make_indicator(1.0, 0.0)


def test_chirp_values():
    lam = 10.0
    f = make_chirp(lam / 2, 0.0, 0.0, (0, 1))
    assert f(np.array([1.0]))[0] == pytest.approx(np.exp(5j), abs=1e-15)
    g = make_chirp(0.0, 0.0, 0.0, (0.2, 0.8))
    assert g(np.array([0.5]))[0] == 1.0
    h = make_chirp(32.0, -16.0, 0.0, (0, 1))
    assert h(np.array([0.25]))[0] == pytest.approx(np.exp(-2j), abs=1e-15)


def test_log_chirp_values():
    f = make_log_chirp(-8.0, (0.5, 1.0))
    assert f(np.array([1.0]))[0] == 1.0
    assert f(np.array([0.5]))[0] == pytest.approx(np.exp(1j * 8 * math.log(2)), abs=1e-14)
    with pytest.raises(NonPositiveSupport):
        make_log_chirp(-8.0, (-1.0, 1.0))


def test_unimodularity_and_support():
    for f in (make_chirp(37.0, -5.0, 1.0, (0.1, 0.9)), make_log_chirp(12.0, (0.25, 1.0))):
        lo, hi = f.support
        xs = np.linspace(lo, hi, 500)
        assert np.max(np.abs(np.abs(f(xs)) - 1.0)) < 1e-15
        assert f(np.array([lo - 0.05]))[0] == 0.0


def test_continuity_at_interior_breakpoints():
    # two chirp pieces matched in value at the seam
    seam = 0.5
    a = make_chirp(2.0, 0.0, 0.0, (0.0, seam)).pieces[0]
    val = np.exp(1j * 2.0 * seam * seam)
    c = np.angle(val) - 3.0 * seam
    f = TestFunction1D((((0.0, seam), a[1]), ((seam, 1.0),
                        make_chirp(0.0, 3.0, c, (seam, 1.0)).pieces[0][1])))
    left = f(np.array([seam - 1e-9]))[0]
    right = f(np.array([seam + 1e-9]))[0]
    assert abs(left - right) < 1e-7


def test_norm_constant():
    f = make_constant(2.5j, 0.0, 1.0)
    assert norm_N_lambda(f, 3, 7.0) == pytest.approx(2.5)


def test_norm_linear_chirp():
    lam = 12.0
    f = make_chirp(0.0, lam, 0.0, (0, 1))  # e^{i lam x}: |D^k f| = lam^k
    assert norm_N_lambda(f, 2, lam) == pytest.approx(3.0, rel=1e-9)


def test_norm_quadratic_chirp_derived():
    # f = e^{i lam x^2 / 2} on [0,1], N=1: 1 + lam^-1 sup|lam x| = 2
    lam = 10.0
    f = make_chirp(lam / 2, 0.0, 0.0, (0, 1))
    assert norm_N_lambda(f, 1, lam) == pytest.approx(2.0, rel=1e-9)


def test_norm_band_limited():
    f = make_band_limited(2 * math.pi, [(1, 1.0)], (0, 1))
    # |D^k| = (2 pi)^k; norm at lam = 2 pi is N+1
    assert norm_N_lambda(f, 2, 2 * math.pi) == pytest.approx(3.0, rel=1e-9)


def test_conjugate():
    f = make_chirp(3.0, -1.0, 0.5, (0, 1))
    xs = np.linspace(0, 1, 17)
    assert np.allclose(f.conjugate()(xs), np.conjugate(f(xs)))


def test_json_round_trip():
    f = TestFunction1D(make_chirp(3.0, -1.0, 0.5, (0, 0.5)).pieces
                       + make_indicator(0.5, 1.0).pieces)
    g = TestFunction1D.from_json(f.to_json())
    xs = np.linspace(0, 1, 33)
    assert np.allclose(f(xs), g(xs))
    assert g.breakpoints == f.breakpoints
