import math

import numpy as np
import pytest

from osclab.errors import LambdaTooSmall, MismatchedLambda, UnderSampled
from osclab.microlocal import (build_partition, decompose, reconstruct,
                               sample_count_for)


def bandlimited(s_count, modes, seed):
    rng = np.random.Generator(np.random.Philox(key=seed))
    xs = np.arange(s_count) / s_count
    rot = np.exp(2j * math.pi * xs)
    coeffs = rng.normal(size=2 * modes + 1) + 1j * rng.normal(size=2 * modes + 1)
    out = np.zeros(s_count, dtype=complex)
    cur = np.exp(-2j * math.pi * modes * xs)
    for c in coeffs:
        out += c * cur
        cur = cur * rot
    return out / np.max(np.abs(out))


def test_partition_counts():
    p = build_partition(64.0)
    assert p.m_count == 8
    assert p.intervals()[0] == (0.0, 0.125)
    assert len(p.intervals()) == 8


def test_partition_of_unity():
    p = build_partition(256.0)
    xs = np.linspace(0.0, 1.0, 10001)
    total = sum(p.eta_sq(m, xs) for m in range(p.m_count))
    assert np.max(np.abs(total - 1.0)) <= 1e-12


def test_partition_derivative_constants():
    p = build_partition(100.0)
    m = 3
    xs = np.linspace(0.0, 1.0, 200001)
    eta = p.eta(m, xs)
    d1 = np.gradient(eta, xs)
    lam = 100.0
    c0, c1, c2 = p.deriv_consts
    assert np.max(np.abs(eta)) <= c0 + 1e-12
    assert np.max(np.abs(d1)) <= c1 * math.sqrt(lam) * (1 + 1e-3)


def test_lambda_too_small():
    with pytest.raises(LambdaTooSmall):
        build_partition(1.0)
    with pytest.raises(LambdaTooSmall):
        decompose(np.ones(4096, dtype=complex), 1.0, 0.25)


def test_constant_function():
    lam = 256.0
    s = sample_count_for(lam)
    dec = decompose(np.ones(s, dtype=complex), lam, 0.25)
    assert dec.cap == 16
    assert all(len(k[0]) <= dec.cap for k in dec.kept)
    assert all(list(k[0]) == [0] for k in dec.kept)
    assert dec.reconstruction_error <= 1e-8


def test_lattice_aligned_chirp_single_mode():
    lam = 1024.0
    s = sample_count_for(lam)
    xs = np.arange(s) / s
    f = np.exp(1j * math.pi * 32 * 5 * xs)
    dec = decompose(f, lam, 0.25)
    assert all(list(k[0]) == [5] for k in dec.kept)
    worst = max((np.max(np.abs(c)) if len(c) else 0.0) for _, c in dec.residual)
    assert worst <= 1e-10
    assert dec.xi(5) == pytest.approx(math.pi * math.sqrt(lam) * 5)


def test_sigma_zero_keeps_nothing():
    lam = 64.0
    s = sample_count_for(lam)
    dec = decompose(np.ones(s, dtype=complex), lam, 0.0)
    assert all(len(k[0]) == 0 for k in dec.kept)


def test_undersampled():
    with pytest.raises(UnderSampled):
        decompose(np.ones(1000, dtype=complex), 256.0, 0.25)
    with pytest.raises(UnderSampled):
        # enough samples but misaligned with the window lattice
        decompose(np.ones(sample_count_for(256.0) + 1, dtype=complex), 256.0, 0.25)


def test_parseval_count_and_threshold():
    lam = 256.0
    sigma = 0.25
    s = sample_count_for(lam)
    f = bandlimited(s, 12, 7)
    dec = decompose(f, lam, sigma)
    thr = lam ** (-sigma) * dec.sup_norm
    for (ns, cs), (nr, cr) in zip(dec.kept, dec.residual):
        assert len(ns) <= lam ** (2 * sigma) + 1e-9  # Parseval bound, no cap hit
        if len(cr):
            assert np.max(np.abs(cr)) <= thr + 1e-15
        if len(cs):
            assert np.min(np.abs(cs)) > thr


def test_l2_stability():
    lam = 256.0
    s = sample_count_for(lam)
    f = bandlimited(s, 10, 3)
    dec = decompose(f, lam, 0.25)
    q = s // dec.m_count
    for m, (_, cr) in enumerate(dec.residual):
        idx = ((2 * m - 1) * q // 2 + np.arange(2 * q)) % s
        window_mean_sq = float(np.mean(np.abs(f[idx]) ** 2))
        assert np.sum(np.abs(cr) ** 2) <= (1 + 1e-6) * window_mean_sq


def test_reconstruction_round_trip():
    lam = 256.0
    s = sample_count_for(lam)
    xs = np.arange(s) / s
    f = np.exp(1j * (lam / 2) * xs * xs)
    dec = decompose(f, lam, 0.25)
    part = build_partition(lam)
    rec = reconstruct(dec, part)
    assert np.max(np.abs(rec - f)) <= 1e-8
    assert dec.reconstruction_error <= 1e-8


def test_reconstruct_zero():
    lam = 64.0
    s = sample_count_for(lam)
    dec = decompose(np.zeros(s, dtype=complex), lam, 0.25)
    rec = reconstruct(dec, build_partition(lam))
    assert np.max(np.abs(rec)) == 0.0


def test_mismatched_lambda():
    lam = 64.0
    dec = decompose(np.ones(sample_count_for(lam), dtype=complex), lam, 0.25)
    with pytest.raises(MismatchedLambda):
        reconstruct(dec, build_partition(256.0))


def test_linearity_of_reconstruction():
    lam = 64.0
    s = sample_count_for(lam)
    f = bandlimited(s, 6, 1)
    g = bandlimited(s, 6, 2)
    part = build_partition(lam)
    ra = reconstruct(decompose(2.0 * f + 3j * g, lam, 0.25), part)
    rb = 2.0 * reconstruct(decompose(f, lam, 0.25), part) \
        + 3j * reconstruct(decompose(g, lam, 0.25), part)
    assert np.max(np.abs(ra - rb)) <= 1e-10


def test_decomposition_json():
    import json
    lam = 64.0
    s = sample_count_for(lam)
    dec = decompose(bandlimited(s, 4, 9), lam, 0.25)
    doc = json.loads(dec.to_json())
    assert doc["lambda"] == lam and doc["m_count"] == 8
    assert len(doc["kept"]) == 8
    total = sum(len(k["n"]) + len(r["n"]) + len(t["n"]) for k, r, t in
                zip(doc["kept"], doc["residual"], doc["tail"]))
    assert total == 2 * s  # M windows of 2q = 2s/M modes each, all accounted


def test_max_freq_tail_component():
    lam = 64.0
    s = sample_count_for(lam)
    xs = np.arange(s) / s
    m_count = 8
    f = np.exp(1j * math.pi * m_count * 3 * xs) + 0.5 * np.exp(1j * math.pi * m_count * 40 * xs)
    cutoff = math.pi * m_count * 10
    dec = decompose(f, lam, 0.4, max_freq=cutoff)
    for ns, cs in dec.tail:
        big = [n for n, c in zip(ns, cs) if abs(c) > 0.4]
        assert big and all(abs(dec.xi(n)) > cutoff for n in big)
    # the tail still participates in reconstruction
    rec = reconstruct(dec, build_partition(lam))
    assert np.max(np.abs(rec - f)) <= 1e-8
