import math

import numpy as np
import pytest

from osclab.errors import (DegenerateGradient, DegenerateMixedPartial,
                           NonSquareInverse, UnderResolved)
from osclab.phases import poly_phase, registry_get
from osclab.sublevel import (StepFunction, SublevelSystem,
                             build_multiprogression_witness, estimate_measure,
                             grid_measure, hsigma_chirp_energy,
                             measure_exponent, multiprogression_measure,
                             random_staircase, scalar_sublevel, system_12,
                             system_9_1, value_concentration, with_eps,
                             witness_block, witness_system)

PHI_CURVED = poly_phase(2, [((1, 0), 1), ((0, 1), 1), ((1, 1), 1)])  # x + y + xy
PSI_CURVED = poly_phase(2, [((2, 1), 1)])                            # x^2 y


def square_chords(nseg=64):
    pieces = []
    for i in range(nseg):
        a, b = i / nseg, (i + 1) / nseg
        slope = a + b
        pieces.append((a, b, slope, a * a - slope * a))
    return StepFunction(tuple(pieces))


def test_estimate_full_box():
    sys0 = SublevelSystem(lambda p: np.zeros((p.shape[0], 1)), ((0, 1), (0, 1)), 1.0)
    est = estimate_measure(sys0, 2000, 0)
    assert est.estimate == 1.0
    assert est.method == "MonteCarlo"


def test_estimate_strip():
    sys1 = SublevelSystem(lambda p: p[:, :1], ((0, 1), (0, 1)), 0.25)
    est = estimate_measure(sys1, 100000, 1)
    assert abs(est.estimate - 0.25) <= 3 * est.half_width_95


def test_estimate_deterministic():
    sys1 = SublevelSystem(lambda p: p[:, :1], ((0, 1), (0, 1)), 0.25)
    a = estimate_measure(sys1, 50000, 9)
    b = estimate_measure(sys1, 50000, 9)
    assert a.estimate == b.estimate


def test_eps_monotonicity_shared_seed():
    sys1 = SublevelSystem(lambda p: p[:, :1] - 0.4, ((0, 1), (0, 1)), 0.1)
    vals = [estimate_measure(with_eps(sys1, e), 50000, 4).estimate
            for e in (0.05, 0.1, 0.2, 0.4)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_system12_grid_vs_monte_carlo():
    phi = registry_get("cyclic").descriptor.with_domain([[-0.25, 0.25]] * 3)
    zero = StepFunction.constant(0.0, -2, 2)
    sys = system_12(phi, zero, zero, zero, 0.05)
    g = grid_measure(sys, 512)
    mc = estimate_measure(sys, 400000, 3)
    assert g.method == "Grid"
    assert abs(g.estimate - mc.estimate) <= 3 * mc.half_width_95 + 1e-9


@pytest.mark.skipif(not __import__("osclab.backend", fromlist=["HAVE_NUMBA"]).HAVE_NUMBA,
                    reason="8.6e9-cell count needs the compiled backend")
def test_system12_full_scale_grid_oracle():
    """2048^3-cell count for the recentred degenerate system, h_j = 0."""
    phi = registry_get("cyclic_r(r=1)").descriptor.with_domain([[-0.25, 0.25]] * 3)
    zero = StepFunction.constant(0.0, -2, 2)
    sys = system_12(phi, zero, zero, zero, 0.05)
    g = grid_measure(sys, 2048)
    mc = estimate_measure(sys, 2_000_000, 17)
    assert abs(g.estimate - mc.estimate) <= 3 * mc.half_width_95 + 1e-12


def test_system12_rejects_vanishing_mixed_partial():
    with pytest.raises(DegenerateMixedPartial):
        zero = StepFunction.constant(0.0, -2, 2)
        system_12(registry_get("chain3").descriptor, zero, zero, zero, 0.1)


def test_system12_full_volume_for_large_eps():
    phi = registry_get("cyclic").descriptor
    zero = StepFunction.constant(0.0, -2, 2)
    sys = system_12(phi, zero, zero, zero, 10.0)
    assert estimate_measure(sys, 10000, 0).estimate == 1.0


def test_system_9_1_constant_gradient_psi():
    # psi with grad = (c1, c2): membership everywhere once eps > max |c|
    psi = poly_phase(2, [((1, 0), 0.3), ((0, 1), -0.2)])
    zero = StepFunction.constant(0.0, -1, 5)
    sys = system_9_1(PHI_CURVED, psi, zero, zero, zero, 0.5)
    assert estimate_measure(sys, 5000, 0).estimate == 1.0


def test_system_9_1_rejects_degenerate_phi():
    psi = PSI_CURVED
    phi_bad = poly_phase(2, [((0, 1), 1)])  # phi_x == 0
    zero = StepFunction.constant(0.0, -1, 5)
    with pytest.raises(DegenerateGradient):
        system_9_1(phi_bad, psi, zero, zero, zero, 0.1)


def test_system_9_1_grid_vs_monte_carlo():
    h1 = random_staircase(0, 1, 32, -1, 1, 21)
    h2 = random_staircase(0, 1, 32, -1, 1, 22)
    h3 = random_staircase(0, 3.1, 32, -1, 1, 23)
    sys = system_9_1(PHI_CURVED, PSI_CURVED, h1, h2, h3, 0.2)
    g = grid_measure(sys, 1024)
    mc = estimate_measure(sys, 400000, 6)
    assert abs(g.estimate - mc.estimate) <= 3 * mc.half_width_95 + 1e-4


def test_scalar_grid_vs_monte_carlo():
    maps = (poly_phase(2, [((1, 0), 1)]), poly_phase(2, [((0, 1), 1)]),
            registry_get("bourgain").descriptor)
    fs = tuple(random_staircase(-1, 3, 32, -1, 1, 60 + j) for j in range(3))
    sys = scalar_sublevel((1.0, 1.0, 1.0), maps, fs, 0.1,
                          domain=((0.0, 0.5), (0.3, 0.8)))
    g = grid_measure(sys, 1024)
    mc = estimate_measure(sys, 400000, 7)
    assert abs(g.estimate - mc.estimate) <= 3 * mc.half_width_95 + 1e-4


def test_system_9_1_decreasing_measures():
    h1 = random_staircase(0, 1, 64, -2, 2, 11)
    h2 = random_staircase(0, 1, 64, -2, 2, 12)
    h3 = random_staircase(0, 3.1, 64, -2, 2, 13)
    vals = []
    for eps in (0.2, 0.1, 0.05):
        sys = system_9_1(PHI_CURVED, PSI_CURVED, h1, h2, h3, eps)
        vals.append(estimate_measure(sys, 300000, 5).estimate)
    assert vals[0] > vals[1] > vals[2] > 0
    rho = measure_exponent(
        lambda eps: system_9_1(PHI_CURVED, PSI_CURVED, h1, h2, h3, eps),
        (0.2, 0.1, 0.05), 300000, 5)
    assert rho > 0


def test_generic_contrast_over_seeds():
    """Generic staircases decay clearly faster than the extremal rate 1/2:
    fitted exponent > 0.2 for every seed, while the multiprogression
    witness sits near 1/2."""
    exps = []
    for seed in range(20):
        h1 = random_staircase(0, 1, 64, -2, 2, 100 + seed)
        h2 = random_staircase(0, 1, 64, -2, 2, 200 + seed)
        h3 = random_staircase(0, 3.1, 64, -2, 2, 300 + seed)
        rho = measure_exponent(
            lambda eps: system_9_1(PHI_CURVED, PSI_CURVED, h1, h2, h3, eps),
            (0.4, 0.2, 0.1), 120000, seed)
        exps.append(rho)
    assert min(exps) > 0.2

    # witness rate, recast as the scalar two-inequality system
    xs, ys = [], []
    for eps in (4 ** -3, 4 ** -4, 4 ** -5):
        w = build_multiprogression_witness(eps)
        lower, _ = multiprogression_measure(w)
        xs.append(math.log(eps))
        ys.append(math.log(lower))
    xs, ys = np.array(xs), np.array(ys)
    slope = float(np.sum((xs - xs.mean()) * (ys - ys.mean()))
                  / np.sum((xs - xs.mean()) ** 2))
    assert 0.4 <= slope <= 0.6


def test_scalar_sublevel_zero_functions():
    zero = StepFunction.constant(0.0, -1, 3)
    maps = (poly_phase(2, [((1, 0), 1)]), poly_phase(2, [((0, 1), 1)]),
            poly_phase(2, [((1, 0), 1), ((0, 1), 1)]))
    sys = scalar_sublevel((1.0, 1.0, 1.0), maps, (zero, zero, zero), 0.01)
    assert estimate_measure(sys, 5000, 0).estimate == 1.0


def test_scalar_sublevel_monotone_in_r():
    maps = (poly_phase(2, [((1, 0), 1)]), poly_phase(2, [((0, 1), 1)]),
            registry_get("bourgain").descriptor)
    fs = tuple(random_staircase(-1, 3, 32, -1, 1, 40 + j) for j in range(3))
    m = {}
    for r in (0.02, 0.08):
        sys = scalar_sublevel((1.0, 1.0, 1.0), maps, fs, r,
                              domain=((0.0, 0.5), (0.3, 0.8)))
        m[r] = estimate_measure(sys, 200000, 8).estimate
    assert m[0.02] <= m[0.08]


def test_scalar_sublevel_value_concentration_bound():
    """Measured |S(f, r)| <= C max_j sup_t |{|f_j - t| <= r}|^delta with some
    positive fitted delta across an r-ladder."""
    maps = (poly_phase(2, [((1, 0), 1)]), poly_phase(2, [((0, 1), 1)]),
            registry_get("bourgain").descriptor)
    fs = tuple(random_staircase(-1, 3, 64, -1, 1, 50 + j) for j in range(3))
    rs = (0.08, 0.04, 0.02)
    meas, conc = [], []
    for r in rs:
        sys = scalar_sublevel((1.0, 1.0, 1.0), maps, fs, r,
                              domain=((0.0, 0.5), (0.3, 0.8)))
        meas.append(max(estimate_measure(sys, 300000, 9).estimate, 1e-7))
        conc.append(max(value_concentration(f, r) for f in fs))
    x = np.log(conc)
    y = np.log(meas)
    delta = float(np.sum((x - x.mean()) * (y - y.mean())) / np.sum((x - x.mean()) ** 2))
    assert delta > 0


def test_value_concentration_examples():
    assert value_concentration(StepFunction.identity(0, 1), 0.01) == pytest.approx(0.02)
    assert value_concentration(StepFunction.constant(5.0, 0, 0.7), 0.2) == pytest.approx(0.7)
    stair = StepFunction(tuple((i / 10, (i + 1) / 10, 0.0, float(i)) for i in range(10)))
    assert value_concentration(stair, 0.3) == pytest.approx(0.1)


def test_hsigma_validation():
    with pytest.raises(ValueError):
        hsigma_chirp_energy(StepFunction.identity(0, 1), -0.25, 4.0, M=1024)
    with pytest.raises(ValueError):
        hsigma_chirp_energy(StepFunction.identity(0, 1), 0.25, 4.0)
    with pytest.raises(UnderResolved):
        hsigma_chirp_energy(StepFunction.identity(0, 1), -0.25, 4096.0, M=4096)


def test_hsigma_norm_stable_under_dft_refinement():
    """The per-lambda discrete H^sigma norm is a converged quantity: the
    A -> 0 limit of lhs/A computed at M and at 2M must agree."""
    f = StepFunction.identity(0.0, 1.0)
    a_tiny = 1e-9
    vals = []
    for m_size in (8192, 16384):
        lhs, _ = hsigma_chirp_energy(f, -0.25, a_tiny, m_size)
        vals.append(lhs / a_tiny)  # = ||1_[0,1]||_{H^sigma}^2 at lam ~ 0
    assert vals[0] == pytest.approx(vals[1], rel=1e-3)


def test_hsigma_zero_lambda_matches_indicator_norm():
    f = StepFunction.identity(0.25, 0.75)
    # at sigma close to 0 the per-lambda norm approaches ||1_I||_2^2 = 1/2
    lhs, _ = hsigma_chirp_energy(f, -0.05, 1e-6, M=4096)
    assert lhs / 1e-6 <= 0.5 + 1e-3


def test_hsigma_ratio_bounded():
    ratios = []
    for a_val in (4.0, 16.0, 64.0, 256.0):
        lhs, rhs = hsigma_chirp_energy(StepFunction.identity(0, 1), -0.25, a_val, 16384)
        ratios.append(lhs / rhs)
    assert max(ratios) / min(ratios) <= 50.0


def test_witness_construction():
    w = build_multiprogression_witness(1 / 64)
    assert w.n_blocks_per_axis == 8
    assert len(w.f.pieces) == 9  # ramps covering [0, 1]
    s, eps = 0.125, 1 / 64
    t = 3 * s + 5 * eps
    assert w.h(np.array([t]))[0] == pytest.approx(5 * s + 5 * eps)
    assert w.f(np.array([0.3]))[0] == pytest.approx(2 * s - 0.3)


def test_witness_rejects_bad_eps():
    with pytest.raises(NonSquareInverse):
        build_multiprogression_witness(0.1)
    with pytest.raises(NonSquareInverse):
        build_multiprogression_witness(0.25)  # eps > 1/16


def test_block_measures_exact():
    """|E(m, n)| = eps^{3/2} - n eps^2 exactly for 1 <= n < N (the uniform
    eps^{3/2} + O(eps^2) shorthand only holds for bounded n)."""
    eps = 1 / 256
    w = build_multiprogression_witness(eps)
    from osclab.sublevel import _block_measure
    for n in (1, 5, 15):
        assert _block_measure(w, n + 3, n) == pytest.approx(
            eps ** 1.5 - n * eps ** 2, abs=1e-15)


def test_block_membership_random_points():
    w = build_multiprogression_witness(1 / 256)
    rng = np.random.default_rng(0)
    sysw = witness_system(w)
    checked = 0
    for n in range(1, w.n_blocks_per_axis):
        for k in range(1, w.n_blocks_per_axis):
            blk = witness_block(w, k + n, n)
            if not (0 <= blk["x"][0] and blk["x"][1] <= 1
                    and 0 <= blk["y"][0] and blk["y"][1] <= 1):
                continue
            u = rng.uniform(blk["u"][0] + 1e-12, blk["u"][1] - 1e-12, 40)
            xlo = np.maximum(blk["x"][0], u - blk["y"][1])
            xhi = np.minimum(blk["x"][1], u - blk["y"][0])
            x = xlo + (xhi - xlo) * rng.random(40)
            pts = np.stack([x, u - x], axis=1)
            r = sysw.residual(pts)
            assert np.max(np.abs(r[:, 0])) <= 1e-12       # exactly zero
            assert np.max(np.abs(r[:, 1])) < w.eps / 2    # strictly inside
            checked += pts.shape[0]
    assert checked >= 5000


def test_witness_lower_bound_and_count():
    eps = 1 / 256
    w = build_multiprogression_witness(eps)
    lower, count = multiprogression_measure(w)
    assert count >= 0.1 * 256
    assert lower >= 0.1 * math.sqrt(eps)
    mc = estimate_measure(witness_system(w), 400000, 2)
    assert mc.estimate + 3 * mc.half_width_95 >= lower
