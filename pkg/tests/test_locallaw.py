import math
from fractions import Fraction

import numpy as np
import pytest

from polyphase import locallaw as ll
from polyphase.ensemble import EnsembleParams
from polyphase.mp_reference import m_mp
from polyphase.spectral import SpectralDecomposition, eig_herm


def test_theta_examples():
    t18 = ll.theta_params(18)
    assert t18.p == 19 and t18.theta0 == Fraction(1, 756) and t18.positive
    assert t18.beta0 == 4 * Fraction(1, 756) + 1
    t32 = ll.theta_params(32)
    assert t32.p == 34 and t32.theta0 == Fraction(1, 81)
    t17 = ll.theta_params(17)
    assert t17.theta0 == 0 and not t17.positive
    with pytest.raises(ValueError):
        ll.theta_params(0)


def test_theta_is_positive_exactly_past_threshold():
    for d in range(1, 80):
        tp = ll.theta_params(d)
        assert tp.positive == (tp.p > 18)


def test_exponent_example():
    tp, r, p = ll.choice_parameters(18)
    rep = ll.exponent_report(18, tp, r, p)
    assert (float(rep.x1), float(rep.x2), float(rep.x3)) == pytest.approx((-1.7529, -3.6941, -1.8941), abs=1e-4)
    assert rep.target == Fraction(-2 * 19, 36)
    assert float(rep.margin) == pytest.approx(0.697, abs=1e-3)
    assert rep.ok


def test_exponent_without_smallness_has_no_gain():
    assert ll.exponent_report(18, 0, 0).x1 == 0


def test_exponent_sweep_margin_positive():
    reps = ll.exponent_sweep(range(18, 61))
    assert len(reps) == 43 and all(r.ok for r in reps)


def test_exponents_are_exact_rationals():
    a = ll.exponent_report(24, Fraction(1, 5), Fraction(22 * 24, 51))
    b = ll.exponent_report(24, Fraction(1, 5), Fraction(22 * 24, 51))
    assert a == b
    assert all(isinstance(x, Fraction) for x in (a.x1, a.x2, a.x3, a.margin))


def test_general_form_agrees_except_in_third_exponent():
    tp, r, p = Fraction(1, 5), Fraction(3, 2), 7
    red = ll.exponent_report(10, tp, r, p)
    gen = ll.exponent_report(10, tp, r, p, general=True)
    assert red.x1 == gen.x1 and red.x2 == gen.x2
    assert gen.x3 - red.x3 == 2 * p * tp


def test_reduced_form_needs_small_theta_prime():
    with pytest.raises(ValueError):
        ll.exponent_report(18, Fraction(1, 2), 1)
    rep = ll.exponent_report(18, Fraction(1, 2), 1, general=True)
    # both positive parts vanish at theta' = 1/2
    assert rep.x2 == -2 * rep.p + 2 * 9 - 2 + 4 * rep.p * Fraction(1, 2)


def test_union_bound_bookkeeping():
    rep = ll.beta0_bookkeeping()
    assert rep.identity and rep.negative_below and rep.spacing_ok


@pytest.fixture(scope="module")
def lattice():
    tp = ll.theta_params(32)
    return ll.domain_lattice(tp, 0.5, 1.0, 10_000, float(tp.theta0) / 2)


def test_lattice_points_lie_in_domain(lattice):
    pts = lattice.points
    assert pts.size > 0
    assert all(lattice.contains(z) for z in pts)
    assert lattice.spacing == pytest.approx(10_000 ** -lattice.s)
    assert lattice.s == pytest.approx(float(ll.theta_params(32).theta0) * 7 / 4)


def test_lattice_contains_initial_line(lattice):
    assert lattice.initial_in_domain
    offsets = (lattice.eta_values - lattice.initial_eta) / lattice.spacing
    np.testing.assert_allclose(offsets, np.round(offsets), atol=1e-6)
    np.testing.assert_allclose(lattice.E_values / lattice.spacing, np.round(lattice.E_values / lattice.spacing), atol=1e-6)


def test_lattice_guards():
    tp = ll.theta_params(32)
    with pytest.raises(ValueError):
        ll.domain_lattice(tp, 0.5, 1.0, 100, 0.5)
    with pytest.raises(ValueError):
        ll.domain_lattice(tp, 0.5, 1.0, 100, 0.05, s=20, override=True)
    with pytest.raises(ValueError):
        ll.domain_lattice(tp, 0.5, 1.0, 10**6, 0.005, s=0.5, max_points=100)


def test_adjacent_points_and_continuity():
    tp = ll.theta_params(3)
    grid = ll.domain_lattice(tp, 0.5, 1.0, 200, 0.3, s=0.7, override=True)
    a, b = grid.adjacent_pairs()
    pts = grid.points
    assert np.max(np.abs(pts[a] - pts[b])) <= math.sqrt(2) * grid.spacing * (1 + 1e-12)
    dec = ll.spectrum(EnsembleParams(200, 3, seed=4))
    chk = ll.continuity_check(dec, grid)
    assert chk.pairs == a.size
    assert chk.max_ratio_lipschitz <= 1
    assert chk.within_budget


def test_single_entry_sweep_is_closed_form():
    pts = np.array([0.5 + 0.1j, 2 + 0.2j, 3.5 + 1j])
    sw = ll.locallaw_sweep(EnsembleParams(1, 1), pts, [1])
    expected = np.abs(1 / (1 - sw.z) - m_mp(sw.z))
    np.testing.assert_allclose(sw.err, expected, rtol=1e-14)


def test_sweep_rows_and_summary():
    pts = [2 + 0.3j, 1 + 0.2j, 1 + 0.1j, 3 + 0.5j]
    sw = ll.locallaw_sweep(EnsembleParams(80, 3), pts, [3, 1])
    rows = list(sw.rows())
    assert len(rows) == 8 and len(rows[0]) == len(ll.SWEEP_COLUMNS)
    assert [r[0] for r in rows] == [1] * 4 + [3] * 4
    assert [(r[3], r[4]) for r in rows[:4]] == sorted((z.real, z.imag) for z in np.array(pts))
    assert sw.imsign_ok and np.all(sw.err >= 0)
    summ = sw.summary()
    per = {s: max(r[9] * r[4] for r in rows if r[0] == s) for s in (1, 3)}
    assert summ["per_seed_sup_err_eta"] == {str(k): pytest.approx(v) for k, v in per.items()}
    assert summ["max_sup_err_eta"] == pytest.approx(max(per.values()))
    assert summ["flag_count"] == sum(r[11] for r in rows)
    with pytest.raises(ValueError):
        ll.locallaw_sweep(EnsembleParams(10, 1), pts, [])


def test_eta_scaling_envelope():
    for seed in (1, 2):
        sw = ll.locallaw_sweep(EnsembleParams(2000, 3, seed=seed), [2 + 0.4j, 2 + 0.2j, 2 + 0.1j], [seed])
        c = ll.envelope_constant(sw)
        assert np.all(sw.err <= c / (2000 * sw.z.imag) * (1 + 1e-12))
        assert c < 2


def test_rigidity_far_right_is_zero():
    dec = ll.spectrum(EnsembleParams(50, 2, seed=1))
    scan = ll.rigidity_scan(dec, [10.0])
    assert scan.gap[0] == 0


def test_rigidity_sup_dominates_points():
    dec = ll.spectrum(EnsembleParams(100, 3, seed=2))
    E = np.linspace(0.5, 3.5, 61)
    scan = ll.rigidity_scan(dec, E)
    assert scan.sup_gap == scan.gap.max()
    assert scan.sup_gap >= ll.rigidity_scan(dec, [2.0]).gap[0]


def test_deloc_single_entry():
    scan = ll.deloc_scan(SpectralDecomposition(np.array([2.0]), np.array([[1.0 + 0j]])), 0.5)
    assert scan.max_sup_norm2 == 1


def test_deloc_detects_localized_vectors():
    dec = eig_herm(np.diag([0.7, 1.5, 2.5, 3.2]).astype(complex))
    scan = ll.deloc_scan(dec, 0.5)
    assert scan.bulk.size == 4 and scan.max_sup_norm2 == pytest.approx(1)


def test_deloc_surrogate_dominates_direct_value():
    dec = ll.spectrum(EnsembleParams(150, 3, seed=5), vectors=True)
    scan = ll.deloc_scan(dec, 0.5, eta=0.05)
    assert scan.surrogate_dominates
    assert np.all(scan.surrogate >= scan.sup_norm2 * (1 - 1e-12))
    with pytest.raises(ValueError):
        ll.deloc_scan(ll.spectrum(EnsembleParams(10, 1)), 0.5)


def test_descent_identical_step():
    res = ll.multiscale_descent(EnsembleParams(60, 3), 2.0, [0.3, 0.3, 0.2], [1])
    assert res.err1[0] == res.err2[0] and res.diff[0] == 0


def test_descent_ladder_and_lipschitz_bound():
    N, s = 2000, 1.0
    ladder = ll.descent_ladder(N, 0.5, 0.05, s)
    assert ladder[0] == 0.5 and ladder[-1] == pytest.approx(0.05)
    assert np.all(-np.diff(ladder) <= N**-s * (1 + 1e-12))
    res = ll.multiscale_descent(EnsembleParams(N, 3, seed=1), 2.0, ladder, [1], s=s)
    assert res.diff.size == ladder.size - 1
    assert np.all(res.lipschitz_ok)


def test_descent_rejects_large_or_rising_steps():
    with pytest.raises(ValueError):
        ll.multiscale_descent(EnsembleParams(100, 2), 2.0, [0.5, 0.1], [1], s=1.0)
    with pytest.raises(ValueError):
        ll.multiscale_descent(EnsembleParams(100, 2), 2.0, [0.1, 0.5], [1])


def test_flag_injection_flips_one_step():
    res = ll.multiscale_descent(EnsembleParams(100, 3), 2.0, np.linspace(0.6, 0.3, 7), [2], c=10.0)
    base = res.flag.copy()
    assert not base.any()
    err = res.err2.copy()
    err[3] = 2 * res.bound[3]
    flipped = ll.flag_steps(err, res.bound)
    assert np.flatnonzero(flipped != base).tolist() == [3]


def test_self_consistency_via_schur_is_exact():
    from polyphase.ensemble import draw_matrix
    from polyphase.fluctuations import error_decomposition

    X = draw_matrix(EnsembleParams(60, 3, seed=9))
    for z in (2 + 0.1j, 1 + 0.5j):
        assert error_decomposition(X, z).residual <= 1e-8
