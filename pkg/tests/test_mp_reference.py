import math

import numpy as np
import pytest
from scipy.integrate import quad

from polyphase.mp_reference import (
    F_mp,
    SpectralDomainPoint,
    domain_box,
    imlb_check,
    m_mp,
    m_sc,
    mp_bulk_constants,
    mp_quadratic_residual,
    rho_mp,
    sqrt_branch,
    stability_msc,
    stability_report,
    stieltjes_quadrature,
)


@pytest.fixture(scope="module")
def grid():
    # 1000 points covering the bulk domain at kappa = 0.1
    E = np.linspace(0.1, 3.9, 42)[1:-1]
    eta = np.geomspace(1e-3, 1.0, 25)
    return (E[None, :] + 1j * eta[:, None]).ravel()


def test_quadratic_residual_on_grid(grid):
    assert grid.size == 1000
    m = m_mp(grid)
    assert np.all(m.imag > 0)
    assert np.max(mp_quadratic_residual(m, grid)) <= 1e-12


def test_known_value_at_center():
    z = 2 + 0.2j
    m = m_mp(z)
    assert abs(z * m * m + z * m + 1) < 1e-15
    assert m.imag > 0


@pytest.mark.parametrize("z", [2 + 0.2j, 0.5 + 0.05j, 3.5 + 1j, -1 + 0.3j, 6 + 0.01j])
def test_closed_form_matches_quadrature(z):
    assert abs(m_mp(z) - stieltjes_quadrature(z)) <= 1e-8


def test_semicircle_relation(grid):
    sq = sqrt_branch(grid)
    diff = np.abs(m_mp(grid) - m_sc(sq) / sq)
    assert np.max(diff) <= 1e-10


def test_semicircle_quadratic():
    z = np.array([0.1 + 0.1j, -1.5 + 0.01j, 3 + 2j])
    m = m_sc(z)
    np.testing.assert_allclose(m * m + z * m + 1, 0, atol=1e-14)
    assert np.all(m.imag > 0)


def test_density_integrates_to_one():
    total = quad(lambda x: 1 / (2 * math.pi), 0, 4, weight="alg", wvar=(-0.5, 0.5), epsabs=1e-14)[0]
    assert abs(total - 1) <= 1e-10
    direct = quad(rho_mp, 0, 4, limit=200, epsabs=1e-12)[0]
    assert abs(direct - 1) < 1e-6


def test_density_at_two():
    assert abs(rho_mp(2.0) - 1 / (2 * math.pi)) <= 1e-12
    assert rho_mp(-1.0) == 0.0 and rho_mp(5.0) == 0.0


def test_distribution_function():
    assert F_mp(0.0) == 0.0 and F_mp(4.0) == 1.0 and F_mp(10.0) == 1.0
    assert F_mp(2.0) == pytest.approx(0.5 + 1 / math.pi, abs=1e-15)
    for E in (0.3, 1.0, 2.7, 3.9):
        ref = quad(rho_mp, 0, E, limit=200, epsabs=1e-13)[0]
        assert abs(F_mp(E) - ref) < 1e-7
    x = np.linspace(0.2, 3.8, 50)
    h = 1e-6
    np.testing.assert_allclose((F_mp(x + h) - F_mp(x - h)) / (2 * h), rho_mp(x), rtol=1e-6)


def test_sqrt_branch_rejects_cut():
    with pytest.raises(ValueError):
        sqrt_branch(-2.0 + 0j)
    assert sqrt_branch(-2 + 1e-300j).imag > 0


def test_upper_half_plane_required():
    with pytest.raises(ValueError):
        m_mp(2.0 + 0j)
    with pytest.raises(ValueError):
        m_sc(np.array([1 + 1j, 1 - 1j]))


def test_stability_report_at_exact_root():
    z = 1.3 + 0.01j
    rep = stability_report(m_mp(z), z, kappa=0.5)
    assert rep.delta < 1e-14 and rep.min_dist < 1e-14 and not rep.violated
    spurious = 1 / (z * m_mp(z))
    assert stability_report(spurious, z, 0.5).dist_other < 1e-14


def test_stability_bound_for_perturbations():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(500):
        z = complex(rng.uniform(0.5, 3.5), rng.uniform(0.01, 0.5))
        m = m_mp(z) + complex(*rng.normal(scale=1e-3, size=2))
        rep = stability_report(m, z, kappa=0.5, C=100)
        worst = max(worst, rep.min_dist / rep.bound if rep.bound else 0)
    assert worst < 1


def test_semicircle_stability():
    z = 0.5 + 0.1j
    lhs, rhs, delta = stability_msc(m_sc(z) + 1e-4, z)
    assert delta > 0 and lhs <= rhs


def test_imaginary_lower_bound_in_bulk():
    z = domain_box(0.3, 0.5, n_E=100, n_eta=20)
    assert np.all(imlb_check(z) > 0)


def test_bulk_constants_are_finite():
    C, Cp = mp_bulk_constants(0.5, 0.5, n_E=60, n_eta=10)
    assert 1 <= C < 10 and 1 <= Cp < 10


def test_domain_point_membership():
    p = SpectralDomainPoint(2 + 0.7j, kappa=0.5, c_kappa=1.0, N=100, theta=0.1)
    assert p.in_domain()
    assert not SpectralDomainPoint(2 + 0.5j, kappa=0.5, c_kappa=1.0, N=100, theta=0.1).in_domain()
    assert not SpectralDomainPoint(0.2 + 0.2j, kappa=0.5).in_domain()
    with pytest.raises(ValueError):
        SpectralDomainPoint(2 + 0j, kappa=0.5)
