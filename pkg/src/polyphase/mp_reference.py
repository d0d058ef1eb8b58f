"""Marchenko-Pastur (ratio 1) and semicircle reference quantities.

Both Stieltjes transforms are computed as roots of their quadratic equations,
picking the root with positive imaginary part, so no branch cut has to be
tracked by hand.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


def _as_upper(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("needs Im z > 0")
    return z


def _ret(x):
    return complex(x) if np.ndim(x) == 0 else x


def _pick_upper_root(b, c):
    """Roots of ``m^2 + b m + c = 0``; returns the one with larger Im part.

    The large root comes from the cancellation-free branch, the small one
    from Vieta (``m1 * m2 = c``).
    """
    disc = np.sqrt(b * b - 4 * c)
    sgn = np.where((np.conj(b) * disc).real >= 0, 1.0, -1.0)
    big = -(b + sgn * disc) / 2
    small = c / big
    return np.where(big.imag >= small.imag, big, small)


def rho_mp(x):
    """Density ``sqrt(x(4-x)) / (2 pi x)`` on ``(0, 4]``, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sqrt(np.clip(x * (4 - x), 0, None)) / (2 * np.pi * x)
    out = np.where((x > 0) & (x <= 4), val, 0.0)
    return float(out) if out.ndim == 0 else out


def m_mp(z):
    """Stieltjes transform of the MP law: root of ``z m^2 + z m + 1 = 0`` with Im > 0."""
    z = _as_upper(z)
    return _ret(_pick_upper_root(np.ones_like(z), 1.0 / z))


def m_sc(z):
    """Semicircle Stieltjes transform: root of ``m^2 + z m + 1 = 0`` with Im > 0."""
    z = _as_upper(z)
    return _ret(_pick_upper_root(z, np.ones_like(z)))


def sqrt_branch(z):
    """``sqrt(r e^{i t}) = sqrt(r) e^{i t/2}`` for ``t in (-pi, pi)``."""
    z = np.asarray(z, dtype=complex)
    if np.any((z.imag == 0) & (z.real < 0)):
        raise ValueError("sqrt_branch is undefined on the negative real axis")
    return _ret(np.sqrt(z))


def mp_quadratic_residual(m, z):
    z = np.asarray(z, dtype=complex)
    return np.abs(z * m * m + z * m + 1)


def F_mp(E):
    """MP distribution function, closed-form antiderivative of ``rho_mp``."""
    E = np.asarray(E, dtype=float)
    x = np.clip(E, 0.0, 4.0)
    val = 0.5 + (np.sqrt(x * (4 - x)) + 2 * np.arcsin((x - 2) / 2)) / (2 * np.pi)
    out = np.where(E <= 0, 0.0, np.where(E >= 4, 1.0, val))
    return float(out) if out.ndim == 0 else out


def stieltjes_quadrature(z) -> complex:
    """``int rho_mp(x)/(x - z) dx`` by QUADPACK with the x^-1/2 (4-x)^1/2 weight."""
    from scipy.integrate import quad

    z = complex(z)

    def part(f):
        return quad(f, 0, 4, weight="alg", wvar=(-0.5, 0.5), epsabs=1e-14, epsrel=1e-13, limit=500)[0]

    re = part(lambda x: ((1 / (x - z)) / (2 * np.pi)).real)
    im = part(lambda x: ((1 / (x - z)) / (2 * np.pi)).imag)
    return complex(re, im)


@dataclass(frozen=True)
class SpectralDomainPoint:
    """``z = E + i eta`` together with the bulk margin defining the domain."""

    z: complex
    kappa: float
    c_kappa: Optional[float] = None
    N: Optional[int] = None
    theta: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.kappa < 1:
            raise ValueError("kappa must lie in (0, 1)")
        if not self.z.imag > 0:
            raise ValueError("eta must be positive")

    @property
    def E(self) -> float:
        return self.z.real

    @property
    def eta(self) -> float:
        return self.z.imag

    def in_domain(self) -> bool:
        ok = self.kappa < self.E < 4 - self.kappa
        if self.c_kappa is not None:
            ok = ok and self.eta < self.c_kappa
        if self.N is not None and self.theta is not None:
            ok = ok and self.eta > self.N ** (-self.theta)
        return bool(ok)


@dataclass(frozen=True)
class StabilityReport:
    delta: float
    dist_mp: float
    dist_other: float
    bound: float

    @property
    def min_dist(self) -> float:
        return min(self.dist_mp, self.dist_other)

    @property
    def violated(self) -> bool:
        return self.delta <= 1 and self.min_dist > self.bound


def stability_report(m: complex, z, kappa: float, C: float = 100.0) -> StabilityReport:
    """Distance of ``m`` to both roots of the MP equation versus ``C delta / kappa``."""
    z = complex(z)
    mmp = m_mp(z)
    delta = abs(m + 1 / (z + z * m))
    return StabilityReport(
        delta=delta,
        dist_mp=abs(m - mmp),
        dist_other=abs(m - 1 / (z * mmp)),
        bound=C * delta / kappa,
    )


def stability_msc(m: complex, z, C: float = 100.0) -> tuple[float, float, float]:
    """``(min distance to the semicircle roots, C delta / sqrt(kappa + eta + delta), delta)``.

    ``delta = |m + 1/(z + m)|`` and ``kappa = ||E| - 2|``.
    """
    z = complex(z)
    msc = m_sc(z)
    delta = abs(m + 1 / (z + m))
    kappa = abs(abs(z.real) - 2)
    lhs = min(abs(m - msc), abs(m - 1 / msc))
    return lhs, C * delta / np.sqrt(kappa + z.imag + delta), delta


def imlb_check(z) -> float:
    """``Im[z m_MP(z)]``; positive in the bulk for small enough eta."""
    z = np.asarray(z, dtype=complex)
    out = (z * m_mp(z)).imag
    return float(out) if np.ndim(out) == 0 else out


def domain_box(kappa: float, c_kappa: float, n_E: int = 200, n_eta: int = 50, eta_min: float = 1e-3) -> np.ndarray:
    """Rectangular grid covering ``(kappa, 4-kappa) x (eta_min, c_kappa)``."""
    E = np.linspace(kappa, 4 - kappa, n_E + 2)[1:-1]
    eta = np.geomspace(eta_min, c_kappa, n_eta + 1)[:-1]
    return (E[None, :] + 1j * eta[:, None]).ravel()


def mp_bulk_constants(kappa: float, c_kappa: float, **grid) -> tuple[float, float]:
    """Smallest ``(C, C')`` with ``1/C <= |m_MP| <= C`` and ``1/C' <= Im m_MP <= C'`` on a grid."""
    m = m_mp(domain_box(kappa, c_kappa, **grid))
    a, b = np.abs(m), m.imag
    return float(max(a.max(), 1 / a.min())), float(max(b.max(), 1 / b.min()))
