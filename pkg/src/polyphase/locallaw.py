"""End-to-end experiments on the Stieltjes transform of ``X X^*``.

Two kinds of content live here:

* exact parameter bookkeeping (``theta0``, the three moment exponents, the
  union-bound exponent) in rational arithmetic, and
* numerical scans over seeds: the deviation ``|m_N - m_MP|`` on a lattice,
  the counting-function gap, eigenvector sup-norms and a descent in ``eta``.

At desk-scale ``N`` the admissible window ``eta > N^-theta`` with
``theta < theta0`` is essentially ``eta ~ 1``; the sweeps therefore accept any
``eta > 0`` and only annotate the nominal bound.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .ensemble import EnsembleParams, draw_matrix
from .mp_reference import F_mp, m_mp
from .spectral import SpectralDecomposition, counting_function, eig_herm, gram, stieltjes_mN

Rational = Union[int, Fraction]


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


# -- exact parameter arithmetic ---------------------------------------------


@dataclass(frozen=True)
class ThetaParams:
    d: int
    p: int
    theta0: Fraction
    beta0: Fraction

    @property
    def positive(self) -> bool:
        """``theta0 > 0``; otherwise the admissible domain is empty."""
        return self.theta0 > 0


def theta_params(d: int) -> ThetaParams:
    """``p = floor(17 d / 16)``, ``theta0 = (p/18 - 1)/(2p + 4)``, ``beta0 = 4 theta0 + 1``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    p = (17 * d) // 16
    theta0 = (Fraction(p, 18) - 1) / (2 * p + 4)
    return ThetaParams(d, p, theta0, 4 * theta0 + 1)


@dataclass(frozen=True)
class ExponentReport:
    d: int
    theta_prime: Fraction
    r: Fraction
    p: int
    eps: Fraction
    general: bool
    x1: Fraction
    x2: Fraction
    x3: Fraction

    @property
    def target(self) -> Fraction:
        """``-2p/36``."""
        return Fraction(-2 * self.p, 36)

    @property
    def margin(self) -> Fraction:
        return self.target - max(self.x1, self.x2, self.x3)

    @property
    def ok(self) -> bool:
        return self.margin > 0


def _pos(y: Fraction) -> Fraction:
    return max(y, Fraction(0))


def exponent_report(d: int, theta_prime, r, p: Optional[int] = None, eps=0, general: bool = False) -> ExponentReport:
    """The three moment exponents for ``gamma + theta = theta'``.

    The default is the reduced form valid for ``theta' <= 1/3``.  With
    ``general=True`` the positive-part form is used, which is defined for any
    ``theta'``.  Under ``theta' <= 1/3`` the two agree in ``x1`` and ``x2``;
    the general ``x3`` carries ``4 p theta'`` where the reduced one carries
    ``2 p theta'``.
    """
    tp, r, eps = _frac(theta_prime), _frac(r), _frac(eps)
    if p is None:
        p = theta_params(d).p
    d0 = d // 2
    if not general and tp > Fraction(1, 3):
        raise ValueError("the reduced exponents need theta' <= 1/3; pass general=True")
    x1 = -(r + 1) * tp + eps
    if general:
        x2 = -2 * p + 2 * d0 - 2 + 4 * p * tp + r * _pos(1 - 3 * tp)
        x3 = -2 * p + (2 * p - d0) * (1 + 2 * tp) + r * _pos(_pos(1 - 2 * tp) - tp)
    else:
        x2 = -2 * p + 2 * d0 - 2 + 4 * p * tp + r * (1 - 3 * tp)
        x3 = 2 * p * tp - d0 * (1 + 2 * tp) + r * (1 - 3 * tp)
    return ExponentReport(d, tp, r, p, eps, general, x1, x2, x3)


def choice_parameters(d: int) -> tuple[Fraction, Fraction, int]:
    """``(theta', r, p) = (1/5, 22 d / 51, floor(17 d / 16))``."""
    return Fraction(1, 5), Fraction(22 * d, 51), (17 * d) // 16


def exponent_sweep(ds: Sequence[int], general: bool = False) -> list[ExponentReport]:
    out = []
    for d in ds:
        tp, r, p = choice_parameters(d)
        out.append(exponent_report(d, tp, r, p, 0, general=general))
    return out


@dataclass(frozen=True)
class UnionBoundReport:
    """Symbolic facts about ``s = theta/2 + 3 theta0/2`` and ``beta0 = 4 theta0 + 1``."""

    identity: bool  # 2s + 1 - beta0 == theta - theta0
    negative_below: bool  # ... and it is < 0 whenever theta < theta0
    spacing_ok: bool  # s > theta + theta0 whenever theta < theta0
    expression: str


def beta0_bookkeeping() -> UnionBoundReport:
    import sympy as sp

    # every expression is linear in the symbols, so expansion decides equality and sign
    theta, theta0, delta = sp.symbols("theta theta0 delta", positive=True)
    s = theta / 2 + 3 * theta0 / 2
    beta0 = 4 * theta0 + 1
    expr = sp.expand(2 * s + 1 - beta0)
    identity = sp.expand(expr - (theta - theta0)) == 0
    below = sp.expand(expr.subs(theta, theta0 - delta))
    gap = sp.expand((s - theta - theta0).subs(theta, theta0 - delta))
    return UnionBoundReport(
        identity=bool(identity),
        negative_below=bool(below.is_negative),
        spacing_ok=bool(gap.is_positive),
        expression=str(expr),
    )


# -- the lattice -------------------------------------------------------------


@dataclass(frozen=True)
class DomainGrid:
    """Lattice points ``E + i eta`` with spacing ``N^-s`` inside the bulk domain.

    Real parts lie on ``N^-s Z``; imaginary parts on ``N^(-theta/4) + N^-s Z``
    so that the starting line ``eta = N^(-theta/4)`` belongs to the lattice.
    """

    kappa: float
    c_kappa: float
    theta: float
    N: int
    s: float
    spacing: float
    E_values: np.ndarray
    eta_values: np.ndarray
    initial_eta: float

    @property
    def points(self) -> np.ndarray:
        return (self.E_values[None, :] + 1j * self.eta_values[:, None]).ravel()

    @property
    def initial_in_domain(self) -> bool:
        return bool(np.any(np.isclose(self.eta_values, self.initial_eta, rtol=0, atol=self.spacing * 1e-9)))

    def contains(self, z: complex) -> bool:
        return self.kappa < z.real < 4 - self.kappa and self.N ** (-self.theta) < z.imag < self.c_kappa

    def adjacent_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Index pairs into :attr:`points` of horizontal, vertical and diagonal neighbours."""
        nE, nH = self.E_values.size, self.eta_values.size
        idx = np.arange(nE * nH).reshape(nH, nE)
        a = [idx[:, :-1].ravel(), idx[:-1, :].ravel(), idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()]
        b = [idx[:, 1:].ravel(), idx[1:, :].ravel(), idx[1:, 1:].ravel(), idx[1:, :-1].ravel()]
        return np.concatenate(a), np.concatenate(b)


def domain_lattice(
    tp: ThetaParams,
    kappa: float,
    c_kappa: float,
    N: int,
    theta: float,
    s: Optional[float] = None,
    max_points: int = 10**6,
    override: bool = False,
) -> DomainGrid:
    """Discretize ``(kappa, 4 - kappa) x (N^-theta, c_kappa)``.

    ``s`` defaults to ``theta/2 + 3 theta0/2``.  ``theta`` must lie in
    ``(0, theta0)`` unless ``override`` is set (desk-scale exploration).
    """
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    theta0 = float(tp.theta0)
    if not override and not 0 < theta < theta0:
        raise ValueError(f"theta must lie in (0, theta0={theta0:.6g}); pass override=True to explore")
    if s is None:
        s = theta / 2 + 3 * theta0 / 2
    h = float(N) ** (-s)
    if not h > 4 * np.finfo(float).eps:
        raise ValueError(f"lattice spacing {h:g} is below the floating-point resolution")
    n_lo = math.floor(kappa / h) + 1
    n_hi = math.ceil((4 - kappa) / h) - 1
    eta0 = float(N) ** (-theta / 4)
    lower = float(N) ** (-theta)
    m_lo = math.floor((lower - eta0) / h) + 1
    m_hi = math.ceil((c_kappa - eta0) / h) - 1
    count = max(n_hi - n_lo + 1, 0) * max(m_hi - m_lo + 1, 0)
    if count > max_points:
        raise ValueError(f"lattice has {count} points, above max_points={max_points}")
    E = h * np.arange(n_lo, n_hi + 1, dtype=float)
    eta = eta0 + h * np.arange(m_lo, m_hi + 1, dtype=float)
    E = E[(E > kappa) & (E < 4 - kappa)]
    eta = eta[(eta > lower) & (eta < c_kappa)]
    return DomainGrid(kappa, c_kappa, theta, N, s, h, E, eta, eta0)


@dataclass(frozen=True)
class ContinuityCheck:
    max_diff: float
    max_ratio_lipschitz: float  # max |dm| / (|dz| min(eta)^-2); <= 1 always
    mvt_budget: float  # sqrt(2) N^(2 theta - s)
    pairs: int

    @property
    def within_budget(self) -> bool:
        return self.max_diff <= self.mvt_budget


def continuity_check(decomp: SpectralDecomposition, grid: DomainGrid) -> ContinuityCheck:
    pts = grid.points
    a, b = grid.adjacent_pairs()
    if a.size == 0:
        return ContinuityCheck(0.0, 0.0, math.sqrt(2) * grid.N ** (2 * grid.theta - grid.s), 0)
    m = stieltjes_mN(decomp, pts)
    dm = np.abs(m[a] - m[b])
    dz = np.abs(pts[a] - pts[b])
    emin = np.minimum(pts[a].imag, pts[b].imag)
    return ContinuityCheck(
        max_diff=float(dm.max()),
        max_ratio_lipschitz=float(np.max(dm / (dz * emin**-2))),
        mvt_budget=math.sqrt(2) * grid.N ** (2 * grid.theta - grid.s),
        pairs=int(a.size),
    )


# -- sweeps ------------------------------------------------------------------


def _seeded(params: EnsembleParams, seed: int) -> EnsembleParams:
    return dataclasses.replace(params, seed=int(seed))


def spectrum(params: EnsembleParams, vectors: bool = False) -> SpectralDecomposition:
    """Eigenvalues (optionally eigenvectors) of ``X X^*`` for the base draw."""
    return eig_herm(gram(draw_matrix(params)), vectors=vectors, check=vectors)


SWEEP_COLUMNS = ("seed", "N", "d", "E", "eta", "re_mN", "im_mN", "re_mMP", "im_mMP", "err", "bound", "flag")


@dataclass
class SweepResult:
    N: int
    d: int
    theta0: float
    seed: np.ndarray
    z: np.ndarray
    m_N: np.ndarray
    m_MP: np.ndarray

    @property
    def err(self) -> np.ndarray:
        return np.abs(self.m_N - self.m_MP)

    @property
    def bound(self) -> np.ndarray:
        return float(self.N) ** (-self.theta0) / self.z.imag

    @property
    def flag(self) -> np.ndarray:
        return self.err > self.bound

    @property
    def imsign_ok(self) -> bool:
        """``Im m_N > 0`` and ``Im[sqrt(z) m_N] > 0`` at every row."""
        return bool(np.all(self.m_N.imag > 0) and np.all((np.sqrt(self.z) * self.m_N).imag > 0))

    def rows(self):
        for s, z, mn, mp, e, b, f in zip(self.seed, self.z, self.m_N, self.m_MP, self.err, self.bound, self.flag):
            yield (int(s), self.N, self.d, z.real, z.imag, mn.real, mn.imag, mp.real, mp.imag, e, b, bool(f))

    def per_seed(self) -> dict[int, float]:
        """``sup_z err * Im z`` for each seed."""
        scaled = self.err * self.z.imag
        return {int(s): float(scaled[self.seed == s].max()) for s in np.unique(self.seed)}

    def summary(self) -> dict:
        per = self.per_seed()
        vals = np.array(list(per.values()))
        return {
            "per_seed_sup_err_eta": {str(k): v for k, v in per.items()},
            "mean_sup_err_eta": float(vals.mean()),
            "max_sup_err_eta": float(vals.max()),
            "mean_err": float(self.err.mean()),
            "max_err": float(self.err.max()),
            "flag_count": int(self.flag.sum()),
            "rows": int(self.z.size),
            "imsign_ok": self.imsign_ok,
        }


def locallaw_sweep(
    params: EnsembleParams,
    points,
    seeds: Sequence[int],
    theta0: Optional[float] = None,
) -> SweepResult:
    """One eigenvalue solve per seed; ``m_N`` and ``m_MP`` at every point.

    Rows are ordered by seed, then ``E``, then ``eta``.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("seed list is empty")
    pts = np.asarray(points.points if isinstance(points, DomainGrid) else points, dtype=complex).ravel()
    if pts.size == 0:
        raise ValueError("no evaluation points")
    pts = pts[np.lexsort((pts.imag, pts.real))]
    if theta0 is None:
        theta0 = float(theta_params(params.d).theta0)
    mmp = m_mp(pts) if pts.size > 1 else np.atleast_1d(m_mp(pts[0]))
    seed_col, z_col, mn_col, mp_col = [], [], [], []
    for s in sorted(set(seeds)):
        dec = spectrum(_seeded(params, s))
        seed_col.append(np.full(pts.size, s))
        z_col.append(pts)
        mn_col.append(np.atleast_1d(stieltjes_mN(dec, pts)))
        mp_col.append(mmp)
    return SweepResult(
        params.N,
        params.d,
        float(theta0),
        np.concatenate(seed_col),
        np.concatenate(z_col),
        np.concatenate(mn_col),
        np.concatenate(mp_col),
    )


def envelope_constant(sweep: SweepResult) -> float:
    """Smallest ``c`` with ``err <= c / (N eta)`` on every row."""
    return float(np.max(sweep.err * sweep.N * sweep.z.imag))


@dataclass(frozen=True)
class RigidityScan:
    E: np.ndarray
    gap: np.ndarray

    @property
    def sup_gap(self) -> float:
        return float(self.gap.max())


def rigidity_scan(decomp: SpectralDecomposition, E_grid) -> RigidityScan:
    """``|F_N(E) - F_MP(E)|`` on a grid of energies."""
    E = np.atleast_1d(np.asarray(E_grid, dtype=float))
    gap = np.abs(np.atleast_1d(counting_function(decomp, E)) - np.atleast_1d(F_mp(E)))
    return RigidityScan(E, gap)


@dataclass(frozen=True)
class DelocScan:
    bulk: np.ndarray  # indices alpha with eigenvalue in (kappa, 4 - kappa)
    sup_norm2: np.ndarray  # max_i |u_alpha(i)|^2 for bulk alpha
    surrogate: Optional[np.ndarray]  # max_i eta Im G_ii(lambda_alpha + i eta)
    eta: float
    surrogate_dominates: bool = True  # eta Im G_ii >= |u_alpha(i)|^2 entrywise

    @property
    def max_sup_norm2(self) -> float:
        return float(self.sup_norm2.max()) if self.sup_norm2.size else math.nan


def deloc_scan(decomp: SpectralDecomposition, kappa: float, eta: float = 0.05, surrogate: bool = True) -> DelocScan:
    """Sup-norms of bulk eigenvectors and the resolvent upper bound.

    ``eta Im[(H - E - i eta)^{-1}]_ii = sum_b w_b |u_b(i)|^2`` with
    ``w_b = eta^2 / ((lambda_b - E)^2 + eta^2)``; at ``E = lambda_alpha`` the
    ``b = alpha`` weight is 1, so the sum dominates ``|u_alpha(i)|^2``.
    """
    if decomp.eigenvectors is None:
        raise ValueError("delocalization scan needs eigenvectors")
    lam, U = decomp.eigenvalues, decomp.eigenvectors
    P = np.abs(U) ** 2  # P[i, alpha]
    bulk = np.nonzero((lam > kappa) & (lam < 4 - kappa))[0]
    sup = P[:, bulk].max(axis=0) if bulk.size else np.empty(0)
    sur = None
    dominates = True
    if surrogate and bulk.size:
        W = eta**2 / ((lam[None, :] - lam[bulk, None]) ** 2 + eta**2)  # (bulk, N)
        S = W @ P.T  # S[a, i] = eta Im G_ii at E = lambda_bulk[a]
        sur = S.max(axis=1)
        dominates = bool(np.all(S >= P[:, bulk].T * (1 - 1e-12)))
    return DelocScan(bulk, sup, sur, eta, dominates)


# -- descent in eta ----------------------------------------------------------


def descent_ladder(N: int, eta_start: float, eta_stop: float, s: float) -> np.ndarray:
    """Descending ``eta`` values from ``eta_start`` to ``eta_stop`` in steps of at most ``N^-s``."""
    if eta_stop <= 0 or eta_start < eta_stop:
        raise ValueError("need eta_start >= eta_stop > 0")
    h = float(N) ** (-s)
    n = max(1, math.ceil((eta_start - eta_stop) / h))
    return np.linspace(eta_start, eta_stop, n + 1)


def flag_steps(err: np.ndarray, bound: np.ndarray) -> np.ndarray:
    return np.asarray(err) > np.asarray(bound)


@dataclass
class DescentResult:
    N: int
    E: float
    seed: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    err1: np.ndarray
    err2: np.ndarray
    diff: np.ndarray  # |m_N(z1) - m_N(z2)|
    bound: np.ndarray  # c N^-theta0 / eta2

    @property
    def lipschitz_budget(self) -> np.ndarray:
        return np.abs(self.eta1 - self.eta2) * np.minimum(self.eta1, self.eta2) ** -2.0

    @property
    def lipschitz_ok(self) -> np.ndarray:
        return self.diff <= self.lipschitz_budget * (1 + 1e-12) + 1e-15

    @property
    def flag(self) -> np.ndarray:
        return flag_steps(self.err2, self.bound)


def multiscale_descent(
    params: EnsembleParams,
    E: float,
    eta_list: Sequence[float],
    seeds: Sequence[int],
    s: Optional[float] = None,
    c: float = 1.0,
    theta0: Optional[float] = None,
) -> DescentResult:
    """Track ``|m_N - m_MP|`` down a descending ladder of ``eta`` at fixed ``E``.

    Each step records the change of ``m_N`` against the deterministic bound
    ``|dz| / eta_min^2`` and flags ``err > c N^-theta0 / eta``.  With ``s``
    given, every step must be at most ``N^-s``.
    """
    eta = np.asarray(eta_list, dtype=float)
    if eta.size < 2:
        raise ValueError("need at least two eta values")
    if np.any(np.diff(eta) > 0) or np.any(eta <= 0):
        raise ValueError("eta_list must be positive and non-increasing")
    N = params.N
    if s is not None and np.any(-np.diff(eta) > float(N) ** (-s) * (1 + 1e-12)):
        raise ValueError("a step exceeds the lattice spacing N^-s")
    if theta0 is None:
        theta0 = float(theta_params(params.d).theta0)
    seeds = sorted({int(x) for x in seeds})
    if not seeds:
        raise ValueError("seed list is empty")
    z = E + 1j * eta
    mmp = m_mp(z)
    cols = {k: [] for k in ("seed", "eta1", "eta2", "err1", "err2", "diff")}
    for sd in seeds:
        dec = spectrum(_seeded(params, sd))
        m = stieltjes_mN(dec, z)
        err = np.abs(m - mmp)
        cols["seed"].append(np.full(eta.size - 1, sd))
        cols["eta1"].append(eta[:-1])
        cols["eta2"].append(eta[1:])
        cols["err1"].append(err[:-1])
        cols["err2"].append(err[1:])
        cols["diff"].append(np.abs(m[:-1] - m[1:]))
    out = {k: np.concatenate(v) for k, v in cols.items()}
    bound = c * float(N) ** (-theta0) / out["eta2"]
    return DescentResult(N, float(E), bound=bound, **out)
