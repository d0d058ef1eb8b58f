"""Random phase tables and the polynomial-phase matrix.

Entries are ``X[j, k-1] = N**-0.5 * exp(2*pi*i * sum_q omega[j, q] * k**q)`` for
columns ``k = 1..N``.  Every omega is held on the dyadic grid ``m / 2**53``; the
phase ``sum_q m_q * k**q`` is then reduced modulo ``2**53`` with wrapping
``uint64`` arithmetic, which is exact no matter how large ``k**q`` gets.

Random draws come from numpy's Philox counter-based generator keyed by
``(seed, replica)`` with the row index in the counter, so any single value is
a pure function of ``(seed, j, q, replica)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FRAC_BITS = 53
FRAC_SCALE = float(2**FRAC_BITS)
FRAC_MASK = np.uint64(2**FRAC_BITS - 1)
_U64_MAX = 2**64 - 1

#: phase error budget (in cycles) for tables whose values are not on the grid
PHASE_TOL = 1e-10


@dataclass(frozen=True)
class DensitySpec:
    """Density of the phases on the unit torus.

    ``kind="uniform"`` or ``kind="raised_cosine"`` with
    ``rho(w) = 1 + a*cos(2*pi*w)``, ``0 <= a < 1``.
    """

    kind: str = "uniform"
    a: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "raised_cosine"):
            raise ValueError(f"unknown density kind {self.kind!r}")
        if not 0.0 <= self.a < 1.0:
            raise ValueError(f"amplitude must satisfy 0 <= a < 1, got {self.a}")
        if self.kind == "uniform" and self.a != 0.0:
            raise ValueError("uniform density takes no amplitude")

    @classmethod
    def uniform(cls) -> "DensitySpec":
        return cls("uniform", 0.0)

    @classmethod
    def raised_cosine(cls, a: float) -> "DensitySpec":
        return cls("raised_cosine", float(a))

    def pdf(self, w):
        w = np.asarray(w, dtype=float)
        return 1.0 + self.a * np.cos(2 * np.pi * w)

    def cdf(self, w):
        w = np.asarray(w, dtype=float)
        return w + self.a / (2 * np.pi) * np.sin(2 * np.pi * w)

    @property
    def derivative_sup(self) -> float:
        """``max |rho'| = 2*pi*a``."""
        return 2 * np.pi * self.a


@dataclass(frozen=True)
class EnsembleParams:
    N: int
    d: int
    density: DensitySpec = field(default_factory=DensitySpec)
    seed: int = 0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        if not 0 <= self.seed <= _U64_MAX:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class OmegaTable:
    """Phases ``omega[j, q]`` stored as integer numerators over ``2**53``.

    ``fixed`` has shape ``(N, d)`` and dtype ``uint64``.  ``quantization_error``
    is nonzero only for tables built from arbitrary floats with
    :meth:`from_values`.
    """

    fixed: np.ndarray
    replica: int = 0
    quantization_error: float = 0.0

    @property
    def values(self) -> np.ndarray:
        return self.fixed.astype(np.float64) / FRAC_SCALE

    @property
    def shape(self):
        return self.fixed.shape

    @classmethod
    def from_values(cls, values, replica: int = 0) -> "OmegaTable":
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        if np.any(values < 0) or np.any(values >= 1):
            values = np.mod(values, 1.0)
        scaled = np.rint(values * FRAC_SCALE)
        err = float(np.max(np.abs(scaled / FRAC_SCALE - values), initial=0.0))
        fixed = np.mod(scaled, FRAC_SCALE).astype(np.uint64)
        return cls(fixed, replica, err)


def _check_replica(replica: int) -> None:
    if replica < 0:
        raise ValueError("replica must be nonnegative")
    if replica > _U64_MAX:
        raise OverflowError(f"replica {replica} does not fit the 64-bit key")


def _raw_row(seed: int, j: int, replica: int, d: int) -> np.ndarray:
    bg = np.random.Philox(key=[seed, replica], counter=[0, j, 0, 0])
    return bg.random_raw(d)


def _raised_cosine_icdf(u: np.ndarray, a: float, tol: float = 1e-12, maxiter: int = 100) -> np.ndarray:
    """Invert ``x + a/(2 pi) sin(2 pi x) = u`` on [0, 1).

    Safeguarded Newton: the bracket shrinks every iteration and any Newton
    step that leaves it is replaced by bisection.  ``F' >= 1 - a > 0``.
    """
    u = np.asarray(u, dtype=np.float64)
    lo = np.zeros_like(u)
    hi = np.ones_like(u)
    x = u.copy()
    c = a / (2 * np.pi)
    for _ in range(maxiter):
        f = x + c * np.sin(2 * np.pi * x) - u
        pos = f > 0
        hi = np.where(pos, x, hi)
        lo = np.where(pos, lo, x)
        step = f / (1.0 + a * np.cos(2 * np.pi * x))
        xn = x - step
        outside = (xn <= lo) | (xn >= hi)
        xn = np.where(outside, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= tol
        x = xn
        if np.all(done):
            break
    else:
        raise RuntimeError("raised-cosine inverse CDF did not converge")
    return x


def _to_fixed(raw: np.ndarray, density: DensitySpec) -> np.ndarray:
    m = raw >> np.uint64(64 - FRAC_BITS)
    if density.kind == "uniform" or density.a == 0.0:
        return m
    u = m.astype(np.float64) / FRAC_SCALE
    x = _raised_cosine_icdf(u, density.a)
    fixed = np.floor(x * FRAC_SCALE)
    return np.clip(fixed, 0, FRAC_SCALE - 1).astype(np.uint64)


def sample_row(params: EnsembleParams, j: int, replica: int = 0) -> np.ndarray:
    """Fixed-point phases of row ``j`` (0-based) at a replica stream, shape ``(d,)``."""
    _check_replica(replica)
    if not 0 <= j < params.N:
        raise IndexError(f"row {j} out of range for N={params.N}")
    return _to_fixed(_raw_row(params.seed, j, replica, params.d), params.density)


def sample_row_replicas(params: EnsembleParams, j: int, replicas) -> np.ndarray:
    """Row ``j`` drawn at each replica index in ``replicas``; shape ``(R, d)``."""
    replicas = list(replicas)
    for r in replicas:
        _check_replica(r)
    if not 0 <= j < params.N:
        raise IndexError(f"row {j} out of range for N={params.N}")
    raw = np.empty((len(replicas), params.d), dtype=np.uint64)
    for n, r in enumerate(replicas):
        raw[n] = _raw_row(params.seed, j, r, params.d)
    return _to_fixed(raw, params.density)


def sample_omegas(params: EnsembleParams, replica: int = 0, row_override: Optional[int] = None) -> OmegaTable:
    """Draw the ``N x d`` phase table.

    Without ``row_override`` every row comes from the ``replica`` stream.  With
    ``row_override=i`` only row ``i`` is drawn at ``replica``; all other rows
    are the base draw (replica 0), bit for bit.
    """
    _check_replica(replica)
    N, d = params.N, params.d
    raw = np.empty((N, d), dtype=np.uint64)
    base = replica if row_override is None else 0
    for j in range(N):
        raw[j] = _raw_row(params.seed, j, base, d)
    if row_override is not None:
        if not 0 <= row_override < N:
            raise IndexError(f"row {row_override} out of range for N={N}")
        raw[row_override] = _raw_row(params.seed, row_override, replica, d)
    return OmegaTable(_to_fixed(raw, params.density), replica)


def _column_powers(ks: np.ndarray, d: int) -> np.ndarray:
    """``k**q mod 2**53`` for q = 1..d, shape ``(d, len(ks))``."""
    out = np.empty((d, ks.size), dtype=np.uint64)
    acc = np.ones(ks.size, dtype=np.uint64)
    k = ks.astype(np.uint64)
    for q in range(d):
        acc = acc * k  # wraps mod 2**64, harmless mod 2**53
        out[q] = acc & FRAC_MASK
    return out


def phase_numerators(fixed_rows: np.ndarray, N: int) -> np.ndarray:
    """Exact ``(sum_q omega_q * k**q) mod 1`` as numerators over ``2**53``.

    ``fixed_rows`` has shape ``(R, d)``; the result has shape ``(R, N)`` with
    column ``k-1`` holding the phase for ``k``.
    """
    fixed_rows = np.atleast_2d(np.asarray(fixed_rows, dtype=np.uint64))
    R, d = fixed_rows.shape
    powers = _column_powers(np.arange(1, N + 1), d)
    acc = np.zeros((R, N), dtype=np.uint64)
    with np.errstate(over="ignore"):
        for q in range(d):
            acc += fixed_rows[:, q, None] * powers[q][None, :]
    return acc & FRAC_MASK


def phase_vectors(fixed_rows: np.ndarray, N: int) -> np.ndarray:
    """Unimodular vectors ``exp(2 pi i phase)``, shape ``(R, N)`` (no ``N**-0.5``)."""
    frac = phase_numerators(fixed_rows, N).astype(np.float64) / FRAC_SCALE
    return np.exp(2j * np.pi * frac)


def phase_error_bound(omegas: OmegaTable, N: int) -> float:
    """Worst-case phase error (cycles) caused by snapping omegas to the grid."""
    d = omegas.shape[1]
    return omegas.quantization_error * sum(float(N) ** q for q in range(1, d + 1))


def build_matrix(params: EnsembleParams, omegas: OmegaTable) -> np.ndarray:
    """The ``N x N`` complex matrix with entries of modulus ``N**-0.5``."""
    N, d = params.N, params.d
    if omegas.shape != (N, d):
        raise ValueError(f"omega table has shape {omegas.shape}, expected {(N, d)}")
    err = phase_error_bound(omegas, N)
    if err > PHASE_TOL:
        raise ValueError(
            f"phase reduction error bound {err:.3g} exceeds {PHASE_TOL:g}; "
            "supply omegas on the 2**-53 grid"
        )
    return phase_vectors(omegas.fixed, N) / math.sqrt(N)


def draw_matrix(params: EnsembleParams, replica: int = 0) -> np.ndarray:
    return build_matrix(params, sample_omegas(params, replica))


@dataclass(frozen=True)
class CharCoefficient:
    value: complex
    cprime: float
    bound: float


def char_coefficient(density: DensitySpec, a: int, quadrature: bool = False) -> CharCoefficient:
    """Fourier coefficient ``int_0^1 exp(2 pi i a w) rho(w) dw``.

    Also returns ``C' = max|rho'| / (2 pi)`` and the integration-by-parts bound
    ``1{a=0} + C'/|a|``.  ``quadrature=True`` evaluates the integral
    numerically instead of in closed form.
    """
    a = int(a)
    cprime = density.derivative_sup / (2 * np.pi)
    bound = 1.0 if a == 0 else cprime / abs(a)
    if quadrature:
        from scipy.integrate import quad

        re = quad(lambda w: float(density.pdf(w)), 0, 1, weight="cos", wvar=2 * np.pi * a)[0]
        im = quad(lambda w: float(density.pdf(w)), 0, 1, weight="sin", wvar=2 * np.pi * a)[0]
        value = complex(re, im)
    elif a == 0:
        value = 1.0 + 0j
    elif abs(a) == 1 and density.kind == "raised_cosine":
        value = complex(density.a / 2)
    else:
        value = 0j
    return CharCoefficient(value, cprime, bound)
