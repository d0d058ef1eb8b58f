"""The fluctuation term of the self-consistent equation and its moments.

For row ``i`` with unimodular phase vector ``a_k = e[sum_q omega_{i,q} k^q]``

    F_i(z) = (1/N) sum_{k != l} G^(i)_{kl} a_k conj(a_l),

i.e. the row quadratic form minus its average over the row's phases (which is
``m^(i)(z) = tr G^(i) / N`` for the uniform density).  Monte-Carlo routines
redraw only row ``i`` through replica streams; the minor and its resolvent are
computed once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .ensemble import EnsembleParams, char_coefficient, draw_matrix, phase_vectors, sample_row_replicas
from .spectral import GreenMatrix, gram, green_minor, minor, stieltjes_mN, eig_herm

MAX_MOMENT_ORDER = 8


def fluctuation(green: GreenMatrix, row_fixed: np.ndarray) -> complex:
    """``F_i`` from the minor resolvent and the fixed-point phases of row ``i``."""
    G = green.G
    N = G.shape[0]
    a = phase_vectors(np.asarray(row_fixed)[None, :], N)[0]
    return complex((a @ G @ a.conj() - np.trace(G)) / N)


def fluctuation_batch(green: GreenMatrix, rows_fixed: np.ndarray) -> np.ndarray:
    """Vectorized :func:`fluctuation` over rows of shape ``(R, d)``."""
    G = green.G
    N = G.shape[0]
    A = phase_vectors(rows_fixed, N)
    quad = np.einsum("rk,rk->r", A @ G, A.conj())
    return (quad - np.trace(G)) / N


def _replica_ids(replicas: int) -> range:
    if replicas < 1:
        raise ValueError("need at least one replica")
    return range(1, replicas + 1)


@dataclass(frozen=True)
class PartialExpectation:
    mean: complex
    stderr: float
    m_minor: complex
    replicas: int

    @property
    def stderr_defined(self) -> bool:
        return self.replicas >= 2


def _complex_stderr(samples: np.ndarray) -> float:
    n = samples.size
    if n < 2:
        return math.nan
    return float(np.sqrt((np.var(samples.real, ddof=1) + np.var(samples.imag, ddof=1)) / n))


def quadratic_form_samples(params: EnsembleParams, i: int, z, replicas: int) -> tuple[np.ndarray, complex]:
    """Row quadratic form for ``replicas`` fresh draws of row ``i``, plus ``m^(i)(z)``.

    Uses the eigenbasis of the minor Gram matrix:
    ``Q = sum_j |<r, e_j>|^2 / (lambda_j - z)``.
    """
    z = complex(z)
    X = draw_matrix(params)
    N = params.N
    mino = minor(X, i)
    A = mino.X.conj().T @ mino.X
    dec = eig_herm(0.5 * (A + A.conj().T), check=False, source="minor")
    rows = phase_vectors(sample_row_replicas(params, i, _replica_ids(replicas)), N) / math.sqrt(N)
    W = rows @ dec.eigenvectors
    Q = (np.abs(W) ** 2) @ (1.0 / (dec.eigenvalues - z))
    return Q, stieltjes_mN(dec, z)


def partial_expectation_mc(params: EnsembleParams, i: int, z, replicas: int) -> PartialExpectation:
    """Replica average of the row-``i`` quadratic form with the minor held fixed."""
    Q, m_minor = quadratic_form_samples(params, i, z, replicas)
    return PartialExpectation(complex(np.mean(Q)), _complex_stderr(Q), complex(m_minor), replicas)


def fluctuation_samples(params: EnsembleParams, i: int, z, replicas: int) -> np.ndarray:
    """``F_i(z)`` for ``replicas`` independent redraws of row ``i``."""
    X = draw_matrix(params)
    green = green_minor(minor(X, i), z)
    rows = sample_row_replicas(params, i, _replica_ids(replicas))
    return fluctuation_batch(green, rows)


@dataclass(frozen=True)
class MomentEstimate:
    p: int
    estimate: float  # |mean(F^{2p})|
    stderr: float
    mean_abs: float  # mean(|F|^{2p})
    bound: float
    replicas: int


def moment_bound(N: int, eta: float, p: int, eps: float = 0.0) -> float:
    """``(N^{-1/36 - eps} / eta)^{2p}``."""
    return (N ** (-1 / 36 - eps) / eta) ** (2 * p)


def moment_from_samples(F: np.ndarray, p: int, N: int = 1, eta: float = 1.0, eps: float = 0.0) -> MomentEstimate:
    if 2 * p > MAX_MOMENT_ORDER or p < 1:
        raise ValueError(f"2p must lie in [2, {MAX_MOMENT_ORDER}], got 2p={2 * p}")
    F = np.asarray(F, dtype=complex)
    powers = F ** (2 * p)
    return MomentEstimate(
        p=p,
        estimate=float(abs(np.mean(powers))),
        stderr=_complex_stderr(powers),
        mean_abs=float(np.mean(np.abs(F) ** (2 * p))),
        bound=moment_bound(N, eta, p, eps),
        replicas=F.size,
    )


def moment_mc(params: EnsembleParams, i: int, z, p: int, replicas: int, eps: float = 0.0) -> MomentEstimate:
    """Monte-Carlo ``|E_i[F_i(z)^{2p}]|`` with the minor fixed."""
    F = fluctuation_samples(params, i, z, replicas)
    return moment_from_samples(F, p, params.N, complex(z).imag, eps)


def weight_f(v, Cprime: float) -> float:
    """``prod_q (1 if v_q == 0 else C'/|v_q|)``."""
    out = 1.0
    for vq in v:
        if vq != 0:
            out *= Cprime / abs(vq)
    return out


def weight_f_box_sum(d: int, M: int, Cprime: float) -> float:
    """Sum of :func:`weight_f` over the box ``|v_q| <= M`` by direct summation.

    ``f`` factorizes over coordinates, so the box sum is the ``d``-th power of
    the one-dimensional sum ``1 + 2 C' sum_{n=1}^M 1/n``.
    """
    total = 0.0
    step = 10**7
    for s in range(1, M + 1, step):
        n = np.arange(s, min(s + step, M + 1), dtype=np.float64)
        total += float(np.sum(1.0 / n))
    return (1.0 + 2.0 * Cprime * total) ** d


def phase_average_bias(green: GreenMatrix, params: EnsembleParams) -> tuple[complex, float]:
    """Exact ``E_i[Q] - m^(i)`` for a general density, and its ``f``-envelope.

    The first value is ``(1/N) sum_{k != l} G_kl prod_q c(k^q - l^q)`` with
    ``c`` the Fourier coefficients of the density; the second replaces each
    factor by the bound ``1{0} + C'/|.|``.
    """
    G = green.G
    N, d = G.shape[0], params.d
    ks = np.arange(1, N + 1)
    coeff = np.ones((N, N), dtype=complex)
    env = np.ones((N, N))
    cprime = char_coefficient(params.density, 0).cprime
    for q in range(1, d + 1):
        diff = [[int(k) ** q - int(l) ** q for l in ks] for k in ks]
        coeff *= np.array([[char_coefficient(params.density, a).value for a in row] for row in diff])
        env *= np.array([[1.0 if a == 0 else cprime / abs(a) for a in row] for row in diff])
    off = ~np.eye(N, dtype=bool)
    bias = complex(np.sum(G[off] * coeff[off]) / N)
    envelope = float(np.sum(np.abs(G[off]) * env[off]) / N)
    return bias, envelope


@dataclass(frozen=True)
class ErrorDecomposition:
    z: complex
    m_N: complex
    interlace: np.ndarray  # m^(i) - m_N
    fluct: np.ndarray  # F_i
    residual: float  # |m_N + (1/(N z)) sum_i 1/(1 + m^(i) + F_i)|


def error_decomposition(X: np.ndarray, z) -> ErrorDecomposition:
    """Split the self-consistent error into its interlacing and fluctuation parts.

    Every row is removed in turn (``N`` dense solves), so keep ``N`` modest.
    """
    z = complex(z)
    N = X.shape[0]
    mN = complex(np.trace(np.linalg.inv(gram(X) - z * np.eye(N))) / N)
    m_i = np.empty(N, dtype=complex)
    F = np.empty(N, dtype=complex)
    for i in range(N):
        green = green_minor(minor(X, i), z)
        m_i[i] = np.trace(green.G) / N
        F[i] = X[i] @ green.G @ X[i].conj() - m_i[i]
    residual = abs(mN + np.sum(1.0 / (1 + m_i + F)) / (N * z))
    return ErrorDecomposition(z, mN, m_i - mN, F, float(residual))


def diophantine_expansion(green: GreenMatrix, p: int, params: EnsembleParams) -> complex:
    """``E_i[F_i^{2p}]`` written as a sum over index tuples (uniform density).

    Brute force over ``(N(N-1))^{2p}`` ordered pair lists; keeps only tuples
    whose power-sum differences vanish for every ``q <= d``.  Intended as an
    oracle at tiny ``N``.
    """
    if params.density.kind != "uniform":
        raise ValueError("expansion oracle implemented for the uniform density")
    G = green.G
    N, d = G.shape[0], params.d
    pairs = [(k, l) for k in range(1, N + 1) for l in range(1, N + 1) if k != l]
    total = 0j
    for combo in product(pairs, repeat=2 * p):
        if all(sum(k**q - l**q for k, l in combo) == 0 for q in range(1, d + 1)):
            term = 1 + 0j
            for k, l in combo:
                term *= G[k - 1, l - 1]
            total += term
    return total / N ** (2 * p)
