"""Dense Hermitian spectral tools: Gram matrices, minors, resolvents and the
exact identities that connect them (Schur complement, Ward, interlacing).

Row indices ``i`` are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class SpectralError(RuntimeError):
    """A factorization or solve missed its residual target."""


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    source: str = "gram"

    @property
    def N(self) -> int:
        return self.eigenvalues.size


@dataclass(frozen=True)
class MinorData:
    X: np.ndarray  # (N-1) x N
    i: int


@dataclass(frozen=True)
class GreenMatrix:
    G: np.ndarray
    i: Optional[int]
    z: complex

    @property
    def eta(self) -> float:
        return self.z.imag


def _check_z(z) -> complex:
    z = complex(z)
    if not z.imag > 0:
        raise ValueError(f"spectral parameter needs Im z > 0, got {z}")
    return z


def gram(X: np.ndarray) -> np.ndarray:
    """``H = X X^*``, symmetrized so that ``H == H^*`` exactly."""
    H = X @ X.conj().T
    H = 0.5 * (H + H.conj().T)
    return H


def _fix_phases(U: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(U), axis=0)
    lead = U[idx, np.arange(U.shape[1])]
    return U * (np.abs(lead) / lead)[None, :]


def eig_herm(H: np.ndarray, vectors: bool = True, check: bool = True, source: str = "gram") -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix, ascending eigenvalues.

    Each eigenvector is rotated so its largest-modulus entry is real positive.
    With ``check=True`` the residual and orthonormality targets are enforced.
    """
    H = np.asarray(H)
    try:
        if not vectors:
            return SpectralDecomposition(np.linalg.eigvalsh(H), None, source)
        w, U = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigensolver failed: {exc}") from exc
    U = _fix_phases(U)
    if check and H.size:
        scale = max(np.linalg.norm(H, 2), 1.0)
        res = np.max(np.linalg.norm(H @ U - U * w[None, :], axis=0))
        if res > 1e-9 * scale:
            raise SpectralError(f"eigen-residual {res:.3e} exceeds 1e-9*||H||")
        orth = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[1])))
        if orth > 1e-10:
            raise SpectralError(f"orthonormality defect {orth:.3e}")
    return SpectralDecomposition(w, U, source)


def stieltjes_mN(decomp: SpectralDecomposition, z):
    """``(1/N) sum_j 1/(lambda_j - z)`` for scalar or array ``z``."""
    zs = np.asarray(z, dtype=complex)
    if np.any(zs.imag <= 0):
        raise ValueError("Stieltjes transform needs Im z > 0")
    lam = decomp.eigenvalues
    flat = zs.ravel()
    out = np.empty(flat.shape, dtype=complex)
    chunk = max(1, 2**22 // max(lam.size, 1))
    for s in range(0, flat.size, chunk):
        zz = flat[s : s + chunk]
        out[s : s + chunk] = np.mean(1.0 / (lam[None, :] - zz[:, None]), axis=1)
    out = out.reshape(zs.shape)
    return complex(out) if out.ndim == 0 else out


def counting_function(decomp: SpectralDecomposition, E):
    """Fraction of eigenvalues ``<= E`` (right-continuous)."""
    lam = np.sort(decomp.eigenvalues)
    counts = np.searchsorted(lam, np.asarray(E, dtype=float), side="right")
    out = counts / lam.size
    return float(out) if np.ndim(out) == 0 else out


def minor(X: np.ndarray, i: int) -> MinorData:
    if not 0 <= i < X.shape[0]:
        raise IndexError(f"row {i} out of range")
    return MinorData(np.delete(X, i, axis=0), i)


def minor_gram(m: MinorData) -> np.ndarray:
    """The ``N x N`` matrix ``(X^(i))^* X^(i)``; it always has a zero eigenvalue."""
    A = m.X.conj().T @ m.X
    return 0.5 * (A + A.conj().T)


def resolvent(H: np.ndarray, z, check: bool = True) -> np.ndarray:
    z = _check_z(z)
    n = H.shape[0]
    shifted = H - z * np.eye(n)
    G = np.linalg.solve(shifted, np.eye(n, dtype=complex))
    if check:
        res = np.max(np.abs(shifted @ G - np.eye(n)), initial=0.0)
        if res > 1e-9:
            raise SpectralError(f"resolvent residual {res:.3e} exceeds 1e-9")
    return G


def green_minor(m: MinorData, z, check: bool = True) -> GreenMatrix:
    """``G^(i) = ((X^(i))^* X^(i) - z)^{-1}`` by a direct dense solve."""
    z = _check_z(z)
    return GreenMatrix(resolvent(minor_gram(m), z, check), m.i, z)


def ward_defect(green: GreenMatrix) -> tuple[float, float]:
    """Max relative deviation of row and column Ward sums from ``Im G_kk / eta``."""
    G = green.G
    target = G.diagonal().imag / green.eta
    rows = np.sum(np.abs(G) ** 2, axis=1)
    cols = np.sum(np.abs(G) ** 2, axis=0)
    return (
        float(np.max(np.abs(rows - target) / np.abs(target))),
        float(np.max(np.abs(cols - target) / np.abs(target))),
    )


def symmetry_defect(green: GreenMatrix) -> float:
    """``max | |G_kl| - |G_lk| |``; reported only, not an identity for complex H."""
    A = np.abs(green.G)
    return float(np.max(np.abs(A - A.T)))


def check_operator_identity(A: np.ndarray, z) -> float:
    """Max-norm residual of ``A^*(AA^* - z)^{-1}A - A^*A(A^*A - z)^{-1}``."""
    z = complex(z)
    if z.imag == 0:
        raise ValueError("operator identity needs Im z != 0")
    A = np.asarray(A, dtype=complex)
    m, n = A.shape
    AAs = A @ A.conj().T
    AsA = A.conj().T @ A
    lhs = A.conj().T @ np.linalg.solve(AAs - z * np.eye(m), A)
    # right-multiplication by the inverse: solve from the right via transposes
    rhs = np.linalg.solve((AsA - z * np.eye(n)).T, AsA.T).T
    return float(np.max(np.abs(lhs - rhs), initial=0.0))


def row_quadratic_form(green: GreenMatrix, row: np.ndarray) -> complex:
    """``sum_j |<r, e_j>|^2 / (lambda_j - z)`` written as ``r^T G conj(r)``."""
    return complex(row @ green.G @ row.conj())


def schur_terms(X: np.ndarray, i: int, z) -> tuple[complex, complex]:
    """``(F_i, m^(i))`` for row ``i`` of ``X`` computed from the draw itself."""
    N = X.shape[0]
    green = green_minor(minor(X, i), z)
    m_minor = complex(np.trace(green.G) / N)
    return row_quadratic_form(green, X[i]) - m_minor, m_minor


def schur_diag(X: np.ndarray, i: int, z, F_i: complex, m_minor: complex) -> tuple[complex, complex]:
    """``([(XX^* - z)^{-1}]_ii, -1/(z + z m^(i) + z F_i))``."""
    z = _check_z(z)
    N = X.shape[0]
    e = np.zeros(N, dtype=complex)
    e[i] = 1.0
    lhs = np.linalg.solve(gram(X) - z * np.eye(N), e)[i]
    rhs = -1.0 / (z + z * m_minor + z * F_i)
    return complex(lhs), complex(rhs)


@dataclass(frozen=True)
class InterlacingResult:
    gap: float
    bound: float
    interlaced: bool
    max_violation: float
    kernel_defect: float


def interlacing_check(X: np.ndarray, i: int, z, C: float = 4.0, tol: float = 1e-9) -> InterlacingResult:
    """Compare ``m_N`` with the minor transform ``m^(i)`` and test Cauchy interlacing.

    ``gap = |m_N - m^(i)|`` against ``C/(N eta)``; eigenvalues ``mu`` of ``H``
    with row/column ``i`` deleted must satisfy ``lam_j <= mu_j <= lam_{j+1}``.
    ``kernel_defect`` is ``| |m^(i) - tr(B - z)^{-1}/N| - 1/(N|z|) |``.
    """
    z = _check_z(z)
    N = X.shape[0]
    H = gram(X)
    lam = np.linalg.eigvalsh(H)
    B = np.delete(np.delete(H, i, axis=0), i, axis=1)
    mu = np.linalg.eigvalsh(B) if N > 1 else np.empty(0)
    viol = 0.0
    if mu.size:
        viol = max(float(np.max(lam[:-1] - mu)), float(np.max(mu - lam[1:])), 0.0)
    mN = np.mean(1.0 / (lam - z))
    A_eigs = np.concatenate([mu, [0.0]])  # spectrum of (X^(i))^* X^(i)
    m_minor = np.sum(1.0 / (A_eigs - z)) / N
    trB = np.sum(1.0 / (mu - z)) / N
    kernel = abs(abs(m_minor - trB) - 1.0 / (N * abs(z)))
    return InterlacingResult(
        gap=float(abs(mN - m_minor)),
        bound=C / (N * z.imag),
        interlaced=viol <= tol,
        max_violation=viol,
        kernel_defect=float(kernel),
    )
