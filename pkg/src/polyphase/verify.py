"""Suite of exact identities and exact combinatorial facts.

Every check returns a residual and a pass flag against a tolerance; nothing
here is statistical.  ``fault="ward"`` corrupts the resolvent before the Ward
check so the harness can prove it detects failures.
"""
from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import diophantine as dio
from .config import TOLERANCE_DEFAULTS
from .ensemble import EnsembleParams, draw_matrix
from .fluctuations import error_decomposition
from .spectral import (
    GreenMatrix,
    check_operator_identity,
    green_minor,
    interlacing_check,
    minor,
    schur_diag,
    schur_terms,
    ward_defect,
)

FAULTS = ("ward",)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tol: float
    passed: bool
    detail: str = ""


def _check(name, value, tol, detail="") -> CheckResult:
    return CheckResult(name, float(value), float(tol), bool(value <= tol), detail)


def _draws(N: int, d: int, seeds):
    for s in seeds:
        yield s, draw_matrix(EnsembleParams(N, d, seed=s))


def check_ward(N, d, seeds, eta, tol, fault: Optional[str] = None) -> CheckResult:
    worst = 0.0
    for s, X in _draws(N, d, seeds):
        rng = np.random.default_rng(s)
        for i in rng.choice(N, size=min(3, N), replace=False):
            z = complex(rng.uniform(0.5, 3.5), eta)
            g = green_minor(minor(X, int(i)), z)
            if fault == "ward":
                G = g.G.copy()
                G[0, -1] += 1e-3 * abs(G[0, 0])
                g = GreenMatrix(G, g.i, g.z)
            worst = max(worst, *ward_defect(g))
    return _check("ward", worst, tol, "max relative row/column deviation")


def check_operator(count: int, seed: int, tol: float) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        m, n = rng.integers(1, 40, size=2)
        A = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / math.sqrt(2 * n)
        z = complex(rng.uniform(-1, 5), rng.uniform(0.05, 1.0))
        worst = max(worst, check_operator_identity(A, z))
    return _check("operator", worst, tol, f"{count} rectangular matrices")


def check_schur(N, d, seeds, eta, tol, per_draw: int = 10) -> CheckResult:
    worst = 0.0
    count = 0
    for s, X in _draws(N, d, seeds):
        rng = np.random.default_rng(s + 1)
        for _ in range(per_draw):
            i = int(rng.integers(N))
            z = complex(rng.uniform(0.2, 3.8), rng.uniform(eta, 1.0))
            F, m_i = schur_terms(X, i, z)
            lhs, rhs = schur_diag(X, i, z, F, m_i)
            worst = max(worst, abs(lhs - rhs) / abs(lhs))
            count += 1
    return _check("schur", worst, tol, f"{count} (draw, i, z) triples, relative")


def check_interlacing(N, d, seeds, eta, tol) -> list[CheckResult]:
    viol = 0.0
    kernel = 0.0
    for s, X in _draws(N, d, seeds):
        for i in (0, N // 2, N - 1):
            res = interlacing_check(X, i, complex(2.0, eta), tol=tol)
            viol = max(viol, res.max_violation)
            kernel = max(kernel, res.kernel_defect)
    return [
        _check("interlacing", viol, tol, "max Cauchy interlacing violation"),
        _check("kernel_term", kernel, 1e-12, "| |m^(i) - tr(B-z)^-1/N| - 1/(N|z|) |"),
    ]


def check_self_consistency(N, d, seed, eta, tol) -> CheckResult:
    X = draw_matrix(EnsembleParams(N, d, seed=seed))
    res = error_decomposition(X, complex(2.0, eta)).residual
    return _check("self_consistency", res, tol, "|m_N + (1/Nz) sum_i 1/(1 + m^(i) + F_i)|")


def _elementary_direct(values) -> list[int]:
    """Coefficients of ``prod (x - a)`` by repeated multiplication, as ``e_1..e_n``."""
    poly = [1]
    for a in values:
        poly = [c - a * prev for c, prev in zip(poly + [0], [0] + poly)]
    return [(-1) ** k * c for k, c in enumerate(poly)][1:]


def check_newton_girard(count: int, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(count):
        n = int(rng.integers(1, 9))
        vals = [int(x) for x in rng.integers(-50, 51, size=n)]
        e = dio.newton_girard(dio.power_sums(vals, n))
        if any(x.denominator != 1 for x in e) or [int(x) for x in e] != _elementary_direct(vals):
            bad += 1
    return _check("newton_girard", bad, 0, f"{count} random multisets, exact")


def check_uniqueness() -> CheckResult:
    bad = 0
    checked = 0
    for n, m in ((1, 5), (2, 6)):
        rep = dio.uniqueness_sweep(n, m)
        bad += len(rep.counterexamples) + rep.polynomial_mismatches
        checked += rep.hypothesis_pairs
    return _check("uniqueness", bad, 0, f"{checked} hypothesis-satisfying list pairs")


def check_dichotomy(count: int, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(count):
        n = int(rng.integers(1, 13))
        pairs = []
        while len(pairs) < n:
            k, l = (int(x) for x in rng.integers(1, 31, size=2))
            if k != l:
                pairs.append((k, l))
        s = int(rng.integers(1, 5))
        if not dio.dichotomy(pairs, s).validate(pairs, s):
            bad += 1
    return _check("dichotomy", bad, 0, f"{count} random pair lists")


def check_dio_roundtrip() -> CheckResult:
    bad = 0
    systems = [dio.VinogradovSystem(6, 2, 1), dio.VinogradovSystem(5, 2, 2, (3, 9)), dio.VinogradovSystem(7, 3, 1)]
    for sysm in systems:
        sols = dio.enumerate_Lv(sysm, off_diagonal=False)
        if len(sols) != dio.count_Lv_convolution(sysm):
            bad += 1
        fd, path = tempfile.mkstemp(suffix=".txt")
        os.close(fd)
        try:
            dio.write_solutions(path, sols)
            back = dio.read_solutions(path)
        finally:
            os.unlink(path)
        if not np.array_equal(back.tuples, sols.tuples):
            bad += 1
    return _check("dio_roundtrip", bad, 0, "enumerate == convolution, write/read re-verified")


def run_suite(
    N: int = 60,
    d: int = 3,
    seeds=(1,),
    eta: float = 0.1,
    operator_matrices: int = 100,
    dichotomy_lists: int = 1000,
    tol: Optional[dict] = None,
    fault: Optional[str] = None,
) -> list[CheckResult]:
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")
    t = dict(TOLERANCE_DEFAULTS)
    t.update(tol or {})
    seeds = list(seeds)
    out = [
        check_ward(N, d, seeds, eta, t["ward"], fault),
        check_operator(operator_matrices, seeds[0], t["operator"]),
        check_schur(N, d, seeds, eta, t["schur"]),
        *check_interlacing(N, d, seeds, eta, t["interlacing"]),
        check_self_consistency(N, d, seeds[0], eta, t["self_consistency"]),
        check_newton_girard(1000, seeds[0]),
        check_uniqueness(),
        check_dichotomy(dichotomy_lists, seeds[0]),
        check_dio_roundtrip(),
    ]
    return out
