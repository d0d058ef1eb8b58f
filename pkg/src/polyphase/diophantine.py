"""Exact combinatorics of the Vinogradov-type systems

    sum_{a=1}^{2p} (k_a^q - l_a^q) = v_q,   q = 1..d,   k_a, l_a in [N],

their "bad" strata relative to a resolvent, the index-pair dichotomy, and the
Newton-Girard uniqueness argument.  Tuple entries are the integers ``1..N``;
everything that touches power sums uses exact integer arithmetic.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterable, Optional, Sequence

import numpy as np

DEFAULT_STATE_CAP = 10**9
DEFAULT_SOLUTION_CAP = 5 * 10**6
_INT64_SAFE = 2**62


class EnumerationBudgetError(RuntimeError):
    def __init__(self, states: int, cap: int, what: str = "meet-in-the-middle states"):
        super().__init__(f"refusing to enumerate {states} {what} (cap {cap})")
        self.states = states
        self.cap = cap


@dataclass(frozen=True)
class VinogradovSystem:
    N: int
    d: int
    p: int
    v: tuple = ()

    def __post_init__(self):
        if min(self.N, self.d, self.p) < 1:
            raise ValueError("N, d and p must all be >= 1")
        v = tuple(int(x) for x in self.v) if self.v else (0,) * self.d
        if len(v) != self.d:
            raise ValueError(f"v must have length d={self.d}")
        object.__setattr__(self, "v", v)

    @property
    def length(self) -> int:
        return 2 * self.p

    def trivially_empty(self) -> bool:
        return any(abs(vq) > self.length * (self.N**q - 1) for q, vq in enumerate(self.v, 1))

    def with_v(self, v) -> "VinogradovSystem":
        return VinogradovSystem(self.N, self.d, self.p, tuple(v))


def power_differences(tuples: np.ndarray, d: int) -> list[list[int]]:
    """``sum_a (k_a^q - l_a^q)`` for each row, exact Python integers."""
    out = []
    for row in np.asarray(tuples):
        n = len(row) // 2
        ks, ls = [int(x) for x in row[:n]], [int(x) for x in row[n:]]
        out.append([sum(k**q for k in ks) - sum(l**q for l in ls) for q in range(1, d + 1)])
    return out


@dataclass
class SolutionSet:
    """Rows ``(k_1..k_2p, l_1..l_2p)``; every row is verified on construction."""

    system: VinogradovSystem
    tuples: np.ndarray
    off_diagonal: bool = True
    verify: bool = field(default=True, repr=False)

    def __post_init__(self):
        L = self.system.length
        self.tuples = np.asarray(self.tuples, dtype=np.int64).reshape(-1, 2 * L)
        if self.verify:
            self._verify()

    def _verify(self):
        sysm = self.system
        t = self.tuples
        if t.size and (t.min() < 1 or t.max() > sysm.N):
            raise ValueError("tuple entry outside [1, N]")
        if self.off_diagonal and t.size:
            L = sysm.length
            if np.any(t[:, :L] == t[:, L:]):
                raise ValueError("off-diagonal flag set but some k_a == l_a")
        if _fits_int64(sysm):
            diffs = _power_diff_array(t, sysm.d)
            bad = np.any(diffs != np.asarray(sysm.v, dtype=np.int64)[None, :], axis=1)
        else:
            bad = np.array([row != list(sysm.v) for row in power_differences(t, sysm.d)], dtype=bool)
        if bad.size and np.any(bad):
            raise ValueError(f"{int(bad.sum())} tuples violate the power-sum equations")

    def __len__(self) -> int:
        return self.tuples.shape[0]

    @property
    def k(self) -> np.ndarray:
        return self.tuples[:, : self.system.length]

    @property
    def l(self) -> np.ndarray:
        return self.tuples[:, self.system.length :]

    def subset(self, mask: np.ndarray) -> "SolutionSet":
        return SolutionSet(self.system, self.tuples[mask], self.off_diagonal, verify=False)

    def header(self) -> dict:
        s = self.system
        return {"N": s.N, "d": s.d, "p": s.p, "v": list(s.v), "off_diagonal": self.off_diagonal, "count": len(self)}


def _fits_int64(sysm: VinogradovSystem) -> bool:
    return 2 * sysm.length * sysm.N**sysm.d < _INT64_SAFE


def _power_diff_array(t: np.ndarray, d: int) -> np.ndarray:
    n = t.shape[1] // 2
    out = np.empty((t.shape[0], d), dtype=np.int64)
    kp = np.ones_like(t[:, :n])
    lp = np.ones_like(t[:, n:])
    for q in range(d):
        kp = kp * t[:, :n]
        lp = lp * t[:, n:]
        out[:, q] = kp.sum(axis=1) - lp.sum(axis=1)
    return out


def write_solutions(path, sols: SolutionSet) -> None:
    """JSON header line followed by one comma-separated tuple per line."""
    with open(path, "w", newline="\n") as fh:
        fh.write(json.dumps(sols.header(), sort_keys=True) + "\n")
        for row in sols.tuples:
            fh.write(",".join(str(int(x)) for x in row) + "\n")


def read_solutions(path) -> SolutionSet:
    """Inverse of :func:`write_solutions`; re-verifies every tuple."""
    with open(path) as fh:
        header = json.loads(fh.readline())
        rows = [[int(x) for x in line.split(",")] for line in fh if line.strip()]
    sysm = VinogradovSystem(header["N"], header["d"], header["p"], tuple(header["v"]))
    sols = SolutionSet(sysm, np.array(rows, dtype=np.int64).reshape(-1, 4 * sysm.p), header["off_diagonal"])
    if len(sols) != header["count"]:
        raise ValueError(f"header count {header['count']} but {len(sols)} records")
    return sols


# -- meet in the middle ------------------------------------------------------


def _pair_list(N: int, off_diagonal: bool) -> np.ndarray:
    k, l = np.meshgrid(np.arange(1, N + 1), np.arange(1, N + 1), indexing="ij")
    pairs = np.stack([k.ravel(), l.ravel()], axis=1)
    if off_diagonal:
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    return pairs


class _HalfTable:
    """All half-tuples (p pairs) with their power-difference vectors."""

    def __init__(self, sysm: VinogradovSystem, off_diagonal: bool, cap: int):
        N, d, p = sysm.N, sysm.d, sysm.p
        pairs = _pair_list(N, off_diagonal)
        states = pairs.shape[0] ** p
        if states > cap:
            raise EnumerationBudgetError(states, cap)
        self.sysm = sysm
        self.exact64 = _fits_int64(sysm)
        idx = np.indices((pairs.shape[0],) * p).reshape(p, -1).T
        self.k = pairs[idx, 0]
        self.l = pairs[idx, 1]
        dtype = np.int64 if self.exact64 else object
        kk = self.k.astype(dtype)
        ll = self.l.astype(dtype)
        vec = np.empty((idx.shape[0], d), dtype=dtype)
        kp, lp = np.ones_like(kk), np.ones_like(ll)
        for q in range(d):
            kp = kp * kk
            lp = lp * ll
            vec[:, q] = kp.sum(axis=1) - lp.sum(axis=1)
        self.vec = vec
        self.off = [p * (N**q - 1) for q in range(1, d + 1)]
        radix = [2 * o + 1 for o in self.off]
        self.use_keys = self.exact64 and math.prod(radix) < _INT64_SAFE
        if self.use_keys:
            self.base = np.cumprod([1] + radix[:-1]).astype(np.int64)
            keys = (vec + np.asarray(self.off, dtype=np.int64)) @ self.base
            order = np.argsort(keys, kind="stable")
            self.order = order
            self.ukeys, self.starts, self.counts = np.unique(keys[order], return_index=True, return_counts=True)
        else:
            groups = defaultdict(list)
            for n, row in enumerate(vec.tolist()):
                groups[tuple(int(x) for x in row)].append(n)
            self.groups = groups

    def encode(self, vectors: np.ndarray):
        off = np.asarray(self.off, dtype=np.int64)
        inside = np.all((vectors >= -off) & (vectors <= off), axis=1)
        return (vectors + off) @ self.base, inside

    def matches(self, v) -> list[tuple[np.ndarray, np.ndarray]]:
        """Pairs of state-index groups ``(A, B)`` with ``vec[A] + vec[B] == v``."""
        out = []
        if self.use_keys:
            uvec = self.vec[self.order[self.starts]]
            need = np.asarray(v, dtype=np.int64)[None, :] - uvec
            keys, inside = self.encode(need)
            pos = np.searchsorted(self.ukeys, keys)
            pos = np.clip(pos, 0, self.ukeys.size - 1)
            hit = inside & (self.ukeys[pos] == keys)
            for a in np.nonzero(hit)[0]:
                b = pos[a]
                A = self.order[self.starts[a] : self.starts[a] + self.counts[a]]
                B = self.order[self.starts[b] : self.starts[b] + self.counts[b]]
                out.append((A, B))
        else:
            for key, A in self.groups.items():
                B = self.groups.get(tuple(vq - kq for vq, kq in zip(v, key)))
                if B:
                    out.append((np.asarray(A), np.asarray(B)))
        return out

    def count(self, v) -> int:
        if self.use_keys:
            uvec = self.vec[self.order[self.starts]]
            need = np.asarray(v, dtype=np.int64)[None, :] - uvec
            keys, inside = self.encode(need)
            pos = np.clip(np.searchsorted(self.ukeys, keys), 0, self.ukeys.size - 1)
            hit = inside & (self.ukeys[pos] == keys)
            return int(np.sum(self.counts[hit].astype(object) * self.counts[pos[hit]].astype(object)))
        return sum(len(A) * len(B) for A, B in self.matches(v))


@lru_cache(maxsize=16)
def _half_table(N: int, d: int, p: int, off_diagonal: bool, cap: int) -> _HalfTable:
    return _HalfTable(VinogradovSystem(N, d, p), off_diagonal, cap)


def count_Lv(sysm: VinogradovSystem, off_diagonal: bool = True, state_cap: int = DEFAULT_STATE_CAP) -> int:
    """``|L_v|`` by a meet-in-the-middle join on half-tuple power vectors."""
    if sysm.trivially_empty():
        return 0
    return _half_table(sysm.N, sysm.d, sysm.p, off_diagonal, state_cap).count(sysm.v)


def enumerate_Lv(
    sysm: VinogradovSystem,
    off_diagonal: bool = True,
    state_cap: int = DEFAULT_STATE_CAP,
    solution_cap: int = DEFAULT_SOLUTION_CAP,
) -> SolutionSet:
    """Explicit solution set, rows in lexicographic order.

    Pairs ``1..p`` and ``p+1..2p`` are enumerated as two halves and joined on
    their power-difference vectors.
    """
    L = sysm.length
    empty = np.empty((0, 2 * L), dtype=np.int64)
    if sysm.trivially_empty():
        return SolutionSet(sysm, empty, off_diagonal)
    table = _half_table(sysm.N, sysm.d, sysm.p, off_diagonal, state_cap)
    groups = table.matches(sysm.v)
    total = sum(len(A) * len(B) for A, B in groups)
    if total > solution_cap:
        raise EnumerationBudgetError(total, solution_cap, "solutions")
    if total == 0:
        return SolutionSet(sysm, empty, off_diagonal)
    ia = np.concatenate([np.repeat(A, len(B)) for A, B in groups])
    ib = np.concatenate([np.tile(B, len(A)) for A, B in groups])
    t = np.concatenate([table.k[ia], table.k[ib], table.l[ia], table.l[ib]], axis=1)
    return SolutionSet(sysm, _lex_sorted(t, sysm.N), off_diagonal)


def _lex_sorted(t: np.ndarray, N: int) -> np.ndarray:
    """Rows of ``t`` (entries in ``1..N``) in lexicographic order."""
    if N ** t.shape[1] < 2**63:
        key = np.zeros(t.shape[0], dtype=np.int64)
        for col in t.T:
            key = key * N + (col - 1)
        return t[np.argsort(key, kind="stable")]
    return t[np.lexsort(t.T[::-1])]


# -- generating-function route ----------------------------------------------


@lru_cache(maxsize=32)
def _power_distribution(N: int, d: int, m: int) -> dict:
    """Multiset of ``sum_{a=1}^m (k_a, k_a^2, .., k_a^d)`` as ``{vector: count}``."""
    if m == 0:
        return {(0,) * d: 1}
    if m == 1:
        return {tuple(k**q for q in range(1, d + 1)): 1 for k in range(1, N + 1)}
    half = _power_distribution(N, d, m // 2)
    rest = _power_distribution(N, d, m - m // 2)
    out: dict = defaultdict(int)
    for u, cu in half.items():
        for w, cw in rest.items():
            out[tuple(a + b for a, b in zip(u, w))] += cu * cw
    return dict(out)


def count_Lv_convolution(sysm: VinogradovSystem) -> int:
    """``|L~_v|`` (diagonal ``k_a == l_a`` allowed) from the 2p-fold convolution
    of the single-index power distribution, exact integers throughout."""
    D = _power_distribution(sysm.N, sysm.d, sysm.length)
    v = sysm.v
    return sum(c * D.get(tuple(a - b for a, b in zip(s, v)), 0) for s, c in D.items())


@dataclass(frozen=True)
class ScalingProbe:
    d: int
    p: int
    Ns: tuple
    counts: tuple
    slope: float
    first_regime: bool  # 4p < d(d+1)
    reference: float  # 2p, or 4p - d(d+1)/2 outside the first regime


def scaling_probe(d: int, p: int, Ns: Sequence[int]) -> ScalingProbe:
    """Fit ``log |L~_0| = slope * log N + c`` over ``Ns``."""
    counts = tuple(count_Lv_convolution(VinogradovSystem(N, d, p)) for N in Ns)
    slope = float(np.polyfit(np.log(np.asarray(Ns, float)), np.log(np.asarray(counts, float)), 1)[0])
    first = 4 * p < d * (d + 1)
    ref = 2 * p if first else 4 * p - d * (d + 1) / 2
    return ScalingProbe(d, p, tuple(Ns), counts, slope, first, float(ref))


# -- bad sets ----------------------------------------------------------------


def small_entry_counts(sols: SolutionSet, G: np.ndarray, gamma: float) -> np.ndarray:
    """Per tuple, the number of ``a`` with ``|G[k_a, l_a]| <= N^-gamma``."""
    N = sols.system.N
    if G.shape[0] < N:
        raise ValueError("resolvent smaller than the index range")
    thr = float(N) ** (-gamma)
    mags = np.abs(G)[sols.k - 1, sols.l - 1]
    return np.sum(mags <= thr, axis=1)


def bad_set(sols: SolutionSet, G: np.ndarray, gamma: float, r: int) -> SolutionSet:
    """Tuples with exactly ``r`` small resolvent entries."""
    return sols.subset(small_entry_counts(sols, G, gamma) == r)


def bad_strata(sols: SolutionSet, G: np.ndarray, gamma: float) -> np.ndarray:
    """``|B^r|`` for ``r = 0..2p``."""
    return np.bincount(small_entry_counts(sols, G, gamma), minlength=sols.system.length + 1)


# -- dichotomy ---------------------------------------------------------------


@dataclass(frozen=True)
class DichotomyWitness:
    """``case == "A"``: every pair meets ``nu``.  ``case == "B"``: the pairs at
    ``indices`` (0-based positions) have disjoint k- and l-sets."""

    case: str
    nu: frozenset = frozenset()
    indices: tuple = ()

    def validate(self, pairs: Sequence[tuple[int, int]], s: int) -> bool:
        if self.case == "A":
            return len(self.nu) <= 2 * s - 2 and all(k in self.nu or l in self.nu for k, l in pairs)
        if self.case == "B":
            if len(set(self.indices)) != s or len(self.indices) != s:
                return False
            ks = {pairs[a][0] for a in self.indices}
            ls = {pairs[a][1] for a in self.indices}
            return not ks & ls
        return False


def dichotomy(pairs: Sequence[tuple[int, int]], s: int) -> DichotomyWitness:
    """Greedy construction: extend a family with disjoint k/l sets one pair at a
    time; if no pair extends it, the family's entries cover every pair."""
    if s < 1:
        raise ValueError("s must be >= 1")
    pairs = [tuple(map(int, pr)) for pr in pairs]
    if any(k == l for k, l in pairs):
        raise ValueError("pairs must be off-diagonal")
    chosen: list[int] = []
    ks: set = set()
    ls: set = set()
    while len(chosen) < s:
        for a, (k, l) in enumerate(pairs):
            if a in chosen:
                continue
            if not ((ks | {k}) & (ls | {l})):
                chosen.append(a)
                ks.add(k)
                ls.add(l)
                break
        else:
            wit = DichotomyWitness("A", frozenset(ks | ls))
            break
    else:
        wit = DichotomyWitness("B", indices=tuple(chosen))
    if not wit.validate(pairs, s):  # pragma: no cover - would mean a logic error
        raise AssertionError(f"invalid witness {wit} for {pairs}")
    return wit


# -- Newton-Girard and uniqueness -------------------------------------------


def power_sums(values: Iterable[int], m: int) -> list[int]:
    values = [int(x) for x in values]
    return [sum(x**q for x in values) for q in range(1, m + 1)]


def newton_girard(p: Sequence[int]) -> list[Fraction]:
    """Elementary symmetric polynomials ``e_1..e_m`` from power sums ``p_1..p_m``."""
    if len(p) < 1:
        raise ValueError("need at least one power sum")
    e = [Fraction(1)]
    for k in range(1, len(p) + 1):
        acc = sum((-1) ** (j - 1) * e[k - j] * p[j - 1] for j in range(1, k + 1))
        e.append(Fraction(acc, k))
    return e[1:]


def monic_from_elementary(e: Sequence) -> list:
    """Coefficients (highest degree first) of ``prod (x - a_i)``."""
    return [1] + [(-1) ** k * ek for k, ek in enumerate(e, 1)]


@dataclass(frozen=True)
class UniquenessResult:
    holds: bool
    poly_left: tuple
    poly_right: tuple


def uniqueness_hypotheses(P1, P2) -> bool:
    """Disjointness within each list and equal power differences for ``q <= 2n``."""
    if len(P1) != len(P2):
        return False
    n = len(P1)
    for P in (P1, P2):
        if {i for i, _ in P} & {j for _, j in P}:
            return False
    for q in range(1, 2 * n + 1):
        if sum(j**q - i**q for i, j in P1) != sum(j**q - i**q for i, j in P2):
            return False
    return True


def uniqueness_check(P1, P2) -> UniquenessResult:
    """Whether the i-multisets and the j-multisets coincide across the lists.

    The certificate is the pair of monic polynomials with roots
    ``{i'} + {j}`` and ``{i} + {j'}``, rebuilt from power sums via
    Newton-Girard; the hypotheses force them to be equal.
    """
    P1 = [tuple(map(int, pr)) for pr in P1]
    P2 = [tuple(map(int, pr)) for pr in P2]
    if not uniqueness_hypotheses(P1, P2):
        raise ValueError("pair lists do not satisfy the uniqueness hypotheses")
    n = len(P1)
    left = [i for i, _ in P2] + [j for _, j in P1]
    right = [i for i, _ in P1] + [j for _, j in P2]
    poly_l = tuple(monic_from_elementary(newton_girard(power_sums(left, 2 * n))))
    poly_r = tuple(monic_from_elementary(newton_girard(power_sums(right, 2 * n))))
    holds = sorted(i for i, _ in P1) == sorted(i for i, _ in P2) and sorted(j for _, j in P1) == sorted(
        j for _, j in P2
    )
    return UniquenessResult(holds, poly_l, poly_r)


@dataclass(frozen=True)
class SweepReport:
    lists: int
    hypothesis_pairs: int
    counterexamples: list
    polynomial_mismatches: int


def uniqueness_sweep(n: int, max_entry: int) -> SweepReport:
    """All ordered pairs of ``n``-pair lists with entries in ``1..max_entry``.

    Pairs failing the power-sum hypothesis are discarded by grouping lists on
    their power-difference signature; every pair inside a group is checked.
    """
    groups = defaultdict(list)
    lists = 0
    for flat in product(range(1, max_entry + 1), repeat=2 * n):
        P = [(flat[2 * a], flat[2 * a + 1]) for a in range(n)]
        if {i for i, _ in P} & {j for _, j in P}:
            continue
        lists += 1
        sig = tuple(sum(j**q - i**q for i, j in P) for q in range(1, 2 * n + 1))
        groups[sig].append(P)
    checked = 0
    bad = []
    mismatches = 0
    for members in groups.values():
        for P1 in members:
            for P2 in members:
                res = uniqueness_check(P1, P2)
                checked += 1
                if res.poly_left != res.poly_right:
                    mismatches += 1
                if not res.holds:
                    bad.append((P1, P2))
    return SweepReport(lists, checked, bad, mismatches)


# -- cardinality bounds ------------------------------------------------------


@dataclass(frozen=True)
class BadSetBounds:
    g_0: float
    g_r: float
    casea_rhs: float
    caseb_rhs: float
    combined_rhs: float
    C_pr: float


def g_count(N: float, p: int, d: int, r: float, gamma: float, theta: float) -> float:
    """``N^{2r} N^{(2p - d0 - r)(1 + 2 gamma + 2 theta)}`` with ``d0 = d // 2``."""
    d0 = d // 2
    return float(N) ** (2 * r) * float(N) ** ((2 * p - d0 - r) * (1 + 2 * gamma + 2 * theta))


def bound_calculators(N, p: int, d: int, r, gamma: float, theta: float, C_pr: Optional[float] = None) -> BadSetBounds:
    """Right-hand sides of the bad-set cardinality bounds.

    ``casea_rhs`` and ``caseb_rhs`` carry the explicit constants from the
    counting arguments; the default ``C_pr`` for the combined bound is their
    sum, which makes ``combined_rhs >= casea_rhs + caseb_rhs``.  ``r`` may be
    real for exponent bookkeeping.
    """
    d0 = d // 2
    N = float(N)
    g0 = g_count(N, p, d, 0, gamma, theta)
    gr = g_count(N, p, d, r, gamma, theta)
    two_p = 2 * p
    ri = int(math.floor(r))
    binom_r = math.comb(two_p, ri) if float(r).is_integer() else math.gamma(two_p + 1) / (
        math.gamma(r + 1) * math.gamma(two_p - r + 1)
    )
    ca = binom_r * 2.0**two_p * float(2 * d0 - 2) ** two_p
    casea_term = N ** (2 * d0 - 2) * N**r * N ** ((two_p - r) * (2 * gamma + 2 * theta))
    perm = math.factorial(two_p) * math.factorial(d0) ** 2
    caseb = perm * sum(math.comb(two_p - d0, rho) * g_count(N, p, d, rho, gamma, theta) for rho in range(ri + 1))
    cb = perm * sum(math.comb(two_p - d0, rho) for rho in range(ri + 1))
    C = ca + cb if C_pr is None else C_pr
    return BadSetBounds(
        g_0=g0,
        g_r=gr,
        casea_rhs=ca * casea_term,
        caseb_rhs=caseb,
        combined_rhs=C * (casea_term + max(g0, gr)),
        C_pr=C,
    )


def case_split(bad: SolutionSet, s: int) -> tuple[int, int]:
    """Counts of tuples whose dichotomy witness (with parameter ``s``) is case A / B."""
    L = bad.system.length
    a = b = 0
    for row in bad.tuples:
        wit = dichotomy(list(zip(row[:L].tolist(), row[L:].tolist())), s)
        if wit.case == "A":
            a += 1
        else:
            b += 1
    return a, b
