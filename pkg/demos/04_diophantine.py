"""Vinogradov-type systems, bad sets and the dichotomy.

L_v collects tuples (k_1..k_2p, l_1..l_2p) in [1, N] with
sum_a k_a^q - l_a^q = v_q for q = 1..d.
"""
from polyphase import diophantine as dio
from polyphase.ensemble import EnsembleParams, draw_matrix
from polyphase.spectral import green_minor, minor

sysm = dio.VinogradovSystem(N=2, d=1, p=1)
print("N=2, d=1, p=1 off-diagonal solutions:", dio.enumerate_Lv(sysm).tuples.tolist())

big = dio.VinogradovSystem(N=12, d=2, p=2)
print(f"|L_0| at N=12, d=2, 2p=4: {dio.count_Lv(big, off_diagonal=False)} "
      f"(convolution: {dio.count_Lv_convolution(big)})")

probe = dio.scaling_probe(2, 1, [8, 16, 32, 64])
print(f"d=2, 2p=2 counts {probe.counts}, log-log slope {probe.slope:.3f} (reference {probe.reference})")

# Bad sets: tuples where r of the resolvent entries G[k_a, l_a] are small.
sols = dio.enumerate_Lv(dio.VinogradovSystem(6, 2, 2))
G = green_minor(minor(draw_matrix(EnsembleParams(6, 2, seed=1)), 0), 2 + 0.3j).G
strata = dio.bad_strata(sols, G, gamma=0.3)
print(f"\n{len(sols)} solutions split by number of small entries: {strata.tolist()}")
for r, count in enumerate(strata):
    b = dio.bound_calculators(6, 2, 2, r, gamma=0.3, theta=0.1)
    print(f"  r={r}: |B^r| = {count:5d} <= {b.combined_rhs:.3e}")

w = dio.dichotomy([(1, 2), (2, 3), (5, 7)], s=2)
print(f"\ndichotomy witness for [(1,2),(2,3),(5,7)], s=2: case {w.case}, indices {w.indices}")

print("Newton-Girard on {1, 2, 4}:", [int(e) for e in dio.newton_girard(dio.power_sums([1, 2, 4], 3))])
rep = dio.uniqueness_sweep(2, 6)
print(f"uniqueness sweep n=2, entries <= 6: {rep.hypothesis_pairs} pairs, {len(rep.counterexamples)} counterexamples")
