"""Quadratic-form fluctuations of one row against the minor resolvent.

With the minor X^(i) fixed, redrawing the phases of row i gives samples of
F_i = (r G r^* - tr G) / N.  Its mean is zero for uniform phases, and its
even moments shrink as N grows.
"""
from polyphase.ensemble import EnsembleParams
from polyphase.fluctuations import fluctuation_samples, moment_from_samples, partial_expectation_mc

z = 2 + 0.2j
pe = partial_expectation_mc(EnsembleParams(100, 3, seed=1), 0, z, 20_000)
print(f"E_i[r G r^*/N] = {pe.mean:.5f} +- {pe.stderr:.1e}")
print(f"m^(i)          = {pe.m_minor:.5f}")

print("\n   N   |E F^2|     |E F^4|")
for N in (50, 100, 200, 400):
    F = fluctuation_samples(EnsembleParams(N, 3, seed=2), 0, z, 4000)
    m2, m4 = moment_from_samples(F, 1), moment_from_samples(F, 2)
    print(f"{N:4d}  {m2.estimate:.2e}  {m4.estimate:.2e}")
