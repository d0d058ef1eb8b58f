"""Deviation from the MP law, rigidity and delocalization as N grows.

Runs about a minute: one eigendecomposition per (N, seed).
"""
import numpy as np

from polyphase import locallaw as ll
from polyphase.ensemble import EnsembleParams
from polyphase.mp_reference import m_mp
from polyphase.spectral import stieltjes_mN

z = 2 + 0.2j
E_grid = np.linspace(0.5, 3.5, 202)[1:-1]
print("   N   mean|m_N - m_MP|   rigidity sup-gap   max |u|_inf^2")
for N in (125, 250, 500, 1000):
    err, rig, loc = [], [], []
    for seed in range(1, 6):
        dec = ll.spectrum(EnsembleParams(N, 3, seed=seed), vectors=True)
        err.append(abs(stieltjes_mN(dec, z) - m_mp(z)))
        rig.append(ll.rigidity_scan(dec, E_grid).sup_gap)
        loc.append(ll.deloc_scan(dec, 0.5, surrogate=False).max_sup_norm2)
    print(f"{N:5d}  {np.mean(err):.2e}           {np.mean(rig):.2e}           {np.mean(loc):.2e}")

# Descent in eta at fixed E: each step respects |m'(z)| <= eta^-2.
ladder = ll.descent_ladder(500, 0.5, 0.05, s=0.75)
res = ll.multiscale_descent(EnsembleParams(500, 3, seed=1), 2.0, ladder, [1], s=0.75)
print(f"\ndescent: {res.diff.size} steps, Lipschitz budget respected at all: {bool(res.lipschitz_ok.all())}")
print(f"error at eta=0.5: {res.err1[0]:.2e}, at eta=0.05: {res.err2[-1]:.2e}")
