"""The Marchenko-Pastur reference: closed form, quadrature and stability."""
import math

import numpy as np

from polyphase.mp_reference import (
    F_mp,
    m_mp,
    m_sc,
    mp_quadratic_residual,
    rho_mp,
    sqrt_branch,
    stability_report,
    stieltjes_quadrature,
)

z = 2 + 0.2j
m = m_mp(z)
print(f"m_MP({z}) = {m:.12f}")
print(f"  residual of z m^2 + z m + 1: {abs(mp_quadratic_residual(m, z)):.1e}")
print(f"  quadrature of rho / (x - z):  {stieltjes_quadrature(z):.12f}")
w = sqrt_branch(z)
print(f"  m_sc(sqrt z) / sqrt z:        {m_sc(w) / w:.12f}")

print(f"\nrho_MP(2) = {rho_mp(2.0):.15f}, 1/(2 pi) = {1 / (2 * math.pi):.15f}")
print(f"F_MP(2) = {F_mp(2.0):.15f}, 1/2 + 1/pi = {0.5 + 1 / math.pi:.15f}")

# Stability: a perturbed value of m stays within C * delta / sqrt(kappa + eta) of a root.
rng = np.random.default_rng(0)
print("\n  |dm|      delta     distance  bound")
for scale in (1e-2, 1e-3, 1e-4):
    pert = m + scale * complex(*rng.normal(size=2))
    rep = stability_report(pert, z, kappa=0.5)
    print(f"{abs(pert - m):.1e}  {rep.delta:.1e}  {rep.min_dist:.1e}  {rep.bound:.1e}")
