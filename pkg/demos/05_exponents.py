"""Exact bookkeeping of theta0 and the moment exponents."""
from polyphase import locallaw as ll

for d in (17, 18, 32, 64):
    tp = ll.theta_params(d)
    print(f"d={d:3d}  p={tp.p:3d}  theta0={str(tp.theta0):>7}  beta0={str(tp.beta0):>9}  positive={tp.positive}")

print("\n  d    x1       x2       x3      target   margin")
for rep in ll.exponent_sweep([18, 24, 36, 48, 60]):
    print(f"{rep.d:3d}  {float(rep.x1):7.4f}  {float(rep.x2):7.4f}  {float(rep.x3):7.4f}  "
          f"{float(rep.target):7.4f}  {float(rep.margin):.4f}")

# The positive-part form carries 4 p theta' in x3 where the reduced form has
# 2 p theta'; at these parameters the difference decides the verdict.
gen = ll.exponent_sweep([18], general=True)[0]
print(f"\ngeneral form at d=18: x3 = {float(gen.x3):.4f}, margin {float(gen.margin):.4f}")
print("union bound:", ll.beta0_bookkeeping())
