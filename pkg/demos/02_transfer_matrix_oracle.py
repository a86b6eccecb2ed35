"""The independent 1D oracle: resonances of piecewise-constant potentials.

Cauchy data is pushed across each constant layer by a 2x2 propagator that is
even in the local wavenumber, so the outgoing-mismatch function is entire in
k and its lower-half-plane zeros are the resonances.  The asymptotic spacing
of their real parts is pi/(2b) for support half-width b.
"""

import numpy as np

from cylres import OracleProfile, Region, oracle_1d

profile = OracleProfile(breaks=(-1.0, 1.0), values=(10.0,))
region = Region(alpha=0.3, r_max=25.0)
rl = oracle_1d(profile, region)

print(f"square barrier height 10 on [-1, 1]: {len(rl.zeros)} resonances, |k| < 25")
for z in rl.zeros:
    print(f"  k = {z.k.real:+9.5f} {z.k.imag:+9.5f}i   x{z.multiplicity}")

right = sorted(z.k.real for z in rl.zeros if z.k.real > 0)
gaps = np.diff(right)
print("\nspacing of positive real parts (tends to pi/2 = %.5f):" % (np.pi / 2))
print("  ", [f"{g:.4f}" for g in gaps])

print("\nhalf-line variants split the symmetric problem by parity:")
for bc in ("dirichlet", "neumann"):
    half = oracle_1d(
        OracleProfile(breaks=(0.0, 1.0), values=(10.0,), side="half", bc=bc),
        Region(alpha=0.3, r_max=12.0),
    )
    ks = [f"{z.k.real:+.4f}{z.k.imag:+.4f}i" for z in half.zeros]
    print(f"  {bc:9s}: {ks}")
