"""Walk through the branch bookkeeping: sheets, sign patterns, and the flip.

The transverse spectrum of the cross-section defines a family of square-root
branch values r_j(z) = (z - nu_j^2)^{1/2}.  A sheet is named by the set of
indices whose branch value points downward; the chart coordinate is the
branch value of a chosen anchor index.
"""

import numpy as np

from cylres import (
    CrossSection,
    SheetLabel,
    build_basis,
    flip_to_physical,
    lift,
    meets_physical,
    tilde_set,
)

basis = build_basis(CrossSection.circle(2 * np.pi), 7)
print("circle cross-section, first 7 modes")
print("  eigenvalues:", [m.eigenvalue for m in basis.modes])
print("  distinct:   ", list(basis.distinct))
print("  multiplicities:", [basis.multiplicity(j) for j in range(1, basis.J_max + 1)])

sheet = SheetLabel(frozenset({1, 2}), anchor=1)
print(f"\nsheet labeled {sorted(sheet.members)}, anchor {sheet.anchor}")
print("  meets the physical sheet:", meets_physical(sheet))
print("  channel modes:", list(tilde_set(sheet, basis)))

k = 2.0 - 1.5j
p = lift(k, sheet, basis)
print(f"\nlift of k = {k}:")
print("  base value:", p.base)
for j, r in enumerate(p.branches, start=1):
    tag = "down" if r.imag < 0 else "up"
    print(f"  r_{j} = {r:.6f}  ({tag})")

q = flip_to_physical(p)
print("\nafter the flip every branch points up:")
for j, r in enumerate(q.branches, start=1):
    print(f"  r_{j} = {r:.6f}")

print("\nas |k| grows the channel branches track +k, the rest track -k:")
for kk in (100 - 5j, 1000 - 50j):
    pp = lift(kk, sheet, basis)
    ratios = [pp.mode_branches[l - 1] / kk for l in range(1, basis.L_max + 1)]
    print(f"  |k| = {abs(kk):7.1f}: ", [f"{r.real:+.3f}" for r in ratios])
