"""Counting resonances and fitting the linear growth of N(r).

The number of resonances with |k| < r on a sheet grows linearly; the slope is
at most (2/pi) * diam(supp V) * (number of channel modes), and equals
(4/pi) * b for edge-dominated potentials on the one-label sheet.  This demo
runs a small region so it finishes in about a minute; the acceptance suite
runs the full-scale versions.
"""

import numpy as np

from cylres import (
    CrossSection,
    EngineOptions,
    Geometry,
    PotentialSpec,
    PotentialTerm,
    Region,
    SheetLabel,
    XProfile,
    YProfile,
    build_basis,
    build_context,
    counting_function,
    det_fn_scaled,
    fit_slope,
    locate,
    slope_bound,
    support_box,
)

basis = build_basis(CrossSection.circle(2 * np.pi), 5)
sheet = SheetLabel(frozenset({1}), 1)
spec = PotentialSpec(
    (PotentialTerm(XProfile.piecewise([-1.0, 1.0], [10.0]), YProfile.constant(1.0)),)
)
region = Region(alpha=0.3, r_max=14.0)
ctx = build_context(basis, sheet, spec, region.r_max, EngineOptions(nodes_per_panel=16))

print("locating zeros of det(I+B) for the barrier, |k| < 14 ...")
rl = locate(region, lambda k: det_fn_scaled(k, ctx), phase_scale=6.0)
print(f"  found {len(rl.zeros)} zeros (winding total {rl.total_winding})")
for z in rl.zeros:
    print(f"    {z.k.real:+8.4f} {z.k.imag:+8.4f}i  x{z.multiplicity}")

radii, counts = counting_function(rl, region, np.linspace(1.0, 14.0, 40))
print("\ncounting function N(r):")
print("  r:", [f"{r:4.1f}" for r in radii[::8]])
print("  N:", [f"{c:4d}" for c in counts[::8]])

fit = fit_slope(radii, counts, (7.0, 14.0), min_count=10)
bound = slope_bound(sheet, support_box(spec), basis, Geometry.full())
print(f"\nfitted slope on [7, 14]: {fit.slope:.4f}")
print(f"channel bound:           {bound:.4f}  (= 4/pi here)")
print(f"asymptotic value 4/pi:   {4/np.pi:.4f}")
print("the fitted slope approaches 4/pi from above as r grows")
