"""Winding numbers, zero localization, counting functions, and slope fits."""

import math

import numpy as np
import pytest

from cylres import (
    CrossSection,
    Geometry,
    Region,
    SheetLabel,
    build_basis,
    counting_function,
    fit_slope,
    locate,
    mode_map,
    slope_bound,
    winding,
)
from cylres.errors import FitRefused
from cylres.finder import Zero, ResonanceList, winding_closed_path
from cylres.potential import SupportBox

TWO_PI = 2.0 * np.pi


def test_winding_simple_zero():
    f = lambda k: k - (1 - 2j)
    assert winding(f, (0.0, 2.0, -3.0, -1.0)) == 1


def test_winding_double_zero():
    k0 = 1 - 2j
    f = lambda k: (k - k0) ** 2
    assert winding(f, (0.0, 2.0, -3.0, -1.0)) == 2


def test_winding_constant():
    assert winding(lambda k: 1.0 + 0j, (0.0, 2.0, -3.0, -1.0)) == 0


def test_winding_zero_outside():
    f = lambda k: k - (5 - 5j)
    assert winding(f, (0.0, 2.0, -3.0, -1.0)) == 0


def test_winding_additivity_random_subdivisions():
    # exact integer additivity over 1000 random rectangle splits
    rng = np.random.default_rng(42)
    zeros = [complex(rng.uniform(-2, 2), rng.uniform(-3, -0.2)) for _ in range(6)]

    def f(k):
        out = 1.0 + 0.0j
        for z in zeros:
            out *= k - z
        return out * np.exp(0.7j * k)

    checked = 0
    for _ in range(1000):
        x0 = rng.uniform(-3, 1)
        x1 = x0 + rng.uniform(0.5, 3)
        y0 = rng.uniform(-4, -1)
        y1 = y0 + rng.uniform(0.5, 2.5)
        if any(min(abs(z - complex(x, y)) for x in (x0, x1) for y in (y0, y1)) < 1e-3 for z in zeros):
            continue
        fx = rng.uniform(0.3, 0.7)
        fy = rng.uniform(0.3, 0.7)
        xm = x0 + fx * (x1 - x0)
        ym = y0 + fy * (y1 - y0)
        if any(abs(z.real - xm) < 1e-3 or abs(z.imag - ym) < 1e-3 for z in zeros):
            continue
        parent = winding(f, (x0, x1, y0, y1), max_spacing=0.4)
        kids = [
            winding(f, r, max_spacing=0.4)
            for r in ((x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1))
        ]
        assert parent == sum(kids)
        checked += 1
    assert checked >= 900


def test_winding_scaling_invariance():
    f = lambda k: (k + 1j) * (k - 2 + 1j)
    rect = (-3.0, 3.0, -2.0, -0.5)
    base = winding(f, rect)
    for c in (17.0, 1e-8, -3.2j, 2e6 + 1e6j):
        assert winding(lambda k: c * f(k), rect) == base


def test_locate_synthetic_zeros_with_multiplicity():
    f = lambda k: (k + 1j) * (k - (2 - 1j)) ** 2
    region = Region(alpha=0.3, r_max=5.0)
    rl = locate(region, f)
    got = {(round(z.k.real, 6), round(z.k.imag, 6)): z.multiplicity for z in rl.zeros}
    assert got == {(0.0, -1.0): 1, (2.0, -1.0): 2}
    assert rl.total_winding == 3
    for z in rl.zeros:
        assert z.residual < 1e-6 or math.isnan(z.residual)


def test_locate_zero_free():
    region = Region(alpha=0.5, r_max=4.0)
    rl = locate(region, lambda k: np.exp(0.3j * k) + 0.0001, phase_scale=1.0)
    assert rl.zeros == ()
    assert rl.total_winding == 0


def test_locate_refines_to_high_accuracy():
    k0 = 1.234567 - 0.7654321j
    f = lambda k: (k - k0) * np.exp(0.5j * k)
    rl = locate(Region(alpha=0.3, r_max=3.0), f, phase_scale=2.0)
    assert len(rl.zeros) == 1
    assert abs(rl.zeros[0].k - k0) < 1e-9


def test_locate_separates_close_zeros():
    a, b = 1.0 - 1.0j, 1.01 - 1.0j
    f = lambda k: (k - a) * (k - b)
    rl = locate(Region(alpha=0.3, r_max=3.0), f)
    assert sorted(z.multiplicity for z in rl.zeros) == [1, 1]
    ks = sorted(z.k.real for z in rl.zeros)
    assert abs(ks[0] - 1.0) < 1e-8 and abs(ks[1] - 1.01) < 1e-8


def test_counting_function_radii():
    zeros = (Zero(-1j, 1, 0.0), Zero(1 - 2j, 1, 0.0), Zero(-3j, 1, 0.0))
    rl = ResonanceList(zeros=zeros, total_winding=3)
    region = Region(alpha=0.5, r_max=4.0)
    radii, counts = counting_function(rl, region, [1.5, 2.5, 4.0])
    assert counts.tolist() == [1, 2, 3]


def test_counting_function_empty():
    rl = ResonanceList(zeros=(), total_winding=0)
    region = Region(alpha=0.5, r_max=4.0)
    _, counts = counting_function(rl, region, [1.0, 2.0, 4.0])
    assert counts.tolist() == [0, 0, 0]


def test_counting_matches_total_winding_at_r_max():
    zeros = tuple(Zero(complex(x, -1.0), 1, 0.0) for x in np.linspace(-3, 3, 7))
    rl = ResonanceList(zeros=zeros, total_winding=7)
    region = Region(alpha=0.5, r_max=5.0)
    _, counts = counting_function(rl, region, np.linspace(1.0, 5.0, 9))
    assert counts[-1] == rl.total_winding


def test_counting_rejects_radii_outside_region():
    rl = ResonanceList(zeros=(), total_winding=0)
    region = Region(alpha=0.5, r_max=4.0)
    with pytest.raises(ValueError):
        counting_function(rl, region, [0.2, 1.0])
    with pytest.raises(ValueError):
        counting_function(rl, region, [1.0, 5.0])


def test_fit_slope_synthetic_staircase():
    radii = np.linspace(5.0, 100.0, 400)
    counts = np.floor(4.0 / np.pi * radii)
    fit = fit_slope(radii, counts, (10.0, 100.0))
    assert fit.slope == pytest.approx(4.0 / np.pi, abs=0.02)


def test_fit_slope_refuses_sparse_counts():
    radii = np.linspace(1.0, 10.0, 20)
    counts = np.floor(0.3 * radii)
    with pytest.raises(FitRefused):
        fit_slope(radii, counts, (5.0, 10.0))


def test_slope_bound_values():
    basis = build_basis(CrossSection.circle(TWO_PI), 7)
    box = SupportBox(-1.0, 1.0, 1.0)
    b1 = slope_bound(SheetLabel(frozenset({1, 2}), 1), box, basis, Geometry.full())
    assert b1 == pytest.approx(12.0 / np.pi)  # diameter 2, three channels
    b2 = slope_bound(SheetLabel(frozenset({1}), 1), SupportBox(0.0, 1.0, 1.0), basis, Geometry.half("dirichlet"))
    assert b2 == pytest.approx(2.0 / np.pi)
    b3 = slope_bound(SheetLabel(frozenset({1}), 1), box, basis, Geometry.full())
    assert b3 == pytest.approx(4.0 / np.pi)


def test_mode_map_identity_mode():
    basis = build_basis(CrossSection.circle(TWO_PI), 3)
    region = Region(alpha=0.3, r_max=10.0)
    preds = mode_map([complex(2, -1)], SheetLabel(frozenset({1}), 1), basis, region)
    assert len(preds) == 1
    assert preds[0].k == pytest.approx(2 - 1j)


def test_mode_map_shifted_channel_arithmetic():
    # zeta = -2i in a channel shifted by +1 lands at k = -i*sqrt(3)
    basis = build_basis(CrossSection.circle(TWO_PI), 3)
    region = Region(alpha=0.3, r_max=10.0)
    preds = mode_map([-2j], SheetLabel(frozenset({2}), 2), basis, region)
    # sheet {2}: channels are the two harmonic-1 modes; anchor nu^2 = 1
    # k^2 = zeta^2 + 1 - 1 = -4 for both, merged with multiplicity 2
    assert len(preds) == 1
    assert preds[0].k == pytest.approx(-2j)
    assert preds[0].multiplicity == 2


def test_mode_map_multiplicity_bookkeeping():
    basis = build_basis(CrossSection.circle(TWO_PI), 3)
    region = Region(alpha=0.1, r_max=10.0)
    preds = mode_map([-2j], SheetLabel(frozenset({1, 2}), 1), basis, region)
    # channel nu^2=0 keeps k = -2i; the doubled nu^2=1 channels land together
    assert sum(p.multiplicity for p in preds) == 3
    ks = sorted((p.k for p in preds), key=lambda k: k.imag)
    assert ks[0] == pytest.approx(-2j)
    assert ks[1] == pytest.approx(-1j * np.sqrt(3.0))


def test_mode_map_drops_predictions_outside_region():
    basis = build_basis(CrossSection.circle(TWO_PI), 3)
    region = Region(alpha=1.5, r_max=3.0)
    preds = mode_map([-1j], SheetLabel(frozenset({1}), 1), basis, region)
    assert preds == []


def test_winding_closed_path_polygon():
    f = lambda k: k - (0.5 - 0.5j)
    hexagon = [np.exp(1j * t) * 2 + (0.5 - 0.5j) for t in np.linspace(0, 2 * np.pi, 7)]
    assert winding_closed_path(f, hexagon) == 1


def test_locate_counts_equal_region_boundary_winding():
    zeros = [0.5 - 1j, -1.2 - 2j, 2.0 - 0.9j]

    def f(k):
        out = 1.0 + 0j
        for z in zeros:
            out *= k - z
        return out

    region = Region(alpha=0.3, r_max=4.0)
    rl = locate(region, f)
    # polygonal approximation of the half-disk boundary
    th = np.linspace(np.pi + np.arcsin(0.3 / 4.0), 2 * np.pi - np.arcsin(0.3 / 4.0), 200)
    arc = [4.0 * np.exp(1j * t) for t in th]
    path = arc + [complex(arc[0].real, -0.3)] if False else arc + [arc[0]]
    # close along the line Im k = -alpha
    lid = [complex(x, -0.3) for x in np.linspace(arc[-1].real, arc[0].real, 60)]
    w = winding_closed_path(f, arc + lid)
    assert w == sum(z.multiplicity for z in rl.zeros)
    assert rl.total_winding == w


def test_locate_scaling_invariance():
    f = lambda k: (k + 1j) * (k - (2 - 1j)) ** 2
    region = Region(alpha=0.3, r_max=5.0)
    base = locate(region, f)
    scaled = locate(region, lambda k: (3.7e5 - 2.1e5j) * f(k))
    assert len(base.zeros) == len(scaled.zeros)
    for a, b in zip(base.zeros, scaled.zeros):
        assert abs(a.k - b.k) < 1e-9
        assert a.multiplicity == b.multiplicity


def test_locate_exclusion_disks_reported_not_dropped():
    f = lambda k: (k + 1j) * (k - (2 - 1j))
    region = Region(alpha=0.3, r_max=5.0, exclusions=((2 - 1j, 0.15),))
    rl = locate(region, f)
    # the excluded zero is not reported as located
    assert all(abs(z.k - (2 - 1j)) > 0.1 for z in rl.zeros)
    assert len(rl.excluded) >= 1
    # the free zero is still found
    assert any(abs(z.k + 1j) < 1e-8 for z in rl.zeros)


def test_locate_exact_double_zero_cluster_path():
    # an exactly repeated factor exercises the multiplicity-2 Newton update
    k0 = -0.8 - 1.7j
    f = lambda k: (k - k0) ** 2 * np.exp(0.2j * k)
    rl = locate(Region(alpha=0.3, r_max=4.0), f, phase_scale=1.0)
    assert len(rl.zeros) == 1
    assert rl.zeros[0].multiplicity == 2
    assert abs(rl.zeros[0].k - k0) < 1e-8
