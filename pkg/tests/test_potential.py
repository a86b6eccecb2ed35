"""Support boxes, mode coupling, and the edge-collar dominance check."""

import numpy as np
import pytest

from cylres import (
    CrossSection,
    Geometry,
    PotentialSpec,
    PotentialTerm,
    XProfile,
    YProfile,
    build_basis,
    build_grid,
    mode_couple,
    nondegeneracy_check,
    support_box,
)
from cylres.potential import PotentialError

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="module")
def basis():
    return build_basis(CrossSection.circle(TWO_PI), 7)


def barrier(height=10.0, lo=-1.0, hi=1.0):
    return XProfile.piecewise([lo, hi], [height])


def test_support_box_single_term():
    spec = PotentialSpec((PotentialTerm(barrier(), YProfile.constant(1.0)),))
    box = support_box(spec)
    assert (box.x_min, box.x_max, box.half_width) == (-1.0, 1.0, 1.0)


def test_support_box_union_then_symmetrize():
    spec = PotentialSpec(
        (
            PotentialTerm(XProfile.piecewise([-1.0, 0.5], [1.0]), YProfile.constant(1.0)),
            PotentialTerm(XProfile.piecewise([0.2, 0.8], [2.0]), YProfile.constant(1.0)),
        )
    )
    box = support_box(spec)
    assert (box.x_min, box.x_max) == (-1.0, 0.8)
    assert box.half_width == 1.0


def test_support_box_half_cylinder():
    spec = PotentialSpec(
        (PotentialTerm(XProfile.piecewise([0.0, 2.0], [1.0]), YProfile.constant(1.0)),),
        Geometry.half("dirichlet"),
    )
    assert support_box(spec).half_width == 2.0


def test_support_box_zero_potential_rejected():
    spec = PotentialSpec((PotentialTerm(XProfile.piecewise([-1, 1], [0.0]), YProfile.constant(1.0)),))
    with pytest.raises(PotentialError):
        support_box(spec)


def test_half_cylinder_requires_nonnegative_support():
    with pytest.raises(PotentialError):
        PotentialSpec(
            (PotentialTerm(barrier(), YProfile.constant(1.0)),),
            Geometry.half("neumann"),
        )


def test_mode_couple_y_independent_is_diagonal(basis):
    spec = PotentialSpec((PotentialTerm(barrier(), YProfile.constant(1.0)),))
    grid = build_grid([-1.0, 1.0], order=8)
    mc = mode_couple(spec, basis, grid)
    assert mc.diagonal_only()
    for l in range(1, 8):
        assert np.allclose(mc.block(l, l), 10.0)


def test_mode_couple_shifted_harmonic_selection_rule(basis):
    # e^{iy} couples harmonic n to n+1 only; the diagonal vanishes identically
    spec = PotentialSpec((PotentialTerm(barrier(), YProfile.fourier({1: 1.0})),))
    grid = build_grid([-1.0, 1.0], order=8)
    mc = mode_couple(spec, basis, grid)
    for l in range(1, 8):
        for m in range(1, 8):
            blk = mc.block(l, m)
            nl = basis.mode(l).harmonic
            nm = basis.mode(m).harmonic
            if nl == nm + 1:
                assert np.allclose(blk, 10.0)
            else:
                assert np.allclose(blk, 0.0)


def test_mode_couple_cosine_coupling_weights(basis):
    # V1(x)(1 + 0.3 cos y): diagonal V1, neighbours 0.15 V1, cross-checked
    # against brute-force quadrature of the transverse integrals
    spec = PotentialSpec((PotentialTerm(barrier(), YProfile.trig(const=1.0, cos={1: 0.3})),))
    grid = build_grid([-1.0, 1.0], order=8)
    mc = mode_couple(spec, basis, grid)
    from conftest import quad_pair

    fn = lambda y: 1.0 + 0.3 * np.cos(y)
    for l in range(1, 8):
        for m in range(1, 8):
            expected = 10.0 * quad_pair(basis, l, m, fn)
            assert np.allclose(mc.block(l, m), expected, atol=1e-10)
    # explicit neighbour weight
    assert np.allclose(mc.block(2, 1), 1.5)  # 0.15 * 10


def test_mode_couple_requires_covering_grid(basis):
    spec = PotentialSpec((PotentialTerm(barrier(), YProfile.constant(1.0)),))
    grid = build_grid([-0.5, 1.0], order=8)
    with pytest.raises(PotentialError):
        mode_couple(spec, basis, grid)


def test_hermitian_symmetry_for_real_potentials(basis):
    rng = np.random.default_rng(3)
    grid = build_grid([-1.0, 1.0], order=8)
    for _ in range(20):
        c0 = rng.uniform(-2, 2)
        c1 = rng.uniform(-1, 1)
        s1 = rng.uniform(-1, 1)
        spec = PotentialSpec(
            (PotentialTerm(barrier(rng.uniform(1, 5)), YProfile.trig(const=c0, cos={1: c1}, sin={2: s1})),)
        )
        mc = mode_couple(spec, basis, grid)
        for l in range(1, 6):
            for m in range(1, 6):
                assert np.allclose(mc.block(m, l), np.conj(mc.block(l, m)), atol=1e-13)


def test_im_sup_zero_for_real_specs(basis):
    spec = PotentialSpec((PotentialTerm(barrier(), YProfile.trig(const=1.0, cos={1: 0.3})),))
    grid = build_grid([-1.0, 1.0], order=8)
    assert mode_couple(spec, basis, grid).im_sup == 0.0


def test_scaling_commutes_with_coupling(basis):
    spec = PotentialSpec((PotentialTerm(barrier(), YProfile.trig(const=1.0, cos={1: 0.3})),))
    grid = build_grid([-1.0, 1.0], order=8)
    a = mode_couple(spec.scaled(0.5 - 2.0j), basis, grid)
    b = mode_couple(spec, basis, grid)
    for l in range(1, 6):
        for m in range(1, 6):
            assert np.allclose(a.block(l, m), (0.5 - 2.0j) * b.block(l, m))


def test_nondegeneracy_cosine_holds_with_small_constant(basis):
    spec = PotentialSpec((PotentialTerm(barrier(), YProfile.trig(const=1.0, cos={1: 0.3})),))
    rep = nondegeneracy_check(spec, basis, l0=1, eps=0.2)
    assert rep.holds
    assert rep.C <= 1.3 + 1e-12


def test_nondegeneracy_fails_for_shifted_harmonic(basis):
    spec = PotentialSpec((PotentialTerm(barrier(), YProfile.fourier({1: 1.0})),))
    rep = nondegeneracy_check(spec, basis, l0=1, eps=0.2)
    assert not rep.holds


def test_nondegeneracy_y_independent_constant_one(basis):
    spec = PotentialSpec((PotentialTerm(barrier(), YProfile.constant(1.0)),))
    rep = nondegeneracy_check(spec, basis, l0=1, eps=0.3)
    assert rep.holds
    assert rep.C == pytest.approx(1.0)


def test_nondegeneracy_collar_width_validated(basis):
    spec = PotentialSpec((PotentialTerm(barrier(), YProfile.constant(1.0)),))
    with pytest.raises(PotentialError):
        nondegeneracy_check(spec, basis, l0=1, eps=2.0)
