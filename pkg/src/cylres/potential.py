"""Declarative potentials on the cylinder and their transverse mode coupling.

A potential is a finite sum of separable terms X(x) * Y(y) with compactly
supported axial profiles.  The transverse Galerkin representation V_{lm}(x)
is exact whenever the Y factors are trigonometric polynomials, and the whole
coupling is kept in factored (per-term) form so assembly stays cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .crosssec import ModeBasis, YProfile, pair_integral
from .quadrature import Grid

__all__ = [
    "XProfile",
    "PotentialTerm",
    "Geometry",
    "PotentialSpec",
    "SupportBox",
    "ModeCoupledPotential",
    "NondegeneracyReport",
    "support_box",
    "mode_couple",
    "nondegeneracy_check",
]


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class XProfile:
    """Axial profile: piecewise constant on breakpoints, or a smooth callable
    with declared compact support."""

    breaks: tuple[float, ...]
    values: tuple[complex, ...] = ()
    fn: Callable[[np.ndarray], np.ndarray] | None = None

    @classmethod
    def piecewise(cls, breaks, values) -> "XProfile":
        breaks = tuple(float(b) for b in breaks)
        values = tuple(complex(v) for v in values)
        if len(breaks) != len(values) + 1:
            raise PotentialError("piecewise profile needs len(breaks) == len(values) + 1")
        if any(b2 <= b1 for b1, b2 in zip(breaks[:-1], breaks[1:])):
            raise PotentialError("breakpoints must be strictly increasing")
        return cls(breaks=breaks, values=values)

    @classmethod
    def smooth(cls, fn: Callable[[np.ndarray], np.ndarray], support) -> "XProfile":
        a, b = float(support[0]), float(support[1])
        if b <= a:
            raise PotentialError("support must be a nonempty interval")
        return cls(breaks=(a, b), fn=fn)

    @property
    def support(self) -> tuple[float, float]:
        return self.breaks[0], self.breaks[-1]

    @property
    def is_zero(self) -> bool:
        return self.fn is None and all(v == 0 for v in self.values)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.fn is not None:
            inside = (x >= self.breaks[0]) & (x <= self.breaks[-1])
            out = np.zeros(x.shape, dtype=complex)
            out[inside] = self.fn(x[inside])
            return out
        out = np.zeros(x.shape, dtype=complex)
        for a, b, v in zip(self.breaks[:-1], self.breaks[1:], self.values):
            out[(x >= a) & (x < b)] = v
        out[x == self.breaks[-1]] = self.values[-1]
        return out

    def abs_max_on(self, a: float, b: float) -> float:
        """sup |profile| on [a, b]: exact for piecewise, sampled for smooth."""
        if self.fn is None:
            out = 0.0
            for p, q, v in zip(self.breaks[:-1], self.breaks[1:], self.values):
                if q > a and p < b:
                    out = max(out, abs(v))
            return out
        xs = np.linspace(max(a, self.breaks[0]), min(b, self.breaks[-1]), 512)
        if xs[0] >= xs[-1]:
            return 0.0
        return float(np.max(np.abs(self.fn(xs))))

    def scaled(self, factor: complex) -> "XProfile":
        if self.fn is None:
            return XProfile(breaks=self.breaks, values=tuple(factor * v for v in self.values))
        fn = self.fn
        return XProfile(breaks=self.breaks, fn=lambda x: factor * fn(x))


@dataclass(frozen=True)
class Geometry:
    kind: str  # "full" | "half"
    bc: str = ""  # half only: "dirichlet" | "neumann"

    @classmethod
    def full(cls) -> "Geometry":
        return cls(kind="full")

    @classmethod
    def half(cls, bc: str) -> "Geometry":
        if bc not in ("dirichlet", "neumann"):
            raise PotentialError(f"unsupported half-cylinder bc {bc!r}")
        return cls(kind="half", bc=bc)

    @property
    def is_half(self) -> bool:
        return self.kind == "half"


@dataclass(frozen=True)
class PotentialTerm:
    x: XProfile
    y: YProfile


@dataclass(frozen=True)
class PotentialSpec:
    terms: tuple[PotentialTerm, ...]
    geometry: Geometry = field(default_factory=Geometry.full)

    def __post_init__(self):
        if self.geometry.is_half:
            for t in self.terms:
                if t.x.support[0] < 0.0:
                    raise PotentialError(
                        "half-cylinder potentials must be supported in x >= 0"
                    )

    @property
    def is_zero(self) -> bool:
        return not self.terms or all(t.x.is_zero for t in self.terms)

    def scaled(self, factor: complex) -> "PotentialSpec":
        return PotentialSpec(
            tuple(PotentialTerm(t.x.scaled(factor), t.y) for t in self.terms),
            self.geometry,
        )

    def conjugated(self) -> "PotentialSpec":
        terms = []
        for t in self.terms:
            if t.x.fn is not None or t.y.poly is None:
                raise PotentialError("conjugation needs closed-form terms")
            xc = XProfile(breaks=t.x.breaks, values=tuple(np.conj(v) for v in t.x.values))
            yc = YProfile(poly={-q: np.conj(c) for q, c in t.y.poly.items()})
            terms.append(PotentialTerm(xc, yc))
        return PotentialSpec(tuple(terms), self.geometry)


@dataclass(frozen=True)
class SupportBox:
    x_min: float
    x_max: float
    half_width: float  # minimal b with support in [-b, b] (full) or [0, b] (half)


def support_box(spec: PotentialSpec) -> SupportBox:
    """Minimal closed x-interval containing all term supports."""
    if spec.is_zero:
        raise PotentialError("zero potential has no minimal support box")
    x_min = min(t.x.support[0] for t in spec.terms if not t.x.is_zero)
    x_max = max(t.x.support[1] for t in spec.terms if not t.x.is_zero)
    if spec.geometry.is_half:
        b = x_max
    else:
        b = max(abs(x_min), abs(x_max))
    return SupportBox(x_min, x_max, b)


@dataclass(frozen=True, eq=False)
class ModeCoupledPotential:
    """Transverse matrix elements V_{lm}(x_q) on a grid, in factored form.

    coupling[l-1, m-1, q] = sum over terms of X_t(x_q) * <phi_l, Y_t phi_m>.
    """

    grid: Grid
    basis: ModeBasis
    x_values: np.ndarray  # (n_terms, N) axial profiles on the nodes
    pair_matrices: np.ndarray  # (n_terms, L, L) transverse pairings
    im_sup: float  # L-infinity norm of the imaginary part

    @property
    def L(self) -> int:
        return self.basis.L_max

    def block(self, l: int, m: int) -> np.ndarray:
        """V_{lm} on the grid nodes (1-based mode indices)."""
        return np.einsum("t,tn->n", self.pair_matrices[:, l - 1, m - 1], self.x_values)

    def coupling_dense(self) -> np.ndarray:
        """Full (L, L, N) coupling array."""
        return np.einsum("tlm,tn->lmn", self.pair_matrices, self.x_values)

    def nonzero_pairs(self, tol: float = 0.0) -> np.ndarray:
        """(L, L) boolean mask of mode pairs with any coupling."""
        weight = np.einsum(
            "tlm,t->lm",
            np.abs(self.pair_matrices),
            np.max(np.abs(self.x_values), axis=1),
        )
        return weight > tol

    def diagonal_only(self) -> bool:
        mask = self.nonzero_pairs()
        return not np.any(mask & ~np.eye(self.L, dtype=bool))


def mode_couple(spec: PotentialSpec, basis: ModeBasis, grid: Grid) -> ModeCoupledPotential:
    """Galerkin coupling of the potential against the transverse modes."""
    if not spec.is_zero:
        box = support_box(spec)
        if not grid.covers(box.x_min, box.x_max):
            raise PotentialError(
                f"grid [{grid.x_min}, {grid.x_max}] does not cover the "
                f"support box [{box.x_min}, {box.x_max}]"
            )
    L = basis.L_max
    n_terms = len(spec.terms)
    x_values = np.zeros((n_terms, grid.n), dtype=complex)
    pair_matrices = np.zeros((n_terms, L, L), dtype=complex)
    for t, term in enumerate(spec.terms):
        x_values[t] = term.x(grid.nodes)
        for l in range(1, L + 1):
            for m in range(1, L + 1):
                pair_matrices[t, l - 1, m - 1] = pair_integral(basis, l, m, term.y)
    im_sup = _im_sup(spec, basis.cross_section.measure)
    return ModeCoupledPotential(grid, basis, x_values, pair_matrices, im_sup)


def _im_sup(spec: PotentialSpec, measure: float) -> float:
    """Upper bound on sup |Im V| via per-term profile bounds; zero exactly
    for real-valued specs."""
    if spec.is_zero:
        return 0.0
    if _is_real(spec):
        return 0.0
    box = support_box(spec)
    total = 0.0
    for t in spec.terms:
        amp = t.x.abs_max_on(box.x_min, box.x_max)
        if t.y.is_closed_form:
            total += amp * t.y.coeff_abs_sum()
        else:
            ys = np.linspace(0.0, measure, 512)
            total += amp * float(np.max(np.abs(t.y.fn(ys))))
    return total


def _is_real(spec: PotentialSpec) -> bool:
    for t in spec.terms:
        if t.x.fn is not None or t.y.poly is None:
            return False
        if any(abs(v.imag) > 0 for v in t.x.values):
            # allow real x-profile paired with conjugate-symmetric y
            return False
        for q, c in t.y.poly.items():
            if abs(np.conj(t.y.poly.get(-q, 0.0)) - c) > 1e-15 * max(1.0, abs(c)):
                return False
    return True


@dataclass(frozen=True)
class NondegeneracyReport:
    holds: bool
    C: float | None
    collars: tuple[tuple[float, float], ...]


def nondegeneracy_check(
    spec: PotentialSpec, basis: ModeBasis, l0: int, eps: float
) -> NondegeneracyReport:
    """Test whether the diagonal channel l0 dominates the potential near the
    support edges: C |V_{l0 l0}(x)| >= sup_y |V(x, y)| on the eps-collars.

    sup_y is bounded by the sum of coefficient magnitudes of each term
    (exact for trigonometric profiles), which is conservative but sound.
    Returns the minimal C over the sampled/piecewise structure, or holds=False
    when the diagonal vanishes somewhere the potential does not.
    """
    box = support_box(spec)
    b = box.half_width
    if not (0 < eps < b):
        raise PotentialError(f"collar width must satisfy 0 < eps < b={b}")
    if spec.geometry.is_half:
        collars = ((b - eps, b),)
    else:
        collars = ((-b, -b + eps), (b - eps, b))

    # per-term data: y-magnitude bound and exact diagonal pairing
    y_bounds = []
    diag = []
    for t in spec.terms:
        y_bounds.append(t.y.coeff_abs_sum() if t.y.is_closed_form else None)
        diag.append(pair_integral(basis, l0, l0, t.y))

    C = 0.0
    for a, c in collars:
        for x in _collar_samples(spec, a, c):
            upper = 0.0
            d = 0.0j
            for t, yb, dg in zip(spec.terms, y_bounds, diag):
                xv = complex(t.x(np.asarray([x]))[0])
                if yb is None:
                    return NondegeneracyReport(False, None, collars)
                upper += abs(xv) * yb
                d += xv * dg
            if upper == 0.0:
                continue
            if abs(d) <= 1e-14 * upper:
                return NondegeneracyReport(False, None, collars)
            C = max(C, upper / abs(d))
    return NondegeneracyReport(True, C, collars)


def _collar_samples(spec: PotentialSpec, a: float, c: float) -> np.ndarray:
    """Representative x-points of the collar [a, c]: midpoints of every
    piecewise cell plus a dense fill for smooth profiles."""
    cuts = {a, c}
    smooth = False
    for t in spec.terms:
        smooth = smooth or t.x.fn is not None
        for brk in t.x.breaks:
            if a < brk < c:
                cuts.add(brk)
    edges = np.array(sorted(cuts))
    mids = 0.5 * (edges[:-1] + edges[1:])
    if smooth:
        mids = np.unique(np.concatenate([mids, np.linspace(a, c, 257)[1:-1]]))
    return mids
