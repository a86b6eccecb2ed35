"""Branch bookkeeping for the square-root surface over the transverse spectrum.

A sheet is named by its labeling set: the distinct-eigenvalue indices j whose
branch value r_j has negative imaginary part there.  Points are given in the
coordinate k = r_{j0} with Im k < 0; all other branch values follow from the
single-valued chart

    r_j = -sqrt_up(base - nu_j^2)  if j in the labeling set, else +sqrt_up,

where sqrt_up is the square root with nonnegative imaginary part (branch cut
along [0, inf)) and base = k^2 + nu_{j0}^2.  The flip map negates the labeled
branches, landing on the sheet where every Im r_j > 0.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .crosssec import ModeBasis

__all__ = [
    "SheetLabel",
    "TildeSet",
    "SheetPoint",
    "PhysicalPoint",
    "SheetDomainError",
    "lift",
    "flip_to_physical",
    "tilde_set",
    "meets_physical",
]

DEFAULT_RAMIFICATION_GUARD = 1e-8


class SheetDomainError(ValueError):
    """Point outside the single-valued chart (wrong half-plane, or too close
    to a branch point / sheet boundary)."""


@dataclass(frozen=True)
class SheetLabel:
    members: frozenset[int]
    anchor: int  # j0, the index whose branch value is the chart coordinate

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(int(j) for j in self.members))
        if not self.members:
            raise ValueError("labeling set must be nonempty")
        if any(j < 1 for j in self.members):
            raise ValueError("labeling-set indices are 1-based positive integers")
        if self.anchor not in self.members:
            raise ValueError(f"anchor {self.anchor} not in labeling set {set(self.members)}")

    def validate_for(self, basis: ModeBasis) -> None:
        if max(self.members) > basis.J_max:
            raise ValueError(
                f"labeling set {sorted(self.members)} exceeds the basis "
                f"(J_max={basis.J_max}); build more modes"
            )


@dataclass(frozen=True)
class TildeSet:
    """Mode indices whose eigenvalue matches a labeled distinct eigenvalue."""

    members: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, l: int) -> bool:
        return l in self.members


@dataclass(frozen=True)
class SheetPoint:
    k: complex
    sheet: SheetLabel
    base: complex  # k^2 + nu_{j0}^2, the projection to the base plane
    branches: tuple[complex, ...]  # r_j for all distinct j, sheet signs
    mode_branches: tuple[complex, ...]  # r~_l for all modes l


@dataclass(frozen=True)
class PhysicalPoint:
    """Branch values after flipping to the all-positive-imaginary-part sheet."""

    base: complex
    branches: tuple[complex, ...]
    mode_branches: tuple[complex, ...]


def sqrt_up(w: complex | np.ndarray) -> complex | np.ndarray:
    """Square root with Im >= 0, branch cut along [0, inf)."""
    if isinstance(w, (complex, float, int)):
        return 1j * cmath.sqrt(-w)
    return 1j * np.sqrt(-np.asarray(w, dtype=complex))


def _cut_distance(w: complex) -> float:
    """Distance from w to the branch cut [0, inf)."""
    if w.real >= 0.0:
        return abs(w.imag)
    return abs(w)


def lift(
    k: complex,
    sheet: SheetLabel,
    basis: ModeBasis,
    guard: float = DEFAULT_RAMIFICATION_GUARD,
) -> SheetPoint:
    """Realize the point with r_{j0} = k on the labeled sheet.

    Rejects points with Im k >= 0 and points whose base value comes within
    ``guard`` of any branch cut start nu_j^2 or of the cut itself (such points
    sit on a boundary between sheets and carry no consistent sign pattern).
    """
    k = complex(k)
    if not (k.imag < 0.0):
        raise SheetDomainError(f"chart requires Im k < 0, got k={k}")
    sheet.validate_for(basis)
    j0 = sheet.anchor
    base = k * k + basis.distinct[j0 - 1]
    members = sheet.members
    branches: list[complex] = []
    for j, nu2 in enumerate(basis.distinct, start=1):
        w = base - nu2
        if _cut_distance(w) <= guard:
            raise SheetDomainError(
                f"base point {base} is within {guard} of the branch cut of "
                f"nu_{j}^2 = {nu2}; no sheet assignment"
            )
        s = 1j * cmath.sqrt(-w)
        branches.append(-s if j in members else s)
    # the anchor branch must reproduce the chart coordinate
    if abs(branches[j0 - 1] - k) > 1e-9 * (1.0 + abs(k)):
        raise SheetDomainError(
            f"chart inconsistency at k={k}: r_j0={branches[j0 - 1]}"
        )
    branches[j0 - 1] = k
    mode_branches = tuple(branches[basis.distinct_of(l) - 1] for l in range(1, basis.L_max + 1))
    return SheetPoint(k, sheet, base, tuple(branches), mode_branches)


def flip_to_physical(p: SheetPoint) -> PhysicalPoint:
    """Negate the labeled branches so that every Im r_j > 0.

    On a valid sheet point the labeled branches are exactly those with
    negative imaginary part, so the flip is a sign test per branch.
    """
    branches = tuple(-r if r.imag < 0.0 else r for r in p.branches)
    mode_branches = tuple(-r if r.imag < 0.0 else r for r in p.mode_branches)
    return PhysicalPoint(p.base, branches, mode_branches)


def tilde_set(sheet: SheetLabel, basis: ModeBasis) -> TildeSet:
    """Modes whose transverse eigenvalue is one of the labeled distinct values."""
    sheet.validate_for(basis)
    return TildeSet(
        tuple(
            l
            for l in range(1, basis.L_max + 1)
            if basis.distinct_of(l) in sheet.members
        )
    )


def meets_physical(sheet: SheetLabel) -> bool:
    """True iff the labeling set is an initial segment {1, ..., J}."""
    return sheet.members == frozenset(range(1, max(sheet.members) + 1))
