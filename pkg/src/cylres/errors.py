"""Shared exception types."""

from __future__ import annotations


class PoleProximity(Exception):
    """The linear solve came too close to singular at this point; the sample
    is flagged rather than silently computed."""

    def __init__(self, k: complex, margin: float):
        self.k = k
        self.margin = margin
        super().__init__(f"near-singular solve at k={k} (margin {margin:.3e})")


class UnresolvedWinding(Exception):
    """Boundary phase could not be resolved (zero on or near the contour)."""

    def __init__(self, where: complex | None = None, reason: str = ""):
        self.where = where
        super().__init__(reason or f"unresolved boundary phase near {where}")


class FitRefused(Exception):
    """Slope fit rejected: not enough zeros in the window."""
