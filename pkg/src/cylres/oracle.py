"""Independent 1D resonance oracle for piecewise-constant potentials.

Resonances on the line (or half-line) are zeros of an explicit entire
function built from 2x2 layer propagators: start from purely outgoing data on
the left (or from the boundary condition at 0), push the Cauchy data across
each constant layer, and demand purely outgoing behaviour on the right.

Each layer propagator is written in the even functions cos(kappa*h) and
sin(kappa*h)/kappa of kappa = sqrt(k^2 - c), so no branch choice enters and
the function is entire in k.  This module deliberately shares no code with
the cylinder resolvent pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["OracleProfile", "oracle_fn", "oracle_1d"]


@dataclass(frozen=True)
class OracleProfile:
    """Piecewise-constant 1D potential: values[i] on [breaks[i], breaks[i+1]].

    side "full" scatters on the whole line; side "half" restricts to x >= 0
    with the given boundary condition at 0 (breaks must then start at >= 0).
    """

    breaks: tuple[float, ...]
    values: tuple[complex, ...]
    side: str = "full"  # "full" | "half"
    bc: str = ""  # half-line only: "dirichlet" | "neumann"

    def __post_init__(self):
        if len(self.breaks) != len(self.values) + 1:
            raise ValueError("need len(breaks) == len(values) + 1")
        if any(b2 <= b1 for b1, b2 in zip(self.breaks[:-1], self.breaks[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if self.side not in ("full", "half"):
            raise ValueError(f"unknown side {self.side!r}")
        if self.side == "half":
            if self.bc not in ("dirichlet", "neumann"):
                raise ValueError("half-line profile needs bc dirichlet|neumann")
            if self.breaks[0] < 0.0:
                raise ValueError("half-line support must lie in x >= 0")


def _layer_step(psi, dpsi, h: float, kappa2: complex):
    """Propagate Cauchy data (psi, psi') across a layer of width h where the
    local equation is psi'' = (c - k^2) psi = -kappa2 * psi."""
    z = kappa2 * h * h  # = (kappa*h)^2, branch-free
    if abs(z) > 1e-10:
        kappa = np.sqrt(complex(z)) / h  # either root; entries are even
        ch = np.cos(kappa * h)
        sh_over = np.sin(kappa * h) / kappa
    else:
        # series in z keeps the entries smooth through kappa = 0
        ch = 1.0 - z / 2.0 + z * z / 24.0
        sh_over = h * (1.0 - z / 6.0 + z * z / 120.0)
    return ch * psi + sh_over * dpsi, -kappa2 * sh_over * psi + ch * dpsi


def oracle_fn(profile: OracleProfile):
    """Entire function of k whose lower-half-plane zeros are the resonances."""
    breaks = profile.breaks
    values = profile.values

    def f(k: complex) -> complex:
        k = complex(k)
        if profile.side == "full":
            # outgoing to the left of the support: e^{-ikx}, normalized at the
            # left edge
            psi, dpsi = 1.0 + 0.0j, -1j * k
        elif profile.bc == "dirichlet":
            psi, dpsi = 0.0j, 1.0 + 0.0j
        else:
            psi, dpsi = 1.0 + 0.0j, 0.0j
        if profile.side == "half" and breaks[0] > 0.0:
            psi, dpsi = _layer_step(psi, dpsi, breaks[0], k * k)
        for a, b, c in zip(breaks[:-1], breaks[1:], values):
            psi, dpsi = _layer_step(psi, dpsi, b - a, k * k - c)
        # purely outgoing to the right: psi proportional to e^{+ikx}
        return dpsi - 1j * k * psi

    return f


def oracle_1d(profile: OracleProfile, region, **locate_options):
    """Locate all resonances of the profile in the region, with multiplicity.

    Uses the generic winding/subdivision machinery on the explicit entire
    function; returns the same resonance-list structure as the cylinder
    pipeline so results are directly comparable.
    """
    from .finder import locate

    f = oracle_fn(profile)
    width = profile.breaks[-1] - profile.breaks[0]
    options = {"phase_scale": 2.0 * max(width, profile.breaks[-1]) + 2.0}
    options.update(locate_options)
    return locate(region, f, **options)
