"""Panel-based Gauss-Legendre quadrature grids on the potential support.

The axial kernels handled downstream are piecewise-analytic with a kink on
the diagonal x = x', so every grid carries precomputed "split rules": for a
target node inside a panel, the panel integral is re-expressed as two
Gauss-Legendre sub-rules meeting at the target, with the integrand's smooth
factor interpolated from the panel's own nodes.  The split tables depend only
on the reference panel, so they are computed once per node order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Barycentric weights for polynomial interpolation at ``nodes``."""
    n = len(nodes)
    w = np.ones(n)
    for j in range(n):
        w[j] = 1.0 / np.prod(nodes[j] - np.delete(nodes, j))
    return w / np.max(np.abs(w))


def interp_matrix(nodes: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Matrix T with T[s, j] = L_j(targets[s]) for the Lagrange basis on ``nodes``."""
    bw = barycentric_weights(nodes)
    T = np.zeros((len(targets), len(nodes)))
    for s, t in enumerate(targets):
        diff = t - nodes
        hit = np.nonzero(diff == 0.0)[0]
        if hit.size:
            T[s, hit[0]] = 1.0
        else:
            terms = bw / diff
            T[s] = terms / terms.sum()
    return T


@lru_cache(maxsize=None)
def _split_tables(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Reference split rules on [-1, 1] for each of the ``order`` GL targets.

    Returns (sub_nodes, tensor) with sub_nodes[q] the 2*order quadrature
    points of the two sub-rules meeting at target q, and tensor[q, s, j] the
    combined sub-weight times interpolation weight back to panel node j.
    """
    xq, _ = gauss_legendre(order)
    xs, ws = gauss_legendre(order)
    sub_nodes = np.zeros((order, 2 * order))
    tensor = np.zeros((order, 2 * order, order))
    for q, t in enumerate(xq):
        # left sub-rule on [-1, t], right sub-rule on [t, 1]
        hl = 0.5 * (t - (-1.0))
        cl = 0.5 * (t + (-1.0))
        hr = 0.5 * (1.0 - t)
        cr = 0.5 * (1.0 + t)
        nodes = np.concatenate([cl + hl * xs, cr + hr * xs])
        weights = np.concatenate([hl * ws, hr * ws])
        sub_nodes[q] = nodes
        tensor[q] = weights[:, None] * interp_matrix(xq, nodes)
    return sub_nodes, tensor


@dataclass(frozen=True)
class Panel:
    a: float
    b: float
    start: int  # index of the panel's first node in the grid arrays

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.b - self.a)


@dataclass(frozen=True, eq=False)
class Grid:
    """Composite Gauss-Legendre grid over a partition of [x_min, x_max].

    Every supplied breakpoint is a panel boundary; panels may be further
    subdivided so that oscillations up to the configured phase scale are
    resolved by the per-panel rule.
    """

    panels: tuple[Panel, ...]
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def x_min(self) -> float:
        return self.panels[0].a

    @property
    def x_max(self) -> float:
        return self.panels[-1].b

    def panel_slice(self, i: int) -> slice:
        p = self.panels[i]
        return slice(p.start, p.start + self.order)

    def split_rule(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Physical split sub-nodes and weight tensor for panel ``i``.

        Returns (sub_nodes, tensor): sub_nodes[q] are the 2*order points of
        the two sub-rules meeting at the panel's q-th node, and tensor[q, s, j]
        carries sub-weight times interpolation back onto the panel nodes.
        """
        ref_nodes, ref_tensor = _split_tables(self.order)
        p = self.panels[i]
        return p.center + p.half_width * ref_nodes, p.half_width * ref_tensor

    def covers(self, x_min: float, x_max: float, tol: float = 1e-12) -> bool:
        return self.x_min <= x_min + tol and self.x_max >= x_max - tol


def build_grid(
    breaks: np.ndarray | list[float],
    order: int = 24,
    k_scale: float = 1.0,
    max_phase: float | None = None,
) -> Grid:
    """Build a panel grid refined at ``breaks`` and at the oscillation scale.

    ``k_scale`` is the largest axial wavenumber magnitude the grid must
    resolve; panels are subdivided until width * k_scale <= max_phase
    (default: the node order, comfortably within the rule's resolution).
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    if len(breaks) < 2:
        raise ValueError("grid needs at least two breakpoints")
    if max_phase is None:
        max_phase = float(order)
    edges: list[float] = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        width = b - a
        pieces = max(1, int(np.ceil(width * max(k_scale, 1e-9) / max_phase)))
        edges.extend(a + width * i / pieces for i in range(pieces))
    edges.append(breaks[-1])

    xg, wg = gauss_legendre(order)
    panels = []
    nodes = []
    weights = []
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        h = 0.5 * (b - a)
        c = 0.5 * (b + a)
        panels.append(Panel(a, b, i * order))
        nodes.append(c + h * xg)
        weights.append(h * wg)
    return Grid(
        panels=tuple(panels),
        nodes=np.concatenate(nodes),
        weights=np.concatenate(weights),
        order=order,
    )
