"""Discretized resolvent pipeline: from a chart point to det(I + B).

Per evaluation point the steps are: lift the coordinate to the labeled sheet,
flip to the all-decaying branch values, build the Nystrom matrix of the
potential times the free resolvent on the support grid, solve for the
scattered mode waves, and contract them against the test waves to form the
small matrix whose determinant's zeros are the resonances.

The grid geometry, mode coupling and kernel distance tables are all
independent of the evaluation point and are precomputed once per context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .crosssec import ModeBasis
from .errors import PoleProximity
from .finder import SVal
from .potential import Geometry, ModeCoupledPotential, PotentialSpec, mode_couple, support_box
from .quadrature import Grid, build_grid
from .sheets import PhysicalPoint, SheetLabel, SheetPoint, flip_to_physical, lift, tilde_set

__all__ = [
    "EngineOptions",
    "EvalContext",
    "DiscretizedOperator",
    "BMatrix",
    "free_kernel",
    "build_context",
    "assemble_VR0",
    "solve_phi",
    "b_entry",
    "assemble_B",
    "det_fn",
    "det_fn_scaled",
    "convergence_probe",
]


@dataclass(frozen=True)
class EngineOptions:
    nodes_per_panel: int = 24
    max_phase: float | None = None  # radians of oscillation per panel
    coupling_depth: int = 4  # coupling-graph reachability depth for mode retention
    margin_min: float = 1e-10
    guard: float = 1e-8
    dense_cutoff: int = 400  # below this total size, dense LU beats banded
    solve_residual: float = 1e-10


def free_kernel(l: int, r_mode: complex, x, xp, geometry: Geometry):
    """Axial kernel of the free resolvent in mode l at branch value r_mode.

    Requires Im r_mode > 0 (decaying branch).  On the half cylinder the image
    term enforces the boundary condition at x = 0: Neumann adds it, Dirichlet
    subtracts it.
    """
    r_mode = complex(r_mode)
    if not r_mode.imag > 0.0:
        raise ValueError(f"free kernel needs Im r > 0, got {r_mode}")
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    pref = 1j / (2.0 * r_mode)
    out = pref * np.exp(1j * r_mode * np.abs(x - xp))
    if geometry.is_half:
        image = pref * np.exp(1j * r_mode * (x + xp))
        out = out + image if geometry.bc == "neumann" else out - image
    return out if out.shape else complex(out)


# --------------------------------------------------------------------------
# linear-operator backends (I + M, factored once per point)


class _DenseOp:
    def __init__(self, A: np.ndarray):
        self.A = A
        self.n = A.shape[0]
        self._lu = sla.lu_factor(A, check_finite=False)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self._lu, b, check_finite=False)

    def solve_adj(self, b: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self._lu, b, trans=2, check_finite=False)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def dense(self) -> np.ndarray:
        return self.A


class _BlockTriOp:
    """Block-tridiagonal LU (block Thomas) for banded mode coupling.

    Factors A = L U with unit lower block-bidiagonal L (multipliers T_i) and
    upper block-bidiagonal U (pivots S_i, supers B_i); the adjoint solve
    reuses the same factors via A^H = U^H L^H.
    """

    def __init__(self, diag: list[np.ndarray], lower: list[np.ndarray], upper: list[np.ndarray]):
        from scipy.linalg.lapack import zgetrf, zgetrs

        self.nb = len(diag)
        self.m = diag[0].shape[0]
        self.n = self.nb * self.m
        self.lower = lower  # lower[i] sits at (row i+1, col i)
        self.upper = upper
        self.diag = diag
        self._getrs = zgetrs
        self._t = []
        self._lus = []
        lu, piv, info = zgetrf(diag[0])
        if info > 0:
            raise PoleProximity(0.0, 0.0)
        self._lus.append((lu, piv))
        for i in range(1, self.nb):
            th, _ = zgetrs(lu, piv, lower[i - 1].conj().T, trans=2)
            t = th.conj().T
            lu, piv, info = zgetrf(diag[i] - t @ upper[i - 1])
            if info > 0:
                raise PoleProximity(0.0, 0.0)
            self._t.append(t)
            self._lus.append((lu, piv))

    def solve(self, b: np.ndarray) -> np.ndarray:
        m, nb = self.m, self.nb
        B = np.asarray(b, dtype=complex).reshape(nb, m, -1)
        y = np.empty_like(B)
        y[0] = B[0]
        for i in range(1, nb):
            y[i] = B[i] - self._t[i - 1] @ y[i - 1]
        x = np.empty_like(B)
        x[-1], _ = self._getrs(*self._lus[-1], y[-1])
        for i in range(nb - 2, -1, -1):
            x[i], _ = self._getrs(*self._lus[i], y[i] - self.upper[i] @ x[i + 1])
        return x.reshape(b.shape)

    def solve_adj(self, b: np.ndarray) -> np.ndarray:
        # A^H x = b: forward with S_i^H and B_{i-1}^H, then unit backward with T_i^H
        m, nb = self.m, self.nb
        B = np.asarray(b, dtype=complex).reshape(nb, m, -1)
        y = np.empty_like(B)
        y[0], _ = self._getrs(*self._lus[0], B[0], trans=2)
        for i in range(1, nb):
            rhs = B[i] - self.upper[i - 1].conj().T @ y[i - 1]
            y[i], _ = self._getrs(*self._lus[i], rhs, trans=2)
        x = np.empty_like(B)
        x[-1] = y[-1]
        for i in range(nb - 2, -1, -1):
            x[i] = y[i] - self._t[i].conj().T @ x[i + 1]
        return x.reshape(b.shape)

    def apply(self, x: np.ndarray) -> np.ndarray:
        m, nb = self.m, self.nb
        X = np.asarray(x, dtype=complex).reshape(nb, m, -1)
        out = np.empty_like(X)
        for i in range(nb):
            acc = self.diag[i] @ X[i]
            if i > 0:
                acc += self.lower[i - 1] @ X[i - 1]
            if i < nb - 1:
                acc += self.upper[i] @ X[i + 1]
            out[i] = acc
        return out.reshape(x.shape)

    def dense(self) -> np.ndarray:
        m = self.m
        A = np.zeros((self.n, self.n), dtype=complex)
        for i in range(self.nb):
            A[i * m : (i + 1) * m, i * m : (i + 1) * m] = self.diag[i]
            if i > 0:
                A[i * m : (i + 1) * m, (i - 1) * m : i * m] = self.lower[i - 1]
            if i < self.nb - 1:
                A[i * m : (i + 1) * m, (i + 1) * m : (i + 2) * m] = self.upper[i]
        return A


class _BlockDiagOp:
    """Independent per-mode factorizations for diagonal mode coupling."""

    def __init__(self, blocks: list[np.ndarray]):
        self.blocks = blocks
        self.n = sum(b.shape[0] for b in blocks)
        self._lus = [sla.lu_factor(b, check_finite=False) for b in blocks]

    def _blockwise(self, b, trans):
        out = np.empty_like(b, dtype=complex)
        i = 0
        for blk, lu in zip(self.blocks, self._lus):
            m = blk.shape[0]
            out[i : i + m] = sla.lu_solve(lu, b[i : i + m], trans=trans, check_finite=False)
            i += m
        return out

    def solve(self, b):
        return self._blockwise(np.asarray(b, dtype=complex), 0)

    def solve_adj(self, b):
        return self._blockwise(np.asarray(b, dtype=complex), 2)

    def apply(self, x):
        out = np.empty_like(x, dtype=complex)
        i = 0
        for blk in self.blocks:
            m = blk.shape[0]
            out[i : i + m] = blk @ x[i : i + m]
            i += m
        return out

    def dense(self):
        return sla.block_diag(*self.blocks)


def _margin_estimate(op) -> float:
    """One inverse-power step on the smallest singular value of I + M."""
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(op.n) + 1j * rng.standard_normal(op.n)
    v /= np.linalg.norm(v)
    w = op.solve(op.solve_adj(v.reshape(-1, 1))).ravel()
    nw = np.linalg.norm(w)
    if not np.isfinite(nw) or nw == 0.0:
        return 0.0
    return float(1.0 / math.sqrt(nw))


@dataclass(eq=False)
class DiscretizedOperator:
    """I + (potential x free resolvent) on mode-vector functions over the grid."""

    backend: object
    modes_active: tuple[int, ...]
    z_tag: SheetPoint
    grid: Grid
    n: int

    @cached_property
    def singular_margin(self) -> float:
        return _margin_estimate(self.backend)

    @property
    def matrix(self) -> np.ndarray:
        return self.backend.dense()

    @property
    def L_active(self) -> int:
        return len(self.modes_active)


# --------------------------------------------------------------------------
# evaluation context: everything independent of the evaluation point


@dataclass(eq=False)
class EvalContext:
    basis: ModeBasis
    sheet: SheetLabel
    geometry: Geometry
    spec: PotentialSpec
    grid: Grid
    coupled: ModeCoupledPotential
    modes_active: tuple[int, ...]  # 1-based, sorted by harmonic
    tilde: tuple[int, ...]
    options: EngineOptions
    # precomputed tables
    absdiff: np.ndarray = field(repr=False, default=None)
    sumdiff: np.ndarray = field(repr=False, default=None)
    blocks: dict = field(repr=False, default=None)  # (l, m) -> V_{lm} on nodes
    split_dist_all: np.ndarray = field(repr=False, default=None)  # (panels, p, 2p)
    split_wt_all: np.ndarray = field(repr=False, default=None)  # (panels, p, 2p, p)
    stats: dict = field(repr=False, default_factory=dict)

    @property
    def n_total(self) -> int:
        return len(self.modes_active) * self.grid.n

    def mode_position(self, l: int) -> int:
        return self.modes_active.index(l)


def _reachable_modes(coupled: ModeCoupledPotential, seeds, depth: int) -> tuple[int, ...]:
    """Modes reachable from the seed set in <= depth hops of the coupling graph."""
    mask = coupled.nonzero_pairs()
    L = coupled.L
    current = set(seeds)
    for _ in range(depth):
        grown = set(current)
        for l in current:
            for m in range(1, L + 1):
                if mask[l - 1, m - 1] or mask[m - 1, l - 1]:
                    grown.add(m)
        if grown == current:
            break
        current = grown
    return tuple(sorted(current))


def build_context(
    basis: ModeBasis,
    sheet: SheetLabel,
    spec: PotentialSpec,
    k_scale: float,
    options: EngineOptions = EngineOptions(),
) -> EvalContext:
    """Precompute the grid, coupling and kernel tables for repeated evaluation.

    ``k_scale`` is the largest |k| the context must support; it sets the panel
    refinement so that kernel oscillations stay resolved.
    """
    sheet.validate_for(basis)
    geometry = spec.geometry
    if spec.is_zero:
        breaks = [0.0, 1.0] if geometry.is_half else [-1.0, 1.0]
    else:
        box = support_box(spec)
        breaks = sorted({box.x_min, box.x_max, *(
            b for t in spec.terms for b in t.x.breaks if box.x_min <= b <= box.x_max
        )})
    nu_max = max(basis.distinct)
    osc = math.sqrt(k_scale * k_scale + 2.0 * nu_max) + 1.0
    grid = build_grid(
        breaks,
        order=options.nodes_per_panel,
        k_scale=osc,
        max_phase=options.max_phase,
    )
    coupled = mode_couple(spec, basis, grid)
    tilde = tuple(tilde_set(sheet, basis))
    active = _reachable_modes(coupled, tilde, options.coupling_depth)
    # order by harmonic so local coupling gives a narrow band
    active = tuple(sorted(active, key=lambda l: (basis.mode(l).harmonic, l)))

    x = grid.nodes
    absdiff = np.abs(x[:, None] - x[None, :])
    sumdiff = x[:, None] + x[None, :] if geometry.is_half else None
    blocks = {}
    for l in active:
        for m in active:
            v = coupled.block(l, m)
            if np.any(v != 0):
                blocks[(l, m)] = v
    split_dist = []
    split_wt = []
    for i, panel in enumerate(grid.panels):
        sub, wt = grid.split_rule(i)
        xq = x[grid.panel_slice(i)]
        split_dist.append(np.abs(xq[:, None] - sub))
        split_wt.append(wt)
    p = grid.order
    dist_all = np.stack(split_dist).reshape(-1, 1, 2 * p)  # (panels*p, 1, 2p)
    wt_all = np.stack(split_wt).reshape(-1, 2 * p, p)  # (panels*p, 2p, p)
    return EvalContext(
        basis=basis,
        sheet=sheet,
        geometry=geometry,
        spec=spec,
        grid=grid,
        coupled=coupled,
        modes_active=active,
        tilde=tilde,
        options=options,
        absdiff=absdiff,
        sumdiff=sumdiff,
        blocks=blocks,
        split_dist_all=dist_all,
        split_wt_all=wt_all,
    )


# --------------------------------------------------------------------------
# kernel and operator assembly


def _mode_kernel(ctx: EvalContext, r_mode: complex) -> np.ndarray:
    """Nystrom matrix of the free-resolvent kernel at branch value r_mode,
    with the diagonal kink handled by per-target split rules."""
    grid = ctx.grid
    p = grid.order
    pref = 1j / (2.0 * r_mode)
    G = np.exp(1j * r_mode * ctx.absdiff)
    G *= grid.weights[None, :]
    # self-panel rows: two sub-rules meeting at the target, mapped back to
    # the panel nodes (tables are stacked over panels and targets)
    E = np.exp(1j * r_mode * ctx.split_dist_all)  # (panels*p, 1, 2p)
    corr = (E @ ctx.split_wt_all).reshape(len(grid.panels), p, p)
    for i in range(len(grid.panels)):
        sl = grid.panel_slice(i)
        G[sl, sl] = corr[i]
    G *= pref
    if ctx.geometry.is_half:
        sign = 1.0 if ctx.geometry.bc == "neumann" else -1.0
        G += (sign * pref) * np.exp(1j * r_mode * ctx.sumdiff) * grid.weights[None, :]
    return G


def _assemble_backend(ctx: EvalContext, phys: PhysicalPoint):
    active = ctx.modes_active
    N = ctx.grid.n
    L = len(active)
    n = N * L
    r_phys = {m: phys.mode_branches[m - 1] for m in active}
    if any(not r_phys[m].imag > 0 for m in active):
        raise ValueError("assembly requires the decaying branch values")
    kernels = {m: _mode_kernel(ctx, r_phys[m]) for m in active}

    pairs = [
        (i, j, ctx.blocks[(l, m)])
        for i, l in enumerate(active)
        for j, m in enumerate(active)
        if (l, m) in ctx.blocks
    ]
    off_diag = any(i != j for i, j, _ in pairs)

    if not off_diag:
        blocks = []
        for i, l in enumerate(active):
            A = np.eye(N, dtype=complex)
            if (l, l) in ctx.blocks:
                A += ctx.blocks[(l, l)][:, None] * kernels[l]
            blocks.append(A)
        return _BlockDiagOp(blocks), kernels

    band = max(abs(i - j) for i, j, _ in pairs)
    if band == 1 and L >= 3 and n > ctx.options.dense_cutoff:
        eye = np.eye(N, dtype=complex)
        diag = [eye.copy() for _ in range(L)]
        lower = [np.zeros((N, N), dtype=complex) for _ in range(L - 1)]
        upper = [np.zeros((N, N), dtype=complex) for _ in range(L - 1)]
        for i, j, v in pairs:
            block = v[:, None] * kernels[active[j]]
            if i == j:
                diag[i] += block
            elif i == j + 1:
                lower[j] += block
            else:
                upper[i] += block
        return _BlockTriOp(diag, lower, upper), kernels

    A = np.eye(n, dtype=complex)
    for i, j, v in pairs:
        A[i * N : (i + 1) * N, j * N : (j + 1) * N] += v[:, None] * kernels[active[j]]
    return _DenseOp(A), kernels


def assemble_VR0(
    coupled: ModeCoupledPotential,
    p_phys: PhysicalPoint,
    grid: Grid,
    *,
    context: EvalContext | None = None,
    z_tag: SheetPoint | None = None,
) -> DiscretizedOperator:
    """Nystrom discretization of I + V R_0 at the flipped (decaying) point."""
    if context is None:
        raise ValueError("assemble_VR0 requires a context; use build_context")
    if grid is not context.grid:
        raise ValueError("grid does not match the context grid")
    backend, _ = _assemble_backend(context, p_phys)
    return DiscretizedOperator(
        backend=backend,
        modes_active=context.modes_active,
        z_tag=z_tag,
        grid=grid,
        n=context.n_total,
    )


# --------------------------------------------------------------------------
# scattered waves and the small matrix


def _sheet_branches(ctx: EvalContext, p: SheetPoint) -> dict[int, complex]:
    return {l: p.mode_branches[l - 1] for l in ctx.tilde}


def _rhs_columns(ctx: EvalContext, p: SheetPoint):
    """Right-hand sides V * (incident mode wave) for every tilde mode/sign.

    Full cylinder: columns (j, +) then (j, -) for j in the tilde set.
    Half cylinder: one column per tilde mode, sign fixed by the boundary
    condition (plus for Neumann, minus for Dirichlet).
    """
    x = ctx.grid.nodes
    N = ctx.grid.n
    L = len(ctx.modes_active)
    rt = _sheet_branches(ctx, p)
    cols = []
    labels = []
    if ctx.geometry.is_half:
        sgn = 1.0 if ctx.geometry.bc == "neumann" else -1.0
        for j in ctx.tilde:
            wave = np.exp(1j * rt[j] * x) + sgn * np.exp(-1j * rt[j] * x)
            col = np.zeros((L, N), dtype=complex)
            for i, l in enumerate(ctx.modes_active):
                v = ctx.blocks.get((l, j))
                if v is not None:
                    col[i] = v * wave
            cols.append(col.reshape(-1))
            labels.append((j, "bc"))
    else:
        for sign in (+1, -1):
            for j in ctx.tilde:
                wave = np.exp(1j * sign * rt[j] * x)
                col = np.zeros((L, N), dtype=complex)
                for i, l in enumerate(ctx.modes_active):
                    v = ctx.blocks.get((l, j))
                    if v is not None:
                        col[i] = v * wave
                cols.append(col.reshape(-1))
                labels.append((j, "+" if sign > 0 else "-"))
    return np.stack(cols, axis=1), labels


def solve_phi(
    op: DiscretizedOperator,
    ctx: EvalContext,
    j: int,
    sign: str,
) -> np.ndarray:
    """Scattered wave for tilde mode j and incident sign ('+', '-', or 'bc').

    Returns the mode-vector solution as an (L_active, N) array.  Raises
    PoleProximity when the solve is too close to singular, and checks the
    relative residual of the returned solution.
    """
    if op.singular_margin <= ctx.options.margin_min:
        raise PoleProximity(op.z_tag.k if op.z_tag else 0.0, op.singular_margin)
    rhs_all, labels = _rhs_columns(ctx, op.z_tag)
    try:
        idx = labels.index((j, sign))
    except ValueError:
        raise ValueError(f"no incident wave ({j}, {sign}) for this geometry")
    rhs = rhs_all[:, idx : idx + 1]
    phi = op.backend.solve(rhs)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm > 0:
        resid = np.linalg.norm(op.backend.apply(phi) - rhs) / rhs_norm
        if resid > ctx.options.solve_residual:
            raise PoleProximity(op.z_tag.k if op.z_tag else 0.0, float(resid))
    return phi.reshape(len(ctx.modes_active), ctx.grid.n)


def b_entry(
    ctx: EvalContext,
    l: int,
    j: int,
    row_sign: str,
    col_sign: str,
    phi: np.ndarray,
    p: SheetPoint,
) -> complex:
    """Single entry: weighted overlap of the scattered wave phi (from incident
    mode j, sign col_sign) against the test wave of mode l, sign row_sign.

    Full cylinder rows use the opposite-sign test exponential: entry (+, s)
    integrates against e^{-i r_l x}, entry (-, s) against e^{+i r_l x}.
    Half cylinder entries integrate against the boundary-matched combination.
    """
    x = ctx.grid.nodes
    w = ctx.grid.weights
    pos = ctx.mode_position(l)
    comp = phi[pos]
    if ctx.geometry.is_half:
        rt_j = p.mode_branches[j - 1]
        rt_l = p.mode_branches[l - 1]
        sgn = 1.0 if ctx.geometry.bc == "neumann" else -1.0
        # conjugated test combination; the sine form flips sign under the bar
        test = sgn * (np.exp(1j * rt_l * x) + sgn * np.exp(-1j * rt_l * x))
        # row index is the solve index here; prefactor follows the row
        return complex(1j / (2.0 * rt_j) * np.sum(comp * test * w))
    rt_l = p.mode_branches[l - 1]
    exp_sign = -1.0 if row_sign == "+" else +1.0
    test = np.exp(1j * exp_sign * rt_l * x)
    return complex(1j / (2.0 * rt_l) * np.sum(comp * test * w))


@dataclass(eq=False)
class BMatrix:
    """The small matrix whose determinant vanishes exactly at resonances."""

    array: np.ndarray  # 2T x 2T (full cylinder) or T x T (half cylinder)
    tilde: tuple[int, ...]
    point: SheetPoint
    singular_margin: float
    det_mantissa: complex  # det(I + array) = det_mantissa * exp(det_log)
    det_log: float

    @property
    def det(self) -> complex:
        try:
            return self.det_mantissa * math.exp(self.det_log)
        except OverflowError:
            return complex(math.inf, math.inf)

    @property
    def det_scaled(self) -> SVal:
        return SVal(self.det_mantissa, self.det_log)

    def block(self, row_sign: str, col_sign: str) -> np.ndarray:
        """Full-cylinder block by its sign pair."""
        T = len(self.tilde)
        if self.array.shape[0] != 2 * T:
            raise ValueError("sign blocks exist only on the full cylinder")
        r = 0 if row_sign == "+" else 1
        c = 0 if col_sign == "+" else 1
        return self.array[r * T : (r + 1) * T, c * T : (c + 1) * T]

    @property
    def max_entry(self) -> float:
        return float(np.max(np.abs(self.array))) if self.array.size else 0.0

    def dump_csv(self, path: str) -> None:
        """Diagnostic dump of the entries: row,col,re,im (fixed format)."""
        lines = ["row,col,re,im"]
        for i in range(self.array.shape[0]):
            for j in range(self.array.shape[1]):
                v = self.array[i, j]
                lines.append(f"{i},{j},{v.real:.12e},{v.imag:.12e}")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def assemble_B(p: SheetPoint, ctx: EvalContext) -> BMatrix:
    """Assemble the full matrix of scattered-vs-test overlaps at the point."""
    phys = flip_to_physical(p)
    backend, _ = _assemble_backend(ctx, phys)
    margin = _margin_estimate(backend)
    if margin <= ctx.options.margin_min:
        raise PoleProximity(p.k, margin)
    rhs, labels = _rhs_columns(ctx, p)
    phi = backend.solve(rhs)
    if rhs.size:
        scale = np.linalg.norm(rhs)
        resid = np.linalg.norm(backend.apply(phi) - rhs) / scale if scale > 0 else 0.0
        if resid > max(ctx.options.solve_residual, 1e3 * np.finfo(float).eps / max(margin, 1e-300)):
            raise PoleProximity(p.k, float(resid))

    N = ctx.grid.n
    L = len(ctx.modes_active)
    w = ctx.grid.weights
    x = ctx.grid.nodes
    T = len(ctx.tilde)
    rt = _sheet_branches(ctx, p)
    phi = phi.reshape(L, N, len(labels))

    if ctx.geometry.is_half:
        sgn = 1.0 if ctx.geometry.bc == "neumann" else -1.0
        B = np.zeros((T, T), dtype=complex)
        for col, kmode in enumerate(ctx.tilde):
            # conjugated test combination: cosines stay put, sines flip sign,
            # so the Dirichlet test wave carries an overall minus
            test = sgn * (np.exp(1j * rt[kmode] * x) + sgn * np.exp(-1j * rt[kmode] * x)) * w
            for row, jmode in enumerate(ctx.tilde):
                comp = phi[ctx.mode_position(kmode), :, row]
                B[row, col] = 1j / (2.0 * rt[jmode]) * np.sum(comp * test)
    else:
        B = np.zeros((2 * T, 2 * T), dtype=complex)
        # columns: (j, +) block first, then (j, -); labels carry the order
        for row, lmode in enumerate(ctx.tilde):
            pref = 1j / (2.0 * rt[lmode])
            comp_all = phi[ctx.mode_position(lmode)]  # (N, 2T)
            test_minus = np.exp(-1j * rt[lmode] * x) * w
            test_plus = np.exp(1j * rt[lmode] * x) * w
            B[row, :] = pref * (test_minus @ comp_all)
            B[T + row, :] = pref * (test_plus @ comp_all)

    sign, logdet = np.linalg.slogdet(np.eye(B.shape[0], dtype=complex) + B)
    return BMatrix(
        array=B,
        tilde=ctx.tilde,
        point=p,
        singular_margin=margin,
        det_mantissa=complex(sign),
        det_log=float(logdet) if sign != 0 else -math.inf,
    )


def bmatrix_fn(k: complex, ctx: EvalContext) -> BMatrix:
    p = lift(k, ctx.sheet, ctx.basis, ctx.options.guard)
    return assemble_B(p, ctx)


def det_fn_scaled(k: complex, ctx: EvalContext) -> SVal:
    """det(I + B) at chart coordinate k, as a scaled value."""
    return bmatrix_fn(k, ctx).det_scaled


def det_fn(k: complex, ctx: EvalContext) -> complex:
    """det(I + B) at chart coordinate k (may overflow at extreme depth;
    use det_fn_scaled for contour work)."""
    return bmatrix_fn(k, ctx).det


# --------------------------------------------------------------------------
# refinement certification


@dataclass(frozen=True)
class ProbeReport:
    samples: tuple[complex, ...]
    node_change: float  # max relative det change under node doubling
    mode_change: float  # max relative det change under deeper mode retention
    details: tuple[tuple[complex, float, float], ...]

    @property
    def max_change(self) -> float:
        return max(self.node_change, self.mode_change)


def _rel_change(a: SVal, b: SVal) -> float:
    if a.m == 0 and b.m == 0:
        return 0.0
    d = abs(a.m - b.m * math.exp(min(b.e - a.e, 700.0)))
    return d


def convergence_probe(
    ctx: EvalContext,
    samples,
    k_scale: float,
    node_factor: int = 2,
    extra_depth: int = 2,
) -> ProbeReport:
    """Relative change of the determinant under grid and mode refinement.

    Rebuilds the context with the node count per panel multiplied by
    ``node_factor`` and, separately, with the coupling reachability depth
    increased by ``extra_depth``, and reports the worst relative change.
    """
    fine_nodes = build_context(
        ctx.basis,
        ctx.sheet,
        ctx.spec,
        k_scale,
        replace(ctx.options, nodes_per_panel=ctx.options.nodes_per_panel * node_factor),
    )
    fine_modes = build_context(
        ctx.basis,
        ctx.sheet,
        ctx.spec,
        k_scale,
        replace(ctx.options, coupling_depth=ctx.options.coupling_depth + extra_depth),
    )
    details = []
    worst_nodes = 0.0
    worst_modes = 0.0
    for k in samples:
        base = det_fn_scaled(k, ctx)
        dn = _rel_change(base, det_fn_scaled(k, fine_nodes))
        dm = _rel_change(base, det_fn_scaled(k, fine_modes))
        details.append((complex(k), dn, dm))
        worst_nodes = max(worst_nodes, dn)
        worst_modes = max(worst_modes, dm)
    return ProbeReport(
        samples=tuple(complex(k) for k in samples),
        node_change=worst_nodes,
        mode_change=worst_modes,
        details=tuple(details),
    )
