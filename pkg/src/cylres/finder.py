"""Zero counting and localization by the argument principle.

Rectangle boundaries are sampled adaptively until successive phase steps are
small; winding numbers drive a quadtree subdivision of the search box, and
isolated zeros are polished by Newton iteration with the derivative taken
from a Cauchy circle.  Function values are carried as (mantissa, log-scale)
pairs so that determinants of large exponential type remain usable far below
the real axis.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FitRefused, PoleProximity, UnresolvedWinding
from .sheets import SheetLabel, sqrt_up

__all__ = [
    "Region",
    "Zero",
    "ResonanceList",
    "CountingFit",
    "winding",
    "locate",
    "counting_function",
    "fit_slope",
    "slope_bound",
    "mode_map",
]


# --------------------------------------------------------------------------
# scaled complex values: v = mantissa * exp(log_scale)


@dataclass(frozen=True)
class SVal:
    m: complex  # mantissa, order 1 (or exactly 0)
    e: float  # natural-log scale

    @property
    def log_abs(self) -> float:
        return -math.inf if self.m == 0 else math.log(abs(self.m)) + self.e

    def to_complex(self) -> complex:
        try:
            return self.m * math.exp(self.e)
        except OverflowError:
            return complex(math.inf, math.inf)


def as_sval(v) -> SVal:
    if isinstance(v, SVal):
        return v
    v = complex(v)
    if v == 0:
        return SVal(0.0j, 0.0)
    a = abs(v)
    if not math.isfinite(a):
        raise UnresolvedWinding(reason="non-finite function value")
    return SVal(v / a, math.log(a))


def _ratio(a: SVal, b: SVal) -> complex:
    return (a.m / b.m) * math.exp(min(a.e - b.e, 700.0))


def _sval_sum(terms: list[tuple[complex, float]]) -> SVal:
    """Sum of mantissa*exp(scale) terms, evaluated at the common largest scale."""
    emax = max(e for _, e in terms)
    if emax == -math.inf:
        return SVal(0.0j, 0.0)
    acc = sum(m * math.exp(e - emax) for m, e in terms)
    return as_sval(acc) if acc == 0 else SVal(acc / abs(acc), math.log(abs(acc)) + emax)


# --------------------------------------------------------------------------
# public data types


@dataclass(frozen=True)
class Region:
    """Search region {Im k < -alpha, |k| < r_max} minus flagged disks."""

    alpha: float
    r_max: float
    exclusions: tuple[tuple[complex, float], ...] = ()

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValueError("alpha must be positive")
        if not (self.r_max > self.alpha):
            raise ValueError("r_max must exceed alpha")

    def contains(self, k: complex) -> bool:
        return k.imag < -self.alpha and abs(k) < self.r_max


@dataclass(frozen=True)
class Zero:
    k: complex
    multiplicity: int
    residual: float  # |f(k)| relative to the max boundary |f| of its leaf


@dataclass(frozen=True)
class ResonanceList:
    zeros: tuple[Zero, ...]
    total_winding: int
    unresolved: tuple[tuple[float, float, float, float], ...] = ()
    excluded: tuple[tuple[float, float, float, float], ...] = ()
    beyond: tuple[Zero, ...] = ()  # located inside the box but outside |k| <= r_max

    def multiplicity_sum(self) -> int:
        return sum(z.multiplicity for z in self.zeros)


@dataclass(frozen=True)
class CountingFit:
    radii: tuple[float, ...]
    counts: tuple[int, ...]
    slope: float
    intercept: float
    window: tuple[float, float]
    residual: float


# --------------------------------------------------------------------------
# boundary phase accumulation


class _Evaluator:
    """Memoizing wrapper turning f into scaled values and tracking flags."""

    def __init__(self, f, cache: dict | None = None):
        self.f = f
        self.cache: dict[complex, SVal | None] = cache if cache is not None else {}
        self.flagged: list[complex] = []
        self.calls = 0

    def __call__(self, z: complex) -> SVal:
        z = complex(z)
        if z in self.cache:
            v = self.cache[z]
            if v is None:
                raise PoleProximity(z, 0.0)
            return v
        self.calls += 1
        try:
            v = self.f(z)
        except PoleProximity:
            self.cache[z] = None
            self.flagged.append(z)
            raise
        sv = as_sval(v)
        self.cache[z] = sv
        return sv


_MAG_STEP_MAX = 2.0  # nats: force bisection across large magnitude jumps
_DIP_MARGIN = 0.3  # nats: a sample below both neighbours marks a hidden dip
_MIN_T_STEP = 2.0 ** -48


def _pow2_splits(seg_len: float, max_spacing: float | None) -> int:
    """Initial samples per edge, rounded up to a power of two so that child
    edges of a bisected rectangle reuse the parent's cached samples."""
    if not max_spacing or seg_len <= max_spacing:
        return 1
    return 1 << max(0, math.ceil(math.log2(seg_len / max_spacing)))


def _edge_phase(ev, z0, z1, step_max, max_spacing):
    """Phase change along one straight edge, from adaptively refined samples.

    Refinement criteria, applied iteratively until none fires:
    - successive phase steps stay below ``step_max``;
    - successive log-magnitude steps stay below a fixed bound;
    - no interior sample sits strictly below both neighbours (a dip between
      samples is how a 2*pi phase fold hides from pairwise checks: zeros
      just off the edge depress |f| somewhere, even when the bracketing
      samples look innocuous).
    Pure exponentials show none of these signatures, and their aliasing is
    excluded by the caller's spacing cap.
    """
    dz = z1 - z0
    n0 = _pow2_splits(abs(dz), max_spacing)
    ts = [i / n0 for i in range(n0 + 1)]
    vals = [ev(z0 + t * dz) for t in ts]
    for v in vals:
        if v.m == 0:
            raise UnresolvedWinding(z0, "zero function value on the contour")
    for _ in range(220):
        refine: set[float] = set()
        for a, b, fa, fb in zip(ts[:-1], ts[1:], vals[:-1], vals[1:]):
            if (
                abs(cmath.phase(fb.m / fa.m)) > step_max
                or abs(fb.log_abs - fa.log_abs) > _MAG_STEP_MAX
            ):
                refine.add(0.5 * (a + b))
        for i in range(1, len(ts) - 1):
            if vals[i].log_abs < min(vals[i - 1].log_abs, vals[i + 1].log_abs) - _DIP_MARGIN:
                refine.add(0.5 * (ts[i - 1] + ts[i]))
                refine.add(0.5 * (ts[i] + ts[i + 1]))
        candidates = refine - set(ts)
        if not candidates and refine:
            # midpoints collapsed onto existing samples: resolution exhausted
            raise UnresolvedWinding(z0, "phase step unresolvable on the contour")
        refine = candidates
        if not refine:
            break
        if any(abs(t - s) < _MIN_T_STEP for t in refine for s in ts):
            raise UnresolvedWinding(z0, "phase step unresolvable on the contour")
        for t in refine:
            v = ev(z0 + t * dz)
            if v.m == 0:
                raise UnresolvedWinding(z0, "zero function value on the contour")
            ts.append(t)
            vals.append(v)
        order = sorted(range(len(ts)), key=ts.__getitem__)
        ts = [ts[i] for i in order]
        vals = [vals[i] for i in order]
    else:
        raise UnresolvedWinding(z0, "phase refinement did not settle")
    total = sum(cmath.phase(fb.m / fa.m) for fa, fb in zip(vals[:-1], vals[1:]))
    return total, max(v.log_abs for v in vals)


def _path_phase(ev, points, step_max, max_spacing):
    """Total phase change along the polyline ``points`` (closed or open)."""
    total = 0.0
    log_max = -math.inf
    for z0, z1 in zip(points[:-1], points[1:]):
        d, m = _edge_phase(ev, z0, z1, step_max, max_spacing)
        total += d
        log_max = max(log_max, m)
    return total, log_max


Rect = tuple[float, float, float, float]  # x0, x1, y0, y1


def _rect_corners(rect: Rect) -> list[complex]:
    x0, x1, y0, y1 = rect
    return [
        complex(x0, y0),
        complex(x1, y0),
        complex(x1, y1),
        complex(x0, y1),
        complex(x0, y0),
    ]


def _rect_winding_once(ev, rect, step_max, max_spacing):
    total, log_max = _path_phase(ev, _rect_corners(rect), step_max, max_spacing)
    w = total / (2.0 * math.pi)
    if abs(w - round(w)) > 1e-6:
        raise UnresolvedWinding(
            complex(rect[0], rect[2]), f"non-integer winding {w!r}"
        )
    return int(round(w)), log_max


def _rect_winding(ev, rect, step_max, max_spacing):
    """(integer winding, max boundary log|f|) for a counterclockwise rectangle.

    The count is accepted only once it is stable under halving the sample
    spacing: a pair of zeros hugging an edge can fold the sampled phase by a
    full turn without tripping the step criteria, and the fold cannot survive
    successive halvings.  Dyadic sampling makes the verification pass mostly
    cache hits.
    """
    size = max(rect[1] - rect[0], rect[3] - rect[2])
    spacing = 0.25 * size if max_spacing is None else min(max_spacing, 0.25 * size)
    w, log_max = _rect_winding_once(ev, rect, step_max, spacing)
    for _ in range(3):
        spacing *= 0.5
        w2, log_max = _rect_winding_once(ev, rect, step_max, spacing)
        if w2 == w:
            return w, log_max
        w = w2
    raise UnresolvedWinding(complex(rect[0], rect[2]), "winding unstable under refinement")


def winding(f, rectangle: Rect, phase_step_max: float = math.pi / 3.0, *,
            max_spacing: float | None = None, cache: dict | None = None) -> int:
    """Winding number of f along the rectangle boundary (counterclockwise).

    The boundary is sampled adaptively so that successive phase increments
    stay below ``phase_step_max``; an optional ``max_spacing`` caps the sample
    spacing to guard against aliasing of rapidly oscillating functions.
    """
    ev = _Evaluator(f, cache)
    w, _ = _rect_winding(ev, rectangle, phase_step_max, max_spacing)
    return w


def winding_closed_path(f, vertices, phase_step_max: float = math.pi / 3.0, *,
                        max_spacing: float | None = None) -> int:
    """Winding number along an arbitrary closed polyline."""
    ev = _Evaluator(f)
    pts = [complex(v) for v in vertices]
    if pts[0] != pts[-1]:
        pts.append(pts[0])
    if max_spacing is None:
        max_spacing = 0.25 * max(abs(b - a) for a, b in zip(pts[:-1], pts[1:]))
    total, _ = _path_phase(ev, pts, phase_step_max, max_spacing)
    w = total / (2.0 * math.pi)
    if abs(w - round(w)) > 1e-6:
        raise UnresolvedWinding(pts[0], f"non-integer winding {w!r}")
    return int(round(w))


# --------------------------------------------------------------------------
# localization


@dataclass
class _LocateState:
    ev: _Evaluator
    step_max: float
    max_spacing: float
    delta_loc: float
    newton_scale: float
    residual_target: float
    exclusions: tuple[tuple[complex, float], ...]
    zeros: list[Zero] = field(default_factory=list)
    unresolved: list[Rect] = field(default_factory=list)
    excluded: list[Rect] = field(default_factory=list)


def _rect_diam(rect: Rect) -> float:
    return math.hypot(rect[1] - rect[0], rect[3] - rect[2])


def _rect_center(rect: Rect) -> complex:
    return complex(0.5 * (rect[0] + rect[1]), 0.5 * (rect[2] + rect[3]))


def _touching_exclusion(rect: Rect, exclusions):
    x0, x1, y0, y1 = rect
    for c, rad in exclusions:
        cx = min(max(c.real, x0), x1)
        cy = min(max(c.imag, y0), y1)
        if math.hypot(cx - c.real, cy - c.imag) <= rad:
            return (c, rad)
    return None


def _cauchy_derivative(ev, k: complex, radius: float, n: int = 8) -> SVal:
    """f'(k) from the Cauchy integral over a circle of the given radius."""
    terms = []
    for i in range(n):
        t = 2.0 * math.pi * i / n
        w = k + radius * cmath.exp(1j * t)
        fv = ev(w)
        # f(w) * dw / (w - k)^2, trapezoid in the angle variable
        factor = cmath.exp(-1j * t) / (n * radius)
        terms.append((fv.m * factor, fv.e))
    return _sval_sum(terms)


def _winding_centroid(ev, rect: Rect, step_max, max_spacing) -> complex:
    """First moment of the zeros inside the rectangle over its winding.

    Uses sum k * dlog(f) / (2*pi*i*m) from the adaptively refined boundary
    samples; adequate for reporting unresolvable clusters.
    """
    pts = _rect_corners(rect)
    samples: list[tuple[complex, SVal]] = []

    def collect(z0, z1, f0, f1, depth=0):
        d = cmath.phase(f1.m / f0.m)
        if abs(d) <= step_max or depth >= 48:
            samples.append((z0, f0))
            return
        zm = 0.5 * (z0 + z1)
        fm = ev(zm)
        collect(z0, zm, f0, fm, depth + 1)
        collect(zm, z1, fm, f1, depth + 1)

    for z0, z1 in zip(pts[:-1], pts[1:]):
        n0 = max(1, int(math.ceil(abs(z1 - z0) / max_spacing)))
        subs = [z0 + (z1 - z0) * i / n0 for i in range(n0 + 1)]
        vals = [ev(z) for z in subs]
        for a, b, fa, fb in zip(subs[:-1], subs[1:], vals[:-1], vals[1:]):
            collect(a, b, fa, fb)
    samples.append(samples[0])
    s1 = 0.0j
    wind = 0.0
    for (za, fa), (zb, fb) in zip(samples[:-1], samples[1:]):
        dlog = complex(fb.log_abs - fa.log_abs, cmath.phase(fb.m / fa.m))
        s1 += 0.5 * (za + zb) * dlog
        wind += dlog.imag
    m = wind / (2.0 * math.pi)
    if abs(m) < 0.5:
        return _rect_center(rect)
    return s1 / (2.0j * math.pi * m)


def _newton_polish(state: _LocateState, rect: Rect, mult: int, boundary_log_max: float):
    """Multiplicity-aware Newton from the rectangle center.

    Returns a Zero on success, None when iteration escapes or stalls.
    """
    ev = state.ev
    k = _rect_center(rect)
    # keep the iterate inside (a hair beyond) the leaf: escaping into a
    # neighbour's basin must fail here and trigger further subdivision
    pad = 0.05 * max(rect[1] - rect[0], rect[3] - rect[2]) + state.delta_loc
    box = (rect[0] - pad, rect[1] + pad, rect[2] - pad, rect[3] + pad)
    for _ in range(40):
        try:
            fk = ev(k)
            fp = _cauchy_derivative(ev, k, state.delta_loc)
        except PoleProximity:
            return None
        if fp.m == 0:
            return None
        if fk.m == 0:
            break
        step = mult * _ratio(fk, fp)
        k = k - step
        if not (box[0] <= k.real <= box[1] and box[2] <= k.imag <= box[3]):
            return None
        if abs(step) <= 1e-13 * (1.0 + abs(k)):
            break
    else:
        return None
    try:
        resid_log = ev(k).log_abs - boundary_log_max
    except PoleProximity:
        return None
    residual = math.exp(resid_log) if resid_log < 700 else math.inf
    if residual > state.residual_target:
        return None
    # confirm the multiplicity at the localization scale
    side = state.delta_loc
    check = (k.real - side, k.real + side, k.imag - side, k.imag + side)
    try:
        w, _ = _rect_winding(ev, check, state.step_max, 0.5 * side)
    except (UnresolvedWinding, PoleProximity):
        return None
    if w != mult:
        return None
    return Zero(k, mult, residual)


_SPLIT_FRACTIONS = (0.5, 0.53, 0.47, 0.56)


def _children(rect: Rect, fx: float, fy: float) -> list[Rect]:
    x0, x1, y0, y1 = rect
    xm = x0 + fx * (x1 - x0)
    ym = y0 + fy * (y1 - y0)
    return [
        (x0, xm, y0, ym),
        (xm, x1, y0, ym),
        (x0, xm, ym, y1),
        (xm, x1, ym, y1),
    ]


def _process(state: _LocateState, rect: Rect, wind: int, boundary_log_max: float):
    if wind == 0:
        return
    diam = _rect_diam(rect)
    hit = _touching_exclusion(rect, state.exclusions)
    if hit is not None:
        # descend until the cell is commensurate with the flagged disk, then
        # set it aside; larger cells keep subdividing so zeros clear of the
        # disk are still isolated
        if diam <= max(4.0 * hit[1], 4.0 * state.delta_loc):
            state.excluded.append(rect)
            return
    if hit is None and wind <= 2 and diam <= state.newton_scale:
        z = _newton_polish(state, rect, wind, boundary_log_max)
        if z is not None:
            state.zeros.append(z)
            return
        if diam <= state.delta_loc:
            # unresolvable at the localization scale: report the cluster
            k = _winding_centroid(state.ev, rect, state.step_max, state.max_spacing)
            state.zeros.append(Zero(k, wind, math.nan))
            return
    elif diam <= state.delta_loc:
        k = _winding_centroid(state.ev, rect, state.step_max, state.max_spacing)
        state.zeros.append(Zero(k, wind, math.nan))
        return

    for fx in _SPLIT_FRACTIONS:
        for fy in _SPLIT_FRACTIONS:
            kids = _children(rect, fx, fy)
            try:
                results = [
                    _rect_winding(state.ev, kid, state.step_max, state.max_spacing)
                    for kid in kids
                ]
            except (UnresolvedWinding, PoleProximity):
                continue
            if sum(w for w, _ in results) != wind:
                continue
            for kid, (w, lm) in zip(kids, results):
                _process(state, kid, w, lm)
            return
    state.unresolved.append(rect)


def locate(
    region: Region,
    f,
    *,
    delta_loc: float = 1e-3,
    newton_scale: float = 0.25,
    phase_step_max: float = math.pi / 3.0,
    phase_scale: float | None = None,
    residual_target: float = 1e-8,
    cache: dict | None = None,
) -> ResonanceList:
    """Find all zeros of f (with multiplicity) in the region's bounding box.

    The box [-r_max, r_max] x [-r_max, -alpha] is subdivided by quadtree on
    winding numbers; leaves carrying winding are either polished by Newton or
    subdivided to the localization scale ``delta_loc``.  ``phase_scale`` is
    the caller's bound on the phase rate of f (radians per unit k) and sets
    the anti-aliasing cap on boundary sample spacing.

    Zeros inside the box but outside |k| <= r_max are reported separately;
    leaves that overlap exclusion disks or resist refinement are listed, never
    silently dropped.
    """
    # anti-aliasing: with the phase rate bounded by phase_scale, spacing
    # (2*pi/3)/rate keeps true steps below 2*pi/3, which cannot fold over
    if phase_scale:
        max_spacing = max(2.0 * math.pi / (3.0 * phase_scale), 1e-3)
    else:
        max_spacing = 0.5
    ev = _Evaluator(f, cache)
    state = _LocateState(
        ev=ev,
        step_max=phase_step_max,
        max_spacing=max_spacing,
        delta_loc=delta_loc,
        newton_scale=newton_scale,
        residual_target=residual_target,
        exclusions=region.exclusions,
    )
    root: Rect = (-region.r_max, region.r_max, -region.r_max, -region.alpha)
    try:
        w_root, log_max = _rect_winding(ev, root, phase_step_max, max_spacing)
    except (UnresolvedWinding, PoleProximity):
        # perturb the box by 1% once, then give up on the offending border
        grow = 0.01 * region.r_max
        root = (root[0] - grow, root[1] + grow, root[2] - grow, root[3] - 0.3 * grow)
        w_root, log_max = _rect_winding(ev, root, phase_step_max, max_spacing)
    _process(state, root, w_root, log_max)

    inside = [z for z in state.zeros if abs(z.k) <= region.r_max]
    beyond = [z for z in state.zeros if abs(z.k) > region.r_max]
    inside.sort(key=lambda z: (z.k.real, z.k.imag))
    beyond.sort(key=lambda z: (z.k.real, z.k.imag))
    return ResonanceList(
        zeros=tuple(inside),
        total_winding=sum(z.multiplicity for z in inside),
        unresolved=tuple(state.unresolved),
        excluded=tuple(state.excluded),
        beyond=tuple(beyond),
    )


# --------------------------------------------------------------------------
# counting and slopes


def counting_function(rlist: ResonanceList, region: Region, radii) -> tuple[np.ndarray, np.ndarray]:
    """N(r) = number of zeros (with multiplicity) of modulus < r."""
    radii = np.asarray(sorted(radii), dtype=float)
    if np.any(radii <= region.alpha) or np.any(radii > region.r_max * (1 + 1e-12)):
        raise ValueError("radii must lie in (alpha, r_max]")
    mags = np.array([abs(z.k) for z in rlist.zeros])
    mults = np.array([z.multiplicity for z in rlist.zeros], dtype=int)
    counts = np.array([int(mults[mags < r].sum()) for r in radii])
    return radii, counts


def fit_slope(radii, counts, window: tuple[float, float], min_count: int = 20) -> CountingFit:
    """Least-squares line through (r, N(r)) restricted to the window."""
    radii = np.asarray(radii, dtype=float)
    counts = np.asarray(counts, dtype=float)
    lo, hi = window
    mask = (radii >= lo) & (radii <= hi)
    if mask.sum() < 2:
        raise FitRefused(f"window [{lo}, {hi}] contains {int(mask.sum())} samples")
    n_hi = counts[mask][-1]
    if n_hi < min_count:
        raise FitRefused(
            f"only {int(n_hi)} zeros at r={radii[mask][-1]}; need >= {min_count}"
        )
    r = radii[mask]
    n = counts[mask]
    A = np.vstack([r, np.ones_like(r)]).T
    (slope, intercept), res, *_ = np.linalg.lstsq(A, n, rcond=None)
    rms = math.sqrt(res[0] / len(r)) if len(res) else 0.0
    return CountingFit(
        radii=tuple(radii),
        counts=tuple(int(c) for c in counts),
        slope=float(slope),
        intercept=float(intercept),
        window=(lo, hi),
        residual=rms,
    )


def slope_bound(sheet: SheetLabel, box, basis, geometry) -> float:
    """Upper bound on the counting slope for the sheet and support box."""
    from .sheets import tilde_set

    card = len(tilde_set(sheet, basis))
    if geometry.is_half:
        return (2.0 / math.pi) * box.half_width * card
    return (2.0 / math.pi) * (box.x_max - box.x_min) * card


def mode_map(oracle_zeros, sheet: SheetLabel, basis, region: Region):
    """Map 1D resonances to sheet points for axially separable potentials.

    For each retained mode l and 1D zero zeta, the predicted chart coordinate
    solves k^2 + nu_{j0}^2 = zeta^2 + sigma_l^2 in the lower half plane.
    Predictions outside the region (or on a sheet boundary) are dropped;
    coincident predictions merge with summed multiplicity.
    """
    from .sheets import tilde_set

    nu0 = basis.distinct[sheet.anchor - 1]
    preds: dict[complex, int] = {}
    for item in oracle_zeros:
        if isinstance(item, Zero):
            zeta, mult = item.k, item.multiplicity
        else:
            zeta, mult = complex(item), 1
        for l in tilde_set(sheet, basis):
            w = zeta * zeta + basis.mode(l).eigenvalue - nu0
            if w.real >= 0.0 and abs(w.imag) < 1e-14:
                continue  # boundary ray: no lower-half-plane chart point
            k = complex(-sqrt_up(w))
            if not region.contains(k):
                continue
            preds[k] = preds.get(k, 0) + mult
    out = [Zero(k, m, 0.0) for k, m in preds.items()]
    out.sort(key=lambda z: (z.k.real, z.k.imag))
    return out
