"""Experiment orchestration: configs, presets, reports and CSV artifacts.

A run configuration is a single JSON document; presets fill in every field of
the experiments the package is built around, and explicit fields override
preset values.  All outputs are deterministic: fixed sample orderings, fixed
float formats, no wall-clock content.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .crosssec import CrossSection, ModeBasis, YProfile, build_basis
from .engine import (
    EngineOptions,
    EvalContext,
    ProbeReport,
    build_context,
    convergence_probe,
    det_fn_scaled,
    bmatrix_fn,
)
from .errors import FitRefused, PoleProximity
from .finder import (
    CountingFit,
    Region,
    ResonanceList,
    Zero,
    counting_function,
    fit_slope,
    locate,
    mode_map,
    slope_bound,
)
from .oracle import OracleProfile, oracle_1d
from .potential import (
    Geometry,
    NondegeneracyReport,
    PotentialSpec,
    PotentialTerm,
    SupportBox,
    XProfile,
    nondegeneracy_check,
    support_box,
)
from .sheets import SheetLabel, tilde_set

__all__ = [
    "RunConfig",
    "ConfigError",
    "PRESETS",
    "load_config",
    "run_experiment",
    "compare_separable",
    "probe_run",
    "oracle_run",
]


class ConfigError(ValueError):
    """Invalid run configuration; the message names the failing field."""

    def __init__(self, fld: str, why: str):
        self.field = fld
        super().__init__(f"config field {fld!r}: {why}")


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    name: str
    cross_section: CrossSection
    geometry: Geometry
    spec: PotentialSpec
    sheet: SheetLabel
    region: Region
    options: EngineOptions
    basis_size: int
    fit_window: tuple[float, float]  # fractions of r_max
    n_radii: int
    delta_loc: float
    newton_scale: float
    output: str
    target: dict = field(default_factory=dict)
    probe_samples: tuple[complex, ...] = ()


def _want(d: dict, fld: str, typ, ctxname: str):
    if fld not in d:
        raise ConfigError(f"{ctxname}.{fld}" if ctxname else fld, "missing")
    v = d[fld]
    if typ is float and isinstance(v, (int, float)):
        return float(v)
    if not isinstance(v, typ):
        raise ConfigError(f"{ctxname}.{fld}" if ctxname else fld, f"expected {typ}")
    return v


def _as_complex(v, fld: str) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ConfigError(fld, "expected a number or [re, im] pair")


def _parse_cross_section(d: dict) -> CrossSection:
    kind = _want(d, "kind", str, "cross_section")
    if kind == "circle":
        c = _want(d, "circumference", float, "cross_section")
        if c <= 0:
            raise ConfigError("cross_section.circumference", "must be positive")
        return CrossSection.circle(c)
    if kind == "interval":
        ln = _want(d, "length", float, "cross_section")
        if ln <= 0:
            raise ConfigError("cross_section.length", "must be positive")
        bc = d.get("bc", "dirichlet")
        if bc not in ("dirichlet", "neumann"):
            raise ConfigError("cross_section.bc", f"unknown bc {bc!r}")
        return CrossSection.interval(ln, bc)
    raise ConfigError("cross_section.kind", f"unknown kind {kind!r}")


def _parse_geometry(d: dict) -> Geometry:
    kind = _want(d, "kind", str, "geometry")
    if kind == "full":
        return Geometry.full()
    if kind == "half":
        bc = _want(d, "bc", str, "geometry")
        if bc not in ("dirichlet", "neumann"):
            raise ConfigError("geometry.bc", f"unknown bc {bc!r}")
        return Geometry.half(bc)
    raise ConfigError("geometry.kind", f"unknown kind {kind!r}")


def _parse_y_profile(d: dict, fld: str) -> YProfile:
    if not isinstance(d, dict):
        raise ConfigError(fld, "expected an object")
    poly: dict[int, complex] = {}
    if "const" in d:
        poly[0] = poly.get(0, 0.0) + _as_complex(d["const"], f"{fld}.const")
    for key, factory in (("fourier", "fourier"), ("cos", "cos"), ("sin", "sin")):
        for q, c in d.get(key, {}).items():
            try:
                qi = int(q)
            except ValueError:
                raise ConfigError(f"{fld}.{key}", f"harmonic {q!r} is not an integer")
            cv = _as_complex(c, f"{fld}.{key}[{q}]")
            if key == "fourier":
                poly[qi] = poly.get(qi, 0.0) + cv
            elif key == "cos":
                poly[qi] = poly.get(qi, 0.0) + cv / 2.0
                poly[-qi] = poly.get(-qi, 0.0) + cv / 2.0
            else:
                poly[qi] = poly.get(qi, 0.0) + cv / 2.0j
                poly[-qi] = poly.get(-qi, 0.0) - cv / 2.0j
    if not poly:
        raise ConfigError(fld, "empty transverse profile")
    return YProfile(poly=poly)


def _parse_potential(d: dict, geometry: Geometry) -> PotentialSpec:
    terms = d.get("terms")
    if terms is None or not isinstance(terms, list):
        raise ConfigError("potential.terms", "missing or not a list")
    out = []
    for i, t in enumerate(terms):
        xd = _want(t, "x", dict, f"potential.terms[{i}]")
        breaks = _want(xd, "breaks", list, f"potential.terms[{i}].x")
        values = _want(xd, "values", list, f"potential.terms[{i}].x")
        if len(breaks) != len(values) + 1:
            raise ConfigError(
                f"potential.terms[{i}].x", "need len(breaks) == len(values) + 1"
            )
        vals = [_as_complex(v, f"potential.terms[{i}].x.values[{j}]") for j, v in enumerate(values)]
        try:
            xp = XProfile.piecewise([float(b) for b in breaks], vals)
        except ValueError as e:
            raise ConfigError(f"potential.terms[{i}].x", str(e))
        yd = t.get("y", {"const": 1.0})
        yp = _parse_y_profile(yd, f"potential.terms[{i}].y")
        out.append(PotentialTerm(xp, yp))
    try:
        return PotentialSpec(tuple(out), geometry)
    except ValueError as e:
        raise ConfigError("potential", str(e))


def _parse_sheet(d: dict) -> SheetLabel:
    members = _want(d, "members", list, "sheet")
    if not members or not all(isinstance(m, int) and m >= 1 for m in members):
        raise ConfigError("sheet.members", "need a nonempty list of 1-based indices")
    anchor = d.get("anchor", min(members))
    if anchor not in members:
        raise ConfigError("sheet.anchor", f"anchor {anchor} not in members")
    return SheetLabel(frozenset(members), int(anchor))


def _auto_alpha(spec: PotentialSpec, basis: ModeBasis) -> float:
    from .potential import _im_sup

    im = _im_sup(spec, basis.cross_section.measure) if spec.terms else 0.0
    gaps = [b - a for a, b in zip(basis.distinct[:-1], basis.distinct[1:])]
    scale = math.sqrt(gaps[0]) if gaps and gaps[0] > 0 else 1.0
    return max(0.2, 2.0 * im / scale)


def _auto_basis_size(cs: CrossSection, sheet: SheetLabel, spec: PotentialSpec, depth: int) -> int:
    """Smallest basis covering the coupling reachability from the sheet modes,
    with margin for refinement probes."""
    bandwidth = 0
    for t in spec.terms:
        if t.y.poly:
            bandwidth = max(bandwidth, max(abs(q) for q in t.y.poly))
    reach = (depth + 2) * bandwidth
    if cs.kind == "circle":
        top_harm = max(sheet.members) - 1 + reach
        return 2 * top_harm + 1
    top = max(sheet.members) + reach
    return top + (1 if cs.bc == "neumann" else 0)


def load_config(source) -> RunConfig:
    """Parse and validate a run configuration (path, JSON text, or dict)."""
    if isinstance(source, RunConfig):
        return source
    if isinstance(source, dict):
        raw = dict(source)
    else:
        text = source
        if os.path.exists(str(source)):
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("<document>", f"not valid JSON: {e}")
    name = raw.get("preset", "custom")
    if name != "custom":
        if name not in PRESETS:
            raise ConfigError("preset", f"unknown preset {name!r}; "
                              f"available: {', '.join(sorted(PRESETS))}")
        merged = json.loads(json.dumps(PRESETS[name]))  # deep copy
        merged.update({k: v for k, v in raw.items() if k != "preset"})
        raw = merged

    cs = _parse_cross_section(_want(raw, "cross_section", dict, ""))
    geometry = _parse_geometry(_want(raw, "geometry", dict, ""))
    spec = _parse_potential(_want(raw, "potential", dict, ""), geometry)
    sheet = _parse_sheet(_want(raw, "sheet", dict, ""))

    rd = _want(raw, "region", dict, "")
    r_max = _want(rd, "r_max", float, "region")
    disc = raw.get("discretization", {})
    options = EngineOptions(
        nodes_per_panel=int(disc.get("nodes_per_panel", 24)),
        max_phase=disc.get("max_phase"),
        coupling_depth=int(disc.get("coupling_depth", 4)),
        margin_min=float(disc.get("margin_min", 1e-10)),
        guard=float(disc.get("guard", 1e-8)),
    )
    basis_size = int(raw.get("basis_size", 0)) or _auto_basis_size(
        cs, sheet, spec, options.coupling_depth
    )
    basis_probe = build_basis(cs, max(basis_size, 1))
    try:
        sheet.validate_for(basis_probe)
    except ValueError as e:
        raise ConfigError("sheet.members", str(e))
    alpha = rd.get("alpha")
    if alpha is None:
        alpha = _auto_alpha(spec, basis_probe)
    alpha = float(alpha)
    if not (0 < alpha < r_max):
        raise ConfigError("region.alpha", f"need 0 < alpha < r_max, got {alpha}")

    fit = raw.get("fit", {})
    window = tuple(fit.get("window", (0.5, 1.0)))
    if not (0 < window[0] < window[1] <= 1.0):
        raise ConfigError("fit.window", "window fractions must satisfy 0 < lo < hi <= 1")
    finder = raw.get("finder", {})
    probe_samples = tuple(
        _as_complex(v, f"probe_samples[{i}]") for i, v in enumerate(raw.get("probe_samples", []))
    )
    return RunConfig(
        name=name,
        cross_section=cs,
        geometry=geometry,
        spec=spec,
        sheet=sheet,
        region=Region(alpha, r_max),
        options=options,
        basis_size=basis_size,
        fit_window=(float(window[0]), float(window[1])),
        n_radii=int(fit.get("n_radii", 64)),
        delta_loc=float(finder.get("delta_loc", 1e-3)),
        newton_scale=float(finder.get("newton_scale", 0.25)),
        output=str(raw.get("output", "out")),
        target=raw.get("target", {}),
        probe_samples=probe_samples,
    )


# --------------------------------------------------------------------------
# presets: every built-in experiment by name

_BARRIER_X = {"breaks": [-1.0, 1.0], "values": [10.0]}

PRESETS: dict[str, dict] = {
    "zero": {
        "cross_section": {"kind": "circle", "circumference": 2.0 * math.pi},
        "geometry": {"kind": "full"},
        "potential": {"terms": [{"x": {"breaks": [-1.0, 1.0], "values": [0.0]},
                                 "y": {"const": 1.0}}]},
        "sheet": {"members": [1], "anchor": 1},
        "region": {"alpha": 0.3, "r_max": 10.0},
        "target": {"expect": "empty"},
    },
    "oracle-barrier": {
        "cross_section": {"kind": "circle", "circumference": 2.0 * math.pi},
        "geometry": {"kind": "full"},
        "potential": {"terms": [{"x": _BARRIER_X, "y": {"const": 1.0}}]},
        "sheet": {"members": [1], "anchor": 1},
        "region": {"alpha": 0.3, "r_max": 25.0},
        "target": {"slope": 4.0 / math.pi, "rtol": 0.10},
    },
    "slope-cosine-barrier": {
        "cross_section": {"kind": "circle", "circumference": 2.0 * math.pi},
        "geometry": {"kind": "full"},
        "potential": {"terms": [{"x": _BARRIER_X,
                                 "y": {"const": 1.0, "cos": {"1": 0.3}}}]},
        "sheet": {"members": [1], "anchor": 1},
        "region": {"alpha": 0.3, "r_max": 40.0},
        "discretization": {"nodes_per_panel": 16},
        "target": {"slope": 4.0 / math.pi, "rtol": 0.10},
    },
    "counterexample": {
        "cross_section": {"kind": "circle", "circumference": 2.0 * math.pi},
        "geometry": {"kind": "full"},
        "potential": {"terms": [{"x": _BARRIER_X, "y": {"fourier": {"1": 1.0}}}]},
        "sheet": {"members": [1], "anchor": 1},
        "region": {"alpha": 0.3, "r_max": 20.0},
        "target": {"expect": "empty", "entry_cap": 1e-8},
    },
    "perturbation": {
        "cross_section": {"kind": "circle", "circumference": 2.0 * math.pi},
        "geometry": {"kind": "full"},
        "potential": {"terms": [
            {"x": _BARRIER_X, "y": {"const": 1.0}},
            {"x": {"breaks": [-0.5, 0.5], "values": [5.0]}, "y": {"cos": {"1": 1.0}}},
        ]},
        "sheet": {"members": [1, 2], "anchor": 1},
        "region": {"alpha": 0.3, "r_max": 30.0},
        "discretization": {"nodes_per_panel": 16},
        "target": {"slope": 3.0 * 4.0 / math.pi, "rtol": 0.10},
    },
    "half-dirichlet": {
        "cross_section": {"kind": "circle", "circumference": 2.0 * math.pi},
        "geometry": {"kind": "half", "bc": "dirichlet"},
        "potential": {"terms": [{"x": {"breaks": [0.0, 1.0], "values": [10.0]},
                                 "y": {"const": 1.0, "cos": {"1": 0.3}}}]},
        "sheet": {"members": [1], "anchor": 1},
        "region": {"alpha": 0.3, "r_max": 40.0},
        "discretization": {"nodes_per_panel": 16},
        "target": {"slope": 2.0 / math.pi, "rtol": 0.10},
    },
    "half-neumann": {
        "cross_section": {"kind": "circle", "circumference": 2.0 * math.pi},
        "geometry": {"kind": "half", "bc": "neumann"},
        "potential": {"terms": [{"x": {"breaks": [0.0, 1.0], "values": [10.0]},
                                 "y": {"const": 1.0, "cos": {"1": 0.3}}}]},
        "sheet": {"members": [1], "anchor": 1},
        "region": {"alpha": 0.3, "r_max": 40.0},
        "discretization": {"nodes_per_panel": 16},
        "target": {"slope": 2.0 / math.pi, "rtol": 0.10},
    },
    "half-bound-two": {
        "cross_section": {"kind": "circle", "circumference": 2.0 * math.pi},
        "geometry": {"kind": "half", "bc": "dirichlet"},
        "potential": {"terms": [{"x": {"breaks": [0.0, 1.0], "values": [10.0]},
                                 "y": {"const": 1.0, "cos": {"1": 0.3}}}]},
        "sheet": {"members": [1, 2], "anchor": 1},
        "region": {"alpha": 0.3, "r_max": 30.0},
        "discretization": {"nodes_per_panel": 16},
        "target": {"bound_only": True},
    },
}


# --------------------------------------------------------------------------
# pipeline


@dataclass
class ExperimentResult:
    config: RunConfig
    basis: ModeBasis
    context: EvalContext
    box: SupportBox | None
    rlist: ResonanceList
    radii: np.ndarray
    counts: np.ndarray
    fit: CountingFit | None
    fit_note: str
    bound: float | None
    nondeg: NondegeneracyReport | None
    probe: ProbeReport | None
    max_entry: float
    hypotheses: dict
    verdict: str
    slope_target: float | None

    @property
    def passed(self) -> bool:
        return self.verdict in ("PASS", "COMPLETE")


def _phase_scale(cfg: RunConfig, box: SupportBox | None, basis: ModeBasis) -> float:
    if box is None:
        return 4.0
    diam = box.x_max - box.x_min
    card = len(tilde_set(cfg.sheet, basis))
    return 2.0 * diam * card + 4.0


def _default_probe_samples(region: Region) -> tuple[complex, ...]:
    a, r = region.alpha, region.r_max
    return (
        complex(0.3 * r, -(a + 0.5)),
        complex(-0.45 * r, -(a + 1.0)),
        complex(0.8 * r, -(a + 0.25)),
    )


def build_run_context(cfg: RunConfig) -> tuple[ModeBasis, EvalContext]:
    basis = build_basis(cfg.cross_section, cfg.basis_size)
    ctx = build_context(basis, cfg.sheet, cfg.spec, cfg.region.r_max, cfg.options)
    return basis, ctx


def _entry_scan(ctx: EvalContext, region: Region, n: int = 48) -> float:
    """Largest matrix-entry magnitude over a deterministic region sample."""
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(n):
        re = rng.uniform(-region.r_max * 0.95, region.r_max * 0.95)
        im = -rng.uniform(region.alpha * 1.2, 0.8 * region.r_max)
        try:
            bm = bmatrix_fn(complex(re, im), ctx)
        except (PoleProximity, ValueError):
            continue
        worst = max(worst, bm.max_entry)
    return worst


def run_experiment(source, output: str | None = None, write: bool = True) -> ExperimentResult:
    """Execute the full pipeline for a configuration and emit report files."""
    cfg = load_config(source)
    if output is not None:
        cfg = RunConfig(**{**cfg.__dict__, "output": output})
    basis, ctx = build_run_context(cfg)
    region = cfg.region

    box = None if cfg.spec.is_zero else support_box(cfg.spec)
    bound = None if box is None else slope_bound(cfg.sheet, box, basis, cfg.geometry)

    # hypothesis checks reported with every run
    j0 = cfg.sheet.anchor
    simple = basis.multiplicity(j0) == 1
    hypotheses = {"simple_anchor_eigenvalue": simple}
    nondeg = None
    if box is not None and simple:
        l0 = basis.modes_of_distinct(j0)[0]
        eps = 0.25 * box.half_width
        try:
            nondeg = nondegeneracy_check(cfg.spec, basis, l0, eps)
            hypotheses["nondegeneracy"] = nondeg.holds
        except ValueError:
            hypotheses["nondegeneracy"] = False
    if box is not None and not cfg.geometry.is_half:
        hypotheses["support_centered"] = abs(box.x_max + box.x_min) <= 1e-9 * max(
            1.0, box.half_width
        )

    f = lambda k: det_fn_scaled(k, ctx)
    rlist = locate(
        region,
        f,
        delta_loc=cfg.delta_loc,
        newton_scale=cfg.newton_scale,
        phase_scale=_phase_scale(cfg, box, basis),
    )
    radii = np.linspace(region.r_max / cfg.n_radii, region.r_max, cfg.n_radii)
    radii = radii[radii > region.alpha * 1.0001]
    radii, counts = counting_function(rlist, region, radii)

    window = (cfg.fit_window[0] * region.r_max, cfg.fit_window[1] * region.r_max)
    fit = None
    fit_note = ""
    try:
        fit = fit_slope(radii, counts, window)
    except FitRefused as e:
        fit_note = str(e)

    probe_samples = cfg.probe_samples or _default_probe_samples(region)
    probe = convergence_probe(ctx, probe_samples, region.r_max)

    target = cfg.target
    max_entry = 0.0
    if target.get("entry_cap") is not None:
        max_entry = _entry_scan(ctx, region)

    verdict = _verdict(cfg, rlist, fit, bound, hypotheses, max_entry)
    result = ExperimentResult(
        config=cfg,
        basis=basis,
        context=ctx,
        box=box,
        rlist=rlist,
        radii=radii,
        counts=counts,
        fit=fit,
        fit_note=fit_note,
        bound=bound,
        nondeg=nondeg,
        probe=probe,
        max_entry=max_entry,
        hypotheses=hypotheses,
        verdict=verdict,
        slope_target=target.get("slope"),
    )
    if write:
        _write_outputs(result)
    return result


def _verdict(cfg, rlist, fit, bound, hypotheses, max_entry) -> str:
    target = cfg.target
    if not target:
        return "COMPLETE"
    if any(v is False for v in hypotheses.values()) and "expect" not in target:
        return "FAIL"
    if target.get("expect") == "empty":
        ok = rlist.total_winding == 0 and not rlist.zeros
        cap = target.get("entry_cap")
        if cap is not None:
            ok = ok and max_entry < cap
        return "PASS" if ok else "FAIL"
    if fit is None:
        return "FAIL"
    if bound is not None and fit.slope > bound * 1.05:
        return "FAIL"
    if target.get("bound_only"):
        return "PASS"
    slope = target.get("slope")
    rtol = target.get("rtol", 0.10)
    if slope is None:
        return "COMPLETE"
    return "PASS" if abs(fit.slope - slope) <= rtol * slope else "FAIL"


# --------------------------------------------------------------------------
# separable comparison against the transfer-matrix oracle


@dataclass
class CompareReport:
    config: RunConfig
    predictions: tuple[Zero, ...]
    located: ResonanceList
    pairs: tuple[tuple[Zero, Zero, float], ...]
    unmatched_predicted: tuple[Zero, ...]
    unmatched_located: tuple[Zero, ...]
    hausdorff: float
    max_deviation: float
    probe: ProbeReport | None

    @property
    def bijective(self) -> bool:
        return not self.unmatched_predicted and not self.unmatched_located


def derive_oracle_profile(cfg: RunConfig) -> OracleProfile:
    """Collapse an axially separable, y-independent potential to a 1D profile."""
    consts = []
    for i, t in enumerate(cfg.spec.terms):
        if t.y.poly is None or set(t.y.poly) - {0}:
            raise ConfigError(
                f"potential.terms[{i}].y", "oracle comparison needs a y-independent potential"
            )
        if t.x.fn is not None:
            raise ConfigError(
                f"potential.terms[{i}].x", "oracle comparison needs piecewise-constant profiles"
            )
        consts.append(t.y.poly.get(0, 0.0))
    edges = sorted({b for t in cfg.spec.terms for b in t.x.breaks})
    values = []
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        values.append(
            sum(c * t.x(np.asarray([mid]))[0] for c, t in zip(consts, cfg.spec.terms))
        )
    side = "half" if cfg.geometry.is_half else "full"
    return OracleProfile(tuple(edges), tuple(values), side=side, bc=cfg.geometry.bc)


def compare_separable(source, output: str | None = None, write: bool = True) -> CompareReport:
    """Run the cylinder pipeline and the 1D oracle and match their zeros."""
    cfg = load_config(source)
    if output is not None:
        cfg = RunConfig(**{**cfg.__dict__, "output": output})
    profile = derive_oracle_profile(cfg)
    basis, ctx = build_run_context(cfg)
    region = cfg.region
    box = support_box(cfg.spec)

    oracle_list = oracle_1d(profile, region, delta_loc=cfg.delta_loc)
    predictions = tuple(mode_map(oracle_list.zeros, cfg.sheet, basis, region))

    f = lambda k: det_fn_scaled(k, ctx)
    located = locate(
        region,
        f,
        delta_loc=cfg.delta_loc,
        newton_scale=cfg.newton_scale,
        phase_scale=_phase_scale(cfg, box, basis),
    )

    pairs = []
    preds = list(predictions)
    free = list(located.zeros)
    for p in list(preds):
        if not free:
            break
        dists = [abs(z.k - p.k) for z in free]
        i = int(np.argmin(dists))
        if dists[i] < 0.2:
            z = free.pop(i)
            preds.remove(p)
            pairs.append((p, z, dists[i]))
    max_dev = max((d for _, z, d in pairs), default=0.0)
    mism = [
        (p, z, d) for p, z, d in pairs if p.multiplicity != z.multiplicity
    ]
    unmatched_pred = tuple(preds) + tuple(p for p, _, _ in mism)
    unmatched_loc = tuple(free) + tuple(z for _, z, _ in mism)
    pairs = tuple((p, z, d) for p, z, d in pairs if p.multiplicity == z.multiplicity)

    def _haus(a, b):
        if not a:
            return 0.0
        if not b:
            return math.inf
        return max(min(abs(x.k - y.k) for y in b) for x in a)

    hausdorff = max(_haus(list(predictions), list(located.zeros)),
                    _haus(list(located.zeros), list(predictions)))

    probe = convergence_probe(ctx, _default_probe_samples(region), region.r_max)
    report = CompareReport(
        config=cfg,
        predictions=predictions,
        located=located,
        pairs=pairs,
        unmatched_predicted=unmatched_pred,
        unmatched_located=unmatched_loc,
        hausdorff=hausdorff,
        max_deviation=max_dev,
        probe=probe,
    )
    if write:
        _write_compare(report)
    return report


def probe_run(source, output: str | None = None, write: bool = True) -> ProbeReport:
    cfg = load_config(source)
    if output is not None:
        cfg = RunConfig(**{**cfg.__dict__, "output": output})
    _, ctx = build_run_context(cfg)
    samples = cfg.probe_samples or _default_probe_samples(cfg.region)
    probe = convergence_probe(ctx, samples, cfg.region.r_max)
    if write:
        os.makedirs(cfg.output, exist_ok=True)
        with open(os.path.join(cfg.output, "probe.txt"), "w", encoding="utf-8") as fh:
            fh.write(_probe_text(probe))
    return probe


def oracle_run(source, output: str | None = None, write: bool = True) -> ResonanceList:
    cfg = load_config(source)
    if output is not None:
        cfg = RunConfig(**{**cfg.__dict__, "output": output})
    profile = derive_oracle_profile(cfg)
    rlist = oracle_1d(profile, cfg.region, delta_loc=cfg.delta_loc)
    if write:
        os.makedirs(cfg.output, exist_ok=True)
        _write_resonances(os.path.join(cfg.output, "oracle_resonances.csv"), rlist.zeros)
    return rlist


# --------------------------------------------------------------------------
# artifact writers (deterministic formats)


def _fmt(x: float) -> str:
    return f"{x:.12e}"


def _write_resonances(path: str, zeros) -> None:
    lines = ["re_k,im_k,multiplicity,residual"]
    for z in zeros:
        lines.append(f"{_fmt(z.k.real)},{_fmt(z.k.imag)},{z.multiplicity},{_fmt(z.residual)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_counting(path: str, radii, counts) -> None:
    lines = ["r,count"]
    for r, c in zip(radii, counts):
        lines.append(f"{_fmt(r)},{int(c)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _probe_text(probe: ProbeReport) -> str:
    lines = [
        f"node_change: {_fmt(probe.node_change)}",
        f"mode_change: {_fmt(probe.mode_change)}",
    ]
    for k, dn, dm in probe.details:
        lines.append(f"sample: {_fmt(k.real)}{k.imag:+.12e}j nodes {_fmt(dn)} modes {_fmt(dm)}")
    return "\n".join(lines) + "\n"


_PLOT_SCRIPT = """# gnuplot script: counting function and resonance map
# usage: gnuplot -p plot.gp
set datafile separator ','
set key top left
set xlabel 'r'
set ylabel 'N(r)'
plot 'counting.csv' every ::1 using 1:2 with steps title 'N(r)'
pause -1
set xlabel 'Re k'
set ylabel 'Im k'
plot 'resonances.csv' every ::1 using 1:2 with points pt 7 title 'located zeros'
pause -1
"""


def _write_outputs(res: ExperimentResult) -> None:
    out = res.config.output
    os.makedirs(out, exist_ok=True)
    _write_resonances(os.path.join(out, "resonances.csv"), res.rlist.zeros)
    _write_counting(os.path.join(out, "counting.csv"), res.radii, res.counts)
    with open(os.path.join(out, "plot.gp"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_PLOT_SCRIPT)
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_text(res))


def report_text(res: ExperimentResult) -> str:
    cfg = res.config
    lines = [
        f"experiment: {cfg.name}",
        f"geometry: {cfg.geometry.kind}" + (f" ({cfg.geometry.bc})" if cfg.geometry.is_half else ""),
        f"cross_section: {cfg.cross_section.kind}",
        f"sheet: {sorted(cfg.sheet.members)} anchor {cfg.sheet.anchor}",
        f"alpha: {_fmt(cfg.region.alpha)}",
        f"r_max: {_fmt(cfg.region.r_max)}",
        f"modes_active: {len(res.context.modes_active)}",
        f"grid_nodes: {res.context.grid.n}",
        f"zeros_found: {len(res.rlist.zeros)}",
        f"total_winding: {res.rlist.total_winding}",
        f"unresolved_leaves: {len(res.rlist.unresolved)}",
        f"excluded_leaves: {len(res.rlist.excluded)}",
    ]
    if res.box is not None:
        lines.append(f"support_box: [{_fmt(res.box.x_min)}, {_fmt(res.box.x_max)}]")
        lines.append(f"support_half_width: {_fmt(res.box.half_width)}")
    for name, ok in res.hypotheses.items():
        lines.append(f"hypothesis_{name}: {'ok' if ok else 'FAILED'}")
    if res.nondeg is not None and res.nondeg.holds:
        lines.append(f"nondegeneracy_C: {_fmt(res.nondeg.C)}")
    if res.fit is not None:
        lines.append(f"fit_window: [{_fmt(res.fit.window[0])}, {_fmt(res.fit.window[1])}]")
        lines.append(f"fitted_slope: {_fmt(res.fit.slope)}")
        lines.append(f"fit_residual: {_fmt(res.fit.residual)}")
    else:
        lines.append(f"fitted_slope: none ({res.fit_note})")
    if res.slope_target is not None:
        lines.append(f"slope_target: {_fmt(res.slope_target)}")
    if res.bound is not None:
        lines.append(f"slope_bound: {_fmt(res.bound)}")
    if res.config.target.get("entry_cap") is not None:
        lines.append(f"max_entry_scan: {_fmt(res.max_entry)}")
    if res.probe is not None:
        lines.append(f"probe_node_change: {_fmt(res.probe.node_change)}")
        lines.append(f"probe_mode_change: {_fmt(res.probe.mode_change)}")
    lines.append(f"verdict: {res.verdict}")
    return "\n".join(lines) + "\n"


def _write_compare(rep: CompareReport) -> None:
    out = rep.config.output
    os.makedirs(out, exist_ok=True)
    _write_resonances(os.path.join(out, "resonances.csv"), rep.located.zeros)
    _write_resonances(os.path.join(out, "predicted.csv"), rep.predictions)
    lines = ["re_pred,im_pred,re_found,im_found,multiplicity,deviation"]
    for p, z, d in rep.pairs:
        lines.append(
            f"{_fmt(p.k.real)},{_fmt(p.k.imag)},{_fmt(z.k.real)},{_fmt(z.k.imag)},"
            f"{z.multiplicity},{_fmt(d)}"
        )
    with open(os.path.join(out, "matches.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    rl = [
        f"experiment: {rep.config.name}",
        f"predicted: {len(rep.predictions)}",
        f"located: {len(rep.located.zeros)}",
        f"matched_pairs: {len(rep.pairs)}",
        f"unmatched_predicted: {len(rep.unmatched_predicted)}",
        f"unmatched_located: {len(rep.unmatched_located)}",
        f"bijective: {'yes' if rep.bijective else 'NO'}",
        f"max_deviation: {_fmt(rep.max_deviation)}",
        f"hausdorff: {_fmt(rep.hausdorff)}",
    ]
    if rep.probe is not None:
        rl.append(f"probe_node_change: {_fmt(rep.probe.node_change)}")
        rl.append(f"probe_mode_change: {_fmt(rep.probe.mode_change)}")
    for p in rep.unmatched_predicted:
        rl.append(f"missing: {_fmt(p.k.real)}{p.k.imag:+.12e}j x{p.multiplicity}")
    for z in rep.unmatched_located:
        rl.append(f"extra: {_fmt(z.k.real)}{z.k.imag:+.12e}j x{z.multiplicity}")
    with open(os.path.join(out, "compare.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rl) + "\n")
