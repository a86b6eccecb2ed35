"""Resonance counting for potential scattering on cylinders and half-cylinders.

The package locates scattering resonances as zeros of a small determinant
assembled on a chosen sheet of the square-root branch surface over the
transverse spectrum, counts them by the argument principle, and compares
fitted counting slopes against the sharp channel bounds.  An independent 1D
transfer-matrix oracle cross-checks axially separable potentials.
"""

# The pipeline factors thousands of small dense blocks per contour; threaded
# BLAS loses badly to spin-wait overhead at these sizes, so pin it down.
try:
    from threadpoolctl import threadpool_limits as _threadpool_limits

    _BLAS_LIMITER = _threadpool_limits(limits=1, user_api="blas")
except Exception:  # pragma: no cover - threadpoolctl is a scipy companion
    _BLAS_LIMITER = None

from .crosssec import (
    CrossSection,
    ModeBasis,
    TransverseMode,
    YProfile,
    build_basis,
    pair_integral,
)
from .engine import (
    BMatrix,
    DiscretizedOperator,
    EngineOptions,
    EvalContext,
    assemble_B,
    assemble_VR0,
    b_entry,
    bmatrix_fn,
    build_context,
    convergence_probe,
    det_fn,
    det_fn_scaled,
    free_kernel,
    solve_phi,
)
from .errors import FitRefused, PoleProximity, UnresolvedWinding
from .experiment import (
    PRESETS,
    CompareReport,
    ConfigError,
    RunConfig,
    compare_separable,
    load_config,
    oracle_run,
    probe_run,
    run_experiment,
)
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
    winding,
)
from .oracle import OracleProfile, oracle_1d, oracle_fn
from .potential import (
    Geometry,
    ModeCoupledPotential,
    PotentialSpec,
    PotentialTerm,
    SupportBox,
    XProfile,
    mode_couple,
    nondegeneracy_check,
    support_box,
)
from .quadrature import Grid, build_grid
from .sheets import (
    PhysicalPoint,
    SheetLabel,
    SheetPoint,
    TildeSet,
    flip_to_physical,
    lift,
    meets_physical,
    tilde_set,
)

__version__ = "0.1.0"
