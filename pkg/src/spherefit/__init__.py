"""Norm-preserving enforcement of pointwise inequality constraints.

Post-process a finite-dimensional Hilbert-space approximation so that
families of linear inequality constraints (positivity, monotonicity,
convexity, bounds) hold everywhere, while the approximation's Hilbert norm
is preserved exactly: the coefficient vector moves on the sphere of its own
radius, never inward, by geodesic projections onto feasible caps.
"""

from .bases import (
    BasisSpec,
    Coefficients,
    HilbertSpec,
    OrthoBasis,
    QuadratureError,
    approximation_error,
    best_approximation,
    build_orthonormal_basis,
    gram_matrix,
    inner_product,
    integrate_adaptive,
    synthesize,
)
from .constraints import (
    ConstraintFamily,
    DeterminingReport,
    FixedHalfspace,
    RieszVector,
    SearchConfig,
    ViolationRecord,
    bounded_above,
    bounded_below,
    convexity,
    determining_check,
    is_feasible,
    monotonicity,
    most_violated,
    positivity,
    riesz_vector,
    sdist,
    violated_regions,
)
from .experiments import (
    CylinderResult,
    ExperimentArtifacts,
    ExperimentSpec,
    ResultRow,
    SweepRow,
    SweepTable,
    TestFunction,
    convergence_sweep,
    run_2d_cylinder,
    run_experiment,
    run_experiment_full,
    test_function,
)
from .geometry import (
    ParallelNormalError,
    SpherePoint,
    TangentVector,
    affine_hemisphere_projection,
    exp_map,
    geodesic_point,
    hemisphere_projection,
    intrinsic_distance,
    karcher_mean,
    log_map,
)
from .solvers import (
    IterationTrace,
    SolveResult,
    SolverConfig,
    relative_change,
    solve_average,
    solve_greedy,
    solve_hybrid,
    solve_linear_only,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # bases
    "HilbertSpec",
    "BasisSpec",
    "OrthoBasis",
    "Coefficients",
    "QuadratureError",
    "build_orthonormal_basis",
    "best_approximation",
    "approximation_error",
    "synthesize",
    "inner_product",
    "gram_matrix",
    "integrate_adaptive",
    # constraints
    "ConstraintFamily",
    "FixedHalfspace",
    "SearchConfig",
    "RieszVector",
    "ViolationRecord",
    "DeterminingReport",
    "positivity",
    "monotonicity",
    "convexity",
    "bounded_above",
    "bounded_below",
    "riesz_vector",
    "sdist",
    "most_violated",
    "violated_regions",
    "is_feasible",
    "determining_check",
    # geometry
    "SpherePoint",
    "TangentVector",
    "ParallelNormalError",
    "intrinsic_distance",
    "geodesic_point",
    "exp_map",
    "log_map",
    "hemisphere_projection",
    "affine_hemisphere_projection",
    "karcher_mean",
    # solvers
    "SolverConfig",
    "IterationTrace",
    "SolveResult",
    "solve_greedy",
    "solve_average",
    "solve_hybrid",
    "solve_linear_only",
    "relative_change",
    # experiments
    "TestFunction",
    "ExperimentSpec",
    "ExperimentArtifacts",
    "ResultRow",
    "SweepRow",
    "SweepTable",
    "CylinderResult",
    "test_function",
    "run_experiment",
    "run_experiment_full",
    "convergence_sweep",
    "run_2d_cylinder",
]
