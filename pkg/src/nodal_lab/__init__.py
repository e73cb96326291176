"""Numerical laboratory for elliptic equations degenerating on nodal sets.

The package studies weights |u|^a built from 2D harmonic (and A-harmonic)
solutions u: Almgren frequency and vanishing order, finite elements for
div(|u|^a A grad w) = 0, nodal-set geometry, hodograph straightening with
the induced |y|^a half-plane model, Liouville-type profile fits, and the
epsilon-regularization scheme with its correctors.
"""

from .errors import (
    ConfigError,
    DegenerateField,
    ExponentBelowThreshold,
    InverseMapFailure,
    IterationOverrun,
    LoopDefectTooLarge,
    MeshQualityError,
    NoConvergence,
    NodalInclusionViolated,
    NodalLabError,
    NoNodalIntersection,
    NonConstantDeterminant,
    OrderDeficit,
    OrderMismatch,
    QuadratureBreakdown,
    RadiusOutOfDomain,
    RankDeficientDictionary,
    SingularSystem,
    ZeroHeight,
)
from .fem import (
    WeightSpec,
    fe_l2_error,
    solve_degenerate,
    solve_elliptic,
    solve_halfplane_la,
    weak_residual,
)
from .fields import (
    CoefficientField,
    HarmonicPolynomial2D,
    Poly2D,
    SolutionClassSpec,
    SumField,
    a_harmonic_conjugate,
    catalog,
    constant_field,
    harmonic_conjugate,
    homogeneous_basis,
    identity_field,
    parse_polynomial,
)
from .frequency import (
    DoublingResult,
    FrequencyProfile,
    critical_radius,
    doubling_check,
    frequency,
    frequency_profile,
    vanishing_order,
)
from .hodograph import (
    HodographMap,
    LaHarmonicBasis,
    LiouvilleFit,
    build_map,
    la_harmonic_basis,
    liouville_fit,
    pushforward,
    straightened_matrix,
)
from .mesh import GridFunction, Mesh2D, disc_mesh, half_disc_mesh
from .nodal import (
    HookResult,
    NodalDecomposition,
    SingularPoint,
    XiDiagnostic,
    dist_to_nodal,
    extract_nodal_set,
    find_hook,
    xi_diagnostic,
)
from .regularity import (
    HolderReport,
    SweepTable,
    boundary_conditions_check,
    c1_alpha_norm,
    holder_seminorm,
    ratio,
    uniformity_sweep,
)
from .scheme import (
    ApproxPair,
    SchemeReport,
    approx_pair,
    calibrate_admissible,
    corrector,
    prescribed_blowup_solution,
    verify_scheme,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "NodalLabError",
    "ConfigError",
    "MeshQualityError",
    "LoopDefectTooLarge",
    "DegenerateField",
    "SingularSystem",
    "ExponentBelowThreshold",
    "QuadratureBreakdown",
    "NoNodalIntersection",
    "OrderMismatch",
    "RadiusOutOfDomain",
    "ZeroHeight",
    "NoConvergence",
    "NonConstantDeterminant",
    "InverseMapFailure",
    "RankDeficientDictionary",
    "OrderDeficit",
    "IterationOverrun",
    "NodalInclusionViolated",
    # meshes
    "Mesh2D",
    "GridFunction",
    "disc_mesh",
    "half_disc_mesh",
    # fields
    "HarmonicPolynomial2D",
    "Poly2D",
    "SumField",
    "CoefficientField",
    "SolutionClassSpec",
    "parse_polynomial",
    "homogeneous_basis",
    "harmonic_conjugate",
    "a_harmonic_conjugate",
    "catalog",
    "identity_field",
    "constant_field",
    # fem
    "WeightSpec",
    "solve_elliptic",
    "solve_degenerate",
    "solve_halfplane_la",
    "weak_residual",
    "fe_l2_error",
    # frequency
    "FrequencyProfile",
    "DoublingResult",
    "frequency_profile",
    "frequency",
    "vanishing_order",
    "doubling_check",
    "critical_radius",
    # nodal geometry
    "NodalDecomposition",
    "SingularPoint",
    "HookResult",
    "XiDiagnostic",
    "extract_nodal_set",
    "dist_to_nodal",
    "find_hook",
    "xi_diagnostic",
    # hodograph and Liouville
    "HodographMap",
    "LaHarmonicBasis",
    "LiouvilleFit",
    "build_map",
    "straightened_matrix",
    "pushforward",
    "la_harmonic_basis",
    "liouville_fit",
    # regularization scheme
    "ApproxPair",
    "SchemeReport",
    "approx_pair",
    "corrector",
    "prescribed_blowup_solution",
    "calibrate_admissible",
    "verify_scheme",
    # regularity diagnostics
    "HolderReport",
    "SweepTable",
    "ratio",
    "holder_seminorm",
    "c1_alpha_norm",
    "boundary_conditions_check",
    "uniformity_sweep",
]
