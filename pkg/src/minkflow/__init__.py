"""Curvature-flow solver for Minkowski-type Monge-Ampere equations on the sphere.

The package integrates a normalised anisotropic Gauss curvature flow of a
strictly convex body, written for the support function on S^1 or S^2, to its
stationary limit, while verifying the structural guarantees of the flow at
every step: conservation of the radial volume functional, monotonicity of
the entropy functional, and boundedness of curvature monitors.  An
independent damped-Newton solver of the stationary equation on S^1 is
provided for cross-validation.
"""

from .errors import ConfigError, GeometryError, HypothesisError
from .flow import (
    FlowConfig,
    FlowDiagnostics,
    FlowResult,
    StepOutcome,
    build_initial_support,
    rhs,
    run,
    step,
)
from .functionals import FunctionalSnapshot, j_phi, ma_residual, snapshot, theta, v_phi
from .geometry import (
    BodyState,
    UrReport,
    assemble_state,
    support_radial_extrema_check,
    pushforward_weight,
    support_from_radial_roundtrip,
)
from .oracle import (
    NewtonProblem,
    NewtonResult,
    ellipse_oracle,
    ellipse_support,
    jacobian_fd_check,
    newton_solve,
)
from .orlicz import (
    CapitalPhi,
    CaseIIReport,
    CaseIReport,
    DensitySpec,
    PhiSpec,
    capital_phi,
    check_case_i,
    check_case_ii,
)
from .sphere import (
    ScalarField,
    SphereGrid,
    SymMatrixField,
    VectorField,
    antipodal_mismatch,
    build_grid,
    covariant_hessian,
    gradient,
    quadrature,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "GeometryError",
    "HypothesisError",
    "FlowConfig",
    "FlowDiagnostics",
    "FlowResult",
    "StepOutcome",
    "build_initial_support",
    "rhs",
    "run",
    "step",
    "FunctionalSnapshot",
    "j_phi",
    "ma_residual",
    "snapshot",
    "theta",
    "v_phi",
    "BodyState",
    "UrReport",
    "assemble_state",
    "support_radial_extrema_check",
    "pushforward_weight",
    "support_from_radial_roundtrip",
    "NewtonProblem",
    "NewtonResult",
    "ellipse_oracle",
    "ellipse_support",
    "jacobian_fd_check",
    "newton_solve",
    "CapitalPhi",
    "CaseIIReport",
    "CaseIReport",
    "DensitySpec",
    "PhiSpec",
    "capital_phi",
    "check_case_i",
    "check_case_ii",
    "ScalarField",
    "SphereGrid",
    "SymMatrixField",
    "VectorField",
    "antipodal_mismatch",
    "build_grid",
    "covariant_hessian",
    "gradient",
    "quadrature",
]
