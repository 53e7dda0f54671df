"""Coupled displacement/temperature solver on the unit square.

The package discretizes a screened linear mechanical equation coupled
to a monotone thermal equation whose right-hand side is the mechanical
dissipation.  Beyond the solvers it ships the diagnostics that
characterize renormalized limits (truncation and level-set energies),
quantitative certificates (invariant-ball radius, positivity,
uniqueness probes), and audits that fit the constants of the underlying
a-priori estimates on concrete discrete solutions.
"""

from .audit import (
    AuditReport,
    log_h1_audit,
    lq_bound_audit,
    stability_report,
    uniqueness_chain_audit,
    w1p_bound_audit,
    w1p_from_truncation_audit,
)
from .coupling import (
    BallCertificate,
    CoupledSolution,
    EpsilonEntry,
    FixedPointTrace,
    ProbeResult,
    SmallDataReport,
    ball_radius,
    coupling_rhs,
    epsilon_scheme,
    fixed_point_map,
    fixed_point_solve,
    negative_part_inequality,
    positivity_check,
    random_smooth_field,
    small_data_certificate,
    truncation_energy_inequality,
    uniqueness_probe,
)
from .displacement import (
    EnergyAudit,
    displacement_load,
    solve_displacement,
    u_energy_audit,
)
from .errors import (
    AssumptionViolated,
    ConfigError,
    InvalidArgument,
    InvalidExponent,
    InvalidMesh,
    InvalidRange,
    InvalidTruncation,
    MeshMismatch,
    NotConverged,
    SolverFailure,
    ViscothermError,
)
from .grid import (
    CellVectorField,
    Mesh,
    ScalarField,
    build_mesh,
    gradient,
    integrate,
    lq_norm,
    read_field,
    truncate,
    truncate_field,
    w1p_seminorm,
    write_field,
)
from .model import (
    DiffusionMatrix,
    MonotoneFlux,
    Nonlinearity,
    ProblemData,
    extend_below,
    f_star,
    identity_diffusion,
    identity_flux,
    linear_nonlinearity,
    make_diffusion,
    make_flux,
    make_nonlinearity,
    power_nonlinearity,
    radial_flux,
    scalar_flux,
    scale_source,
    sinusoidal_diffusion,
    truncated_nonlinearity,
    validate_coercivity,
    validate_flux_bounds,
    validate_growth,
    validate_monotonicity,
    validate_uniqueness_hypotheses,
    zero_nonlinearity,
)
from .temperature import (
    RenormDiagnostics,
    diagnostics,
    identity_with_admissible_test,
    near_singular_source,
    plateau_cutoff,
    renorm_identity_residual,
    solve_temperature,
    truncated_data_stability,
    truncated_difference_gap,
)

__version__ = "0.1.0"
