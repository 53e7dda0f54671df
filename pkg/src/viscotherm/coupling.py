"""Coupled system driver: damped fixed-point iteration and certificates.

One update of the coupled system solves the mechanical equation at a
frozen temperature guess, assembles the dissipation right-hand side
(A grad u - f(theta_hat)) . grad u with the nonlinearity still frozen
at the guess, and solves the thermal equation.  The driver relaxes that
update with a fixed weight and stops when the L1 increment drops below
tolerance.  Convergence of the iteration is evidence, not a theorem:
when it fails the driver raises NotConverged carrying the full trace,
which is a statement about the scheme, never about solvability.

The residuals recorded in the trace are each subproblem's relative
residual with respect to its own frozen data (those are at solver
tolerance by construction); the fixed-point closure is what the
increment sequence measures, and the two scales are reported separately
on purpose.

The module also carries the quantitative certificates tied to the
coupled solve: the small-data ball radius, the scaled-source sweep, the
positivity check for nonlinearities vanishing below a threshold, the
multi-initialization uniqueness probe, and two energy inequalities with
empirically fitted constants.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .displacement import (
    EnergyAudit,
    diffusion_at_cells,
    nonlinearity_at_cells,
    solve_displacement,
)
from .displacement import weak_residual as displacement_residual
from .errors import InvalidArgument, NotConverged, SolverFailure
from .grid import (
    Mesh,
    ScalarField,
    cell_gradient_arrays,
    integrate,
    lq_norm,
    truncate,
    w1p_seminorm,
)
from .model import (
    ProblemData,
    scale_source,
    truncated_nonlinearity,
    validate_uniqueness_hypotheses,
)
from .operators import zero_boundary
from .temperature import (
    RenormDiagnostics,
    diagnostics,
    solve_temperature,
    truncation_energy,
)
from .temperature import weak_residual as temperature_residual

__all__ = [
    "FixedPointTrace",
    "CoupledSolution",
    "BallCertificate",
    "EpsilonEntry",
    "SweepEntry",
    "SmallDataReport",
    "ProbeRun",
    "ProbeResult",
    "coupling_rhs",
    "fixed_point_map",
    "fixed_point_solve",
    "epsilon_scheme",
    "ball_radius",
    "small_data_certificate",
    "positivity_check",
    "uniqueness_probe",
    "random_smooth_field",
    "truncation_energy_inequality",
    "negative_part_inequality",
]


@dataclass(frozen=True)
class FixedPointTrace:
    """Record of one damped fixed-point run."""

    iterations: int
    increments: tuple  # L1 increment per iteration
    ratios: tuple  # consecutive increment ratios, defined from the 2nd on
    residual_u: float  # mechanical residual at its frozen temperature
    residual_theta: float  # thermal residual at its frozen source
    converged: bool
    relaxation: float


@dataclass(frozen=True)
class CoupledSolution:
    """Converged pair with the norms and diagnostics tests consume."""

    u: ScalarField
    theta: ScalarField
    f_theta_l2: float  # L2 norm of f(theta) at the returned temperature
    rhs_l1: float  # L1 norm of the dissipation right-hand side
    trace: FixedPointTrace
    diagnostics: RenormDiagnostics


def _coupling_cells(problem: ProblemData, u: ScalarField, theta: ScalarField):
    """Cellwise dissipation (A grad u - f(theta)) . grad u."""
    gx, gy = cell_gradient_arrays(u.values, problem.mesh.h)
    a11, a12, a21, a22 = diffusion_at_cells(problem)
    fx, fy = nonlinearity_at_cells(problem, theta)
    qx = a11 * gx + a12 * gy - fx
    qy = a21 * gx + a22 * gy - fy
    return qx * gx + qy * gy


def _cells_to_nodes(mesh: Mesh, cells):
    """Project cell values to nodes by averaging adjacent cells."""
    n = mesh.nx
    acc = np.zeros((n + 1, n + 1))
    cnt = np.zeros((n + 1, n + 1))
    for si in (slice(None, -1), slice(1, None)):
        for sj in (slice(None, -1), slice(1, None)):
            acc[si, sj] += cells
            cnt[si, sj] += 1.0
    return acc / cnt


def coupling_rhs(problem: ProblemData, u: ScalarField,
                 theta: ScalarField) -> ScalarField:
    """Dissipation source for the thermal equation, as a nodal field.

    The integrand is evaluated per cell from the displacement gradient
    and the nonlinearity at cell-center temperatures, then projected to
    nodes by adjacent-cell averaging.
    """
    if u.mesh != problem.mesh or theta.mesh != problem.mesh:
        raise InvalidArgument("fields must live on the problem mesh")
    cells = _coupling_cells(problem, u, theta)
    return ScalarField(problem.mesh, _cells_to_nodes(problem.mesh, cells))


def _gamma(problem: ProblemData, theta_hat: ScalarField, solver_rtol: float):
    u = solve_displacement(problem, theta_hat, rtol=solver_rtol)
    source = coupling_rhs(problem, u, theta_hat)
    theta = solve_temperature(problem, source, rtol=solver_rtol)
    return theta, u, source


def fixed_point_map(
    problem: ProblemData,
    theta_hat: ScalarField,
    solver_rtol: float = 1e-10,
):
    """One undamped update: returns (theta, u) for the frozen guess."""
    theta, u, _ = _gamma(problem, theta_hat, solver_rtol)
    return theta, u


def fixed_point_solve(
    problem: ProblemData,
    relaxation: float = 0.5,
    tol: float = 1e-8,
    max_iters: int = 200,
    initial: Optional[ScalarField] = None,
    solver_rtol: float = 1e-10,
    diagnostic_heights: Optional[Sequence[float]] = None,
    diagnostic_bands: Optional[Sequence[float]] = None,
) -> CoupledSolution:
    """Damped fixed-point iteration from a zero (or given) start.

    Iterates theta <- (1-relaxation)*theta + relaxation*update(theta)
    until the L1 increment drops below ``tol``.  The returned pair is
    the last undamped update together with its displacement, so each
    field solves its own equation at solver tolerance; the remaining
    fixed-point closure is bounded by tol/relaxation in L1.

    Raises :class:`NotConverged` (with the trace attached) when the
    budget runs out, and :class:`InvalidArgument` for bad parameters.
    """
    if not 0.0 < relaxation <= 1.0:
        raise InvalidArgument(f"relaxation must lie in (0, 1], got {relaxation}")
    if not tol > 0.0:
        raise InvalidArgument(f"tolerance must be positive, got {tol}")
    if max_iters < 1:
        raise InvalidArgument(f"need at least one iteration, got {max_iters}")
    mesh = problem.mesh
    if initial is None:
        current = ScalarField.zeros(mesh)
    else:
        if initial.mesh != mesh:
            raise InvalidArgument("initial guess lives on a different mesh")
        values = initial.values.copy()
        zero_boundary(values)
        current = ScalarField(mesh, values)

    increments = []
    converged = False
    theta = u = source = None
    for _ in range(max_iters):
        theta, u, source = _gamma(problem, current, solver_rtol)
        blended = current + (theta - current) * relaxation
        inc = lq_norm(blended - current, 1.0)
        increments.append(inc)
        if inc < tol:
            converged = True
            break
        current = blended

    ratios = tuple(
        (increments[i + 1] / increments[i]) if increments[i] > 0.0 else 0.0
        for i in range(len(increments) - 1)
    )
    trace = FixedPointTrace(
        iterations=len(increments),
        increments=tuple(increments),
        ratios=ratios,
        residual_u=displacement_residual(problem, u, current),
        residual_theta=temperature_residual(problem, theta, source),
        converged=converged,
        relaxation=relaxation,
    )
    if not converged:
        raise NotConverged(
            f"no convergence in {max_iters} iterations "
            f"(last increment {increments[-1]:.3e}, tol {tol:.3e})",
            trace=trace,
        )
    returned_source = coupling_rhs(problem, u, theta)
    fx, fy = nonlinearity_at_cells(problem, theta)
    f_l2 = float(np.sqrt(integrate(mesh, fx * fx + fy * fy)))
    rhs_l1 = integrate(mesh, np.abs(_coupling_cells(problem, u, theta)))
    diag = diagnostics(
        problem, theta, returned_source,
        Ks=diagnostic_heights, ns=diagnostic_bands,
    )
    return CoupledSolution(
        u=u, theta=theta, f_theta_l2=f_l2, rhs_l1=rhs_l1,
        trace=trace, diagnostics=diag,
    )


# ---------------------------------------------------------------------------
# truncated-nonlinearity sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpsilonEntry:
    """One approximation level: nonlinearity truncated at height 1/epsilon."""

    epsilon: float
    solution: Optional[CoupledSolution]
    error: Optional[str]
    dist_theta_l1: Optional[float]
    dist_u_h1: Optional[float]


def _map_entries(worker: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1:
        return [worker(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, items))


def epsilon_scheme(
    problem: ProblemData,
    epsilons: Sequence[float],
    relaxation: float = 0.5,
    tol: float = 1e-8,
    max_iters: int = 200,
    solver_rtol: float = 1e-10,
    jobs: int = 1,
) -> list:
    """Coupled solves with the nonlinearity truncated at heights 1/eps.

    Epsilons must be strictly decreasing (so truncation weakens along
    the list).  Each entry reports its distances to the finest level:
    L1 for the temperature and the gradient L2 norm for the
    displacement.  A non-converged entry is recorded with its error and
    excluded from distances; the sweep itself never aborts.
    """
    eps = [float(e) for e in epsilons]
    if not eps or any(not e > 0.0 for e in eps):
        raise InvalidArgument("epsilons must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise InvalidArgument("epsilons must be strictly decreasing")

    def worker(e):
        modified = replace(problem, f=truncated_nonlinearity(problem.f, e))
        try:
            return fixed_point_solve(
                modified, relaxation=relaxation, tol=tol,
                max_iters=max_iters, solver_rtol=solver_rtol,
            ), None
        except NotConverged as exc:
            return None, str(exc)

    results = _map_entries(worker, eps, jobs)
    finest, _ = results[-1]
    entries = []
    for e, (solution, error) in zip(eps, results):
        if solution is not None and finest is not None:
            d_theta = lq_norm(solution.theta - finest.theta, 1.0)
            d_u = w1p_seminorm(solution.u - finest.u, 2.0)
        else:
            d_theta = d_u = None
        entries.append(EpsilonEntry(e, solution, error, d_theta, d_u))
    return entries


# ---------------------------------------------------------------------------
# small-data certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallCertificate:
    """Feasibility record for the invariant-ball radius.

    The radius must satisfy C*(eta + M^2 R^(2 alpha)) < R together with
    R < 2 C eta; ``lower`` and ``upper`` bound the feasible interval and
    R is its midpoint when nonempty.
    """

    eta: float
    C: float
    M: float
    alpha: float
    feasible: bool
    R: Optional[float]
    lower: Optional[float] = None
    upper: Optional[float] = None


def _bisect(fn, lo, hi, iters: int = 200) -> float:
    """Root of a sign change between lo and hi, by plain bisection."""
    flo = fn(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if (fmid > 0.0) == (flo > 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ball_radius(eta: float, C: float, M: float, alpha: float) -> BallCertificate:
    """Radius of a ball the coupled update maps into itself.

    Solves C*(eta + M^2 R^(2 alpha)) = R by bisection on both sides of
    the minimizer, intersects the strict-inequality interval with
    (0, 2 C eta), and returns the midpoint.  Infeasibility (no radius
    satisfies both conditions) is a value, not an error.
    """
    for name, value in (("eta", eta), ("C", C), ("M", M)):
        if not value > 0.0:
            raise InvalidArgument(f"{name} must be positive, got {value}")
    if not alpha > 0.5:
        raise InvalidArgument(f"alpha must exceed 1/2, got {alpha}")

    def phi(R):
        return C * (eta + M * M * R ** (2.0 * alpha)) - R

    exponent = 2.0 * alpha - 1.0
    R_star = (1.0 / (2.0 * alpha * C * M * M)) ** (1.0 / exponent)
    infeasible = BallCertificate(eta, C, M, alpha, feasible=False, R=None)
    if not phi(R_star) < 0.0:
        return infeasible
    lower = _bisect(phi, 0.0, R_star)
    hi = max(2.0 * R_star, 1.0)
    guard = 0
    while phi(hi) <= 0.0:
        hi *= 2.0
        guard += 1
        if guard > 4000:
            raise SolverFailure(
                "no upper root bracket found", residual=float("nan"), history=[]
            )
    upper_root = _bisect(phi, R_star, hi)
    upper = min(upper_root, 2.0 * C * eta)
    if not lower < upper:
        return infeasible
    R = 0.5 * (lower + upper)
    if not (phi(R) < 0.0 and R < 2.0 * C * eta):
        return infeasible
    return BallCertificate(eta, C, M, alpha, feasible=True, R=R,
                           lower=lower, upper=upper)


@dataclass(frozen=True)
class SweepEntry:
    """One scaled-source solve in the small-data sweep."""

    scale: float
    eta: float  # a0 + L2 norm of the scaled source
    u_norm: Optional[float]  # gradient L2 plus L2 norm
    theta_norm: Optional[float]  # L^(2 alpha) norm
    converged: bool
    error: Optional[str]


@dataclass(frozen=True)
class SmallDataReport:
    """Small-data behavior of the coupled solve.

    ``eta_actual`` is the data size a0 + ||g||; the sweep scales the
    source down and checks both solution norms shrink with it.
    ``fitted_C`` is the largest observed constant in
    theta_norm <= C*(||g||^2 + a0^2 + M^2 theta_norm^(2 alpha)), the
    self-referential form behind the invariant-ball condition, and
    ``ball`` applies it at the base scale with eta = ||g||^2 + a0^2.
    """

    eta_actual: float
    u_norm: float
    theta_norm: float
    sweep: tuple
    u_monotone: bool
    theta_monotone: bool
    vanishing_trend: bool
    fitted_C: float
    ball: Optional[BallCertificate]


def _solution_norms(problem: ProblemData, solution: CoupledSolution):
    u_norm = w1p_seminorm(solution.u, 2.0) + lq_norm(solution.u, 2.0)
    theta_norm = lq_norm(solution.theta, 2.0 * problem.f.alpha)
    return u_norm, theta_norm


def small_data_certificate(
    problem: ProblemData,
    solution: CoupledSolution,
    scales: Sequence[float] = (1.0, 0.5, 0.25, 0.125),
    relaxation: float = 0.5,
    tol: float = 1e-8,
    max_iters: int = 200,
    solver_rtol: float = 1e-10,
    jobs: int = 1,
) -> SmallDataReport:
    """Sweep scaled sources and certify the small-data behavior."""
    scale_list = sorted((float(s) for s in scales), reverse=True)
    if not scale_list or any(not s > 0.0 for s in scale_list):
        raise InvalidArgument("scales must be positive")
    a0 = problem.f.a0
    eta_actual = a0 + lq_norm(problem.g, 2.0)
    u_norm, theta_norm = _solution_norms(problem, solution)

    def worker(s):
        scaled = scale_source(problem, s)
        eta_s = a0 + lq_norm(scaled.g, 2.0)
        try:
            sol = fixed_point_solve(
                scaled, relaxation=relaxation, tol=tol,
                max_iters=max_iters, solver_rtol=solver_rtol,
            )
        except NotConverged as exc:
            return SweepEntry(s, eta_s, None, None, False, str(exc))
        un, tn = _solution_norms(scaled, sol)
        return SweepEntry(s, eta_s, un, tn, True, None)

    sweep = _map_entries(worker, scale_list, jobs)
    ok = [e for e in sweep if e.converged]

    def nonincreasing(values):
        return all(
            b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(values, values[1:])
        )

    u_mono = len(ok) == len(sweep) and nonincreasing([e.u_norm for e in ok])
    t_mono = len(ok) == len(sweep) and nonincreasing([e.theta_norm for e in ok])
    vanishing = False
    if len(ok) >= 2 and ok[0].u_norm > 0.0:
        shrink = math.sqrt(ok[-1].scale / ok[0].scale)
        vanishing = bool(
            ok[-1].u_norm <= ok[0].u_norm * shrink
            and ok[-1].theta_norm
            <= max(ok[0].theta_norm * shrink, 1e-300)
        )

    alpha = problem.f.alpha
    M = problem.f.M
    fitted = 0.0
    for entry in ok:
        g_l2 = entry.eta - a0
        denom = g_l2**2 + a0**2 + M * M * entry.theta_norm ** (2.0 * alpha)
        if denom > 0.0:
            fitted = max(fitted, entry.theta_norm / denom)
    eta_quad = (eta_actual - a0) ** 2 + a0**2
    ball = None
    if fitted > 0.0 and eta_quad > 0.0:
        ball = ball_radius(eta_quad, fitted, M, alpha)
    return SmallDataReport(
        eta_actual=eta_actual,
        u_norm=u_norm,
        theta_norm=theta_norm,
        sweep=tuple(sweep),
        u_monotone=u_mono,
        theta_monotone=t_mono,
        vanishing_trend=vanishing,
        fitted_C=fitted,
        ball=ball,
    )


def positivity_check(solution: CoupledSolution, r0: float):
    """Minimum nodal temperature and whether it stays above r0.

    Meaningful when the problem's nonlinearity vanishes at and below r0;
    the discrete comparison structure then keeps the temperature above
    that threshold up to solver tolerance.
    """
    min_value = solution.theta.min()
    return min_value, min_value >= r0 - 1e-8


# ---------------------------------------------------------------------------
# uniqueness probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeRun:
    """One initialization of the probe."""

    converged: bool
    solution: Optional[CoupledSolution]
    trace: Optional[FixedPointTrace]
    error: Optional[str]


@dataclass(frozen=True)
class ProbeResult:
    """Pairwise spread of fixed-point limits across initializations."""

    max_pairwise_l2: float
    max_pairwise_rel: float
    runs: tuple
    all_converged: bool


def uniqueness_probe(
    problem: ProblemData,
    initializations: Sequence[ScalarField],
    relaxation: float = 0.5,
    tol: float = 1e-8,
    max_iters: int = 200,
    solver_rtol: float = 1e-10,
    jobs: int = 1,
) -> ProbeResult:
    """Run the coupled solve from several starts and compare the limits.

    Requires the uniqueness hypotheses (strongly monotone flux,
    Lipschitz nonlinearity vanishing at zero) and a nonnegative source,
    the regime where the limit should not depend on the start.
    Non-converged runs are reported and excluded from the pairwise
    distances.
    """
    validate_uniqueness_hypotheses(problem)
    if float(np.min(problem.g.values)) < 0.0:
        raise InvalidArgument("the probe requires a nonnegative source g")
    if not initializations:
        raise InvalidArgument("need at least one initialization")

    def worker(init):
        try:
            sol = fixed_point_solve(
                problem, relaxation=relaxation, tol=tol, max_iters=max_iters,
                initial=init, solver_rtol=solver_rtol,
            )
            return ProbeRun(True, sol, sol.trace, None)
        except NotConverged as exc:
            return ProbeRun(False, None, exc.trace, str(exc))

    runs = _map_entries(worker, list(initializations), jobs)
    thetas = [r.solution.theta for r in runs if r.converged]
    max_abs = 0.0
    for i in range(len(thetas)):
        for j in range(i + 1, len(thetas)):
            max_abs = max(max_abs, lq_norm(thetas[i] - thetas[j], 2.0))
    scale = max((lq_norm(t, 2.0) for t in thetas), default=0.0)
    max_rel = max_abs / scale if scale > 0.0 else 0.0
    return ProbeResult(
        max_pairwise_l2=max_abs,
        max_pairwise_rel=max_rel,
        runs=tuple(runs),
        all_converged=all(r.converged for r in runs),
    )


def random_smooth_field(mesh: Mesh, seed: int, amplitude: float = 1.0) -> ScalarField:
    """Deterministic smooth field: a few random low-frequency sine modes."""
    rng = np.random.default_rng(int(seed))
    coeffs = rng.standard_normal((3, 3))
    X, Y = mesh.node_grid()
    values = np.zeros_like(X)
    for p in range(1, 4):
        for q in range(1, 4):
            values += (
                coeffs[p - 1, q - 1]
                * np.sin(p * np.pi * X)
                * np.sin(q * np.pi * Y)
                / (p * p + q * q)
            )
    values *= amplitude
    zero_boundary(values)
    return ScalarField(mesh, values)


# ---------------------------------------------------------------------------
# coupled energy inequalities
# ---------------------------------------------------------------------------


def _cell_mean(nodal):
    return 0.25 * (nodal[:-1, :-1] + nodal[1:, :-1] + nodal[:-1, 1:] + nodal[1:, 1:])


def _inequality_passed(lhs: float, rhs: float, cap: float) -> bool:
    """Pass rule shared by the energy inequalities.

    A finite cap asserts lhs <= cap * rhs (with floating-point slack);
    the default infinite cap means record-only, passing whenever both
    sides are finite.
    """
    if math.isinf(cap):
        return math.isfinite(lhs) and math.isfinite(rhs)
    return lhs <= cap * rhs + 1e-12 * max(1.0, lhs)


def truncation_energy_inequality(
    problem: ProblemData,
    u: ScalarField,
    theta: ScalarField,
    K: float,
    cap: float = np.inf,
) -> EnergyAudit:
    """Truncation-weighted energy inequality for a coupled pair.

    lhs = int u^2 + (1/K) int theta T_K(theta) + (1/K) int |D T_K|^2
          + int ((K - T_K(theta))/K) |Du|^2,
    rhs = int ((K - T_K(theta))/K) |f(theta)|^2 + int g^2.
    Products are formed nodally and averaged per cell; the weight
    multiplies cellwise gradient energies.  The fitted constant is
    lhs/rhs; ``cap`` turns the record into a pass/fail check.
    """
    if not K > 0.0:
        raise InvalidArgument(f"truncation height must be positive, got {K}")
    mesh = problem.mesh
    h = mesh.h
    tk = truncate(theta.values, K)
    weight_c = _cell_mean(K - tk) / K
    gux, guy = cell_gradient_arrays(u.values, h)
    lhs = (
        lq_norm(u, 2.0) ** 2
        + float(np.sum(_cell_mean(theta.values * tk))) * h * h / K
        + truncation_energy(theta, K)
        + float(np.sum(weight_c * (gux * gux + guy * guy))) * h * h
    )
    fx, fy = nonlinearity_at_cells(problem, theta)
    rhs = (
        float(np.sum(weight_c * (fx * fx + fy * fy))) * h * h
        + lq_norm(problem.g, 2.0) ** 2
    )
    constant = lhs / rhs if rhs > 0.0 else 0.0
    passed = _inequality_passed(lhs, rhs, cap)
    return EnergyAudit(lhs=lhs, rhs=rhs, constant=constant,
                       c_theory=cap, passed=passed)


def negative_part_inequality(
    problem: ProblemData,
    u: ScalarField,
    theta: ScalarField,
    cap: float = np.inf,
) -> EnergyAudit:
    """Limit form of the truncation inequality as the height vanishes.

    lhs = int u^2 + int |theta|; rhs = int |f(theta)|^2 over the cells
    with nonpositive center temperature, plus int g^2.  For a
    nonlinearity vanishing on the negative axis and a nonnegative
    source this bounds the temperature's L1 norm by the source energy.
    """
    theta_c = theta.cell_values()
    fx, fy = nonlinearity_at_cells(problem, theta)
    mask = theta_c <= 0.0
    f_sq = fx * fx + fy * fy
    h = problem.mesh.h
    lhs = lq_norm(u, 2.0) ** 2 + lq_norm(theta, 1.0)
    rhs = float(np.sum(f_sq[mask])) * h * h + lq_norm(problem.g, 2.0) ** 2
    constant = lhs / rhs if rhs > 0.0 else 0.0
    passed = _inequality_passed(lhs, rhs, cap)
    return EnergyAudit(lhs=lhs, rhs=rhs, constant=constant,
                       c_theory=cap, passed=passed)
