"""Linear mechanical solve: lambda*u - div(A(x) grad u - f(theta)) = g.

For a frozen temperature field the equation is linear and its discrete
operator (scaled lumped mass plus diffusion stiffness) is symmetric
positive definite, so a single preconditioned conjugate-gradient solve
suffices.  The nonlinearity enters only through the load: testing the
divergence term by parts puts f(theta) against the test gradient, so
the load is the lumped g-term plus the flux-scatter of f evaluated at
cell-center temperatures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MeshMismatch
from .grid import ScalarField, gradient, integrate, lq_norm
from .linsolve import pcg
from .model import ProblemData
from .operators import (
    linear_diagonal,
    linear_operator,
    lumped_load,
    scatter_flux,
    zero_boundary,
)

__all__ = [
    "EnergyAudit",
    "solve_displacement",
    "displacement_load",
    "weak_residual",
    "u_energy_audit",
]


@dataclass(frozen=True)
class EnergyAudit:
    """One energy inequality: lhs <= constant * rhs, constant <= c_theory."""

    lhs: float
    rhs: float
    constant: float
    c_theory: float
    passed: bool


def diffusion_at_cells(problem: ProblemData):
    """The four entry arrays of A sampled at cell centers, shape (n, n)."""
    Xc, Yc = problem.mesh.cell_grid()
    entries = problem.A.evaluate(Xc, Yc)
    return tuple(np.broadcast_to(np.asarray(e, float), Xc.shape) for e in entries)


def _check_mesh(problem: ProblemData, field: ScalarField, what: str) -> None:
    if field.mesh != problem.mesh:
        raise MeshMismatch(f"{what} lives on a different mesh than the problem")


def nonlinearity_at_cells(problem: ProblemData, temperature: ScalarField | None):
    """f evaluated at cell-center temperature values; zeros when absent."""
    n = problem.mesh.nx
    if temperature is None:
        z = np.zeros((n, n))
        return z, z.copy()
    _check_mesh(problem, temperature, "temperature")
    theta_c = temperature.cell_values()
    fx, fy = problem.f.evaluate(theta_c)
    return (
        np.broadcast_to(np.asarray(fx, float), theta_c.shape),
        np.broadcast_to(np.asarray(fy, float), theta_c.shape),
    )


def displacement_load(problem: ProblemData, temperature: ScalarField | None = None):
    """Assembled right-hand side: lumped g-load plus the f(theta) term."""
    h = problem.mesh.h
    b = lumped_load(problem.g.values, h)
    fx, fy = nonlinearity_at_cells(problem, temperature)
    b += scatter_flux(fx, fy, h)
    zero_boundary(b)
    return b


def _operator_parts(problem: ProblemData):
    a11, a12, a21, a22 = diffusion_at_cells(problem)
    h = problem.mesh.h
    apply_op = linear_operator(problem.lam, a11, a12, a21, a22, h)
    diag = linear_diagonal(problem.lam, a11, a12, a21, a22, problem.mesh.nx)
    return apply_op, diag


def solve_displacement(
    problem: ProblemData,
    temperature: ScalarField | None = None,
    rtol: float = 1e-10,
) -> ScalarField:
    """Solve the mechanical equation at a frozen temperature.

    Returns the nodal displacement with zero boundary values, satisfying
    the discrete weak form to relative residual ``rtol``.  Raises
    :class:`SolverFailure` if the conjugate-gradient solve stalls.
    """
    apply_op, diag = _operator_parts(problem)
    b = displacement_load(problem, temperature)
    x, _, _ = pcg(apply_op, b, diag, rtol=rtol)
    return ScalarField(problem.mesh, x)


def weak_residual(
    problem: ProblemData,
    u: ScalarField,
    temperature: ScalarField | None = None,
) -> float:
    """Relative residual of the discrete mechanical weak form at ``u``."""
    _check_mesh(problem, u, "displacement")
    apply_op, _ = _operator_parts(problem)
    b = displacement_load(problem, temperature)
    r = b - apply_op(u.values)
    scale = float(np.linalg.norm(b))
    return float(np.linalg.norm(r)) / max(scale, 1e-300)


def u_energy_audit(
    problem: ProblemData,
    u: ScalarField,
    temperature: ScalarField | None = None,
) -> EnergyAudit:
    """Check the gradient-energy bound of the mechanical solve.

    lhs is the Dirichlet energy of u; rhs is the squared data norm
    ``||g||^2 + ||f(theta)||^2``.  The reported constant lhs/rhs (zero
    when rhs vanishes) must not exceed the coercivity-based cap
    ``max(1/gamma^2, 2/gamma)`` with a 1 percent safety factor.
    """
    _check_mesh(problem, u, "displacement")
    grad = gradient(u)
    lhs = integrate(u.mesh, grad.magnitude_squared())
    fx, fy = nonlinearity_at_cells(problem, temperature)
    f_sq = integrate(u.mesh, fx * fx + fy * fy)
    rhs = lq_norm(problem.g, 2.0) ** 2 + f_sq
    constant = lhs / rhs if rhs > 0.0 else 0.0
    gamma = problem.A.gamma
    c_theory = max(1.0 / gamma**2, 2.0 / gamma) * 1.01
    passed = lhs <= c_theory * rhs + 1e-14
    return EnergyAudit(lhs=lhs, rhs=rhs, constant=constant,
                       c_theory=c_theory, passed=passed)
