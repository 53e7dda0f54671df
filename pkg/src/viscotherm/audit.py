"""Quantitative audits: fitted constants for the a-priori estimates.

Each audit measures both sides of one inequality from the analysis on a
concrete discrete solution and reports the fitted constant, i.e. the
smallest multiplier that makes the inequality hold for that data.  The
reports are plain records; passing means the declared bound (or a
structural property like finiteness or monotonicity) held, and the
fitted constant is the number a reader compares across meshes and data
scalings to judge whether the estimate is sharp, slack, or violated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coupling import coupling_rhs, fixed_point_solve
from .errors import InvalidArgument, MeshMismatch, NotConverged
from .grid import (
    ScalarField,
    cell_gradient_arrays,
    lq_norm,
    truncate,
    w1p_seminorm,
)
from .model import ProblemData, scale_source
from .temperature import (
    default_truncation_heights,
    solve_temperature,
    truncation_energy,
)

__all__ = [
    "AuditReport",
    "w1p_from_truncation_audit",
    "lq_bound_audit",
    "log_h1_audit",
    "w1p_bound_audit",
    "uniqueness_chain_audit",
    "stability_report",
]


@dataclass(frozen=True)
class AuditReport:
    """Measured sides of one inequality plus the fitted constant."""

    id: str
    lhs: float
    rhs: float
    fitted_constant: float
    passed: bool
    mesh_n: int
    notes: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "fitted_constant": self.fitted_constant,
            "pass": self.passed,
            "mesh_n": self.mesh_n,
            "notes": self.notes,
        }


def w1p_from_truncation_audit(
    theta: ScalarField, p: float, levels: int = 9
) -> AuditReport:
    """Gradient integrability recovered from truncation energies.

    Measures sup_K (1/K) int |D T_K theta|^2 over a dyadic ladder of
    heights anchored at the field's maximum, and fits the constant that
    turns the supremum into the W^{1,p} seminorm.  Anchoring keeps the
    fitted constant invariant under scaling of theta, which is the
    homogeneity the underlying estimate predicts.
    """
    if not 1.0 <= p < 2.0:
        raise InvalidArgument(f"exponent must lie in [1, 2), got {p}")
    if levels < 1:
        raise InvalidArgument(f"need at least one level, got {levels}")
    heights = default_truncation_heights(theta, levels=levels)
    energies = {K: truncation_energy(theta, K) for K in heights}
    sup_energy = max(energies.values())
    seminorm = w1p_seminorm(theta, p)
    fitted = seminorm / sup_energy if sup_energy > 0.0 else 0.0
    notes = "heights " + ", ".join(f"{K:.6g}" for K in heights)
    return AuditReport(
        id="w1p-from-truncation",
        lhs=seminorm,
        rhs=sup_energy,
        fitted_constant=fitted,
        passed=math.isfinite(fitted),
        mesh_n=theta.mesh.nx,
        notes=notes,
    )


def lq_bound_audit(
    theta: ScalarField, f, C1: float, q: float
) -> AuditReport:
    """Truncation-energy hypothesis behind the L^q temperature bound.

    The hypothesis is int |D T_K theta|^2 <= C1 * (int_{0 <= theta <= K}
    |f(theta)|^2 + 1) for every height K.  The audit measures the
    smallest admissible C1 over a fixed dyadic ladder reaching above the
    field's range and checks it against the declared C1; the L^q norm of
    the field is reported alongside as the quantity the hypothesis
    ultimately controls.
    """
    if not C1 > 0.0:
        raise InvalidArgument(f"declared constant must be positive, got {C1}")
    if not q >= 1.0:
        raise InvalidArgument(f"exponent must be at least 1, got {q}")
    top = theta.linf()
    J = max(3, math.ceil(math.log2(max(top, 1.0))) + 1)
    heights = [float(2**j) for j in range(J + 1)]
    theta_c = theta.cell_values()
    h = theta.mesh.h
    smallest = 0.0
    for K in heights:
        gx, gy = cell_gradient_arrays(truncate(theta.values, K), h)
        lhs_K = float(np.sum(gx * gx + gy * gy)) * h * h
        band = (theta_c >= 0.0) & (theta_c <= K)
        f_vals = f.norm(theta_c[band])
        rhs_K = float(np.sum(f_vals * f_vals)) * h * h + 1.0
        smallest = max(smallest, lhs_K / rhs_K)
    passed = smallest <= C1 * (1.0 + 1e-12)
    notes = (
        f"declared C1={C1:.6g}, smallest admissible C1={smallest:.6g}, "
        f"q={q:.6g}, heights up to {heights[-1]:.6g}"
    )
    return AuditReport(
        id="lq-bound-hypothesis",
        lhs=lq_norm(theta, q),
        rhs=1.0,
        fitted_constant=smallest,
        passed=passed,
        mesh_n=theta.mesh.nx,
        notes=notes,
    )


def log_h1_audit(theta: ScalarField) -> AuditReport:
    """Gradient energy damped by the solution size.

    Measures (int |D theta|^2 / (1 + |theta|)^2)^(1/2) with the damping
    evaluated at cell-center temperatures.  This quantity stays bounded
    for data that only controls renormalized energies, so the audit
    passes when it is finite and reports it as the fitted constant.
    """
    h = theta.mesh.h
    gx, gy = cell_gradient_arrays(theta.values, h)
    damping = 1.0 + np.abs(theta.cell_values())
    value = float(
        np.sqrt(np.sum((gx * gx + gy * gy) / (damping * damping)) * h * h)
    )
    return AuditReport(
        id="log-weighted-h1",
        lhs=value,
        rhs=1.0,
        fitted_constant=value,
        passed=math.isfinite(value),
        mesh_n=theta.mesh.nx,
        notes="damping 1/(1+|theta|) at cell centers",
    )


def w1p_bound_audit(
    problem: ProblemData,
    source: ScalarField,
    p: float,
    scalings: Sequence[float] = (1.0, 10.0, 100.0),
    rtol: float = 1e-10,
) -> AuditReport:
    """Gradient integrability against the L1 size of the thermal source.

    Solves the thermal equation for each scaled source and measures the
    ratio |theta|_{W^{1,p}} / ||source||_{L1}.  The estimate predicts
    the ratio stays within a mesh-independent band even as the source
    grows, so the audit passes when the largest ratio is at most three
    times the smallest.
    """
    if not 1.0 <= p < 2.0:
        raise InvalidArgument(f"exponent must lie in [1, 2), got {p}")
    scale_list = [float(s) for s in scalings]
    if not scale_list or any(not s > 0.0 for s in scale_list):
        raise InvalidArgument("scalings must be positive")
    ratios = []
    for s in scale_list:
        scaled = ScalarField(source.mesh, source.values * s)
        theta = solve_temperature(problem, scaled, rtol=rtol)
        mass = lq_norm(scaled, 1.0)
        ratios.append(w1p_seminorm(theta, p) / mass if mass > 0.0 else 0.0)
    top, bottom = max(ratios), min(ratios)
    passed = top <= 3.0 * bottom + 1e-12
    notes = "ratios " + ", ".join(
        f"{s:g}: {r:.6g}" for s, r in zip(scale_list, ratios)
    )
    return AuditReport(
        id="w1p-vs-source-mass",
        lhs=top,
        rhs=bottom,
        fitted_constant=(top / bottom) if bottom > 0.0 else 0.0,
        passed=passed,
        mesh_n=problem.mesh.nx,
        notes=notes,
    )


def uniqueness_chain_audit(
    problem: ProblemData,
    run1,
    run2,
    scales: Sequence[float] = (1.0, 0.25, 0.0625),
    relaxation: float = 0.5,
    tol: float = 1e-8,
    max_iters: int = 200,
    solver_rtol: float = 1e-10,
) -> list:
    """Contraction chain behind uniqueness, measured on two solutions.

    Fits the three links separately: how far apart the temperatures are
    relative to their dissipation sources, how far apart the sources are
    relative to the combined source mass times the temperature gap, and
    how fast the nonlinearity output shrinks with the data (measured as
    ||f(theta)|| / ||g||^(1/4) along a source scaling sweep).  The
    product of the three fitted constants is the contraction factor the
    chain certifies; below one, repeated application forces the two
    solutions together.
    """
    mesh = problem.mesh
    for run in (run1, run2):
        if run.theta.mesh != mesh or run.u.mesh != mesh:
            raise MeshMismatch(
                "audited solutions must live on the problem mesh"
            )
    scale_list = sorted((float(s) for s in scales), reverse=True)
    if not scale_list or any(not s > 0.0 for s in scale_list):
        raise InvalidArgument("scales must be positive")

    d_theta = lq_norm(run1.theta - run2.theta, 2.0)
    source1 = coupling_rhs(problem, run1.u, run1.theta)
    source2 = coupling_rhs(problem, run2.u, run2.theta)
    d_source = lq_norm(source1 - source2, 1.0)
    mass_sum = lq_norm(source1, 1.0) + lq_norm(source2, 1.0)

    c1 = d_theta / d_source if d_source > 0.0 else 0.0
    first = AuditReport(
        id="theta-gap-vs-source-gap",
        lhs=d_theta,
        rhs=d_source,
        fitted_constant=c1,
        passed=math.isfinite(c1),
        mesh_n=mesh.nx,
        notes=f"L2 temperature gap over L1 dissipation gap; gap={d_theta:.6g}",
    )
    denom = mass_sum * d_theta
    c2 = d_source / denom if denom > 0.0 else 0.0
    second = AuditReport(
        id="source-gap-vs-mass-times-theta-gap",
        lhs=d_source,
        rhs=denom,
        fitted_constant=c2,
        passed=math.isfinite(c2),
        mesh_n=mesh.nx,
        notes=f"combined dissipation mass {mass_sum:.6g}",
    )

    sweep = []
    failures = []
    for s in scale_list:
        scaled = scale_source(problem, s)
        try:
            sol = fixed_point_solve(
                scaled, relaxation=relaxation, tol=tol,
                max_iters=max_iters, solver_rtol=solver_rtol,
            )
        except NotConverged as exc:
            failures.append(f"scale {s:g}: {exc}")
            continue
        g_l2 = lq_norm(scaled.g, 2.0)
        if g_l2 > 0.0:
            sweep.append((s, sol.f_theta_l2 / g_l2**0.25))
    values = [c for _, c in sweep]
    monotone = all(
        b <= a * 1.05 + 1e-300 for a, b in zip(values, values[1:])
    )
    third_ok = (
        len(sweep) >= 2
        and not failures
        and monotone
        and all(math.isfinite(c) for c in values)
    )
    c3 = max(values) if values else 0.0
    notes3 = "sweep " + ", ".join(f"{s:g}: {c:.6g}" for s, c in sweep)
    if failures:
        notes3 += "; failures: " + "; ".join(failures)
    third = AuditReport(
        id="nonlinearity-vs-quarter-power-source",
        lhs=max(values) if values else 0.0,
        rhs=min(values) if values else 0.0,
        fitted_constant=c3,
        passed=third_ok,
        mesh_n=mesh.nx,
        notes=notes3,
    )

    product = c1 * c2 * c3
    fourth = AuditReport(
        id="contraction-chain-product",
        lhs=product,
        rhs=1.0,
        fitted_constant=product,
        passed=product < 1.0,
        mesh_n=mesh.nx,
        notes=(
            f"links {c1:.6g} * {c2:.6g} * {c3:.6g}; "
            "below one the chain contracts"
        ),
    )
    return [first, second, third, fourth]


def stability_report(
    audit_id: str,
    values_by_mesh: dict,
    rel_tol: float,
) -> AuditReport:
    """Mesh stability of one audited constant.

    Passes when every value lies within ``rel_tol`` (relative to the
    median) of the median across meshes; zero medians require all
    values to vanish.
    """
    if not values_by_mesh:
        raise InvalidArgument("need at least one mesh value")
    if not rel_tol > 0.0:
        raise InvalidArgument(f"relative tolerance must be positive, got {rel_tol}")
    meshes = sorted(values_by_mesh)
    values = [float(values_by_mesh[n]) for n in meshes]
    median = float(np.median(values))
    scale = abs(median)
    if scale > 0.0:
        passed = all(abs(v - median) <= rel_tol * scale for v in values)
    else:
        passed = all(v == 0.0 for v in values)
    notes = "values " + ", ".join(
        f"n={n}: {v:.6g}" for n, v in zip(meshes, values)
    )
    return AuditReport(
        id=f"{audit_id}-mesh-stability",
        lhs=max(values),
        rhs=min(values),
        fitted_constant=(max(values) - min(values)) / scale if scale else 0.0,
        passed=passed,
        mesh_n=meshes[-1],
        notes=notes,
    )
