"""Configuration-driven experiment runner.

A scenario is a flat INI file (one ``[section]`` per component, ``key =
value`` lines) selecting a problem, a command, and options.  The runner
executes the command, writes fields as CSV, plot-ready whitespace
tables, audit reports as JSON, and a JSON summary under the output
directory.  Every run is deterministic: identical configuration yields
bitwise-identical output files, so wall time goes to standard output
only and never into a file.

Exit codes: 0 on success, 2 when any requested solve reported
NotConverged (the outputs still describe what happened), 1 on
configuration or assumption errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .audit import (
    log_h1_audit,
    lq_bound_audit,
    uniqueness_chain_audit,
    w1p_bound_audit,
    w1p_from_truncation_audit,
)
from .coupling import (
    coupling_rhs,
    epsilon_scheme,
    fixed_point_solve,
    positivity_check,
    random_smooth_field,
    small_data_certificate,
    uniqueness_probe,
)
from .displacement import solve_displacement
from .errors import (
    ConfigError,
    InvalidArgument,
    NotConverged,
    ViscothermError,
)
from .grid import (
    Mesh,
    ScalarField,
    build_mesh,
    lq_norm,
    read_field,
    w1p_seminorm,
    write_field,
)
from .manufactured import sine_field, sine_load
from .model import (
    ProblemData,
    make_diffusion,
    make_flux,
    make_nonlinearity,
    validate_coercivity,
    validate_flux_bounds,
    validate_growth,
    validate_monotonicity,
)
from .temperature import (
    near_singular_source,
    solve_temperature,
)
from .temperature import weak_residual as temperature_residual

__all__ = [
    "Scenario",
    "parse_config",
    "build_source",
    "run_scenario",
    "bundled_scenarios",
    "main",
]

COMMANDS = (
    "solve",
    "epsilon-sweep",
    "small-data-sweep",
    "uniqueness-probe",
    "audit-all",
)

SEED_VARIABLE = "VISCOTHERM_SEED"


@dataclass(frozen=True)
class Scenario:
    """Validated run configuration with defaults filled in."""

    name: str = "unnamed"
    description: str = ""
    command: str = "solve"
    mesh: int = 32
    lam: float = 1.0
    mu: float = 1.0
    diffusion: str = "identity"
    flux: str = "identity"
    f: str = "zero"
    g: str = "manufactured:sine"
    relaxation: float = 0.5
    tol: float = 1e-8
    max_iters: int = 200
    solver_rtol: float = 1e-10
    epsilons: Optional[tuple] = None
    scales: Optional[tuple] = None
    scalings: tuple = (1.0, 10.0, 100.0)
    heights: Optional[tuple] = None
    bands: Optional[tuple] = None
    convergence_meshes: Optional[tuple] = None
    r0: Optional[float] = None
    p: float = 1.5
    q: float = 2.0
    c1: float = 10.0
    diag_source: Optional[str] = None


_SECTION_KEYS = {
    "scenario": {"name", "description", "command", "mesh"},
    "problem": {"lambda", "mu", "diffusion", "flux", "f", "g"},
    "solver": {"relaxation", "tol", "max_iters", "solver_rtol"},
    "options": {
        "epsilons",
        "scales",
        "scalings",
        "convergence_meshes",
        "r0",
        "p",
        "q",
        "c1",
    },
    "diagnostics": {"source", "heights", "bands"},
}


def _scan_ini(text: str):
    """Raw INI scan: {(section, key): (value, lineno)} plus violations."""
    entries = {}
    violations = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                violations.append((lineno, f"malformed section header: {line!r}"))
                section = None
                continue
            section = line[1:-1].strip()
            if section not in _SECTION_KEYS:
                known = ", ".join(sorted(_SECTION_KEYS))
                violations.append(
                    (lineno, f"unknown section [{section}] (known: {known})")
                )
                section = None
            continue
        if "=" not in line:
            violations.append((lineno, f"expected key = value, got {line!r}"))
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if section is None:
            violations.append((lineno, f"key {key!r} outside a valid section"))
            continue
        if key not in _SECTION_KEYS[section]:
            known = ", ".join(sorted(_SECTION_KEYS[section]))
            violations.append(
                (lineno, f"unknown key {key!r} in [{section}] (known: {known})")
            )
            continue
        entries[(section, key)] = (value, lineno)
    return entries, violations


def check_source_spec(spec: str) -> Optional[str]:
    """Structural validation of a source grammar string."""
    head, _, rest = spec.partition(":")
    if head == "sine":
        return None if not rest else 'source "sine" takes no arguments'
    if head == "manufactured":
        if rest != "sine":
            return f'unknown manufactured case "{rest}" (known: sine)'
        return None
    if head == "constant":
        try:
            float(rest)
        except ValueError:
            return f'constant source needs a number, got "{rest}"'
        return None
    if head == "scaled":
        base, _, factor = rest.rpartition(":")
        if not base:
            return 'scaled source needs the form "scaled:<base>:<factor>"'
        try:
            float(factor)
        except ValueError:
            return f'scaled source needs a numeric factor, got "{factor}"'
        return check_source_spec(base)
    if head == "nearsingular":
        seen = set()
        if rest:
            for item in rest.split(","):
                pkey, eq, pval = item.partition("=")
                pkey = pkey.strip()
                if not eq or pkey not in ("amplitude", "cap"):
                    return (
                        f'near-singular source parameter "{item.strip()}" '
                        "not understood (known: amplitude, cap)"
                    )
                try:
                    float(pval)
                except ValueError:
                    return f'near-singular parameter "{pkey}" needs a number'
                seen.add(pkey)
        if "cap" not in seen:
            return "near-singular source requires an explicit cap"
        return None
    if head == "file":
        if not rest:
            return "file source needs a path"
        return None
    return (
        f'unknown source spec "{spec}" (forms: sine, manufactured:sine, '
        "constant:<value>, scaled:<base>:<factor>, "
        "nearsingular:amplitude=<a>,cap=<c>, file:<path>)"
    )


def build_source(spec: str, mesh: Mesh) -> ScalarField:
    """Realize a source grammar string on a mesh."""
    problem = check_source_spec(spec)
    if problem is not None:
        raise InvalidArgument(problem)
    head, _, rest = spec.partition(":")
    if head == "sine" or head == "manufactured":
        return sine_field(mesh)
    if head == "constant":
        return ScalarField(
            mesh, np.full((mesh.nx + 1, mesh.ny + 1), float(rest))
        )
    if head == "scaled":
        base, _, factor = rest.rpartition(":")
        return build_source(base, mesh) * float(factor)
    if head == "nearsingular":
        params = {"amplitude": 1.0}
        for item in rest.split(","):
            pkey, _, pval = item.partition("=")
            params[pkey.strip()] = float(pval)
        return near_singular_source(
            mesh, cap=params["cap"], amplitude=params["amplitude"]
        )
    path = Path(rest)
    if not path.exists():
        raise InvalidArgument(f"source field file not found: {path}")
    field = read_field(path)
    if field.mesh != mesh:
        raise InvalidArgument(
            f"source field mesh {field.mesh.nx} does not match "
            f"the scenario mesh {mesh.nx}"
        )
    return field


def _parse_float(value, lineno, key, violations):
    try:
        return float(value)
    except ValueError:
        violations.append((lineno, f"{key} must be a number, got {value!r}"))
        return None


def _parse_int(value, lineno, key, violations):
    try:
        return int(value)
    except ValueError:
        violations.append((lineno, f"{key} must be an integer, got {value!r}"))
        return None


def _parse_float_list(value, lineno, key, violations):
    items = [part.strip() for part in value.split(",") if part.strip()]
    if not items:
        violations.append((lineno, f"{key} must be a nonempty list"))
        return None
    out = []
    for item in items:
        try:
            out.append(float(item))
        except ValueError:
            violations.append(
                (lineno, f"{key} entries must be numbers, got {item!r}")
            )
            return None
    return tuple(out)


def _parse_int_list(value, lineno, key, violations):
    floats = _parse_float_list(value, lineno, key, violations)
    if floats is None:
        return None
    if any(v != int(v) for v in floats):
        violations.append((lineno, f"{key} entries must be integers"))
        return None
    return tuple(int(v) for v in floats)


def parse_config(path) -> Scenario:
    """Parse and validate a scenario file.

    Reports every violation at once (with line numbers) rather than the
    first; a missing file raises FileNotFoundError.
    """
    text = Path(path).read_text()
    entries, violations = _scan_ini(text)
    fields = {}

    def take(section, key):
        return entries.pop((section, key), (None, None))

    value, line = take("scenario", "name")
    if value is not None:
        fields["name"] = value
    value, line = take("scenario", "description")
    if value is not None:
        fields["description"] = value
    value, line = take("scenario", "command")
    if value is not None:
        if value not in COMMANDS:
            violations.append(
                (line, f"unknown command {value!r} (known: {', '.join(COMMANDS)})")
            )
        else:
            fields["command"] = value
    value, line = take("scenario", "mesh")
    if value is not None:
        mesh = _parse_int(value, line, "mesh", violations)
        if mesh is not None:
            if mesh < 4:
                violations.append((line, f"mesh must be at least 4, got {mesh}"))
            else:
                fields["mesh"] = mesh

    value, line = take("problem", "lambda")
    if value is not None:
        lam = _parse_float(value, line, "lambda", violations)
        if lam is not None:
            if not lam > 0.0:
                violations.append(
                    (line, f"lambda must be positive (A5), got {lam}")
                )
            else:
                fields["lam"] = lam
    value, line = take("problem", "mu")
    if value is not None:
        mu = _parse_float(value, line, "mu", violations)
        if mu is not None:
            if not mu > 0.0:
                violations.append((line, f"mu must be positive (A5), got {mu}"))
            else:
                fields["mu"] = mu
    for key, maker, field_name in (
        ("diffusion", make_diffusion, "diffusion"),
        ("flux", make_flux, "flux"),
        ("f", make_nonlinearity, "f"),
    ):
        value, line = take("problem", key)
        if value is not None:
            try:
                maker(value)
            except InvalidArgument as exc:
                violations.append((line, str(exc)))
            else:
                fields[field_name] = value
    value, line = take("problem", "g")
    if value is not None:
        message = check_source_spec(value)
        if message is not None:
            violations.append((line, message))
        else:
            fields["g"] = value

    value, line = take("solver", "relaxation")
    if value is not None:
        rho = _parse_float(value, line, "relaxation", violations)
        if rho is not None:
            if not 0.0 < rho <= 1.0:
                violations.append(
                    (line, f"relaxation must lie in (0, 1], got {rho}")
                )
            else:
                fields["relaxation"] = rho
    value, line = take("solver", "tol")
    if value is not None:
        tol = _parse_float(value, line, "tol", violations)
        if tol is not None:
            if not tol > 0.0:
                violations.append((line, f"tol must be positive, got {tol}"))
            else:
                fields["tol"] = tol
    value, line = take("solver", "max_iters")
    if value is not None:
        iters = _parse_int(value, line, "max_iters", violations)
        if iters is not None:
            if iters < 1:
                violations.append(
                    (line, f"max_iters must be at least 1, got {iters}")
                )
            else:
                fields["max_iters"] = iters
    value, line = take("solver", "solver_rtol")
    if value is not None:
        rtol = _parse_float(value, line, "solver_rtol", violations)
        if rtol is not None:
            if not rtol > 0.0:
                violations.append(
                    (line, f"solver_rtol must be positive, got {rtol}")
                )
            else:
                fields["solver_rtol"] = rtol

    value, line = take("options", "epsilons")
    if value is not None:
        eps = _parse_float_list(value, line, "epsilons", violations)
        if eps is not None:
            if any(not e > 0.0 for e in eps):
                violations.append((line, "epsilons must be positive"))
            elif any(b >= a for a, b in zip(eps, eps[1:])):
                violations.append((line, "epsilons must be strictly decreasing"))
            else:
                fields["epsilons"] = eps
    for key, field_name in (("scales", "scales"), ("scalings", "scalings")):
        value, line = take("options", key)
        if value is not None:
            vals = _parse_float_list(value, line, key, violations)
            if vals is not None:
                if any(not v > 0.0 for v in vals):
                    violations.append((line, f"{key} must be positive"))
                else:
                    fields[field_name] = vals
    value, line = take("options", "convergence_meshes")
    if value is not None:
        meshes = _parse_int_list(value, line, "convergence_meshes", violations)
        if meshes is not None:
            if any(m < 4 for m in meshes):
                violations.append(
                    (line, "convergence meshes must be at least 4")
                )
            elif any(b <= a for a, b in zip(meshes, meshes[1:])):
                violations.append(
                    (line, "convergence meshes must be strictly increasing")
                )
            else:
                fields["convergence_meshes"] = meshes
    value, line = take("options", "r0")
    if value is not None:
        r0 = _parse_float(value, line, "r0", violations)
        if r0 is not None:
            if r0 > 0.0:
                violations.append(
                    (line, f"positivity threshold r0 must be <= 0, got {r0}")
                )
            else:
                fields["r0"] = r0
    value, line = take("options", "p")
    if value is not None:
        p = _parse_float(value, line, "p", violations)
        if p is not None:
            if not 1.0 <= p < 2.0:
                violations.append((line, f"p must lie in [1, 2), got {p}"))
            else:
                fields["p"] = p
    value, line = take("options", "q")
    if value is not None:
        q = _parse_float(value, line, "q", violations)
        if q is not None:
            if not q >= 1.0:
                violations.append((line, f"q must be at least 1, got {q}"))
            else:
                fields["q"] = q
    value, line = take("options", "c1")
    if value is not None:
        c1 = _parse_float(value, line, "c1", violations)
        if c1 is not None:
            if not c1 > 0.0:
                violations.append((line, f"c1 must be positive, got {c1}"))
            else:
                fields["c1"] = c1

    value, line = take("diagnostics", "source")
    if value is not None:
        message = check_source_spec(value)
        if message is not None:
            violations.append((line, message))
        else:
            fields["diag_source"] = value
    for key, field_name in (("heights", "heights"), ("bands", "bands")):
        value, line = take("diagnostics", key)
        if value is not None:
            vals = _parse_float_list(value, line, key, violations)
            if vals is not None:
                if any(not v > 0.0 for v in vals):
                    violations.append((line, f"{key} must be positive"))
                else:
                    fields[field_name] = vals

    if violations:
        raise ConfigError(sorted(violations, key=lambda v: (v[0] or 0, v[1])))
    return Scenario(**fields)


def make_problem(scenario: Scenario, mesh: Optional[Mesh] = None) -> ProblemData:
    """Realize the scenario's problem data on its (or a given) mesh."""
    if mesh is None:
        mesh = build_mesh(scenario.mesh)
    return ProblemData(
        lam=scenario.lam,
        mu=scenario.mu,
        g=build_source(scenario.g, mesh),
        A=make_diffusion(scenario.diffusion),
        flux=make_flux(scenario.flux),
        f=make_nonlinearity(scenario.f),
    )


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_table(path: Path, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append("  ".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _json_default(value):
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _write_summary(out_dir: Path, summary: dict) -> None:
    text = json.dumps(summary, sort_keys=True, indent=2, default=_json_default)
    (out_dir / "summary.json").write_text(text + "\n")


def _scenario_echo(scenario: Scenario) -> dict:
    return {
        "name": scenario.name,
        "command": scenario.command,
        "mesh": scenario.mesh,
        "lambda": scenario.lam,
        "mu": scenario.mu,
        "diffusion": scenario.diffusion,
        "flux": scenario.flux,
        "f": scenario.f,
        "g": scenario.g,
        "relaxation": scenario.relaxation,
        "tol": scenario.tol,
        "max_iters": scenario.max_iters,
    }


def _solution_summary(problem: ProblemData, solution) -> dict:
    return {
        "u_h1": w1p_seminorm(solution.u, 2.0) + lq_norm(solution.u, 2.0),
        "theta_l1": lq_norm(solution.theta, 1.0),
        "theta_l2alpha": lq_norm(solution.theta, 2.0 * problem.f.alpha),
        "f_theta_l2": solution.f_theta_l2,
        "rhs_l1": solution.rhs_l1,
    }


def _write_solution_files(out_dir: Path, solution) -> dict:
    write_field(out_dir / "u.csv", solution.u)
    write_field(out_dir / "theta.csv", solution.theta)
    trace = solution.trace
    _write_table(
        out_dir / "trace.txt",
        "# k  increment",
        [(k + 1, inc) for k, inc in enumerate(trace.increments)],
    )
    diag = solution.diagnostics
    _write_table(
        out_dir / "truncation_energy.txt",
        "# K  truncation_energy",
        sorted(diag.truncation_energies.items()),
    )
    _write_table(
        out_dir / "level_energy.txt",
        "# n  level_energy",
        sorted(diag.level_energies.items()),
    )
    _write_table(
        out_dir / "renorm_residuals.txt",
        "# n  renorm_residual",
        sorted(diag.renorm_residuals.items()),
    )
    return {
        "u": "u.csv",
        "theta": "theta.csv",
        "trace": "trace.txt",
        "truncation_energy": "truncation_energy.txt",
        "level_energy": "level_energy.txt",
        "renorm_residuals": "renorm_residuals.txt",
    }


def _write_audits(out_dir: Path, reports) -> None:
    payload = [report.to_json() for report in reports]
    text = json.dumps(payload, sort_keys=True, indent=2, default=_json_default)
    (out_dir / "audits.json").write_text(text + "\n")


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------


def _run_convergence_study(scenario: Scenario, out_dir: Path) -> tuple:
    rows = []
    u_errors = []
    theta_errors = []
    for n in scenario.convergence_meshes:
        mesh = build_mesh(n)
        problem = make_problem(scenario, mesh)
        exact = sine_field(mesh)
        mechanical = replace(problem, g=sine_load(mesh, scenario.lam))
        u = solve_displacement(mechanical, rtol=scenario.solver_rtol)
        theta = solve_temperature(
            problem, sine_load(mesh, scenario.mu), rtol=scenario.solver_rtol
        )
        u_err = lq_norm(u - exact, 2.0)
        theta_err = lq_norm(theta - exact, 2.0)
        rows.append((mesh.h, u_err, theta_err))
        u_errors.append(u_err)
        theta_errors.append(theta_err)
    _write_table(out_dir / "convergence.txt", "# h  u_error  theta_error", rows)

    def orders(errors):
        out = []
        meshes = scenario.convergence_meshes
        for i in range(len(errors) - 1):
            ratio = math.log(meshes[i + 1] / meshes[i])
            if errors[i + 1] > 0.0 and errors[i] > 0.0:
                out.append(math.log(errors[i] / errors[i + 1]) / ratio)
            else:
                out.append(None)
        return out

    summary = {
        "scenario": _scenario_echo(scenario),
        "mode": "convergence-study",
        "orders": {"u": orders(u_errors), "theta": orders(theta_errors)},
        "files": {"convergence": "convergence.txt"},
    }
    return summary, 0


def _run_thermal_diagnostics(scenario: Scenario, out_dir: Path) -> tuple:
    from .temperature import diagnostics as run_diagnostics

    mesh = build_mesh(scenario.mesh)
    problem = make_problem(scenario, mesh)
    source = build_source(scenario.diag_source, mesh)
    theta = solve_temperature(problem, source, rtol=scenario.solver_rtol)
    diag = run_diagnostics(
        problem, theta, source, Ks=scenario.heights, ns=scenario.bands
    )
    write_field(out_dir / "theta.csv", theta)
    _write_table(
        out_dir / "truncation_energy.txt",
        "# K  truncation_energy",
        sorted(diag.truncation_energies.items()),
    )
    _write_table(
        out_dir / "level_energy.txt",
        "# n  level_energy",
        sorted(diag.level_energies.items()),
    )
    _write_table(
        out_dir / "renorm_residuals.txt",
        "# n  renorm_residual",
        sorted(diag.renorm_residuals.items()),
    )
    summary = {
        "scenario": _scenario_echo(scenario),
        "mode": "thermal-diagnostics",
        "source": scenario.diag_source,
        "norms": {
            "theta_l1": lq_norm(theta, 1.0),
            "theta_linf": theta.linf(),
            "source_l1": lq_norm(source, 1.0),
        },
        "residual": temperature_residual(problem, theta, source),
        "files": {
            "theta": "theta.csv",
            "truncation_energy": "truncation_energy.txt",
            "level_energy": "level_energy.txt",
            "renorm_residuals": "renorm_residuals.txt",
        },
    }
    return summary, 0


def _run_solve(scenario: Scenario, out_dir: Path, jobs: int) -> tuple:
    if scenario.convergence_meshes:
        return _run_convergence_study(scenario, out_dir)
    if scenario.diag_source is not None:
        return _run_thermal_diagnostics(scenario, out_dir)
    problem = make_problem(scenario)
    code = 0
    try:
        solution = fixed_point_solve(
            problem,
            relaxation=scenario.relaxation,
            tol=scenario.tol,
            max_iters=scenario.max_iters,
            solver_rtol=scenario.solver_rtol,
            diagnostic_heights=scenario.heights,
            diagnostic_bands=scenario.bands,
        )
    except NotConverged as exc:
        trace = exc.trace
        _write_table(
            out_dir / "trace.txt",
            "# k  increment",
            [(k + 1, inc) for k, inc in enumerate(trace.increments)],
        )
        summary = {
            "scenario": _scenario_echo(scenario),
            "mode": "coupled-solve",
            "converged": False,
            "error": str(exc),
            "iterations": trace.iterations,
            "files": {"trace": "trace.txt"},
        }
        return summary, 2
    files = _write_solution_files(out_dir, solution)
    summary = {
        "scenario": _scenario_echo(scenario),
        "mode": "coupled-solve",
        "converged": True,
        "iterations": solution.trace.iterations,
        "increment_ratios": list(solution.trace.ratios),
        "residual_u": solution.trace.residual_u,
        "residual_theta": solution.trace.residual_theta,
        "norms": _solution_summary(problem, solution),
        "files": files,
    }
    if scenario.r0 is not None:
        minimum, passed = positivity_check(solution, scenario.r0)
        summary["positivity"] = {
            "r0": scenario.r0,
            "min_theta": minimum,
            "passed": passed,
        }
    return summary, code


def _run_epsilon_sweep(scenario: Scenario, out_dir: Path, jobs: int) -> tuple:
    problem = make_problem(scenario)
    epsilons = scenario.epsilons or (1.0, 0.5, 0.25, 0.125)
    entries = epsilon_scheme(
        problem,
        epsilons,
        relaxation=scenario.relaxation,
        tol=scenario.tol,
        max_iters=scenario.max_iters,
        solver_rtol=scenario.solver_rtol,
        jobs=jobs,
    )
    rows = []
    for entry in entries:
        d_theta = entry.dist_theta_l1 if entry.dist_theta_l1 is not None else float("nan")
        d_u = entry.dist_u_h1 if entry.dist_u_h1 is not None else float("nan")
        rows.append((entry.epsilon, d_theta, d_u))
    _write_table(
        out_dir / "epsilon.txt", "# epsilon  dist_theta_L1  dist_u_H1", rows
    )
    files = {"epsilon": "epsilon.txt"}
    finest = entries[-1].solution
    norms = None
    if finest is not None:
        files.update(_write_solution_files(out_dir, finest))
        norms = _solution_summary(problem, finest)
    failures = [e for e in entries if e.error is not None]
    summary = {
        "scenario": _scenario_echo(scenario),
        "mode": "epsilon-sweep",
        "entries": [
            {
                "epsilon": e.epsilon,
                "converged": e.error is None,
                "iterations": (
                    e.solution.trace.iterations if e.solution is not None else None
                ),
                "error": e.error,
            }
            for e in entries
        ],
        "norms": norms,
        "files": files,
    }
    return summary, 2 if failures else 0


def _run_small_data(scenario: Scenario, out_dir: Path, jobs: int) -> tuple:
    problem = make_problem(scenario)
    scales = scenario.scales or (1.0, 0.5, 0.25, 0.125)
    code = 0
    try:
        solution = fixed_point_solve(
            problem,
            relaxation=scenario.relaxation,
            tol=scenario.tol,
            max_iters=scenario.max_iters,
            solver_rtol=scenario.solver_rtol,
        )
    except NotConverged as exc:
        summary = {
            "scenario": _scenario_echo(scenario),
            "mode": "small-data-sweep",
            "converged": False,
            "error": str(exc),
        }
        return summary, 2
    report = small_data_certificate(
        problem,
        solution,
        scales=scales,
        relaxation=scenario.relaxation,
        tol=scenario.tol,
        max_iters=scenario.max_iters,
        solver_rtol=scenario.solver_rtol,
        jobs=jobs,
    )
    rows = []
    for entry in report.sweep:
        rows.append(
            (
                entry.eta,
                entry.u_norm if entry.u_norm is not None else float("nan"),
                entry.theta_norm if entry.theta_norm is not None else float("nan"),
            )
        )
    _write_table(out_dir / "small_data.txt", "# eta  u_norm  theta_norm", rows)
    files = _write_solution_files(out_dir, solution)
    files["small_data"] = "small_data.txt"
    ball = None
    if report.ball is not None:
        ball = {
            "eta": report.ball.eta,
            "C": report.ball.C,
            "M": report.ball.M,
            "alpha": report.ball.alpha,
            "feasible": report.ball.feasible,
            "R": report.ball.R,
        }
    failed = [e for e in report.sweep if not e.converged]
    if failed:
        code = 2
    summary = {
        "scenario": _scenario_echo(scenario),
        "mode": "small-data-sweep",
        "converged": True,
        "eta_actual": report.eta_actual,
        "norms": _solution_summary(problem, solution),
        "u_monotone": report.u_monotone,
        "theta_monotone": report.theta_monotone,
        "vanishing_trend": report.vanishing_trend,
        "fitted_C": report.fitted_C,
        "ball": ball,
        "sweep_converged": [e.converged for e in report.sweep],
        "files": files,
    }
    return summary, code


def _probe_initializations(mesh: Mesh, seed: int) -> list:
    flat = np.ones((mesh.nx + 1, mesh.ny + 1))
    return [
        ScalarField.zeros(mesh),
        ScalarField(mesh, flat.copy()),
        ScalarField(mesh, -flat.copy()),
        random_smooth_field(mesh, seed),
        ScalarField(mesh, 10.0 * flat),
    ]


def _run_probe(scenario: Scenario, out_dir: Path, jobs: int) -> tuple:
    problem = make_problem(scenario)
    seed = int(os.environ.get(SEED_VARIABLE, "42"))
    inits = _probe_initializations(problem.mesh, seed)
    result = uniqueness_probe(
        problem,
        inits,
        relaxation=scenario.relaxation,
        tol=scenario.tol,
        max_iters=scenario.max_iters,
        solver_rtol=scenario.solver_rtol,
        jobs=jobs,
    )
    rows = []
    for index, run in enumerate(result.runs):
        iters = run.trace.iterations if run.trace is not None else 0
        theta_l2 = (
            lq_norm(run.solution.theta, 2.0) if run.solution is not None else float("nan")
        )
        rows.append((index, iters, theta_l2))
    _write_table(out_dir / "probe.txt", "# init  iterations  theta_l2", rows)
    files = {"probe": "probe.txt"}
    converged_runs = [r for r in result.runs if r.converged]
    chain_reports = []
    if len(converged_runs) >= 2:
        chain_reports = uniqueness_chain_audit(
            problem,
            converged_runs[0].solution,
            converged_runs[1].solution,
            scales=scenario.scales or (1.0, 0.25, 0.0625),
            relaxation=scenario.relaxation,
            tol=scenario.tol,
            max_iters=scenario.max_iters,
            solver_rtol=scenario.solver_rtol,
        )
        _write_audits(out_dir, chain_reports)
        files["audits"] = "audits.json"
    if converged_runs:
        files.update(_write_solution_files(out_dir, converged_runs[0].solution))
    product = next(
        (r.fitted_constant for r in chain_reports if r.id == "contraction-chain-product"),
        None,
    )
    summary = {
        "scenario": _scenario_echo(scenario),
        "mode": "uniqueness-probe",
        "seed": seed,
        "max_pairwise_l2": result.max_pairwise_l2,
        "max_pairwise_rel": result.max_pairwise_rel,
        "all_converged": result.all_converged,
        "runs": [
            {"converged": r.converged, "error": r.error} for r in result.runs
        ],
        "chain_product": product,
        "chain_pass": [r.passed for r in chain_reports] or None,
        "files": files,
    }
    return summary, 0 if result.all_converged else 2


def _run_audit_all(scenario: Scenario, out_dir: Path, jobs: int) -> tuple:
    problem = make_problem(scenario)
    code = 0
    try:
        base = fixed_point_solve(
            problem,
            relaxation=scenario.relaxation,
            tol=scenario.tol,
            max_iters=scenario.max_iters,
            solver_rtol=scenario.solver_rtol,
        )
        flat = ScalarField(
            problem.mesh, np.ones((problem.mesh.nx + 1, problem.mesh.ny + 1))
        )
        second = fixed_point_solve(
            problem,
            relaxation=scenario.relaxation,
            tol=scenario.tol,
            max_iters=scenario.max_iters,
            initial=flat,
            solver_rtol=scenario.solver_rtol,
        )
    except NotConverged as exc:
        summary = {
            "scenario": _scenario_echo(scenario),
            "mode": "audit-all",
            "converged": False,
            "error": str(exc),
        }
        return summary, 2
    reports = [
        w1p_from_truncation_audit(base.theta, scenario.p),
        lq_bound_audit(base.theta, problem.f, scenario.c1, scenario.q),
        log_h1_audit(base.theta),
        w1p_bound_audit(
            problem,
            coupling_rhs(problem, base.u, base.theta),
            scenario.p,
            scalings=scenario.scalings,
            rtol=scenario.solver_rtol,
        ),
    ]
    reports.extend(
        uniqueness_chain_audit(
            problem,
            base,
            second,
            scales=scenario.scales or (1.0, 0.25, 0.0625),
            relaxation=scenario.relaxation,
            tol=scenario.tol,
            max_iters=scenario.max_iters,
            solver_rtol=scenario.solver_rtol,
        )
    )
    _write_audits(out_dir, reports)
    files = _write_solution_files(out_dir, base)
    files["audits"] = "audits.json"
    summary = {
        "scenario": _scenario_echo(scenario),
        "mode": "audit-all",
        "converged": True,
        "norms": _solution_summary(problem, base),
        "audit_pass": {report.id: report.passed for report in reports},
        "files": files,
    }
    return summary, code


def run_scenario(
    scenario: Scenario,
    out_dir,
    mesh_override: Optional[int] = None,
    jobs: int = 1,
) -> tuple:
    """Execute a scenario and write its outputs.

    Returns (summary dict, exit code).  The summary is also written to
    ``summary.json`` under the output directory.
    """
    if mesh_override is not None:
        scenario = replace(scenario, mesh=mesh_override)
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    runner = {
        "solve": _run_solve,
        "epsilon-sweep": _run_epsilon_sweep,
        "small-data-sweep": _run_small_data,
        "uniqueness-probe": _run_probe,
        "audit-all": _run_audit_all,
    }[scenario.command]
    summary, code = runner(scenario, out_path, jobs)
    _write_summary(out_path, summary)
    return summary, code


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def bundled_scenarios() -> list:
    """(name, path) pairs for the scenario files shipped with the package."""
    base = resources.files("viscotherm") / "scenarios"
    out = []
    for entry in sorted(base.iterdir(), key=lambda item: item.name):
        if entry.name.endswith(".ini"):
            out.append((entry.name[: -len(".ini")], str(entry)))
    return out


def _cmd_run(args) -> int:
    try:
        scenario = parse_config(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    started = time.perf_counter()
    try:
        summary, code = run_scenario(
            scenario, args.out, mesh_override=args.mesh, jobs=args.jobs
        )
    except ViscothermError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - started
    mode = summary.get("mode", scenario.command)
    print(f"{scenario.name}: {mode} finished in {elapsed:.2f} s "
          f"(outputs in {args.out})")
    return code


def _cmd_validate(args) -> int:
    try:
        scenario = parse_config(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        diffusion = make_diffusion(scenario.diffusion)
        flux = make_flux(scenario.flux)
        nonlinearity = make_nonlinearity(scenario.f)
        validate_coercivity(diffusion)
        validate_monotonicity(flux)
        validate_flux_bounds(flux)
        validate_growth(nonlinearity, 64.0)
    except ViscothermError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    print(
        f"{scenario.name}: coercivity, monotonicity, flux bounds, and "
        "growth assumptions hold"
    )
    return 0


def _cmd_catalog(args) -> int:
    for name, path in bundled_scenarios():
        scenario = parse_config(path)
        description = scenario.description or "(no description)"
        print(f"{name} [{scenario.command}]: {description}")
        print(f"    {path}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="viscotherm",
        description=(
            "Coupled displacement/temperature solver with renormalized "
            "diagnostics and inequality audits."
        ),
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    run_parser = sub.add_parser("run", help="execute a scenario")
    run_parser.add_argument("--config", required=True)
    run_parser.add_argument("--out", required=True)
    run_parser.add_argument("--mesh", type=int, default=None)
    run_parser.add_argument("--jobs", type=int, default=1)
    run_parser.set_defaults(func=_cmd_run)
    validate_parser = sub.add_parser(
        "validate", help="check a scenario's coefficient assumptions"
    )
    validate_parser.add_argument("--config", required=True)
    validate_parser.set_defaults(func=_cmd_validate)
    catalog_parser = sub.add_parser(
        "catalog", help="list the bundled scenarios"
    )
    catalog_parser.set_defaults(func=_cmd_catalog)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
