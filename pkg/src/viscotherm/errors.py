"""Exception types shared across the package."""

from __future__ import annotations


class ViscothermError(Exception):
    """Base class for every error raised by this package."""


class InvalidMesh(ViscothermError):
    """Mesh construction rejected (too coarse, non-square, bad count)."""


class InvalidExponent(ViscothermError):
    """Integrability exponent outside the supported range."""


class InvalidTruncation(ViscothermError):
    """Truncation height must be strictly positive."""


class InvalidRange(ViscothermError):
    """Empty or inverted level-set range."""


class InvalidArgument(ViscothermError):
    """Precondition on an argument violated."""


class MeshMismatch(ViscothermError):
    """Two fields built on different meshes were combined."""


class AssumptionViolated(ViscothermError):
    """A standing assumption of the model failed a validation check.

    ``assumption`` is one of the registry labels documented in
    :mod:`viscotherm.model`; ``offending`` optionally records the sample
    point that broke the bound.
    """

    def __init__(self, assumption: str, message: str, offending=None):
        self.assumption = assumption
        self.offending = offending
        detail = f" (at {offending!r})" if offending is not None else ""
        super().__init__(f"[{assumption}] {message}{detail}")


class SolverFailure(ViscothermError):
    """A linear or nonlinear solve did not reach its tolerance.

    Carries the last relative residual and the per-iteration residual
    history so the failure can be inspected.
    """

    def __init__(self, message: str, residual: float, history=None):
        self.residual = residual
        self.history = list(history) if history is not None else []
        super().__init__(f"{message} (last relative residual {residual:.3e})")


class NotConverged(ViscothermError):
    """The coupled fixed-point iteration ran out of iterations.

    This is a report, not a claim that no solution exists: the attached
    trace holds every increment observed so far.
    """

    def __init__(self, message: str, trace):
        self.trace = trace
        super().__init__(message)


class ConfigError(ViscothermError):
    """One or more scenario-file violations, each with its line number."""

    def __init__(self, violations):
        # violations: list of (lineno or None, message)
        self.violations = list(violations)
        lines = []
        for lineno, msg in self.violations:
            prefix = f"line {lineno}: " if lineno is not None else ""
            lines.append(prefix + msg)
        super().__init__("invalid scenario config:\n  " + "\n  ".join(lines))
