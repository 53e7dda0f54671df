"""Problem data: coefficient families and assumption validators.

The coupled system solved by this package is

    lambda * u - div( A(x) grad u - f(theta) ) = g
    mu * theta - div( a(x, grad theta) )       = (A(x) grad u - f(theta)) . grad u

on the unit square with homogeneous Dirichlet conditions.  Its
well-posedness rests on a small registry of standing assumptions, named
here so validators and error messages can cite them:

    A1  the diffusion matrix A is measurable, bounded, and uniformly
        coercive: A(x) xi . xi >= gamma |xi|^2 with gamma > 0;
    A2  the thermal flux a(x, xi) is coercive: a(x, xi) . xi >= delta |xi|^2;
    A3  the thermal flux is monotone:
        (a(x, xi) - a(x, xi')) . (xi - xi') >= 0;
    A4  the thermal flux has linear growth: |a(x, xi)| <= beta (b(x) + |xi|);
    A5  the zero-order coefficients are strictly positive: lambda > 0, mu > 0;
    A6  the coupling nonlinearity f is continuous;
    A7  the mechanical source g is square integrable.

Validators sample these bounds on deterministic grids; they can refute
an assumption, never prove it.  Each coefficient family declares the
constants it promises (gamma, delta, beta, growth exponents, Lipschitz
constants) so audits can compare fitted constants against declared ones.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import AssumptionViolated, InvalidArgument
from .grid import Mesh, ScalarField, lq_norm

__all__ = [
    "ASSUMPTIONS",
    "DiffusionMatrix",
    "MonotoneFlux",
    "Nonlinearity",
    "ProblemData",
    "GrowthReport",
    "make_diffusion",
    "make_flux",
    "make_nonlinearity",
    "validate_coercivity",
    "validate_monotonicity",
    "validate_flux_bounds",
    "validate_growth",
    "validate_uniqueness_hypotheses",
    "truncated_nonlinearity",
    "f_star",
    "extend_below",
]

ASSUMPTIONS = {
    "A1": "diffusion matrix bounded and uniformly coercive",
    "A2": "thermal flux coercive",
    "A3": "thermal flux monotone",
    "A4": "thermal flux of linear growth",
    "A5": "zero-order coefficients strictly positive",
    "A6": "coupling nonlinearity continuous",
    "A7": "mechanical source square integrable",
}

_TOL = 1e-12


@dataclass(frozen=True)
class DiffusionMatrix:
    """Mechanical diffusion coefficient ``x -> 2x2 matrix``.

    ``evaluate(X, Y)`` returns the four entry arrays ``(a11, a12, a21,
    a22)`` broadcast against the sample grids.  ``gamma`` and ``bound``
    are the declared coercivity and entry bounds of A1.
    """

    name: str
    evaluate: Callable
    gamma: float
    bound: float


@dataclass(frozen=True)
class MonotoneFlux:
    """Thermal flux ``(x, xi) -> 2-vector``, assumed monotone in ``xi``.

    ``evaluate(X, Y, gx, gy)`` maps per-cell gradients to per-cell flux
    components.  Structure hints let the solver pick a strategy:

    * ``linear_coefficient`` -- the flux is ``c(x) * xi``; a single SPD
      solve suffices;
    * ``radial_profile`` / ``potential`` -- the flux is
      ``phi(|xi|) * xi`` with convex potential ``W``; a secant-modulus
      (frozen-coefficient) iteration applies, with energy-descent
      damping and a plain descent fallback.
    """

    name: str
    evaluate: Callable
    delta: float
    beta: float
    b_weight: Optional[Callable] = None  # x-dependent offset in A4; None = zero
    strong_monotonicity: Optional[float] = None
    linear_coefficient: Optional[Callable] = None
    radial_profile: Optional[Callable] = None  # phi(s) with a = phi(|xi|) xi
    potential: Optional[Callable] = None  # W(s), convex primitive of phi(s)*s


@dataclass(frozen=True)
class Nonlinearity:
    """Coupling nonlinearity ``r -> 2-vector``.

    ``evaluate(r)`` returns the two component arrays.  Declared growth:
    ``|f(r)| <= a0 + M |r|^alpha``.  ``r0`` (if set) is a zero point
    with ``f == 0`` below it; ``L`` (if set) is a global Lipschitz
    constant on the nonnegative half-line.
    """

    name: str
    evaluate: Callable
    a0: float
    M: float
    alpha: float
    r0: Optional[float] = None
    L: Optional[float] = None

    def norm(self, r) -> np.ndarray:
        fx, fy = self.evaluate(np.asarray(r, float))
        return np.sqrt(fx * fx + fy * fy)


@dataclass(frozen=True)
class ProblemData:
    """Everything the solvers need: coefficients, data, and the mesh.

    The mesh is carried by ``g``; refinement studies rebuild the problem
    per mesh rather than resampling fields in place.
    """

    lam: float
    mu: float
    g: ScalarField
    A: DiffusionMatrix
    flux: MonotoneFlux
    f: Nonlinearity

    def __post_init__(self):
        if not (self.lam > 0.0 and self.mu > 0.0):
            raise AssumptionViolated(
                "A5",
                f"need lambda > 0 and mu > 0, got lambda={self.lam}, mu={self.mu}",
            )
        if not np.all(np.isfinite(self.g.values)):
            raise AssumptionViolated("A7", "source g contains non-finite values")

    @property
    def mesh(self) -> Mesh:
        return self.g.mesh

    def g_l2(self) -> float:
        return lq_norm(self.g, 2.0)


# ---------------------------------------------------------------------------
# built-in families, selectable by string key
# ---------------------------------------------------------------------------


def _parse_params(spec: str, defaults: dict, *, context: str) -> dict:
    """Parse ``k=v,k=v`` parameter tails of family keys."""
    out = dict(defaults)
    if not spec:
        return out
    for item in spec.split(","):
        if "=" not in item:
            raise InvalidArgument(f"malformed parameter {item!r} in {context}")
        k, v = item.split("=", 1)
        k = k.strip()
        if k not in out:
            raise InvalidArgument(f"unknown parameter {k!r} in {context}")
        out[k] = float(v)
    return out


def identity_diffusion() -> DiffusionMatrix:
    def evaluate(X, Y):
        one = np.ones_like(np.asarray(X, float))
        zero = np.zeros_like(one)
        return one, zero, zero, one

    return DiffusionMatrix("identity", evaluate, gamma=1.0, bound=1.0)


def diagonal_diffusion(a11: float, a22: float) -> DiffusionMatrix:
    if min(a11, a22) <= 0.0:
        raise InvalidArgument("diagonal entries must be positive")

    def evaluate(X, Y):
        one = np.ones_like(np.asarray(X, float))
        zero = np.zeros_like(one)
        return a11 * one, zero, zero, a22 * one

    return DiffusionMatrix(
        f"diag({a11},{a22})", evaluate, gamma=min(a11, a22), bound=max(a11, a22)
    )


def sinusoidal_diffusion(amp: float = 0.5) -> DiffusionMatrix:
    """``A(x) = (1 + amp*sin(2 pi x1)) I`` with ``0 < amp < 1``."""
    if not 0.0 < amp < 1.0:
        raise InvalidArgument("amplitude must lie in (0, 1)")

    def evaluate(X, Y):
        c = 1.0 + amp * np.sin(2.0 * np.pi * np.asarray(X, float))
        zero = np.zeros_like(c)
        return c, zero, zero, c

    return DiffusionMatrix(
        f"sinusoidal(amp={amp})", evaluate, gamma=1.0 - amp, bound=1.0 + amp
    )


def identity_flux() -> MonotoneFlux:
    def evaluate(X, Y, gx, gy):
        return gx, gy

    return MonotoneFlux(
        "identity",
        evaluate,
        delta=1.0,
        beta=1.0,
        strong_monotonicity=1.0,
        linear_coefficient=lambda X, Y: np.ones_like(np.asarray(X, float)),
        potential=lambda s: 0.5 * s * s,
    )


def scalar_flux(base: float = 1.5, amp: float = 0.5) -> MonotoneFlux:
    """``a(x, xi) = c(x) xi`` with ``c(x) = base + amp*sin(2 pi x1)``."""
    if not base - abs(amp) > 0.0:
        raise InvalidArgument("scalar flux coefficient must stay positive")

    def coefficient(X, Y):
        return base + amp * np.sin(2.0 * np.pi * np.asarray(X, float))

    def evaluate(X, Y, gx, gy):
        c = coefficient(X, Y)
        return c * gx, c * gy

    return MonotoneFlux(
        f"scalar(base={base},amp={amp})",
        evaluate,
        delta=base - abs(amp),
        beta=base + abs(amp),
        strong_monotonicity=base - abs(amp),
        linear_coefficient=coefficient,
    )


def radial_flux() -> MonotoneFlux:
    """``a(xi) = 2 xi - xi / (1 + |xi|)``: nonlinear, strongly monotone.

    The secant modulus ``phi(s) = 2 - 1/(1+s)`` stays in ``[1, 2]`` and
    the radial derivative ``d/ds (phi(s) s) = 2 - 1/(1+s)^2`` is at
    least 1, so both eigenvalues of the flux Jacobian are >= 1.
    """

    def phi(s):
        return 2.0 - 1.0 / (1.0 + s)

    def evaluate(X, Y, gx, gy):
        s = np.sqrt(gx * gx + gy * gy)
        c = phi(s)
        return c * gx, c * gy

    def potential(s):
        # primitive of phi(t) * t: s^2 - s + log(1+s)
        return s * s - s + np.log1p(s)

    return MonotoneFlux(
        "radial",
        evaluate,
        delta=1.0,
        beta=2.0,
        strong_monotonicity=1.0,
        radial_profile=phi,
        potential=potential,
    )


def zero_nonlinearity() -> Nonlinearity:
    def evaluate(r):
        r = np.asarray(r, float)
        z = np.zeros_like(r)
        return z, z.copy()

    return Nonlinearity("zero", evaluate, a0=0.0, M=1.0, alpha=1.0, r0=0.0, L=1.0)


def _shift_growth(M: float, alpha: float, r0: float) -> tuple[float, float]:
    """Constants for ``M max(r - r0, 0)^alpha <= a0' + M' |r|^alpha``."""
    if r0 == 0.0:
        return 0.0, M
    if alpha <= 1.0:
        return M * abs(r0) ** alpha, M
    scale = 2.0 ** (alpha - 1.0)
    return scale * M * abs(r0) ** alpha, scale * M


def power_nonlinearity(alpha: float, M: float = 1.0, r0: float = 0.0,
                       d: int = 0) -> Nonlinearity:
    """``f(r) = M max(r - r0, 0)^alpha e_d`` with ``alpha > 1/2``."""
    if not alpha > 0.5:
        raise InvalidArgument(f"growth exponent must exceed 1/2, got {alpha}")
    if not M > 0.0:
        raise InvalidArgument("growth factor M must be positive")
    if r0 > 0.0:
        raise InvalidArgument("zero point r0 must be <= 0")
    d = int(d)
    if d not in (0, 1):
        raise InvalidArgument("direction index must be 0 or 1")

    def evaluate(r):
        r = np.asarray(r, float)
        val = M * np.maximum(r - r0, 0.0) ** alpha
        zero = np.zeros_like(val)
        return (val, zero) if d == 0 else (zero, val)

    a0, M_decl = _shift_growth(M, alpha, r0)
    return Nonlinearity(
        f"power(alpha={alpha},M={M},r0={r0})",
        evaluate,
        a0=a0,
        M=M_decl,
        alpha=alpha,
        r0=r0,
        L=M if alpha == 1.0 else None,
    )


def linear_nonlinearity(M: float = 1.0, r0: float = 0.0, d: int = 0) -> Nonlinearity:
    """``f(r) = M max(r - r0, 0) e_d``: Lipschitz with constant M."""
    return power_nonlinearity(1.0, M=M, r0=r0, d=d)


_DIFFUSION_BUILDERS = {
    "identity": (identity_diffusion, {}),
    "diag": (diagonal_diffusion, {"a11": 2.0, "a22": 0.5}),
    "sinusoidal": (sinusoidal_diffusion, {"amp": 0.5}),
}

_FLUX_BUILDERS = {
    "identity": (identity_flux, {}),
    "scalar": (scalar_flux, {"base": 1.5, "amp": 0.5}),
    "radial": (radial_flux, {}),
}

_NONLINEARITY_BUILDERS = {
    "zero": (zero_nonlinearity, {}),
    "power": (power_nonlinearity, {"alpha": 1.0, "M": 1.0, "r0": 0.0, "d": 0}),
    "linear": (linear_nonlinearity, {"M": 1.0, "r0": 0.0, "d": 0}),
}


def _make_from_registry(registry, kind: str, key: str):
    name, _, params = key.partition(":")
    name = name.strip()
    if name not in registry:
        known = ", ".join(sorted(registry))
        raise InvalidArgument(
            f"unknown {kind} family {name!r} (known: {known})"
        )
    builder, defaults = registry[name]
    kwargs = _parse_params(params.strip(), defaults, context=f"{kind} {name!r}")
    return builder(**kwargs)


def make_diffusion(key: str) -> DiffusionMatrix:
    """Build a diffusion matrix from a key like ``"diag:a11=2,a22=0.5"``."""
    return _make_from_registry(_DIFFUSION_BUILDERS, "diffusion", key)


def make_flux(key: str) -> MonotoneFlux:
    """Build a thermal flux from a key like ``"radial"``."""
    return _make_from_registry(_FLUX_BUILDERS, "flux", key)


def make_nonlinearity(key: str) -> Nonlinearity:
    """Build a nonlinearity from a key like ``"power:alpha=0.6,M=1"``."""
    return _make_from_registry(_NONLINEARITY_BUILDERS, "nonlinearity", key)


# ---------------------------------------------------------------------------
# sampled validators
# ---------------------------------------------------------------------------


def _sample_points(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic m*m grid of interior sample points."""
    s = (np.arange(m) + 0.5) / m
    X, Y = np.meshgrid(s, s, indexing="ij")
    return X.ravel(), Y.ravel()


def _direction_set(count: int) -> np.ndarray:
    """Unit vectors at evenly spaced angles; count is rounded up to a
    multiple of 4 so the coordinate axes are always included."""
    count = 4 * ((count + 3) // 4)
    ang = 2.0 * np.pi * np.arange(count) / count
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _gradient_catalog(samples: int) -> np.ndarray:
    """Deterministic set of trial gradients (the origin plus rings)."""
    n_angles = max(8, int(np.ceil(np.sqrt(samples / 2.0))))
    dirs = _direction_set(n_angles)
    mags = np.array([0.25, 1.0, 4.0, 16.0])
    ring = (mags[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
    return np.vstack([[0.0, 0.0], ring])


def validate_coercivity(A: DiffusionMatrix, samples: int = 256) -> float:
    """Sampled check of A1; returns the observed coercivity constant.

    Raises :class:`AssumptionViolated` if the declared ``gamma`` or the
    entry bound fails at any sample.
    """
    if samples < 100:
        raise InvalidArgument("need at least 100 samples")
    m = max(10, int(np.ceil(np.sqrt(samples))))
    X, Y = _sample_points(m)
    a11, a12, a21, a22 = (np.broadcast_to(np.asarray(e, float), X.shape)
                          for e in A.evaluate(X, Y))
    entries_max = max(float(np.max(np.abs(e))) for e in (a11, a12, a21, a22))
    if entries_max > A.bound + _TOL:
        raise AssumptionViolated(
            "A1",
            f"entry bound exceeded: {entries_max:.6g} > declared {A.bound:.6g}",
        )
    dirs = _direction_set(16)
    # quadratic form xi^T A xi per sample point and direction
    quad = (
        a11[:, None] * dirs[None, :, 0] ** 2
        + (a12 + a21)[:, None] * dirs[None, :, 0] * dirs[None, :, 1]
        + a22[:, None] * dirs[None, :, 1] ** 2
    )
    k = int(np.argmin(quad))
    gamma_est = float(quad.ravel()[k])
    if gamma_est < A.gamma - _TOL:
        i, j = np.unravel_index(k, quad.shape)
        raise AssumptionViolated(
            "A1",
            f"coercivity fails: {gamma_est:.6g} < declared {A.gamma:.6g}",
            offending=(float(X[i]), float(Y[i]), tuple(dirs[j])),
        )
    return gamma_est


def validate_monotonicity(flux: MonotoneFlux, samples: int = 256) -> float:
    """Sampled check of A3 (and of the declared strong monotonicity).

    Returns the worst observed pairing
    ``(a(x, xi) - a(x, xi')) . (xi - xi')`` over a deterministic catalog
    of points and gradient pairs.
    """
    if samples < 100:
        raise InvalidArgument("need at least 100 samples")
    X, Y = _sample_points(5)
    cat = _gradient_catalog(samples)
    k = cat.shape[0]
    xi = np.repeat(cat, k, axis=0)
    xi_p = np.tile(cat, (k, 1))
    keep = np.any(xi != xi_p, axis=1)
    xi, xi_p = xi[keep], xi_p[keep]
    worst = np.inf
    worst_strong = np.inf
    where = None
    for x, y in zip(X, Y):
        ax, ay = flux.evaluate(x, y, xi[:, 0], xi[:, 1])
        bx, by = flux.evaluate(x, y, xi_p[:, 0], xi_p[:, 1])
        dx, dy = xi[:, 0] - xi_p[:, 0], xi[:, 1] - xi_p[:, 1]
        pairing = (ax - bx) * dx + (ay - by) * dy
        i = int(np.argmin(pairing))
        if pairing[i] < worst:
            worst = float(pairing[i])
            where = (float(x), float(y), tuple(xi[i]), tuple(xi_p[i]))
        if flux.strong_monotonicity is not None:
            gap = pairing - flux.strong_monotonicity * (dx * dx + dy * dy)
            worst_strong = min(worst_strong, float(np.min(gap)))
    if worst < -_TOL:
        raise AssumptionViolated(
            "A3", f"monotonicity fails: worst pairing {worst:.6g}", offending=where
        )
    if flux.strong_monotonicity is not None and worst_strong < -1e-9:
        raise AssumptionViolated(
            "A3",
            "declared strong monotonicity constant "
            f"{flux.strong_monotonicity:.6g} fails by {worst_strong:.6g}",
        )
    return worst


def validate_flux_bounds(flux: MonotoneFlux, samples: int = 256) -> tuple[float, float]:
    """Sampled check of A2 (coercivity) and A4 (linear growth).

    Returns ``(worst_coercivity_gap, worst_growth_gap)``; both should be
    ``>= -1e-12`` for a conforming flux.
    """
    if samples < 100:
        raise InvalidArgument("need at least 100 samples")
    X, Y = _sample_points(5)
    cat = _gradient_catalog(samples)
    worst_coer = np.inf
    worst_growth = np.inf
    for x, y in zip(X, Y):
        ax, ay = flux.evaluate(x, y, cat[:, 0], cat[:, 1])
        xi2 = cat[:, 0] ** 2 + cat[:, 1] ** 2
        coer = ax * cat[:, 0] + ay * cat[:, 1] - flux.delta * xi2
        worst_coer = min(worst_coer, float(np.min(coer)))
        b = flux.b_weight(x, y) if flux.b_weight is not None else 0.0
        growth = flux.beta * (b + np.sqrt(xi2)) - np.sqrt(ax * ax + ay * ay)
        worst_growth = min(worst_growth, float(np.min(growth)))
    if worst_coer < -_TOL:
        raise AssumptionViolated(
            "A2", f"flux coercivity fails by {worst_coer:.6g}"
        )
    if worst_growth < -_TOL:
        raise AssumptionViolated(
            "A4", f"flux growth bound fails by {worst_growth:.6g}"
        )
    return worst_coer, worst_growth


@dataclass(frozen=True)
class GrowthReport:
    """Outcome of :func:`validate_growth`."""

    growth_ok: bool
    linear_bound_ok: bool  # planar-case hypothesis |f(r)| <= a0 + M |r|
    linear_bound_worst: float
    negative_sqrt_ratios: tuple  # (r, |f(r)| / sqrt(|r|)) toward r -> -inf


def validate_growth(f: Nonlinearity, R_val: float) -> GrowthReport:
    """Check the declared growth of ``f`` on ``[-R_val, R_val]``.

    Raises :class:`AssumptionViolated` (with the offending ``r``) if the
    declared bound ``|f(r)| <= a0 + M |r|^alpha`` fails.  Also reports
    whether the planar linear bound ``|f(r)| <= a0 + M |r|`` holds on
    the sample, and the decay ratios ``|f(r)| / sqrt(|r|)`` along
    ``r = -10^k``, which should trend to zero for admissible data.
    """
    if not R_val > 0.0:
        raise InvalidArgument("R_val must be positive")
    rs = np.linspace(-R_val, R_val, 4001)
    vals = f.norm(rs)
    if not np.all(np.isfinite(vals)):
        raise AssumptionViolated(
            "A6", "f evaluates to a non-finite value",
            offending=float(rs[int(np.argmax(~np.isfinite(vals)))]),
        )
    bound = f.a0 + f.M * np.abs(rs) ** f.alpha
    gap = vals - bound
    i = int(np.argmax(gap))
    if gap[i] > 1e-9 * max(1.0, float(bound[i])):
        raise AssumptionViolated(
            "A6",
            f"declared growth bound a0 + M|r|^alpha fails: |f| = "
            f"{vals[i]:.6g} > {bound[i]:.6g}",
            offending=float(rs[i]),
        )
    linear_gap = vals - (f.a0 + f.M * np.abs(rs))
    worst_linear = float(np.max(linear_gap))
    ratios = []
    for k in range(0, 7):
        r = -(10.0 ** k)
        ratios.append((r, float(f.norm(np.array([r]))[0] / np.sqrt(abs(r)))))
    return GrowthReport(
        growth_ok=True,
        linear_bound_ok=worst_linear <= 1e-9,
        linear_bound_worst=worst_linear,
        negative_sqrt_ratios=tuple(ratios),
    )


def validate_uniqueness_hypotheses(problem: ProblemData, R_val: float = 64.0) -> None:
    """Hypotheses under which the small-data solution is unique.

    Requires a declared strong-monotonicity constant on the flux, a
    declared global Lipschitz constant on ``f`` over the nonnegative
    half-line (verified on a sample), and ``f(0) = 0``.
    """
    if problem.flux.strong_monotonicity is None:
        raise AssumptionViolated(
            "A3", "uniqueness needs a declared strong-monotonicity constant"
        )
    f = problem.f
    if f.L is None:
        raise AssumptionViolated(
            "A6", "uniqueness needs a declared Lipschitz constant for f"
        )
    if float(f.norm(np.array([0.0]))[0]) > 1e-14:
        raise AssumptionViolated("A6", "uniqueness needs f(0) = 0")
    rs = np.linspace(0.0, R_val, 2001)
    fx, fy = f.evaluate(rs)
    dfx = np.diff(fx)
    dfy = np.diff(fy)
    dr = rs[1] - rs[0]
    slope = np.sqrt(dfx * dfx + dfy * dfy) / dr
    worst = float(np.max(slope))
    if worst > f.L + 1e-9:
        raise AssumptionViolated(
            "A6",
            f"sampled Lipschitz constant {worst:.6g} exceeds declared {f.L:.6g}",
        )


# ---------------------------------------------------------------------------
# transformations of the nonlinearity
# ---------------------------------------------------------------------------


def truncated_nonlinearity(f: Nonlinearity, epsilon: float) -> Nonlinearity:
    """``f`` composed with the truncation at height ``1/epsilon``.

    The result is bounded and agrees with ``f`` on
    ``[-1/epsilon, 1/epsilon]``; it drives the approximation sweep under
    general integrable data.
    """
    if not epsilon > 0.0:
        raise InvalidArgument(f"epsilon must be positive, got {epsilon}")
    cap = 1.0 / epsilon
    inner = f.evaluate

    def evaluate(r):
        return inner(np.clip(np.asarray(r, float), -cap, cap))

    r0 = f.r0 if (f.r0 is not None and abs(f.r0) <= cap) else None
    return Nonlinearity(
        f"truncated({f.name},eps={epsilon})",
        evaluate,
        a0=f.a0 + f.M * cap**f.alpha,
        M=f.M,
        alpha=f.alpha,
        r0=r0,
        L=f.L,
    )


def f_star(f: Nonlinearity, r: float, max_step: float = 1e-3) -> float:
    """Running sup envelope ``sup { |f(r')| : 0 <= r' <= r }``.

    Computed by dense sampling with an even number of subintervals of
    width at most ``max_step`` (so midpoints of symmetric ranges land on
    the grid); endpoints are always included.
    """
    if r < 0.0:
        raise InvalidArgument(f"envelope needs r >= 0, got {r}")
    if r == 0.0:
        return float(f.norm(np.array([0.0]))[0])
    steps = int(np.ceil(r / max_step))
    steps += steps % 2  # keep the count even
    grid = np.linspace(0.0, r, steps + 1)
    return float(np.max(f.norm(grid)))


def extend_below(f: Nonlinearity, r0: float) -> Nonlinearity:
    """Replace ``f`` by zero below ``r0 <= 0``, keeping it above.

    The result is continuous iff ``f(r0) = 0``; a warning is emitted
    otherwise.  Positivity of the coupled temperature above ``r0``
    relies on this vanishing structure.
    """
    if r0 > 0.0:
        raise InvalidArgument(f"zero point must satisfy r0 <= 0, got {r0}")
    at_r0 = float(f.norm(np.array([r0]))[0])
    continuous = at_r0 <= 1e-12
    if not continuous:
        warnings.warn(
            f"extension is discontinuous: |f({r0})| = {at_r0:.3g}",
            stacklevel=2,
        )
    inner = f.evaluate

    def evaluate(r):
        r = np.asarray(r, float)
        fx, fy = inner(r)
        mask = r > r0
        return np.where(mask, fx, 0.0), np.where(mask, fy, 0.0)

    return Nonlinearity(
        f"extended({f.name},r0={r0})",
        evaluate,
        a0=f.a0,
        M=f.M,
        alpha=f.alpha,
        r0=r0,
        L=f.L if continuous else None,
    )


def scale_source(problem: ProblemData, factor: float) -> ProblemData:
    """Problem with ``g`` replaced by ``factor * g``."""
    return replace(problem, g=problem.g * factor)
