"""Coefficient families, assumption validators, and f transformations."""

import numpy as np
import pytest

from viscotherm.errors import AssumptionViolated, InvalidArgument
from viscotherm.grid import ScalarField, build_mesh
from viscotherm.model import (
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
    truncated_nonlinearity,
    validate_coercivity,
    validate_flux_bounds,
    validate_growth,
    validate_monotonicity,
    validate_uniqueness_hypotheses,
    zero_nonlinearity,
)


def small_problem(**overrides):
    mesh = build_mesh(4)
    kwargs = dict(
        lam=1.0,
        mu=1.0,
        g=ScalarField.zeros(mesh),
        A=identity_diffusion(),
        flux=identity_flux(),
        f=zero_nonlinearity(),
    )
    kwargs.update(overrides)
    return ProblemData(**kwargs)


class TestCoercivity:
    def test_identity(self):
        assert validate_coercivity(identity_diffusion()) == pytest.approx(1.0)

    def test_diagonal(self):
        A = make_diffusion("diag:a11=2,a22=0.5")
        assert validate_coercivity(A) == pytest.approx(0.5)

    def test_sinusoidal(self):
        A = make_diffusion("sinusoidal:amp=0.5")
        est = validate_coercivity(A)
        assert est == pytest.approx(0.5, abs=0.05)
        assert est >= A.gamma - 1e-12

    def test_overdeclared_gamma_rejected(self):
        bad = DiffusionMatrix(
            "overdeclared", identity_diffusion().evaluate, gamma=2.0, bound=1.0
        )
        with pytest.raises(AssumptionViolated) as err:
            validate_coercivity(bad)
        assert err.value.assumption == "A1"

    def test_entry_bound_rejected(self):
        bad = DiffusionMatrix(
            "tight-bound", identity_diffusion().evaluate, gamma=1.0, bound=0.5
        )
        with pytest.raises(AssumptionViolated):
            validate_coercivity(bad)

    def test_sample_floor(self):
        with pytest.raises(InvalidArgument):
            validate_coercivity(identity_diffusion(), samples=10)


class TestMonotonicity:
    def test_identity_nonnegative(self):
        assert validate_monotonicity(identity_flux()) >= 0.0

    def test_radial_nonnegative(self):
        assert validate_monotonicity(radial_flux()) >= 0.0

    def test_radial_derivative_cross_check(self):
        # the radial flux s -> (2 - 1/(1+s)) s has derivative
        # 2 - 1/(1+s)^2, which stays at least 1 on the half line
        s = np.linspace(0.0, 50.0, 2001)
        derivative = 2.0 - 1.0 / (1.0 + s) ** 2
        assert np.min(derivative) >= 1.0

    def test_anti_monotone_rejected(self):
        def evaluate(X, Y, gx, gy):
            return -gx, -gy

        bad = MonotoneFlux("antimonotone", evaluate, delta=1.0, beta=1.0)
        with pytest.raises(AssumptionViolated) as err:
            validate_monotonicity(bad)
        assert err.value.assumption == "A3"

    def test_overdeclared_strong_constant(self):
        flux = radial_flux()
        bad = MonotoneFlux(
            flux.name, flux.evaluate, delta=flux.delta, beta=flux.beta,
            strong_monotonicity=5.0, radial_profile=flux.radial_profile,
            potential=flux.potential,
        )
        with pytest.raises(AssumptionViolated):
            validate_monotonicity(bad)


class TestFluxBounds:
    @pytest.mark.parametrize("flux", [identity_flux(), scalar_flux(), radial_flux()])
    def test_builtins_pass(self, flux):
        coer_gap, growth_gap = validate_flux_bounds(flux)
        assert coer_gap >= -1e-12
        assert growth_gap >= -1e-12

    def test_overdeclared_delta(self):
        flux = identity_flux()
        bad = MonotoneFlux(flux.name, flux.evaluate, delta=2.0, beta=1.0)
        with pytest.raises(AssumptionViolated) as err:
            validate_flux_bounds(bad)
        assert err.value.assumption == "A2"

    def test_underdeclared_beta(self):
        flux = radial_flux()
        bad = MonotoneFlux(flux.name, flux.evaluate, delta=1.0, beta=1.0)
        with pytest.raises(AssumptionViolated) as err:
            validate_flux_bounds(bad)
        assert err.value.assumption == "A4"


class TestGrowth:
    def test_power_equality_case(self):
        report = validate_growth(power_nonlinearity(0.6), 64.0)
        assert report.growth_ok

    def test_underdeclared_exponent(self):
        def evaluate(r):
            r = np.asarray(r, float)
            return r * r, np.zeros_like(r)

        quadratic = Nonlinearity("quadratic", evaluate, a0=0.0, M=1.0, alpha=1.0)
        with pytest.raises(AssumptionViolated) as err:
            validate_growth(quadratic, 64.0)
        assert err.value.offending is not None
        assert abs(err.value.offending) > 1.0

    def test_linear_bound_flag(self):
        report = validate_growth(linear_nonlinearity(1.0), 8.0)
        assert report.linear_bound_ok

    def test_negative_axis_ratios_vanish_for_positive_part(self):
        report = validate_growth(power_nonlinearity(0.6), 8.0)
        assert all(ratio == 0.0 for _, ratio in report.negative_sqrt_ratios)

    def test_r_val_validation(self):
        with pytest.raises(InvalidArgument):
            validate_growth(zero_nonlinearity(), 0.0)


class TestTruncatedNonlinearity:
    def test_caps_at_inverse_epsilon(self):
        f = linear_nonlinearity(1.0)
        fe = truncated_nonlinearity(f, 0.5)
        fx, fy = fe.evaluate(np.array([3.0]))
        assert fx[0] == 2.0 and fy[0] == 0.0

    def test_identity_region(self):
        f = power_nonlinearity(0.6, M=2.0)
        fe = truncated_nonlinearity(f, 0.25)
        r = np.linspace(-4.0, 4.0, 41)
        assert np.array_equal(fe.evaluate(r)[0], f.evaluate(r)[0])

    def test_global_bound(self):
        def evaluate(r):
            r = np.asarray(r, float)
            return r * r, np.zeros_like(r)

        quadratic = Nonlinearity("quadratic", evaluate, a0=0.0, M=1.0, alpha=2.0)
        fe = truncated_nonlinearity(quadratic, 1.0)
        r = np.linspace(-100.0, 100.0, 4001)
        assert np.max(fe.norm(r)) <= 1.0 + 1e-15

    def test_epsilon_validation(self):
        with pytest.raises(InvalidArgument):
            truncated_nonlinearity(zero_nonlinearity(), 0.0)


class TestFStar:
    def test_monotone_case(self):
        assert f_star(linear_nonlinearity(1.0), 2.0) == pytest.approx(2.0, abs=1e-12)

    def test_sine_envelope(self):
        def evaluate(r):
            r = np.asarray(r, float)
            return np.sin(r), np.zeros_like(r)

        f = Nonlinearity("sine", evaluate, a0=1.0, M=0.0, alpha=1.0)
        assert f_star(f, np.pi) == pytest.approx(1.0, abs=1e-9)

    def test_at_zero(self):
        def evaluate(r):
            r = np.asarray(r, float)
            return np.full_like(r, 0.75), np.zeros_like(r)

        f = Nonlinearity("offset", evaluate, a0=0.75, M=0.0, alpha=1.0)
        assert f_star(f, 0.0) == 0.75

    def test_dominates_pointwise_and_nondecreasing(self):
        def evaluate(r):
            r = np.asarray(r, float)
            return np.sin(3.0 * r) * np.exp(-r), np.zeros_like(r)

        f = Nonlinearity("wiggle", evaluate, a0=1.0, M=0.0, alpha=1.0)
        rs = np.linspace(0.0, 4.0, 17)
        values = [f_star(f, float(r)) for r in rs]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
        assert all(
            v >= float(f.norm(np.array([r]))[0]) - 1e-12
            for r, v in zip(rs, values)
        )

    def test_negative_r_rejected(self):
        with pytest.raises(InvalidArgument):
            f_star(zero_nonlinearity(), -1.0)


class TestExtendBelow:
    def test_already_vanishing(self):
        f = power_nonlinearity(1.0, r0=-1.0)
        fe = extend_below(f, -1.0)
        r = np.linspace(-4.0, 4.0, 81)
        assert np.allclose(fe.evaluate(r)[0], f.evaluate(r)[0])

    def test_discontinuous_warns(self):
        def evaluate(r):
            r = np.asarray(r, float)
            return np.ones_like(r), np.zeros_like(r)

        constant = Nonlinearity("one", evaluate, a0=1.0, M=0.0, alpha=1.0)
        with pytest.warns(UserWarning):
            fe = extend_below(constant, -1.0)
        assert fe.L is None
        fx, _ = fe.evaluate(np.array([-2.0, 0.0]))
        assert fx[0] == 0.0 and fx[1] == 1.0

    def test_positive_part(self):
        def evaluate(r):
            r = np.asarray(r, float)
            return r, np.zeros_like(r)

        ramp = Nonlinearity("ramp", evaluate, a0=0.0, M=1.0, alpha=1.0)
        fe = extend_below(ramp, 0.0)
        r = np.array([-3.0, -0.5, 0.5, 2.0])
        assert np.array_equal(fe.evaluate(r)[0], np.maximum(r, 0.0))

    def test_vanishes_at_and_below_r0(self):
        fe = extend_below(power_nonlinearity(1.0, r0=-1.0), -1.0)
        r = np.linspace(-10.0, -1.0, 50)
        assert np.max(fe.norm(r)) == 0.0

    def test_positive_r0_rejected(self):
        with pytest.raises(InvalidArgument):
            extend_below(zero_nonlinearity(), 0.5)


class TestRegistries:
    def test_unknown_family_messages(self):
        with pytest.raises(InvalidArgument, match="radial2"):
            make_flux("radial2")
        with pytest.raises(InvalidArgument, match="identity"):
            make_flux("radial2")
        with pytest.raises(InvalidArgument, match="unknown diffusion"):
            make_diffusion("nope")
        with pytest.raises(InvalidArgument, match="unknown nonlinearity"):
            make_nonlinearity("nope")

    def test_parameter_tails(self):
        A = make_diffusion("diag:a11=3,a22=0.5")
        assert A.gamma == 0.5 and A.bound == 3.0
        f = make_nonlinearity("power:alpha=0.6,M=2")
        assert f.alpha == 0.6 and f.M == 2.0

    def test_malformed_parameter(self):
        with pytest.raises(InvalidArgument):
            make_flux("scalar:base")

    def test_unknown_parameter(self):
        with pytest.raises(InvalidArgument, match="unknown parameter"):
            make_flux("scalar:gain=2")

    def test_family_constructor_validation(self):
        with pytest.raises(InvalidArgument):
            make_nonlinearity("power:alpha=0.4")
        with pytest.raises(InvalidArgument):
            make_diffusion("diag:a11=-1,a22=1")
        with pytest.raises(InvalidArgument):
            make_flux("scalar:base=1,amp=2")


class TestProblemData:
    def test_positive_coefficients_required(self):
        with pytest.raises(AssumptionViolated) as err:
            small_problem(lam=0.0)
        assert err.value.assumption == "A5"
        with pytest.raises(AssumptionViolated):
            small_problem(mu=-1.0)

    def test_finite_source_required(self):
        mesh = build_mesh(4)
        values = np.zeros((5, 5))
        values[2, 2] = np.inf
        with pytest.raises(AssumptionViolated) as err:
            small_problem(g=ScalarField(mesh, values))
        assert err.value.assumption == "A7"

    def test_scale_source(self):
        mesh = build_mesh(4)
        base = small_problem(g=ScalarField.constant(mesh, 1.0))
        scaled = scale_source(base, 0.25)
        assert np.all(scaled.g.values == 0.25)
        assert scaled.lam == base.lam


class TestUniquenessHypotheses:
    def test_lipschitz_linear_passes(self):
        validate_uniqueness_hypotheses(
            small_problem(f=linear_nonlinearity(1.0))
        )

    def test_needs_lipschitz_constant(self):
        with pytest.raises(AssumptionViolated) as err:
            validate_uniqueness_hypotheses(
                small_problem(f=power_nonlinearity(0.6))
            )
        assert err.value.assumption == "A6"

    def test_needs_vanishing_at_zero(self):
        def evaluate(r):
            r = np.asarray(r, float)
            return np.ones_like(r), np.zeros_like(r)

        constant = Nonlinearity("one", evaluate, a0=1.0, M=0.0, alpha=1.0, L=0.0)
        with pytest.raises(AssumptionViolated):
            validate_uniqueness_hypotheses(small_problem(f=constant))

    def test_needs_strong_monotonicity(self):
        flux = identity_flux()
        weak = MonotoneFlux(
            flux.name, flux.evaluate, delta=1.0, beta=1.0,
            linear_coefficient=flux.linear_coefficient,
        )
        with pytest.raises(AssumptionViolated) as err:
            validate_uniqueness_hypotheses(
                small_problem(flux=weak, f=linear_nonlinearity(1.0))
            )
        assert err.value.assumption == "A3"

    def test_underdeclared_lipschitz(self):
        def evaluate(r):
            r = np.asarray(r, float)
            return 3.0 * np.maximum(r, 0.0), np.zeros_like(r)

        steep = Nonlinearity("steep", evaluate, a0=0.0, M=3.0, alpha=1.0, L=1.0)
        with pytest.raises(AssumptionViolated):
            validate_uniqueness_hypotheses(small_problem(f=steep))
