"""Contrast-marginalized orientation likelihood: closed form, variants, oracle."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.integrate import quad

from invdesc import (
    DegeneratePatchError,
    FixedNoise,
    GrayImage,
    JointNormalizedNoise,
    LikelihoodCurve,
    PolarGradient,
    ProportionalNoise,
    bind_to_patch,
    compute_gradient,
    contrast_marginal,
    likelihood_curve,
    marginal_by_quadrature,
    patch_log_likelihood,
    patch_mean_curve,
    to_polar,
)
from invdesc.contrast import adaptive_simpson, half_gaussian_moment, std_normal_cdf
from invdesc.rngstreams import stream_rng

UNIFORM = 1.0 / (2.0 * math.pi)


class TestNoiseModels:
    def test_fixed_rejects_bad_epsilon(self):
        for bad in (0.0, -1.0, math.nan, math.inf):
            with pytest.raises(ValueError):
                FixedNoise(bad)

    def test_proportional_rejects_bad_epsilon(self):
        for bad in (0.0, -0.5, math.nan):
            with pytest.raises(ValueError):
                ProportionalNoise(bad)

    def test_joint_rejects_bad_sigma(self):
        for bad in (0.0, -2.0, math.inf):
            with pytest.raises(ValueError):
                JointNormalizedNoise(bad)

    def test_joint_rejects_bad_rho_hat_sq(self):
        for bad in (0.0, -1.0, math.nan):
            with pytest.raises(ValueError):
                JointNormalizedNoise(0.5, bad)

    def test_joint_bind_returns_bound_copy(self):
        model = JointNormalizedNoise(0.5)
        assert model.rho_hat_sq is None
        bound = model.bind(2.25)
        assert bound.rho_hat_sq == 2.25
        assert bound.sigma == 0.5
        assert model.rho_hat_sq is None

    def test_unbound_joint_cannot_evaluate_single_gradients(self):
        with pytest.raises(DegeneratePatchError):
            contrast_marginal(0.0, (0.0, 1.0), JointNormalizedNoise(0.5))


class TestStdNormalCdf:
    def test_matches_erf_formula(self):
        a = np.linspace(-6.0, 6.0, 101)
        expected = 0.5 * (1.0 + np.array([math.erf(v / math.sqrt(2.0)) for v in a]))
        assert_allclose(std_normal_cdf(a), expected, rtol=0, atol=1e-15)

    def test_symmetry(self):
        a = np.linspace(0.0, 8.0, 50)
        assert_allclose(std_normal_cdf(-a), 1.0 - std_normal_cdf(a), atol=1e-15)

    def test_deep_tail_stays_positive(self):
        assert 0.0 < std_normal_cdf(-30.0) < 1e-150


class TestHalfGaussianMoment:
    def test_zero_mean_anchor(self):
        for eps in (0.1, 0.5, 1.0, 3.0):
            assert_allclose(half_gaussian_moment(0.0, eps), eps / math.sqrt(2 * math.pi), rtol=1e-15)

    def test_approaches_mean_for_large_positive_mean(self):
        assert_allclose(half_gaussian_moment(50.0, 0.5), 50.0, rtol=1e-14)

    def test_increasing_in_mean(self):
        m = np.linspace(-4.0, 4.0, 81)
        values = half_gaussian_moment(m, 0.7)
        assert np.all(np.diff(values) > 0)

    def test_positive_while_representable(self):
        m = np.linspace(-10.0, 20.0, 61)
        assert np.all(half_gaussian_moment(m, 0.3) > 0)

    def test_deep_tail_underflows_to_zero(self):
        """Far left of the representable range the linear-domain value is 0;
        log-domain accumulation (patch_log_likelihood) covers that regime."""
        assert half_gaussian_moment(-15.0, 0.3) == 0.0

    def test_joint_scaling(self):
        assert_allclose(
            half_gaussian_moment(2.0 * 0.7, 2.0 * 0.3),
            2.0 * half_gaussian_moment(0.7, 0.3),
            rtol=1e-15,
        )

    def test_matches_numerical_integral(self):
        """The closed form is the first moment of a truncated Gaussian."""
        for m, eps in [(0.0, 1.0), (0.5, 0.2), (-0.3, 0.15), (2.0, 0.5), (-2.0, 0.5)]:
            expected, _ = quad(
                lambda rho: rho * math.exp(-((rho - m) ** 2) / (2 * eps * eps))
                / (eps * math.sqrt(2 * math.pi)),
                0.0,
                m + 15.0 * eps,
            )
            assert_allclose(half_gaussian_moment(m, eps), expected, rtol=1e-9)

    def test_rejects_bad_eps(self):
        for bad in (0.0, -1.0, math.inf):
            with pytest.raises(ValueError):
                half_gaussian_moment(0.5, bad)


def _single_pixel_log_density(alpha, beta, gamma, model):
    """Log orientation density at one pixel via the patch-level accumulator."""
    ref = PolarGradient(np.array([[beta]]), np.array([[gamma]]))
    return patch_log_likelihood(np.array([[alpha]]), ref, model)


class TestLogDomainEvaluation:
    def test_matches_direct_formula_at_moderate_depth(self):
        model = FixedNoise(0.5)
        for alpha in (0.0, 0.4, 1.3, 3.0):
            direct = math.log(contrast_marginal(alpha, (0.2, 1.5), model))
            assert_allclose(_single_pixel_log_density(alpha, 0.2, 1.5, model), direct, rtol=1e-12)

    def test_continuous_across_the_asymptotic_switch(self):
        """Left-tail evaluation switches formulas near cos-projection -33 eps."""
        eps = 0.1
        model = FixedNoise(eps)
        for gamma in (3.301, 3.4, 3.6):  # direct branch still carries ~9 digits here
            logp = _single_pixel_log_density(math.pi, 0.0, gamma, model)
            direct = (
                -0.5 * math.log(2 * math.pi)
                + math.log(half_gaussian_moment(-gamma, eps) / eps)
            )
            assert_allclose(logp, direct, rtol=1e-8)

    def test_finite_and_decreasing_far_into_the_tail(self):
        eps = 0.1
        model = FixedNoise(eps)
        logs = [_single_pixel_log_density(math.pi, 0.0, g, model) for g in (5.0, 10.0, 30.0)]
        assert all(math.isfinite(v) for v in logs)
        assert logs[0] > logs[1] > logs[2]


class TestContrastMarginal:
    def test_scalar_input_returns_float(self):
        value = contrast_marginal(0.3, (0.0, 1.0), FixedNoise(0.5))
        assert isinstance(value, float)

    def test_peaks_at_reference_angle(self):
        alphas = -np.pi + 2 * np.pi * np.arange(720) / 720
        values = contrast_marginal(alphas, (0.7, 2.0), FixedNoise(0.5))
        assert np.argmax(values) == np.argmin(np.abs(alphas - 0.7))

    def test_symmetric_about_reference_angle(self):
        d = np.linspace(0.0, np.pi, 50)
        model = FixedNoise(0.5)
        assert_allclose(
            contrast_marginal(d, (0.0, 2.0), model),
            contrast_marginal(-d, (0.0, 2.0), model),
            rtol=1e-14,
        )

    def test_nonincreasing_in_angular_distance(self):
        d = np.linspace(0.0, np.pi / 2, 200)
        values = contrast_marginal(d, (0.0, 2.0), FixedNoise(0.5))
        assert np.all(np.diff(values) <= 1e-15)

    def test_flat_patch_limit(self):
        for eps in (0.1, 0.5, 1.0):
            alphas = np.linspace(-np.pi, np.pi, 50)
            values = contrast_marginal(alphas, (0.0, 0.0), FixedNoise(eps))
            assert_allclose(values, UNIFORM, rtol=0, atol=1e-9)

    def test_near_flat_patch_limit(self):
        """Magnitudes up to 1e-6 of the noise width are flat to first order.

        The leading deviation is (gamma/eps) / (2 sqrt(2 pi)), about 2e-7
        at the 1e-6 ratio, so the curve is uniform to well below that."""
        alphas = np.linspace(-np.pi, np.pi, 50)
        fixed = contrast_marginal(alphas, (0.0, 1e-7), FixedNoise(0.1))
        assert_allclose(fixed, UNIFORM, rtol=0, atol=5e-7)
        joint = contrast_marginal(alphas, (0.0, 1e-7), JointNormalizedNoise(0.1, 1.0))
        assert_allclose(joint, UNIFORM, rtol=0, atol=5e-7)

    def test_proportional_never_reads_the_magnitude(self):
        """Bit-identical output for any rescaling of the reference magnitude."""
        alphas = np.linspace(-np.pi, np.pi, 101)
        model = ProportionalNoise(0.5)
        base = contrast_marginal(alphas, (0.3, 0.7), model)
        for a in (1e-6, 13.0, 1e6):
            assert_array_equal(contrast_marginal(alphas, (0.3, 0.7 * a), model), base)

    def test_joint_model_divides_by_patch_scale(self):
        """A bound joint model equals the fixed model at the rescaled magnitude."""
        alphas = np.linspace(-np.pi, np.pi, 64)
        joint = contrast_marginal(alphas, (0.1, 2.0), JointNormalizedNoise(0.5, 4.0))
        fixed = contrast_marginal(alphas, (0.1, 2.0 / 2.0), FixedNoise(0.5))
        assert_allclose(joint, fixed, rtol=1e-15)

    def test_rejects_negative_magnitude(self):
        with pytest.raises(ValueError, match="magnitude"):
            contrast_marginal(0.0, (0.0, -1.0), FixedNoise(0.5))

    def test_rejects_non_finite_angle(self):
        with pytest.raises(ValueError, match="angle"):
            contrast_marginal(0.0, (math.nan, 1.0), FixedNoise(0.5))


class TestAdaptiveSimpson:
    def test_polynomial_is_exact(self):
        assert_allclose(adaptive_simpson(lambda x: x * x, 0.0, 3.0), 9.0, rtol=1e-13)

    def test_sine_arch(self):
        assert_allclose(adaptive_simpson(math.sin, 0.0, math.pi), 2.0, rtol=1e-10)

    def test_narrow_bump_needs_seed_panels(self):
        """A bump far narrower than the interval is caught by the panel seeding."""
        sigma = 0.01
        f = lambda x: math.exp(-((x - 5.0) ** 2) / (2 * sigma * sigma))
        expected = sigma * math.sqrt(2 * math.pi)
        assert_allclose(adaptive_simpson(f, 0.0, 10.0, min_panels=2000), expected, rtol=1e-9)

    def test_empty_interval_is_zero(self):
        assert adaptive_simpson(math.sin, 1.0, 1.0) == 0.0
        assert adaptive_simpson(math.sin, 2.0, 1.0) == 0.0


class TestQuadratureOracle:
    def test_closed_form_matches_radial_integration(self):
        models = [
            FixedNoise(0.5),
            ProportionalNoise(0.7),
            JointNormalizedNoise(0.5, 0.8),
        ]
        for model in models:
            for delta, gamma in [(0.0, 1.0), (0.7, 0.1), (2.5, 5.0)]:
                closed = contrast_marginal(delta, (0.0, gamma), model)
                oracle = marginal_by_quadrature(delta, (0.0, gamma), model)
                assert abs(closed - oracle) < 1e-9

    def test_flat_reference_integrates_to_uniform(self):
        assert_allclose(
            marginal_by_quadrature(1.1, (0.0, 0.0), FixedNoise(0.5)), UNIFORM, rtol=1e-9
        )

    def test_rejects_negative_magnitude(self):
        with pytest.raises(ValueError, match="magnitude"):
            marginal_by_quadrature(0.0, (0.0, -2.0), FixedNoise(0.5))


class TestLikelihoodCurve:
    def test_grid_layout(self):
        curve = likelihood_curve((0.0, 1.0), FixedNoise(0.5), n_grid=8)
        assert_allclose(curve.alphas, -np.pi + 2 * np.pi * np.arange(8) / 8, rtol=1e-15)
        assert curve.alphas[0] == -np.pi
        assert curve.alphas[-1] < np.pi

    def test_every_model_normalizes(self):
        models = [
            FixedNoise(0.5),
            ProportionalNoise(0.5),
            JointNormalizedNoise(0.5, 1.7),
        ]
        for model in models:
            curve = likelihood_curve((0.4, 2.3), model, n_grid=4096)
            assert abs(curve.integral() - 1.0) < 1e-6

    def test_random_gradients_normalize(self):
        rng = stream_rng(31, 0)
        for _ in range(5):
            beta = rng.uniform(-np.pi, np.pi)
            gamma = rng.uniform(0.0, 5.0)
            for model in (FixedNoise(0.3), ProportionalNoise(1.0), JointNormalizedNoise(0.4, 0.9)):
                curve = likelihood_curve((beta, gamma), model, n_grid=4096)
                assert abs(curve.integral() - 1.0) < 1e-6

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError, match="n_grid"):
            likelihood_curve((0.0, 1.0), FixedNoise(0.5), n_grid=1)

    def test_validation_rejects_mismatched_arrays(self):
        with pytest.raises(ValueError, match="equal length"):
            LikelihoodCurve(np.zeros(4), np.zeros(5), (0.0, 0.0), FixedNoise(0.5))

    def test_validation_rejects_negative_values(self):
        with pytest.raises(ValueError, match="nonnegative"):
            LikelihoodCurve(np.zeros(4), np.array([0.0, -1.0, 0.0, 0.0]), (0.0, 0.0), FixedNoise(0.5))

    def test_csv_round_trip(self):
        curve = likelihood_curve((0.3, 1.5), FixedNoise(0.5), n_grid=16)
        lines = curve.to_csv().splitlines()
        assert lines[0] == "alpha,value"
        assert len(lines) == 17
        for line, alpha, value in zip(lines[1:], curve.alphas, curve.values):
            a, v = line.split(",")
            assert float(a) == alpha
            assert float(v) == value


class TestBindToPatch:
    def _polar(self, gx, gy):
        return to_polar(compute_gradient(GrayImage(np.add.outer(gy * np.arange(5.0), gx * np.arange(5.0)))))

    def test_fixed_passes_through_unchanged(self):
        model = FixedNoise(0.5)
        assert bind_to_patch(model, self._polar(0.2, 0.1)) is model

    def test_proportional_passes_through_unchanged(self):
        model = ProportionalNoise(0.5)
        assert bind_to_patch(model, self._polar(0.2, 0.1)) is model

    def test_bound_joint_passes_through_unchanged(self):
        model = JointNormalizedNoise(0.5, 3.0)
        assert bind_to_patch(model, self._polar(0.2, 0.1)) is model

    def test_unbound_joint_binds_mean_square_magnitude(self):
        polar = self._polar(0.2, 0.1)
        bound = bind_to_patch(JointNormalizedNoise(0.5), polar)
        assert bound.rho_hat_sq == float(np.mean(polar.magnitude**2))

    def test_flat_patch_is_degenerate(self):
        flat = to_polar(compute_gradient(GrayImage(np.full((5, 5), 0.5))))
        with pytest.raises(DegeneratePatchError):
            bind_to_patch(JointNormalizedNoise(0.5), flat)


class TestPatchLogLikelihood:
    def _fields(self, seed, shape=(6, 7)):
        rng = stream_rng(seed, 0)
        ref = to_polar(compute_gradient(GrayImage(rng.uniform(0.0, 1.0, shape))))
        alpha = rng.uniform(-np.pi, np.pi, shape)
        return alpha, ref

    def test_matches_per_pixel_product(self):
        alpha, ref = self._fields(41)
        model = FixedNoise(0.5)
        expected = sum(
            math.log(
                contrast_marginal(alpha[i, j], (ref.angle[i, j], ref.magnitude[i, j]), model)
            )
            for i in range(ref.shape[0])
            for j in range(ref.shape[1])
        )
        assert_allclose(patch_log_likelihood(alpha, ref, model), expected, rtol=1e-12)

    def test_accepts_polar_gradient_as_orientations(self):
        alpha, ref = self._fields(42)
        other = PolarGradient(alpha * 0.5, np.ones_like(alpha))
        model = FixedNoise(0.5)
        assert patch_log_likelihood(other, ref, model) == patch_log_likelihood(
            other.angle, ref, model
        )

    def test_shape_mismatch_raises(self):
        alpha, ref = self._fields(43)
        with pytest.raises(ValueError, match="does not match"):
            patch_log_likelihood(alpha[:-1], ref, FixedNoise(0.5))

    def test_joint_model_binds_from_reference(self):
        alpha, ref = self._fields(44)
        unbound = patch_log_likelihood(alpha, ref, JointNormalizedNoise(0.5))
        bound = patch_log_likelihood(
            alpha, ref, JointNormalizedNoise(0.5, float(np.mean(ref.magnitude**2)))
        )
        assert unbound == bound


class TestPatchMeanCurve:
    def test_matches_mean_of_per_pixel_curves(self):
        rng = stream_rng(45, 0)
        ref = to_polar(compute_gradient(GrayImage(rng.uniform(0.0, 1.0, (5, 5)))))
        model = FixedNoise(0.4)
        curve = patch_mean_curve(ref, model, n_grid=90)
        stacked = np.mean(
            [
                likelihood_curve((ref.angle[i, j], ref.magnitude[i, j]), model, n_grid=90).values
                for i in range(5)
                for j in range(5)
            ],
            axis=0,
        )
        assert_allclose(curve.values, stacked, rtol=1e-12)
        assert curve.grad == (0.0, 0.0)

    def test_mean_curve_normalizes(self, sample_image):
        polar = to_polar(compute_gradient(sample_image))
        for model in (FixedNoise(0.1), ProportionalNoise(0.5), JointNormalizedNoise(0.5)):
            curve = patch_mean_curve(polar, model, n_grid=1024)
            assert abs(curve.integral() - 1.0) < 1e-6

    def test_affine_image_change_leaves_joint_curve_alone(self, sample_image):
        crop = sample_image.values[8:40, 8:40]
        model = JointNormalizedNoise(0.5)
        base = patch_mean_curve(to_polar(compute_gradient(GrayImage(crop))), model)
        moved = patch_mean_curve(
            to_polar(compute_gradient(GrayImage(2.0 * crop + 0.3))), model
        )
        assert_allclose(moved.values, base.values, rtol=0, atol=1e-10)
