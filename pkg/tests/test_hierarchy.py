"""Tests for the two-layer cyclic marginalization toy."""

import itertools
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from invdesc import (
    ToyLayeredModel,
    direct_marginal,
    layered_marginal,
    make_random_model,
    shift_signal,
    stream_rng,
)
from invdesc.hierarchy import (
    MixtureWeights,
    compose_small_shifts,
    feature_maps,
    model_from_json,
    model_to_json,
    receptive_mixture,
)


def _uniform_model(n=4, k1=2, k2=2, n_classes=2, alphabet_size=2):
    """Model whose tables are exactly uniform (all divisors powers of two)."""
    templates = np.full((k1, n, alphabet_size), 1.0 / alphabet_size)
    assignment = np.full((k2, k1, n), 1.0 / (k1 * n))
    top = np.full((n_classes, k2, n), 1.0 / (k2 * n))
    return ToyLayeredModel(templates, assignment, top)


def _enumerated_marginal(y, model, theta):
    """Path-enumeration oracle built from the generative story alone.

    Materializes each shifted template as an explicit emission table and
    multiplies the three conditional probabilities per hidden path, sharing
    no code with the library's evaluators.
    """
    n = model.n
    total = 0.0
    for j in range(model.k2):
        for l2 in range(n):
            for k in range(model.k1):
                for l1 in range(n):
                    shifted = np.roll(model.templates[k], l1, axis=0)
                    emit = 1.0
                    for i in range(n):
                        emit *= shifted[i, y[i]]
                    total += (
                        model.top[theta, j, l2]
                        * model.assignment[j, k, (l1 + l2) % n]
                        * emit
                    )
    return total


class TestToyLayeredModel:
    def test_accessors_report_table_shapes(self):
        """Dimension properties mirror the stored table shapes."""
        model = make_random_model(
            stream_rng(5, 0), n=5, k1=3, k2=2, n_classes=4, alphabet_size=3
        )
        assert model.n == 5
        assert model.k1 == 3
        assert model.k2 == 2
        assert model.n_classes == 4
        assert model.alphabet_size == 3

    def test_tables_are_read_only_copies(self):
        """Stored tables are frozen and detached from the caller's arrays."""
        templates = np.full((2, 4, 2), 0.5)
        model = ToyLayeredModel(
            templates, np.full((2, 2, 4), 1.0 / 8), np.full((2, 2, 4), 1.0 / 8)
        )
        assert not model.templates.flags.writeable
        assert not model.assignment.flags.writeable
        assert not model.top.flags.writeable
        templates[0, 0, 0] = 99.0
        assert model.templates[0, 0, 0] == 0.5

    def test_rejects_non_3d_tables(self):
        with pytest.raises(ValueError, match="3-D"):
            ToyLayeredModel(
                np.full((4, 2), 0.5),
                np.full((2, 2, 4), 1.0 / 8),
                np.full((2, 2, 4), 1.0 / 8),
            )

    def test_rejects_mismatched_assignment_shape(self):
        with pytest.raises(ValueError, match="assignment shape"):
            ToyLayeredModel(
                np.full((2, 4, 2), 0.5),
                np.full((2, 3, 4), 1.0 / 12),
                np.full((2, 2, 4), 1.0 / 8),
            )

    def test_rejects_mismatched_top_shape(self):
        with pytest.raises(ValueError, match="top shape"):
            ToyLayeredModel(
                np.full((2, 4, 2), 0.5),
                np.full((2, 2, 4), 1.0 / 8),
                np.full((2, 3, 4), 1.0 / 12),
            )

    def test_rejects_unnormalized_templates(self):
        templates = np.full((2, 4, 2), 0.5)
        templates[0, 0, 0] = 0.7
        with pytest.raises(ValueError, match="template table"):
            ToyLayeredModel(
                templates, np.full((2, 2, 4), 1.0 / 8), np.full((2, 2, 4), 1.0 / 8)
            )

    def test_rejects_negative_entries(self):
        templates = np.full((2, 4, 2), 0.5)
        templates[0, 0] = [-0.5, 1.5]
        with pytest.raises(ValueError, match="finite and nonnegative"):
            ToyLayeredModel(
                templates, np.full((2, 2, 4), 1.0 / 8), np.full((2, 2, 4), 1.0 / 8)
            )

    def test_rejects_table_normalized_on_wrong_axes(self):
        """Row-wise normalization is not enough; choice tables must sum to 1
        jointly over template and shift."""
        assignment = np.full((2, 2, 4), 1.0 / 4)
        with pytest.raises(ValueError, match="assignment table"):
            ToyLayeredModel(
                np.full((2, 4, 2), 0.5), assignment, np.full((2, 2, 4), 1.0 / 8)
            )


class TestShiftSignal:
    def test_moves_content_forward(self):
        """Shifting by g relocates the symbol at position i to i + g."""
        assert_array_equal(shift_signal([0, 1, 2, 3], 1), [3, 0, 1, 2])
        assert_array_equal(shift_signal([0, 1, 2, 3], -1), [1, 2, 3, 0])

    def test_composes_additively(self):
        y = np.array([4, 0, 2, 1, 3, 5])
        assert_array_equal(shift_signal(shift_signal(y, 2), 3), shift_signal(y, 5))

    def test_full_cycle_is_identity(self):
        y = np.array([1, 0, 1, 1])
        assert_array_equal(shift_signal(y, 4), y)

    def test_rejects_2d_input(self):
        with pytest.raises(ValueError, match="1-D"):
            shift_signal(np.zeros((2, 2), dtype=int), 1)


class TestComposeSmallShifts:
    def test_factors_for_positive_shift(self):
        assert compose_small_shifts(7, 3) == [3, 3, 1]

    def test_factors_for_negative_shift(self):
        assert compose_small_shifts(-7, 3) == [-3, -3, -1]

    def test_zero_shift_gives_empty_list(self):
        assert compose_small_shifts(0, 3) == []

    def test_factors_sum_to_shift_with_bounded_magnitude(self):
        """Every factorization reassembles the shift from nonzero steps of
        magnitude at most the cap, all sharing the shift's sign."""
        for g in range(-9, 10):
            for step in range(1, 5):
                parts = compose_small_shifts(g, step)
                assert sum(parts) == g
                assert all(0 < abs(p) <= step for p in parts)
                assert all(p * g > 0 for p in parts)

    def test_sequential_factors_match_single_shift(self):
        y = np.arange(6)
        for g in (-7, -1, 5, 11):
            shifted = y
            for p in compose_small_shifts(g, 2):
                shifted = shift_signal(shifted, p)
            assert_array_equal(shifted, shift_signal(y, g))

    def test_step_must_be_positive(self):
        with pytest.raises(ValueError, match="step"):
            compose_small_shifts(5, 0)


class TestFeatureMaps:
    def test_matches_positionwise_product_oracle(self):
        """Each entry is the product of per-position emission probabilities
        of the template shifted to that offset."""
        model = make_random_model(stream_rng(11, 0), n=5, k1=3, alphabet_size=3)
        rng = stream_rng(11, 1)
        y = rng.integers(0, 3, size=5)
        maps = feature_maps(y, model)
        assert maps.shape == (3, 5)
        idx = np.arange(5)
        for k in range(3):
            for l1 in range(5):
                expected = np.prod(model.templates[k, (idx - l1) % 5, y])
                assert_allclose(maps[k, l1], expected, rtol=1e-13)

    def test_unshifted_entry_is_plain_template_product(self):
        model = make_random_model(stream_rng(12, 0))
        y = np.array([0, 1, 1, 0, 1, 0])
        maps = feature_maps(y, model)
        expected = np.prod(model.templates[1, np.arange(6), y])
        assert_allclose(maps[1, 0], expected, rtol=1e-13)

    def test_uniform_templates_give_constant_maps(self):
        """With uniform emissions every shift explains the signal equally."""
        model = _uniform_model()
        maps = feature_maps(np.array([0, 1, 1, 0]), model)
        assert_array_equal(maps, np.full((2, 4), 0.5**4))

    def test_rejects_float_signal(self):
        with pytest.raises(ValueError, match="integers"):
            feature_maps(np.array([0.0, 1.0, 0.0, 1.0]), _uniform_model())

    def test_rejects_out_of_range_symbol(self):
        with pytest.raises(ValueError, match="symbols"):
            feature_maps(np.array([0, 1, 2, 0]), _uniform_model())

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError, match="length"):
            feature_maps(np.array([0, 1, 0]), _uniform_model())


class TestDirectMarginal:
    def test_matches_independent_path_enumeration(self):
        """Summing every hidden path agrees with a from-scratch enumeration
        that materializes each shifted template explicitly."""
        shapes = [
            dict(n=4, k1=2, k2=2, n_classes=2, alphabet_size=2),
            dict(n=5, k1=3, k2=2, n_classes=2, alphabet_size=3),
            dict(n=3, k1=2, k2=3, n_classes=3, alphabet_size=2),
        ]
        for seed, kwargs in enumerate(shapes):
            model = make_random_model(stream_rng(100 + seed, 0), **kwargs)
            rng = stream_rng(100 + seed, 1)
            y = rng.integers(0, kwargs["alphabet_size"], size=kwargs["n"])
            for theta in range(kwargs["n_classes"]):
                assert_allclose(
                    direct_marginal(y, model, theta),
                    _enumerated_marginal(y, model, theta),
                    rtol=1e-12,
                )

    def test_uniform_model_gives_uniform_probability(self):
        model = _uniform_model()
        for y in ([0, 0, 0, 0], [1, 0, 1, 1]):
            assert_allclose(
                direct_marginal(np.array(y), model, 0), 0.5**4, rtol=1e-14
            )

    def test_total_probability_sums_to_one(self):
        """Enumerating the whole signal space recovers unit mass per class."""
        model = make_random_model(stream_rng(31, 0), n=4)
        for theta in range(model.n_classes):
            total = sum(
                direct_marginal(np.array(y), model, theta)
                for y in itertools.product(range(model.alphabet_size), repeat=4)
            )
            assert_allclose(total, 1.0, atol=1e-10)

    def test_class_index_validation(self):
        model = _uniform_model()
        with pytest.raises(ValueError, match="class index"):
            direct_marginal(np.array([0, 1, 0, 1]), model, 2)
        with pytest.raises(ValueError, match="class index"):
            direct_marginal(np.array([0, 1, 0, 1]), model, -1)


class TestLayeredMarginal:
    def test_matches_direct_on_random_models(self):
        """The layered contraction reproduces brute-force path summation."""
        rng = stream_rng(77, 0)
        worst = 0.0
        for seed in range(10):
            model = make_random_model(
                stream_rng(200 + seed, 0),
                n=int(rng.integers(3, 7)),
                k1=int(rng.integers(1, 4)),
                k2=int(rng.integers(1, 4)),
                n_classes=int(rng.integers(1, 3)),
                alphabet_size=int(rng.integers(2, 4)),
            )
            for _ in range(3):
                y = rng.integers(0, model.alphabet_size, size=model.n)
                theta = int(rng.integers(0, model.n_classes))
                gap = abs(
                    layered_marginal(y, model, theta) - direct_marginal(y, model, theta)
                )
                worst = max(worst, gap)
        assert worst < 1e-12

    def test_shift_covariance_matches_rolled_top(self):
        """Shifting the signal is equivalent to cycling the layer-2 shift law."""
        model = make_random_model(stream_rng(42, 0), n=6)
        rng = stream_rng(42, 1)
        y = rng.integers(0, model.alphabet_size, size=6)
        for g in (1, 2, 5):
            rolled = ToyLayeredModel(
                model.templates, model.assignment, np.roll(model.top, g, axis=2)
            )
            assert_allclose(
                layered_marginal(shift_signal(y, g), model, 0),
                layered_marginal(y, rolled, 0),
                rtol=1e-12,
            )

    def test_probability_lies_in_unit_interval(self):
        model = make_random_model(stream_rng(43, 0))
        y = stream_rng(43, 1).integers(0, model.alphabet_size, size=model.n)
        value = layered_marginal(y, model, 1)
        assert 0.0 < value < 1.0

    def test_rejects_float_signal(self):
        with pytest.raises(ValueError, match="integers"):
            layered_marginal(np.zeros(4), _uniform_model(), 0)


class TestReceptiveMixture:
    def test_weighted_average_of_table(self):
        weights = MixtureWeights(np.full((2, 2), 0.25))
        value = receptive_mixture([[1.0, 2.0], [3.0, 4.0]], weights)
        assert_allclose(value, 2.5, rtol=1e-15)

    def test_bounded_by_feature_extremes(self):
        """A convex combination never leaves the feature range."""
        rng = stream_rng(55, 0)
        raw = rng.uniform(0.1, 1.0, (3, 4))
        weights = MixtureWeights(raw / raw.sum())
        features = rng.uniform(-5.0, 5.0, (3, 4))
        value = receptive_mixture(features, weights)
        assert features.min() <= value <= features.max()

    def test_constant_table_is_fixed_point(self):
        rng = stream_rng(56, 0)
        raw = rng.uniform(0.1, 1.0, (2, 5))
        weights = MixtureWeights(raw / raw.sum())
        assert_allclose(
            receptive_mixture(np.full((2, 5), -1.75), weights), -1.75, rtol=1e-14
        )

    def test_weights_must_be_2d(self):
        with pytest.raises(ValueError, match="2-D"):
            MixtureWeights(np.full(4, 0.25))

    def test_weights_must_be_nonnegative(self):
        with pytest.raises(ValueError, match="nonnegative"):
            MixtureWeights(np.array([[1.5, -0.5], [0.0, 0.0]]))

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            MixtureWeights(np.full((2, 2), 0.3))

    def test_shape_mismatch_raises(self):
        weights = MixtureWeights(np.full((2, 2), 0.25))
        with pytest.raises(ValueError, match="does not match"):
            receptive_mixture(np.ones((3, 2)), weights)

    def test_non_finite_features_raise(self):
        weights = MixtureWeights(np.full((2, 2), 0.25))
        with pytest.raises(ValueError, match="finite"):
            receptive_mixture(np.array([[1.0, np.nan], [0.0, 0.0]]), weights)


class TestMakeRandomModel:
    def test_same_seed_reproduces_tables(self):
        first = make_random_model(stream_rng(21, 0))
        second = make_random_model(stream_rng(21, 0))
        assert_array_equal(first.templates, second.templates)
        assert_array_equal(first.assignment, second.assignment)
        assert_array_equal(first.top, second.top)

    def test_default_shapes(self):
        model = make_random_model(stream_rng(22, 0))
        assert model.templates.shape == (2, 6, 2)
        assert model.assignment.shape == (2, 2, 6)
        assert model.top.shape == (2, 2, 6)

    def test_tables_normalized_on_outcome_axes(self):
        model = make_random_model(
            stream_rng(23, 0), n=5, k1=3, k2=2, n_classes=3, alphabet_size=4
        )
        assert_allclose(model.templates.sum(axis=2), 1.0, atol=1e-13)
        assert_allclose(model.assignment.sum(axis=(1, 2)), 1.0, atol=1e-13)
        assert_allclose(model.top.sum(axis=(1, 2)), 1.0, atol=1e-13)

    def test_custom_shapes(self):
        model = make_random_model(
            stream_rng(24, 0), n=3, k1=1, k2=4, n_classes=5, alphabet_size=2
        )
        assert model.templates.shape == (1, 3, 2)
        assert model.assignment.shape == (4, 1, 3)
        assert model.top.shape == (5, 4, 3)


class TestModelJson:
    def test_round_trip_preserves_tables_exactly(self):
        model = make_random_model(stream_rng(61, 0), n=4, alphabet_size=3)
        restored = model_from_json(model_to_json(model))
        assert_array_equal(restored.templates, model.templates)
        assert_array_equal(restored.assignment, model.assignment)
        assert_array_equal(restored.top, model.top)

    def test_missing_key_raises(self):
        text = json.dumps({"templates": [], "assignment": []})
        with pytest.raises(ValueError, match="missing keys"):
            model_from_json(text)

    def test_tampered_table_fails_validation(self):
        """Deserialization re-runs the normalization checks, so an edited
        table cannot sneak back in."""
        data = json.loads(model_to_json(make_random_model(stream_rng(62, 0))))
        data["templates"][0][0][0] *= 1.5
        with pytest.raises(ValueError, match="template table"):
            model_from_json(json.dumps(data))
