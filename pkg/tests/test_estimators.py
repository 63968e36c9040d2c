"""Monte Carlo estimators: moments, bins, main/total effects, known-density path."""

import numpy as np
import pytest

import consobol as cs
from consobol.domain import ConstrainedModel, EmptyFeasibleSampleError
from consobol.estimators import (
    EstimatorConfig,
    binned_main_effect,
    default_bin_count,
    draw_paired_design,
    estimate_mean_variance,
    estimate_scaling,
    full_analysis,
    known_pdf_estimators,
    partition_bins,
    pick_freeze_main_effect,
    pick_freeze_total_effect,
    sample_moments,
)
from consobol.quadrature import DegenerateVarianceError
from consobol.samplers import SampleBatch, draw_batch, make_batch, point_stream, sample_triangle

TRIANGLE_EXACT = dict(f0=5.0 / 12.0, D=3.0 / 80.0, S=7.0 / 27.0, ST=20.0 / 27.0)


def triangle_model(with_pdf=False):
    model = cs.builtin_model("product2d").with_constraint(
        cs.builtin_constraint("upper_triangle")
    )
    if with_pdf:
        model = ConstrainedModel(
            dimension=2, func=model.func, constraint_set=model.constraint_set,
            constrained_pdf=cs.triangle_constrained_pdf(), name="product_triangle",
        )
    return model


def batch_of(model, n, kind="sobol", seed=0):
    return draw_batch(point_stream(kind, model.dimension, seed=seed), model, n)


class TestScalingAndMoments:
    def test_unconstrained_scaling_is_exactly_one(self):
        batch = batch_of(cs.builtin_model("gfunction", (0.0, 1.0)), 512)
        assert estimate_scaling(batch) == 1.0

    def test_triangle_scaling(self):
        batch = batch_of(triangle_model(), 2 ** 16)
        # dyadic alignment of the boundary line inflates the first block by 2^-9
        assert estimate_scaling(batch) == pytest.approx(0.5, abs=2e-3)

    def test_parabolic_scaling(self):
        model = cs.builtin_model("gfunction", (0.0, 1.0)).with_constraint(
            cs.builtin_constraint("parabolic_beta", 4.0)
        )
        assert estimate_scaling(batch_of(model, 2 ** 16)) == pytest.approx(1 / 3, abs=2e-3)

    def test_no_feasible_samples_error(self):
        batch = SampleBatch(
            points=np.random.default_rng(0).random((8, 2)),
            indicators=np.zeros(8), f_values=np.zeros(8), source={},
        )
        with pytest.raises(EmptyFeasibleSampleError):
            estimate_scaling(batch)

    def test_triangle_mean_variance(self):
        f0, var = estimate_mean_variance(batch_of(triangle_model(), 2 ** 18))
        assert f0 == pytest.approx(TRIANGLE_EXACT["f0"], abs=1e-3)
        assert var == pytest.approx(TRIANGLE_EXACT["D"], abs=1e-3)

    def test_unconstrained_product_mean_variance(self):
        f0, var = estimate_mean_variance(batch_of(cs.builtin_model("product2d"), 2 ** 16))
        assert f0 == pytest.approx(0.25, abs=1e-3)
        assert var == pytest.approx(7.0 / 144.0, abs=1e-3)

    def test_g_linear_pi4_mean_variance(self):
        model = cs.reference("g_linear_pi4").make_model()
        f0, var = estimate_mean_variance(batch_of(model, 2 ** 18))
        assert f0 == pytest.approx(1.0, abs=2e-3)
        assert var == pytest.approx(4.0 / 9.0, abs=2e-3)

    def test_moments_invariant_to_row_permutation(self):
        batch = batch_of(triangle_model(), 4096)
        perm = np.random.default_rng(1).permutation(batch.size)
        shuffled = SampleBatch(
            points=batch.points[perm], indicators=batch.indicators[perm],
            f_values=batch.f_values[perm], source={},
        )
        a, b = sample_moments(batch), sample_moments(shuffled)
        assert a.f0 == pytest.approx(b.f0, abs=1e-12)
        assert a.variance == pytest.approx(b.variance, abs=1e-12)
        assert a.scaling == b.scaling


class TestPartitionBins:
    def test_sort_and_split_by_value(self):
        coords = np.array([0.9, 0.1, 0.5, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6])
        batch = SampleBatch(
            points=coords[:, None], indicators=np.ones(9), f_values=coords, source={},
        )
        part = partition_bins(batch, 0, 3)
        grouped = [sorted(coords[m]) for m in part.members]
        assert grouped == [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 0.9]]

    def test_all_equal_coordinates_keep_stable_order(self):
        batch = SampleBatch(
            points=np.zeros((6, 1)), indicators=np.ones(6),
            f_values=np.arange(6.0), source={},
        )
        part = partition_bins(batch, 0, 3)
        assert np.array_equal(part.members, [[0, 1], [2, 3], [4, 5]])

    def test_remainder_dropped_from_largest(self):
        coords = np.linspace(0, 1, 10)
        batch = SampleBatch(points=coords[:, None], indicators=np.ones(10),
                            f_values=coords, source={})
        part = partition_bins(batch, 0, 3)
        used = np.concatenate(part.members)
        assert used.size == 9
        assert 9 not in used  # the largest-coordinate row is the one left out

    def test_bin_count_exceeding_sample_rejected(self):
        batch = SampleBatch(points=np.zeros((3, 1)), indicators=np.ones(3),
                            f_values=np.zeros(3), source={})
        with pytest.raises(ValueError):
            partition_bins(batch, 0, 4)

    def test_locate_maps_values_to_bins(self):
        coords = np.linspace(0, 1, 16)
        batch = SampleBatch(points=coords[:, None], indicators=np.ones(16),
                            f_values=coords, source={})
        part = partition_bins(batch, 0, 4)
        assert list(part.locate([0.0, 0.3, 0.99])) == [0, 1, 3]

    def test_default_bin_count_rule(self):
        assert default_bin_count(65536) == 256
        assert default_bin_count(4) == 2


class TestMainAndTotalEffects:
    def test_additive_single_variable_function(self):
        model = ConstrainedModel(2, lambda x: x[:, 0], name="first-coordinate")
        est = full_analysis(model, EstimatorConfig(n=2 ** 16, kind="sobol"))
        assert est.main_effect[0] == pytest.approx(1.0, abs=2e-2)
        assert est.main_effect[1] == pytest.approx(0.0, abs=2e-2)
        assert est.total_effect[0] == pytest.approx(1.0, abs=2e-2)
        assert est.total_effect[1] == pytest.approx(0.0, abs=2e-2)

    def test_binned_main_effect_on_triangle(self):
        batch = batch_of(triangle_model(), 2 ** 16)
        s1 = binned_main_effect(batch, 0)
        assert s1 == pytest.approx(TRIANGLE_EXACT["S"], abs=1e-2)

    def test_binned_main_effect_g_linear(self):
        model = cs.reference("g_linear_pi6").make_model()
        batch = batch_of(model, 2 ** 16)
        assert binned_main_effect(batch, 0) == pytest.approx(0.7703487112, abs=1e-2)

    def test_pick_freeze_main_effect_on_triangle(self):
        design = draw_paired_design(triangle_model(), EstimatorConfig(n=2 ** 18, kind="sobol"))
        s1, skipped = pick_freeze_main_effect(design, 0)
        assert s1 == pytest.approx(TRIANGLE_EXACT["S"], abs=2e-2)
        assert skipped == 0

    def test_total_effect_on_triangle(self):
        design = draw_paired_design(triangle_model(), EstimatorConfig(n=2 ** 16, kind="sobol"))
        s2t, _ = pick_freeze_total_effect(design, 1)
        assert s2t == pytest.approx(TRIANGLE_EXACT["ST"], abs=2e-2)

    def test_g_linear_total_effect_complement(self):
        model = cs.reference("g_linear_pi6").make_model()
        design = draw_paired_design(model, EstimatorConfig(n=2 ** 16, kind="sobol"))
        s2t, _ = pick_freeze_total_effect(design, 1)
        assert s2t == pytest.approx(1.0 - 0.7703487112, abs=2e-2)

    def test_constant_function_degenerate_variance(self):
        model = ConstrainedModel(2, lambda x: np.full(x.shape[0], 3.0))
        with pytest.raises(DegenerateVarianceError):
            full_analysis(model, EstimatorConfig(n=256, kind="pseudorandom"))

    def test_binned_needs_feasible_bins(self):
        batch = SampleBatch(
            points=np.random.default_rng(2).random((64, 2)),
            indicators=np.zeros(64), f_values=np.zeros(64), source={},
        )
        with pytest.raises(EmptyFeasibleSampleError):
            binned_main_effect(batch, 0, moments=None)


class TestFullAnalysis:
    def test_triangle_both_index_families_in_one_run(self):
        est = full_analysis(triangle_model(), EstimatorConfig(n=2 ** 16, kind="sobol"))
        assert est.main_effect == pytest.approx([TRIANGLE_EXACT["S"]] * 2, abs=1e-2)
        assert est.total_effect == pytest.approx([TRIANGLE_EXACT["ST"]] * 2, abs=2e-2)

    def test_unconstrained_g_importance_ordering(self):
        # a1 = 0 makes the first input dominate both index families
        model = cs.builtin_model("gfunction", (0.0, 1.0))
        est = full_analysis(model, EstimatorConfig(n=2 ** 14, kind="sobol"))
        assert est.main_effect[0] > est.main_effect[1]
        assert est.total_effect[0] > est.total_effect[1]

    def test_n_cpu_accounting(self):
        est = full_analysis(
            cs.builtin_model("kfunction", 4),
            EstimatorConfig(n=1024, kind="pseudorandom", seed=1),
        )
        assert est.n_cpu == 1024 * 6

    def test_strategy_selects_main_estimator(self):
        model = triangle_model()
        a = full_analysis(model, EstimatorConfig(n=4096, kind="sobol", strategy="binned"))
        b = full_analysis(model, EstimatorConfig(n=4096, kind="sobol", strategy="pick_freeze"))
        assert np.array_equal(a.main_effect, a.main_effect_binned)
        assert np.array_equal(b.main_effect, b.main_effect_pick_freeze)
        # both variants live on every result regardless of the strategy
        assert np.array_equal(a.main_effect_pick_freeze, b.main_effect_pick_freeze)

    def test_deterministic_given_config(self):
        cfg = EstimatorConfig(n=2048, kind="pseudorandom", seed=11)
        a = full_analysis(triangle_model(), cfg)
        b = full_analysis(triangle_model(), cfg)
        assert a.records() == b.records()

    def test_records_schema(self):
        est = full_analysis(triangle_model(), EstimatorConfig(n=1024, kind="sobol"))
        rec = est.records()[0]
        for key in ("variable", "S", "S_T", "estimator", "N", "N_bins", "N_aux",
                    "scaling", "f0", "D", "N_cpu", "skipped_terms", "kind", "skip"):
            assert key in rec
        assert rec["N_cpu"] == 1024 * 4

    def test_negative_estimates_flagged_not_clamped(self):
        # tiny sample with a nearly flat response makes negative estimates likely
        model = ConstrainedModel(2, lambda x: x[:, 0] + 0.01 * x[:, 1])
        est = full_analysis(model, EstimatorConfig(n=64, kind="pseudorandom", seed=3))
        if np.any(est.main_effect < 0) or np.any(est.total_effect < 0):
            assert est.warnings
        # re-running with the same config reproduces the raw values exactly
        again = full_analysis(model, EstimatorConfig(n=64, kind="pseudorandom", seed=3))
        assert np.array_equal(est.main_effect, again.main_effect)

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            EstimatorConfig(n=2)
        with pytest.raises(ValueError):
            EstimatorConfig(n=64, n_bins=64)
        with pytest.raises(ValueError):
            EstimatorConfig(n=64, nz_aux=0)
        with pytest.raises(ValueError):
            EstimatorConfig(n=64, strategy="magic")


class TestKnownPdfPath:
    def setup_method(self):
        self.model = triangle_model(with_pdf=True)
        u = point_stream("pseudorandom", 4, seed=11).take(2 ** 16)
        self.base = make_batch(self.model, sample_triangle(u[:, :2]))
        self.alt = make_batch(self.model, sample_triangle(u[:, 2:]))

    def test_binned_main_effect(self):
        kp = known_pdf_estimators(self.model, self.base, self.alt, 0)
        assert kp.main_binned == pytest.approx(TRIANGLE_EXACT["S"], abs=1e-2)

    def test_pick_freeze_main_effect(self):
        kp = known_pdf_estimators(self.model, self.base, self.alt, 0)
        assert kp.main_pick_freeze == pytest.approx(TRIANGLE_EXACT["S"], abs=2e-2)

    def test_total_effect(self):
        kp = known_pdf_estimators(self.model, self.base, self.alt, 1)
        assert kp.total_pick_freeze == pytest.approx(TRIANGLE_EXACT["ST"], abs=3e-2)

    def test_moments(self):
        kp = known_pdf_estimators(self.model, self.base, self.alt, 0)
        assert kp.f0 == pytest.approx(TRIANGLE_EXACT["f0"], abs=2e-3)
        assert kp.variance == pytest.approx(TRIANGLE_EXACT["D"], abs=2e-3)

    def test_requires_declared_pdf(self):
        plain = triangle_model()
        with pytest.raises(ValueError, match="constrained_pdf"):
            known_pdf_estimators(plain, self.base, self.alt, 0)

    def test_vanishing_marginal_is_contract_violation(self):
        # a Sobol' stream without skip starts at the origin: x1 = 0 has
        # marginal density zero, which the estimators must refuse
        u = point_stream("sobol", 4).take(64)
        base = make_batch(self.model, sample_triangle(u[:, :2]))
        alt = make_batch(self.model, sample_triangle(u[:, 2:]))
        with pytest.raises(ValueError, match="inconsistent"):
            known_pdf_estimators(self.model, base, alt, 0)

    def test_batches_must_lie_inside_domain(self):
        pts = np.array([[0.1, 0.1], [0.9, 0.9]])
        outside = make_batch(self.model, pts)
        with pytest.raises(ValueError, match="inside"):
            known_pdf_estimators(self.model, outside, outside, 0)
