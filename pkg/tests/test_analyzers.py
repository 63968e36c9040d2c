"""Estimator-style front ends: sklearn conventions and validation."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import consobol as cs
from consobol.analyzers import MonteCarloSobolAnalyzer, QuadratureSobolAnalyzer
from consobol.validation import check_constrained_model, check_unit_points


@pytest.fixture
def triangle():
    return cs.builtin_model("product2d").with_constraint(
        cs.builtin_constraint("upper_triangle")
    )


class TestMonteCarloAnalyzer:
    def test_fit_sets_result_attributes(self, triangle):
        an = MonteCarloSobolAnalyzer(n=2 ** 14).fit(triangle)
        assert an.main_effect_.shape == (2,)
        assert an.main_effect_[0] == pytest.approx(7.0 / 27.0, abs=2e-2)
        assert an.total_effect_[1] == pytest.approx(20.0 / 27.0, abs=2e-2)
        assert an.n_cpu_ == 2 ** 14 * 4
        assert an.n_features_in_ == 2

    def test_get_set_params_and_clone(self, triangle):
        an = MonteCarloSobolAnalyzer(n=1024, seed=5)
        params = an.get_params()
        assert params["n"] == 1024 and params["seed"] == 5
        twin = clone(an).set_params(n=2048)
        assert twin.get_params()["n"] == 2048
        assert an.get_params()["n"] == 1024

    def test_records_require_fit(self):
        with pytest.raises(NotFittedError):
            MonteCarloSobolAnalyzer().records()

    def test_mc_method_uses_seed(self, triangle):
        a = MonteCarloSobolAnalyzer(method="mc", n=1024, seed=1).fit(triangle)
        b = MonteCarloSobolAnalyzer(method="mc", n=1024, seed=1).fit(triangle)
        c = MonteCarloSobolAnalyzer(method="mc", n=1024, seed=2).fit(triangle)
        assert np.array_equal(a.main_effect_, b.main_effect_)
        assert not np.array_equal(a.main_effect_, c.main_effect_)

    def test_invalid_method_rejected(self, triangle):
        with pytest.raises(ValueError):
            MonteCarloSobolAnalyzer(method="quadrature").fit(triangle)


class TestQuadratureAnalyzer:
    def test_fit_matches_function_api(self, triangle):
        an = QuadratureSobolAnalyzer(k=257).fit(triangle)
        direct = cs.quadrature_indices(triangle, k=257)
        assert np.array_equal(an.main_effect_, direct.main_effect)
        assert an.f0_ == direct.f0
        assert an.n_cpu_ == 257 ** 2

    def test_record_fields(self, triangle):
        rec = QuadratureSobolAnalyzer(k=65).fit(triangle).record()
        assert rec["method"] == "quadrature"
        assert {"S1", "S2", "S1T", "S2T", "f0", "D"} <= set(rec)

    def test_unfitted_record(self):
        with pytest.raises(NotFittedError):
            QuadratureSobolAnalyzer().record()


class TestValidationHelpers:
    def test_rejects_non_model(self):
        with pytest.raises(TypeError, match="ConstrainedModel"):
            check_constrained_model(lambda x: x)

    def test_rejects_non_vectorized_function(self):
        model = cs.ConstrainedModel(2, lambda x: 1.0)
        with pytest.raises(ValueError, match="\\(m,"):
            check_constrained_model(model)

    def test_accepts_valid_model(self, triangle):
        assert check_constrained_model(triangle) is triangle

    def test_unit_points(self):
        pts = check_unit_points([[0.0, 1.0]], dimension=2)
        assert pts.shape == (1, 2)
        with pytest.raises(ValueError):
            check_unit_points([[1.5, 0.0]])
        with pytest.raises(ValueError):
            check_unit_points([[0.1, 0.2, 0.3]], dimension=2)

    def test_analyzer_rejects_bad_model(self):
        with pytest.raises(TypeError):
            QuadratureSobolAnalyzer().fit("not a model")
