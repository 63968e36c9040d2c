"""Estimator-style front ends over the functional core.

These follow the scikit-learn conventions: all configuration lives in the
constructor (so ``get_params`` / ``set_params`` / ``clone`` work), ``fit``
runs the analysis, and the results are exposed as trailing-underscore
attributes.  The "X" of ``fit`` is a :class:`~consobol.domain.ConstrainedModel`
rather than a data matrix; there is nothing to ``predict`` or ``transform``,
the fitted attributes are the product.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .estimators import EstimatorConfig, full_analysis
from .quadrature import quadrature_indices
from .validation import check_constrained_model

__all__ = ["MonteCarloSobolAnalyzer", "QuadratureSobolAnalyzer"]


class MonteCarloSobolAnalyzer(BaseEstimator):
    """Sampling-based main and total effect indices of a constrained model.

    Parameters
    ----------
    method : {"qmc", "mc"}
        Low-discrepancy or pseudorandom sampling.
    n : int
        Base sample size; the model is evaluated n * (dimension + 2) times.
    n_bins : int or None
        Bins of the binned main-effect estimator (None: about sqrt of the
        sample count).
    nz_aux : int
        Auxiliary uniforms per point for the total-effect marginal estimate.
    strategy : {"binned", "pick_freeze"}
        Main-effect estimator reported in ``main_effect_``.
    seed, skip : int
        Stream identity (seed drives "mc", skip offsets "qmc").

    Attributes
    ----------
    main_effect_, total_effect_ : ndarray of shape (dimension,)
    f0_, variance_, scaling_ : float
    n_cpu_ : int
        Number of model evaluations spent.
    result_ : IndexEstimate
        The full result object, including both main-effect variants.
    """

    def __init__(self, method="qmc", n=2 ** 14, n_bins=None, nz_aux=64,
                 strategy="binned", seed=0, skip=0):
        self.method = method
        self.n = n
        self.n_bins = n_bins
        self.nz_aux = nz_aux
        self.strategy = strategy
        self.seed = seed
        self.skip = skip

    def fit(self, X, y=None):
        """Run the analysis on a ConstrainedModel; returns self."""
        model = check_constrained_model(X)
        if self.method not in ("mc", "qmc"):
            raise ValueError("method must be 'mc' or 'qmc'")
        config = EstimatorConfig(
            n=self.n,
            n_bins=self.n_bins,
            nz_aux=self.nz_aux,
            kind="pseudorandom" if self.method == "mc" else "sobol",
            seed=self.seed,
            skip=self.skip,
            strategy=self.strategy,
        )
        result = full_analysis(model, config)
        self.result_ = result
        self.main_effect_ = np.asarray(result.main_effect)
        self.total_effect_ = np.asarray(result.total_effect)
        self.f0_ = result.f0
        self.variance_ = result.variance
        self.scaling_ = result.scaling
        self.n_cpu_ = result.n_cpu
        self.n_features_in_ = model.dimension
        return self

    def records(self) -> list[dict]:
        check_is_fitted(self, "result_")
        return self.result_.records()


class QuadratureSobolAnalyzer(BaseEstimator):
    """Grid-quadrature main and total effect indices of a constrained model.

    Parameters
    ----------
    k : int
        Nodes per dimension of the closed trapezoidal grid (k >= 4).
    bracket : bool
        Enclose the feasible domain in its bounding box before gridding.
    probe_k : int or None
        Probe resolution of the bracketing grid (None: same as k).
    node_budget : float
        Refuse grids with more than this many nodes.

    Attributes mirror :class:`MonteCarloSobolAnalyzer`, with ``n_cpu_`` equal
    to the grid node count and ``result_`` a QuadratureResult.
    """

    def __init__(self, k=257, bracket=True, probe_k=None, node_budget=1e8):
        self.k = k
        self.bracket = bracket
        self.probe_k = probe_k
        self.node_budget = node_budget

    def fit(self, X, y=None):
        """Run the grid analysis on a ConstrainedModel; returns self."""
        model = check_constrained_model(X)
        result = quadrature_indices(
            model, k=self.k, bracket=self.bracket, probe_k=self.probe_k,
            node_budget=self.node_budget,
        )
        self.result_ = result
        self.main_effect_ = np.asarray(result.main_effect)
        self.total_effect_ = np.asarray(result.total_effect)
        self.f0_ = result.f0
        self.variance_ = result.variance
        self.scaling_ = result.scaling
        self.n_cpu_ = result.node_count
        self.n_features_in_ = model.dimension
        return self

    def record(self) -> dict:
        check_is_fitted(self, "result_")
        return self.result_.record()
