"""Input validation helpers shared by the estimator-style front ends."""

from __future__ import annotations

import numpy as np

from .domain import ConstrainedModel

__all__ = ["check_constrained_model", "check_unit_points"]


def check_constrained_model(model) -> ConstrainedModel:
    """Validate that ``model`` is a usable :class:`ConstrainedModel`.

    Probes the model function and constraints with a tiny batch to catch
    non-vectorized callables early, with a clearer message than a shape
    error deep inside an estimator.
    """
    if not isinstance(model, ConstrainedModel):
        raise TypeError(
            f"expected a ConstrainedModel, got {type(model).__name__}; build one "
            "with consobol.ConstrainedModel or consobol.builtin_model"
        )
    probe = np.full((2, model.dimension), 0.5)
    try:
        values = np.asarray(model.func(probe), dtype=float)
    except Exception as exc:
        raise ValueError(
            "model function must accept an (m, n) array of points"
        ) from exc
    if values.shape != (2,):
        raise ValueError(
            f"model function must map (m, {model.dimension}) points to (m,) "
            f"values, got output shape {values.shape}"
        )
    ind = model.constraint_set.indicator(probe)
    if ind.shape != (2,):
        raise ValueError("constraints must map (m, n) points to (m,) values")
    return model


def check_unit_points(points, dimension: int | None = None) -> np.ndarray:
    """Coerce to an (m, n) float array and check the unit-cube bounds."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2:
        raise ValueError("points must form an (m, n) array")
    if dimension is not None and pts.shape[1] != dimension:
        raise ValueError(f"expected dimension {dimension}, got {pts.shape[1]}")
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise ValueError("points must lie in the closed unit cube")
    return pts
