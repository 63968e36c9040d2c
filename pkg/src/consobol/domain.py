"""Models, inequality constraints and the built-in benchmark problems.

A model is a scalar function f defined on the unit hypercube H^n together
with a set of inequality constraints ``g_j(x) >= 0`` that carve the feasible
domain out of H^n.  Everything downstream (samplers, Monte Carlo estimators,
grid quadrature) only ever talks to the two primitives defined here:

* ``indicator``      - 1 inside the feasible domain, 0 outside,
* ``eval_extended``  - f continued by zero outside the feasible domain.

All callables are vectorized: they accept an ``(m, n)`` array of points and
return an ``(m,)`` array.  Models whose natural domain is a general
hyperrectangle must be rescaled to the unit cube by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ConstraintSet",
    "ConstrainedModel",
    "ConstrainedPdf",
    "EmptyFeasibleSampleError",
    "NonFiniteModelValueError",
    "indicator",
    "eval_extended",
    "builtin_model",
    "builtin_constraint",
    "product_2d",
    "g_function",
    "k_function",
]


class EmptyFeasibleSampleError(RuntimeError):
    """Raised when a sample or grid contains no feasible point at all."""


class NonFiniteModelValueError(RuntimeError):
    """Raised when the model returns a non-finite value at a feasible point."""

    def __init__(self, point: np.ndarray, value: float):
        self.point = np.asarray(point)
        self.value = value
        super().__init__(
            f"model value {value!r} is not finite at feasible point "
            f"{self.point.tolist()}"
        )


def _as_points(x, dimension: int) -> np.ndarray:
    """Coerce a single point or an (m, n) batch to a 2-D float array."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != dimension:
        raise ValueError(
            f"expected points of dimension {dimension}, got shape {np.shape(x)}"
        )
    return pts


@dataclass(frozen=True)
class ConstraintSet:
    """A conjunction of inequality constraints ``g_j(x) >= 0``.

    Each constraint is a vectorized callable mapping an ``(m, n)`` array to
    ``(m,)`` values.  A point is feasible iff every constraint is nonnegative
    there; the boundary ``g_j(x) = 0`` counts as feasible.  An empty set means
    the whole hypercube is feasible.
    """

    constraints: tuple[Callable[[np.ndarray], np.ndarray], ...] = ()
    name: str = ""

    def indicator(self, points: np.ndarray) -> np.ndarray:
        """Feasibility of each row of ``points`` as a float 0/1 array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = np.ones(pts.shape[0], dtype=bool)
        for g in self.constraints:
            ok &= np.asarray(g(pts)) >= 0.0
        return ok.astype(float)

    def describe(self) -> str:
        return self.name or f"{len(self.constraints)} constraint(s)"


#: Constraint set accepting every point of the hypercube.
UNCONSTRAINED = ConstraintSet(name="unconstrained")


@dataclass(frozen=True)
class ConstrainedPdf:
    """Explicit joint density on the feasible domain, with its marginals.

    Only needed for the known-density estimator path, where points are drawn
    directly inside the feasible domain (for example with the triangular
    inverse-CDF sampler) and the density values enter the estimators exactly.

    ``joint`` maps ``(m, n)`` points to density values (zero outside the
    feasible domain).  ``marginals[i]`` maps the values of coordinate i to the
    single-coordinate marginal density.  ``complement_marginals[i]``, when
    given, maps the ``(m, n-1)`` array of all coordinates but i to the
    marginal density of that complement block; for two-dimensional models it
    is derived from ``marginals`` automatically.
    """

    joint: Callable[[np.ndarray], np.ndarray]
    marginals: tuple[Callable[[np.ndarray], np.ndarray], ...]
    complement_marginals: tuple[Callable[[np.ndarray], np.ndarray], ...] | None = None

    def complement_marginal(self, i: int, z: np.ndarray) -> np.ndarray:
        """Marginal density of every coordinate except i, at rows ``z``."""
        if self.complement_marginals is not None:
            return np.asarray(self.complement_marginals[i](z), dtype=float)
        if len(self.marginals) == 2:
            other = 1 - i
            return np.asarray(self.marginals[other](np.asarray(z)[:, 0]), dtype=float)
        raise ValueError(
            "complement_marginals must be supplied for models with more than "
            "two inputs"
        )


@dataclass(frozen=True)
class ConstrainedModel:
    """A model function on H^n restricted by inequality constraints.

    Parameters
    ----------
    dimension : int
        Number of inputs n >= 1.
    func : callable
        Vectorized model function, ``(m, n) -> (m,)``.  Must be finite
        everywhere on the hypercube.
    constraint_set : ConstraintSet
        Feasibility constraints; defaults to the unconstrained cube.
    base_density : callable, optional
        Joint density p(x) of the inputs on H^n before constraining.  ``None``
        means the uniform density p = 1.  Must be nonnegative and integrate
        to one over the cube.
    base_sampler : callable, optional
        Transforms an ``(m, n)`` array of uniforms into samples of
        ``base_density``.  Required by the samplers for non-uniform densities;
        uniform needs none.
    constrained_pdf : ConstrainedPdf, optional
        Explicit feasible-domain density for the known-density estimators.
    name : str
        Identifier echoed into result records.
    """

    dimension: int
    func: Callable[[np.ndarray], np.ndarray]
    constraint_set: ConstraintSet = field(default=UNCONSTRAINED)
    base_density: Callable[[np.ndarray], np.ndarray] | None = None
    base_sampler: Callable[[np.ndarray], np.ndarray] | None = None
    constrained_pdf: ConstrainedPdf | None = None
    name: str = ""

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("model dimension must be at least 1")

    def with_constraint(self, constraint_set: ConstraintSet) -> "ConstrainedModel":
        """Copy of this model with a different constraint set attached."""
        return ConstrainedModel(
            dimension=self.dimension,
            func=self.func,
            constraint_set=constraint_set,
            base_density=self.base_density,
            base_sampler=self.base_sampler,
            constrained_pdf=self.constrained_pdf,
            name=self.name,
        )

    def density_values(self, points: np.ndarray) -> np.ndarray:
        """Base density at each row; ones for the uniform default."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.base_density is None:
            return np.ones(pts.shape[0])
        return np.asarray(self.base_density(pts), dtype=float)


def indicator(model: ConstrainedModel, x) -> np.ndarray | float:
    """Feasibility indicator of ``x`` under the model's constraints.

    Accepts a single point (returns a float 0.0/1.0) or an ``(m, n)`` batch
    (returns an ``(m,)`` array).  Boundary points, where some constraint is
    exactly zero, are feasible.
    """
    single = np.asarray(x).ndim == 1
    pts = _as_points(x, model.dimension)
    values = model.constraint_set.indicator(pts)
    return float(values[0]) if single else values


def eval_extended(model: ConstrainedModel, x) -> np.ndarray | float:
    """Model value continued by zero outside the feasible domain.

    The model function itself is only trusted (and checked for finiteness)
    at feasible points; infeasible points contribute exactly zero rather
    than ``0 * f(x)``, so a wild value outside the domain cannot leak in
    through ``0 * inf``.
    """
    single = np.asarray(x).ndim == 1
    pts = _as_points(x, model.dimension)
    inside = model.constraint_set.indicator(pts) > 0.0
    out = np.zeros(pts.shape[0])
    if inside.any():
        vals = np.asarray(model.func(pts[inside]), dtype=float)
        bad = ~np.isfinite(vals)
        if bad.any():
            j = int(np.flatnonzero(bad)[0])
            raise NonFiniteModelValueError(pts[inside][j], float(vals[j]))
        out[inside] = vals
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# built-in benchmark models
# ---------------------------------------------------------------------------

def product_2d() -> ConstrainedModel:
    """The two-input product model f(x1, x2) = x1 * x2."""
    return ConstrainedModel(
        dimension=2,
        func=lambda x: x[:, 0] * x[:, 1],
        name="product2d",
    )


def g_function(a: Sequence[float] = (0.0, 1.0)) -> ConstrainedModel:
    """Multiplicative benchmark with per-input importance parameters.

    f(x) = prod_i (|4 x_i - 2| + a_i) / (1 + a_i), with a_i >= 0.  Small a_i
    makes input i important; a_i -> infinity flattens its factor to 1.
    """
    coeffs = np.asarray(a, dtype=float)
    if coeffs.ndim != 1 or coeffs.size < 1:
        raise ValueError("g-function needs a 1-D parameter vector")
    if np.any(coeffs < 0):
        raise ValueError("g-function parameters must satisfy a_i >= 0")

    def f(x, _a=coeffs):
        return np.prod((np.abs(4.0 * x - 2.0) + _a) / (1.0 + _a), axis=1)

    return ConstrainedModel(
        dimension=coeffs.size,
        func=f,
        name=f"gfunction({','.join(repr(float(c)) for c in coeffs)})",
    )


def k_function(n: int = 4) -> ConstrainedModel:
    """Alternating cumulative-product benchmark of dimension n.

    f(x) = sum_{i=1..n} (-1)^i prod_{j<=i} x_j.  Multilinear, with values
    in [-1, 0] on the unit cube.
    """
    if n < 1:
        raise ValueError("k-function dimension must be at least 1")

    def f(x, _n=n):
        prefix = np.cumprod(x, axis=1)
        signs = np.where(np.arange(1, _n + 1) % 2 == 1, -1.0, 1.0)
        return prefix @ signs

    return ConstrainedModel(dimension=n, func=f, name=f"kfunction({n})")


# ---------------------------------------------------------------------------
# built-in constraints
# ---------------------------------------------------------------------------

def upper_triangle() -> ConstraintSet:
    """Feasible half of the unit square above the anti-diagonal: x1 + x2 >= 1."""
    return ConstraintSet(
        constraints=(lambda x: x[:, 0] + x[:, 1] - 1.0,),
        name="upper_triangle",
    )


def linear_alpha(alpha: float) -> ConstraintSet:
    """Region of the unit square below the line 1 - tan(alpha) x1 - x2 = 0.

    ``alpha`` is the angle between the top side of the square and the cutting
    line and must lie in [0, pi/2).  alpha = 0 leaves the square unconstrained
    in measure; alpha -> pi/2 collapses the region to the segment x1 = 0.
    """
    if not 0.0 <= alpha < math.pi / 2.0:
        raise ValueError("alpha must lie in [0, pi/2)")
    slope = math.tan(alpha)
    return ConstraintSet(
        constraints=(lambda x, _t=slope: 1.0 - _t * x[:, 0] - x[:, 1],),
        name=f"linear_alpha({alpha!r})",
    )


def parabolic_beta(beta: float) -> ConstraintSet:
    """Part of the unit square above the parabola x2 = beta * x1 * (1 - x1).

    Connected for beta <= 4, disconnected for beta > 4; beta = 0 is vacuous.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return ConstraintSet(
        constraints=(lambda x, _b=beta: x[:, 1] - _b * x[:, 0] * (1.0 - x[:, 0]),),
        name=f"parabolic_beta({beta!r})",
    )


def _pair_sum_cap(i: int, j: int, label: str) -> ConstraintSet:
    return ConstraintSet(
        constraints=(lambda x, _i=i, _j=j: 1.0 - x[:, _i] - x[:, _j],),
        name=label,
    )


def k_constraint_1() -> ConstraintSet:
    """Half-space x1 + x2 <= 1 (four-dimensional benchmark, first case)."""
    return _pair_sum_cap(0, 1, "k_I1")


def k_constraint_2() -> ConstraintSet:
    """Half-space x3 + x4 <= 1 (four-dimensional benchmark, second case)."""
    return _pair_sum_cap(2, 3, "k_I2")


def k_constraint_3() -> ConstraintSet:
    """Half-space x1 + x3 <= 1 (four-dimensional benchmark, third case)."""
    return _pair_sum_cap(0, 2, "k_I3")


_MODEL_BUILDERS: dict[str, Callable[..., ConstrainedModel]] = {
    "product2d": product_2d,
    "gfunction": g_function,
    "kfunction": k_function,
}

_CONSTRAINT_BUILDERS: dict[str, Callable[..., ConstraintSet]] = {
    "upper_triangle": upper_triangle,
    "linear_alpha": linear_alpha,
    "parabolic_beta": parabolic_beta,
    "k_I1": k_constraint_1,
    "k_I2": k_constraint_2,
    "k_I3": k_constraint_3,
    "none": lambda: UNCONSTRAINED,
}


def builtin_model(name: str, *args, **kwargs) -> ConstrainedModel:
    """Look up a built-in model by the string name used in CLI configs.

    Known names: ``product2d``, ``gfunction`` (parameter vector a),
    ``kfunction`` (dimension n).
    """
    try:
        builder = _MODEL_BUILDERS[name]
    except KeyError:
        raise ValueError(
            f"unknown model {name!r}; available: {sorted(_MODEL_BUILDERS)}"
        ) from None
    return builder(*args, **kwargs)


def builtin_constraint(name: str, *args, **kwargs) -> ConstraintSet:
    """Look up a built-in constraint set by its CLI string name.

    Known names: ``upper_triangle``, ``linear_alpha`` (angle), ``parabolic_beta``
    (curvature), ``k_I1``, ``k_I2``, ``k_I3``, ``none``.  Custom predicates can
    be used by constructing a :class:`ConstraintSet` directly.
    """
    try:
        builder = _CONSTRAINT_BUILDERS[name]
    except KeyError:
        raise ValueError(
            f"unknown constraint {name!r}; available: {sorted(_CONSTRAINT_BUILDERS)}"
        ) from None
    return builder(*args, **kwargs)
