"""Deterministic grid quadrature for means, variances and both index types.

All integrals are taken with the tensor-product trapezoidal rule on a closed
uniform grid over a (possibly bracketed) axis-aligned box.  The indicator of
the feasible domain is evaluated pointwise at the nodes; no cell-fraction
smoothing is applied, so the rule stays second order away from the feasible
boundary and the boundary contributes the grid-resolution error discussed in
the convergence tests.  Higher-order rules would gain nothing here because
the integrands jump at the feasible boundary.

The per-index formulas reduce every quantity to weighted contractions of two
node tables, F = f * p * I (zero-extended) and P = p * I, which makes the
two-dimensional complementarity S_1 + S_2T = 1 hold to machine precision:
both sides are computed from the same inner sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .domain import ConstrainedModel, ConstraintSet, NonFiniteModelValueError, eval_extended
from .samplers import BoundingBox, bracket_domain

__all__ = [
    "GridSpec",
    "QuadratureResult",
    "NodeBudgetError",
    "DegenerateVarianceError",
    "EmptyDomainAtResolution",
    "trapezoid_integrate",
    "quad_mean_variance",
    "quad_main_effect",
    "quad_total_effect",
    "quadrature_indices",
    "sweep_constraint_parameter",
    "SweepTable",
]

#: Outer nodes whose marginal falls below this fraction of the axis maximum
#: contribute zero to the index integrals (resolves 0/0 outside the domain).
MARGINAL_EPS_REL = 1e-12

DEFAULT_NODE_BUDGET = 1e8


class NodeBudgetError(RuntimeError):
    """Raised when k^n would exceed the configured node budget."""


class DegenerateVarianceError(RuntimeError):
    """Raised when the total variance is zero (indices undefined)."""


class EmptyDomainAtResolution(RuntimeError):
    """Raised when no grid node is feasible at the requested resolution."""


@dataclass(frozen=True)
class GridSpec:
    """Closed uniform grid: ``k`` nodes per axis over a bounding box.

    Node count is k^n with both box faces included on every axis; k may not
    be smaller than 4.  Construction refuses grids beyond ``node_budget``
    nodes (default 1e8) to keep memory and runtime bounded.
    """

    k: int
    box: BoundingBox
    node_budget: float = field(default=DEFAULT_NODE_BUDGET, compare=False)

    def __post_init__(self):
        if self.k < 4:
            raise ValueError("k must be at least 4")
        if float(self.k) ** self.box.dimension > self.node_budget:
            raise NodeBudgetError(
                f"grid of {self.k}^{self.box.dimension} nodes exceeds the node "
                f"budget of {self.node_budget:.3g}; lower k or raise node_budget"
            )

    @property
    def dimension(self) -> int:
        return self.box.dimension

    @property
    def node_count(self) -> int:
        return self.k ** self.dimension

    @classmethod
    def unit(cls, k: int, dimension: int, node_budget: float = DEFAULT_NODE_BUDGET) -> "GridSpec":
        return cls(k=k, box=BoundingBox.unit(dimension), node_budget=node_budget)

    @classmethod
    def for_model(cls, model: ConstrainedModel, k: int, bracket: bool = True,
                  probe_k: int | None = None,
                  node_budget: float = DEFAULT_NODE_BUDGET) -> "GridSpec":
        """Grid over the bracketed bounding box (or the unit cube)."""
        if bracket:
            box = bracket_domain(model, probe_k=probe_k or k)
        else:
            box = BoundingBox.unit(model.dimension)
        return cls(k=k, box=box, node_budget=node_budget)

    def axes(self) -> list[np.ndarray]:
        return [
            np.linspace(self.box.lower[i], self.box.upper[i], self.k)
            for i in range(self.dimension)
        ]

    def weights(self) -> list[np.ndarray]:
        """Per-axis trapezoidal weight vectors (h * [1/2, 1, ..., 1, 1/2])."""
        out = []
        for i in range(self.dimension):
            h = (self.box.upper[i] - self.box.lower[i]) / (self.k - 1)
            w = np.full(self.k, h)
            w[0] = w[-1] = h / 2.0
            out.append(w)
        return out


def _grid_blocks(axes: Sequence[np.ndarray], chunk_rows: int = 1 << 20):
    """Yield (slice along axis 0, (rows, n) point block) over the tensor grid."""
    n = len(axes)
    shape = tuple(len(ax) for ax in axes)
    tail = int(np.prod(shape[1:], dtype=np.int64)) if n > 1 else 1
    tail_mesh = None
    if n > 1:
        tail_mesh = np.stack(
            np.meshgrid(*axes[1:], indexing="ij"), axis=-1
        ).reshape(tail, n - 1)
    step = max(1, chunk_rows // max(tail, 1))
    for start in range(0, shape[0], step):
        stop = min(start + step, shape[0])
        block = np.empty(((stop - start) * tail, n))
        block[:, 0] = np.repeat(axes[0][start:stop], tail)
        if n > 1:
            block[:, 1:] = np.tile(tail_mesh, (stop - start, 1))
        yield slice(start, stop), block


def _contract(arr: np.ndarray, weights: Sequence[np.ndarray],
              axes_to_contract: Iterable[int]) -> np.ndarray | float:
    """Weighted sum of ``arr`` over the given axes (original axis numbering)."""
    for ax in sorted(axes_to_contract, reverse=True):
        arr = np.tensordot(arr, weights[ax], axes=([ax], [0]))
    return arr


def trapezoid_integrate(integrand: Callable[[np.ndarray], np.ndarray],
                        grid: GridSpec) -> float:
    """Tensor-product trapezoidal integral of ``integrand`` over the grid box.

    ``integrand`` must be vectorized over ``(m, n)`` point arrays and finite at
    every node; a non-finite node value raises with the offending location.
    """
    axes = grid.axes()
    shape = (grid.k,) * grid.dimension
    values = np.empty(shape)
    for rows, block in _grid_blocks(axes):
        v = np.asarray(integrand(block), dtype=float)
        bad = ~np.isfinite(v)
        if bad.any():
            j = int(np.flatnonzero(bad)[0])
            raise NonFiniteModelValueError(block[j], float(v[j]))
        values[rows] = v.reshape(-1, *shape[1:])
    return float(_contract(values, grid.weights(), range(grid.dimension)))


def _tables(model: ConstrainedModel, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Node tables F = f*p*I (zero outside the domain) and P = p*I."""
    if grid.dimension != model.dimension:
        raise ValueError("grid dimension does not match the model")
    shape = (grid.k,) * grid.dimension
    f_table = np.zeros(shape)
    p_table = np.zeros(shape)
    for rows, block in _grid_blocks(grid.axes()):
        ind = model.constraint_set.indicator(block)
        dens = model.density_values(block)
        p_block = ind * dens
        f_block = eval_extended(model, block) * dens
        f_table[rows] = f_block.reshape(-1, *shape[1:])
        p_table[rows] = p_block.reshape(-1, *shape[1:])
    return f_table, p_table


def _guarded_ratio(num_sq: np.ndarray, marg: np.ndarray) -> np.ndarray:
    """num_sq / marg with nodes of vanishing marginal contributing zero."""
    cutoff = MARGINAL_EPS_REL * float(np.max(marg)) if np.max(marg) > 0 else np.inf
    keep = marg > cutoff
    out = np.zeros_like(num_sq)
    np.divide(num_sq, marg, out=out, where=keep)
    return out


@dataclass(frozen=True)
class QuadratureResult:
    """Mean, variance, feasible mass and all indices from one grid pass."""

    f0: float
    variance: float
    scaling: float
    main_effect: np.ndarray
    total_effect: np.ndarray
    k: int
    node_count: int
    box: BoundingBox

    def record(self) -> dict:
        """Flat dict for CSV/JSON emission."""
        out = {"method": "quadrature", "k": self.k, "n_cpu": self.node_count,
               "f0": self.f0, "D": self.variance, "scaling": self.scaling}
        for i, (s, st) in enumerate(zip(self.main_effect, self.total_effect), start=1):
            out[f"S{i}"] = float(s)
            out[f"S{i}T"] = float(st)
        return out


def _moments_from_tables(f_table, p_table, weights, dims) -> tuple[float, float, float]:
    scaling = float(_contract(p_table, weights, range(dims)))
    if scaling <= 0.0:
        raise EmptyDomainAtResolution(
            "feasible mass is zero at this grid resolution; refine the grid"
        )
    f0 = float(_contract(f_table, weights, range(dims))) / scaling
    sq = np.zeros_like(f_table)
    np.divide(f_table * f_table, p_table, out=sq, where=p_table > 0)
    # f^2 * p * I reconstructed as F^2 / P to avoid a third node table
    variance = float(_contract(sq, weights, range(dims))) / scaling - f0 * f0
    return f0, variance, scaling


def quad_mean_variance(model: ConstrainedModel, grid: GridSpec) -> tuple[float, float, float]:
    """Feasible-domain mean, variance and feasible mass ``(f0, D, scaling)``."""
    f_table, p_table = _tables(model, grid)
    return _moments_from_tables(f_table, p_table, grid.weights(), grid.dimension)


def _main_effect_from_tables(f_table, p_table, weights, i, dims, f0, variance, scaling):
    other = [ax for ax in range(dims) if ax != i]
    g = np.asarray(_contract(f_table, weights, other))
    m = np.asarray(_contract(p_table, weights, other))
    num = float(np.dot(_guarded_ratio(g * g, m), weights[i]))
    return (num / scaling - f0 * f0) / variance


def _total_effect_from_tables(f_table, p_table, weights, i, dims, f0, variance, scaling):
    g = np.asarray(_contract(f_table, weights, [i]))
    m = np.asarray(_contract(p_table, weights, [i]))
    # remaining axes keep their relative order once axis i is contracted away
    w_rest = [weights[ax] for ax in range(dims) if ax != i]
    num = float(_contract(_guarded_ratio(g * g, m), w_rest, range(dims - 1)))
    return 1.0 - (num / scaling - f0 * f0) / variance


def quad_main_effect(model: ConstrainedModel, grid: GridSpec, i: int) -> float:
    """Main effect index of input ``i`` by nested trapezoidal integration."""
    f_table, p_table = _tables(model, grid)
    weights = grid.weights()
    f0, variance, scaling = _moments_from_tables(f_table, p_table, weights, grid.dimension)
    if variance <= 0.0:
        raise DegenerateVarianceError("total variance is zero; indices undefined")
    return _main_effect_from_tables(
        f_table, p_table, weights, i, grid.dimension, f0, variance, scaling
    )


def quad_total_effect(model: ConstrainedModel, grid: GridSpec, i: int) -> float:
    """Total effect index of input ``i`` by nested trapezoidal integration."""
    if model.dimension < 2:
        raise ValueError("total effects need at least two inputs")
    f_table, p_table = _tables(model, grid)
    weights = grid.weights()
    f0, variance, scaling = _moments_from_tables(f_table, p_table, weights, grid.dimension)
    if variance <= 0.0:
        raise DegenerateVarianceError("total variance is zero; indices undefined")
    return _total_effect_from_tables(
        f_table, p_table, weights, i, grid.dimension, f0, variance, scaling
    )


def quadrature_indices(model: ConstrainedModel, k: int, bracket: bool = True,
                       probe_k: int | None = None,
                       node_budget: float = DEFAULT_NODE_BUDGET) -> QuadratureResult:
    """All main and total indices from a single pair of node tables.

    The efficient entry point: evaluates the model once per node and shares
    the inner sums across every index, which also enforces the 2-D identity
    S_i + S_jT = 1 exactly at matched grid.
    """
    grid = GridSpec.for_model(model, k, bracket=bracket, probe_k=probe_k,
                              node_budget=node_budget)
    f_table, p_table = _tables(model, grid)
    weights = grid.weights()
    dims = grid.dimension
    f0, variance, scaling = _moments_from_tables(f_table, p_table, weights, dims)
    if variance <= 0.0:
        raise DegenerateVarianceError("total variance is zero; indices undefined")
    main = np.array([
        _main_effect_from_tables(f_table, p_table, weights, i, dims, f0, variance, scaling)
        for i in range(dims)
    ])
    if dims >= 2:
        total = np.array([
            _total_effect_from_tables(f_table, p_table, weights, i, dims, f0, variance, scaling)
            for i in range(dims)
        ])
    else:
        total = np.ones(1)
    return QuadratureResult(
        f0=f0, variance=variance, scaling=scaling,
        main_effect=main, total_effect=total,
        k=grid.k, node_count=grid.node_count, box=grid.box,
    )


@dataclass(frozen=True)
class SweepTable:
    """Rows of a constraint-parameter sweep, ready for CSV emission."""

    rows: tuple[dict, ...]
    columns: tuple[str, ...]

    def to_csv(self, path) -> None:
        from ._io import write_csv
        write_csv(self.rows, self.columns, path)


def sweep_constraint_parameter(
    model: ConstrainedModel,
    constraint_family: Callable[[float], ConstraintSet],
    params: Sequence[float],
    k: int,
    bracket: bool = True,
    node_budget: float = DEFAULT_NODE_BUDGET,
) -> SweepTable:
    """Quadrature indices of ``model`` under a one-parameter constraint family.

    One row per parameter value; rows whose computation fails (for example a
    vanished feasible domain) carry the error message and the sweep continues.
    """
    n = model.dimension
    columns = ["param", "f0", "D"]
    columns += [f"S{i}" for i in range(1, n + 1)]
    columns += [f"S{i}T" for i in range(1, n + 1)]
    columns.append("error")
    rows = []
    for p in params:
        row = {c: "" for c in columns}
        row["param"] = float(p)
        try:
            res = quadrature_indices(
                model.with_constraint(constraint_family(float(p))),
                k=k, bracket=bracket, node_budget=node_budget,
            )
        except Exception as exc:  # per-row failures recorded, sweep continues
            row["error"] = f"{type(exc).__name__}: {exc}"
        else:
            row["f0"] = res.f0
            row["D"] = res.variance
            for i in range(n):
                row[f"S{i + 1}"] = float(res.main_effect[i])
                row[f"S{i + 1}T"] = float(res.total_effect[i])
        rows.append(row)
    return SweepTable(rows=tuple(rows), columns=tuple(columns))
