"""Point streams, acceptance-rejection batches and domain bracketing.

Two kinds of deterministic streams feed every estimator:

* ``pseudorandom`` - PCG64 counter-based generator keyed by a seed,
* ``sobol``        - unscrambled Sobol' low-discrepancy sequence with an
  optional number of skipped initial points.

Both emit coordinates in [0, 1).  A stream is a single-owner cursor: the
i-th point it produces depends only on (kind, seed/skip, dimension, i), so
consecutive blocks drawn from one stream equal blocks drawn at explicit
offsets, and batches are reproducible from the descriptor they carry.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .domain import ConstrainedModel, ConstrainedPdf, EmptyFeasibleSampleError, eval_extended

__all__ = [
    "PointStream",
    "SampleBatch",
    "BoundingBox",
    "DomainNotDetectedError",
    "point_stream",
    "make_batch",
    "draw_batch",
    "bracket_domain",
    "triangle_inverse_cdf",
    "sequential_conditional_sample",
    "triangle_inverse_cdfs",
    "sample_triangle",
    "triangle_constrained_pdf",
]

STREAM_KINDS = ("pseudorandom", "sobol")


class DomainNotDetectedError(RuntimeError):
    """Raised when bracketing finds no feasible point on the probe grid."""


@dataclass
class PointStream:
    """Deterministic stream of points in the half-open unit cube [0, 1)^d.

    Parameters
    ----------
    kind : {"pseudorandom", "sobol"}
        Pseudorandom (PCG64) or low-discrepancy (Sobol', unscrambled).
    dimension : int
        Number of coordinates per point.
    seed : int
        Seed of the pseudorandom generator; ignored for Sobol'.
    skip : int
        Number of initial Sobol' points to skip; ignored for pseudorandom.
        Defaults to 0, which includes the all-zeros first point.
    """

    kind: str
    dimension: int
    seed: int = 0
    skip: int = 0
    cursor: int = field(default=0, init=False)

    def __post_init__(self):
        if self.kind not in STREAM_KINDS:
            raise ValueError(f"stream kind must be one of {STREAM_KINDS}")
        if self.dimension < 1:
            raise ValueError("stream dimension must be positive")
        if self.skip < 0:
            raise ValueError("skip must be nonnegative")
        if self.kind == "pseudorandom":
            self._rng = np.random.default_rng(self.seed)
        else:
            self._engine = qmc.Sobol(d=self.dimension, scramble=False)
            if self.skip:
                self._engine.fast_forward(self.skip)

    def take(self, n: int) -> np.ndarray:
        """Next ``n`` points as an ``(n, dimension)`` array; advances the cursor."""
        if n < 1:
            raise ValueError("n must be positive")
        if self.kind == "pseudorandom":
            pts = self._rng.random((n, self.dimension))
        else:
            with warnings.catch_warnings():
                # the power-of-two balance warning is the caller's concern;
                # defaults throughout the package use power-of-two sizes
                warnings.simplefilter("ignore", UserWarning)
                pts = self._engine.random(n)
        self.cursor += n
        return pts

    def descriptor(self) -> dict:
        """Serializable identity of this stream for result records."""
        out = {"kind": self.kind, "dimension": self.dimension}
        if self.kind == "pseudorandom":
            out["seed"] = self.seed
        else:
            out["skip"] = self.skip
        return out


def point_stream(kind: str, dimension: int, seed: int = 0, skip: int = 0) -> PointStream:
    """Construct a :class:`PointStream` (thin convenience wrapper)."""
    return PointStream(kind=kind, dimension=dimension, seed=seed, skip=skip)


@dataclass(frozen=True)
class SampleBatch:
    """Immutable batch of points with feasibility flags and model values.

    ``f_values`` holds the zero-extended model values, so rows with
    ``indicators == 0`` carry exactly 0.0.  ``source`` records the stream
    descriptor and cursor range the points came from.
    """

    points: np.ndarray
    indicators: np.ndarray
    f_values: np.ndarray
    source: dict

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def accepted_count(self) -> int:
        return int(self.indicators.sum())


def make_batch(model: ConstrainedModel, points: np.ndarray, source: dict | None = None) -> SampleBatch:
    """Evaluate indicator and extended model values on ``points``."""
    pts = np.ascontiguousarray(points, dtype=float)
    ind = model.constraint_set.indicator(pts)
    f = eval_extended(model, pts)
    return SampleBatch(points=pts, indicators=ind, f_values=f, source=source or {})


def draw_batch(stream: PointStream, model: ConstrainedModel, n: int) -> SampleBatch:
    """Draw ``n`` points from the model's base density and evaluate them.

    For the uniform default the stream output is used directly; a non-uniform
    base density requires ``model.base_sampler`` to map the uniforms onto the
    target density.  Raises :class:`EmptyFeasibleSampleError` when not a single
    point lands in the feasible domain.
    """
    if stream.dimension != model.dimension:
        raise ValueError(
            f"stream dimension {stream.dimension} != model dimension {model.dimension}"
        )
    if model.base_density is not None and model.base_sampler is None:
        raise ValueError(
            "model has a non-uniform base density but no base_sampler to draw from it"
        )
    source = stream.descriptor()
    source["offset"] = stream.cursor
    u = stream.take(n)
    pts = model.base_sampler(u) if model.base_sampler is not None else u
    batch = make_batch(model, pts, source)
    if batch.accepted_count == 0:
        raise EmptyFeasibleSampleError(
            f"no feasible point among N={n} samples under constraints "
            f"'{model.constraint_set.describe()}'"
        )
    return batch


# ---------------------------------------------------------------------------
# domain bracketing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box [lower_i, upper_i] enclosing the feasible domain."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if np.any(lo < 0) or np.any(hi > 1) or np.any(lo > hi):
            raise ValueError("box must satisfy 0 <= lower <= upper <= 1")

    @property
    def dimension(self) -> int:
        return self.lower.size

    @classmethod
    def unit(cls, dimension: int) -> "BoundingBox":
        return cls(np.zeros(dimension), np.ones(dimension))


def _indicator_grid(model: ConstrainedModel, axes: Sequence[np.ndarray],
                    chunk_rows: int = 1 << 22) -> np.ndarray:
    """Indicator evaluated on the closed tensor grid, as a boolean n-D array."""
    n = model.dimension
    shape = tuple(len(ax) for ax in axes)
    tail = int(np.prod(shape[1:], dtype=np.int64)) if n > 1 else 1
    out = np.empty(shape, dtype=bool)
    step = max(1, chunk_rows // max(tail, 1))
    tail_mesh = None
    if n > 1:
        tail_mesh = np.stack(
            np.meshgrid(*axes[1:], indexing="ij"), axis=-1
        ).reshape(tail, n - 1)
    for start in range(0, shape[0], step):
        stop = min(start + step, shape[0])
        block = np.empty(((stop - start) * tail, n))
        block[:, 0] = np.repeat(axes[0][start:stop], tail)
        if n > 1:
            block[:, 1:] = np.tile(tail_mesh, (stop - start, 1))
        out[start:stop] = (
            model.constraint_set.indicator(block) > 0
        ).reshape(stop - start, *shape[1:])
    return out


def bracket_domain(model: ConstrainedModel, probe_k: int = 64) -> BoundingBox:
    """Tight axis-aligned enclosure of the feasible domain by grid probing.

    A closed uniform grid with ``probe_k`` nodes per axis is scanned; for each
    axis the first and last grid slices containing a feasible node give the
    bounds, widened by one grid spacing on each side (clamped to [0, 1]) so
    feasible mass lying between probe points is never clipped.  Every feasible
    probe node is guaranteed to lie inside the returned box.
    """
    if probe_k < 4:
        raise ValueError("probe_k must be at least 4")
    axes = [np.linspace(0.0, 1.0, probe_k)] * model.dimension
    feasible = _indicator_grid(model, axes)
    if not feasible.any():
        raise DomainNotDetectedError(
            f"no feasible point on a {probe_k}^{model.dimension} probe grid; "
            f"try a larger probe_k"
        )
    h = 1.0 / (probe_k - 1)
    lower = np.empty(model.dimension)
    upper = np.empty(model.dimension)
    for i in range(model.dimension):
        other = tuple(ax for ax in range(model.dimension) if ax != i)
        hit = feasible.any(axis=other) if other else feasible
        idx = np.flatnonzero(hit)
        lower[i] = max(0.0, (idx[0] - 1) * h)
        upper[i] = min(1.0, (idx[-1] + 1) * h)
    return BoundingBox(lower, upper)


# ---------------------------------------------------------------------------
# inverse-CDF sampling inside the feasible domain
# ---------------------------------------------------------------------------

def sequential_conditional_sample(
    inverse_cdfs: Sequence[Callable[[np.ndarray, np.ndarray], np.ndarray]],
    gamma,
) -> np.ndarray:
    """Chain inverse conditional CDFs over independent uniforms.

    ``inverse_cdfs[k]`` maps ``(gamma_k, xi_prefix)`` to the k-th coordinate,
    where ``xi_prefix`` is the ``(m, k)`` array of the coordinates already
    generated.  Given uniforms ``gamma`` of shape ``(m, n)`` (or a single
    point), the result carries the joint density the CDFs were derived from.
    """
    g = np.atleast_2d(np.asarray(gamma, dtype=float))
    single = np.asarray(gamma).ndim == 1
    if g.shape[1] != len(inverse_cdfs):
        raise ValueError(
            f"need {len(inverse_cdfs)} uniform coordinates, got {g.shape[1]}"
        )
    out = np.empty_like(g)
    for k, inv in enumerate(inverse_cdfs):
        xi = np.asarray(inv(g[:, k], out[:, :k]), dtype=float)
        if np.any(xi < 0.0) or np.any(xi > 1.0):
            raise ValueError(
                f"inverse CDF {k} produced a coordinate outside [0, 1]"
            )
        out[:, k] = xi
    return out[0] if single else out


def triangle_inverse_cdfs() -> list[Callable[[np.ndarray, np.ndarray], np.ndarray]]:
    """Inverse conditional CDFs of the uniform density on x1 + x2 >= 1.

    The flat density with value 2 on the upper triangle has marginal 2*x1 and
    conditional 1/x1, which invert to x1 = sqrt(g1) and x2 = x1*(g2 - 1) + 1.
    """
    return [
        lambda g, _prev: np.sqrt(g),
        lambda g, prev: prev[:, 0] * (g - 1.0) + 1.0,
    ]


def triangle_inverse_cdf(gamma1, gamma2) -> np.ndarray:
    """Map a pair of uniforms to a point of the upper triangle x1 + x2 >= 1.

    Returns ``(sqrt(gamma1), x1*(gamma2 - 1) + 1)``, distributed with constant
    density 2 on the triangle; gamma2 = 0 lands exactly on the boundary line.
    """
    g = np.stack(
        [np.asarray(gamma1, dtype=float), np.asarray(gamma2, dtype=float)], axis=-1
    )
    return sequential_conditional_sample(triangle_inverse_cdfs(), g)


def sample_triangle(uniforms: np.ndarray) -> np.ndarray:
    """Vectorized triangle sampler over an ``(m, 2)`` array of uniforms."""
    return sequential_conditional_sample(triangle_inverse_cdfs(), uniforms)


def triangle_constrained_pdf() -> ConstrainedPdf:
    """Exact feasible-domain density of the uniform upper triangle."""

    def joint(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.where(x[:, 0] + x[:, 1] - 1.0 >= 0.0, 2.0, 0.0)

    def marginal(v):
        return 2.0 * np.asarray(v, dtype=float)

    return ConstrainedPdf(joint=joint, marginals=(marginal, marginal))
