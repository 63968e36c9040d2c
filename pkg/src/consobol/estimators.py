"""Monte Carlo / quasi-Monte Carlo estimators of main and total effects.

Two sampling situations are covered:

* acceptance-rejection - points are drawn from the base density on the whole
  hypercube and the feasible domain enters only through the indicator; the
  feasible mass, mean and variance are estimated from the same sample and the
  index estimators weight every term by the indicator,
* known density - points are drawn directly inside the feasible domain and
  the exact joint/marginal density values are substituted into the
  estimators (no indicator weighting, no feasible-mass factor).

Main effects come in two flavours.  The binned (double-loop-reordering)
estimator sorts one sample along the variable of interest and averages within
equally populated bins; it reuses every available model evaluation.  The
pick-freeze estimator combines two independent designs with hybrid points
that share all-but-one column; the same paired design also drives the only
total-effect estimator, whose complement-marginal factor is estimated from a
small number of auxiliary uniforms per point (indicator evaluations only, so
they do not count towards the model-evaluation budget N_CPU = N*(n+2)).

Estimates that can come out negative at small sample sizes are reported raw,
with a warning flag, never clamped.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .domain import (
    ConstrainedModel,
    EmptyFeasibleSampleError,
    eval_extended,
)
from .quadrature import DegenerateVarianceError
from .samplers import PointStream, SampleBatch, make_batch, point_stream

__all__ = [
    "EstimatorConfig",
    "SampleMoments",
    "BinPartition",
    "PairedDesign",
    "IndexEstimate",
    "KnownPdfIndices",
    "default_bin_count",
    "estimate_scaling",
    "estimate_mean_variance",
    "sample_moments",
    "partition_bins",
    "binned_main_effect",
    "pick_freeze_main_effect",
    "pick_freeze_total_effect",
    "known_pdf_estimators",
    "draw_paired_design",
    "full_analysis",
]

STRATEGIES = ("binned", "pick_freeze")


def default_bin_count(sample_size: int) -> int:
    """Rule-of-thumb bin count: about sqrt(N), at least 2, below N."""
    return int(min(max(2, round(math.sqrt(sample_size))), sample_size - 1))


@dataclass(frozen=True)
class EstimatorConfig:
    """Sampling and estimator settings for one analysis run.

    Parameters
    ----------
    n : int
        Base sample size N of the paired design.
    n_bins : int, optional
        Number of equally populated bins for the binned main-effect
        estimator; default is round(sqrt(sample size)) at the point of use.
    nz_aux : int
        Auxiliary uniforms per point for the complement-marginal estimate
        in the total-effect estimator.
    kind : {"pseudorandom", "sobol"}
        Stream driving the design.
    seed, skip : int
        Stream identity (seed for pseudorandom, skip for the Sobol' stream).
    strategy : {"binned", "pick_freeze"}
        Which main-effect estimator the headline figures use.  Both are
        always computed; totals always come from the pick-freeze form.
    pool_reuse : bool
        Let the binned estimator reuse all N*(n+2) evaluated points of the
        paired design instead of only the primary N.
    """

    n: int
    n_bins: int | None = None
    nz_aux: int = 64
    kind: str = "sobol"
    seed: int = 0
    skip: int = 0
    strategy: str = "binned"
    pool_reuse: bool = True

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("sample size n must be at least 4")
        if self.n_bins is not None and not 2 <= self.n_bins < self.n:
            raise ValueError("n_bins must satisfy 2 <= n_bins < n")
        if self.nz_aux < 1:
            raise ValueError("nz_aux must be at least 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")

    def stream_descriptor(self) -> dict:
        out = {"kind": self.kind}
        out["seed" if self.kind == "pseudorandom" else "skip"] = (
            self.seed if self.kind == "pseudorandom" else self.skip
        )
        return out


# ---------------------------------------------------------------------------
# moments of a batch
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleMoments:
    """Feasible mass, mean and variance estimated from one sample."""

    scaling: float
    f0: float
    variance: float
    size: int


def _moments(f_values: np.ndarray, indicators: np.ndarray) -> SampleMoments:
    n = f_values.size
    scaling = float(indicators.sum()) / n
    if scaling == 0.0:
        raise EmptyFeasibleSampleError(f"no feasible point among N={n} samples")
    f0 = float(f_values.sum()) / (scaling * n)
    variance = float((f_values * f_values).sum()) / (scaling * n) - f0 * f0
    if variance < 0.0:
        # weighted sample variance; only floating-point noise can go below zero
        warnings.warn(f"variance estimate {variance!r} is negative", RuntimeWarning)
    return SampleMoments(scaling=scaling, f0=f0, variance=variance, size=n)


def sample_moments(batch: SampleBatch) -> SampleMoments:
    """Scaling factor, mean and variance of one batch."""
    return _moments(batch.f_values, batch.indicators)


def estimate_scaling(batch: SampleBatch) -> float:
    """Feasible probability mass: the average of the indicator values."""
    if batch.size == 0:
        raise ValueError("batch is empty")
    scaling = float(batch.indicators.mean())
    if scaling == 0.0:
        raise EmptyFeasibleSampleError(
            f"no feasible point among N={batch.size} samples"
        )
    return scaling


def estimate_mean_variance(batch: SampleBatch) -> tuple[float, float]:
    """Feasible-domain mean and variance of the model over one batch."""
    m = sample_moments(batch)
    return m.f0, m.variance


# ---------------------------------------------------------------------------
# equally populated bins along one coordinate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BinPartition:
    """Equally populated bins of a sample along one coordinate.

    ``members[j]`` holds the row indices of bin j; the stable ascending sort
    guarantees ties keep their original order and repeated runs partition
    identically.  When the sample size is not divisible by the bin count the
    largest-coordinate remainder rows are left out of the partition.
    """

    var_index: int
    bin_count: int
    bin_size: int
    members: np.ndarray
    boundaries: np.ndarray

    def locate(self, values) -> np.ndarray:
        """Bin index containing each of ``values`` (clipped to the range)."""
        pos = np.searchsorted(self.boundaries[:-1], np.asarray(values), side="right") - 1
        return np.clip(pos, 0, self.bin_count - 1)


def partition_bins(batch: SampleBatch, i: int, n_bins: int) -> BinPartition:
    """Sort by coordinate i and split into ``n_bins`` equally filled bins."""
    coords = batch.points[:, i]
    n = coords.size
    if n_bins > n:
        raise ValueError(f"n_bins={n_bins} exceeds the sample size {n}")
    if n_bins < 1:
        raise ValueError("n_bins must be positive")
    order = np.argsort(coords, kind="stable")
    bin_size = n // n_bins
    kept = order[: n_bins * bin_size]
    members = kept.reshape(n_bins, bin_size)
    sorted_coords = coords[kept]
    boundaries = np.append(sorted_coords[::bin_size], sorted_coords[-1])
    return BinPartition(
        var_index=i,
        bin_count=n_bins,
        bin_size=bin_size,
        members=members,
        boundaries=boundaries,
    )


def _bin_sums(partition: BinPartition, values: np.ndarray) -> np.ndarray:
    return values[partition.members].sum(axis=1)


def binned_main_effect(batch: SampleBatch, i: int, n_bins: int | None = None,
                       moments: SampleMoments | None = None) -> float:
    """Main effect of input i from one batch by sorting and binning.

    Within each bin the conditional mean of the zero-extended model and the
    feasible marginal are estimated from the indicator-weighted averages;
    bins that contain no feasible point carry no feasible probability mass
    and contribute zero.
    """
    m = moments or sample_moments(batch)
    if m.variance <= 0.0:
        raise DegenerateVarianceError("total variance is zero; indices undefined")
    part = partition_bins(batch, i, n_bins or default_bin_count(batch.size))
    denom = m.scaling * part.bin_size
    cond_mean = _bin_sums(part, batch.f_values) / denom
    marginal = _bin_sums(part, batch.indicators) / denom
    if not marginal.any():
        raise EmptyFeasibleSampleError("every bin is empty of feasible points")
    terms = np.zeros(part.bin_count)
    np.divide(cond_mean * cond_mean, marginal, out=terms, where=marginal > 0)
    return (float(terms.mean()) - m.f0 ** 2) / m.variance


# ---------------------------------------------------------------------------
# paired (pick-freeze) designs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairedDesign:
    """Two independent designs, their hybrids, and auxiliary uniforms.

    ``hybrids[i]`` is the primary design with column i replaced by the
    second design's column i, so it shares the complement block with the
    primary rows.  ``aux`` holds the uniforms that estimate the feasible
    complement marginal in the total-effect estimator.  The model was
    evaluated n+2 times per row overall.
    """

    model: ConstrainedModel
    base: SampleBatch
    alt: SampleBatch
    hybrids: tuple[SampleBatch, ...]
    aux: np.ndarray
    source: dict

    @property
    def n(self) -> int:
        return self.base.size

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def n_cpu(self) -> int:
        return self.n * (self.dimension + 2)

    def pooled_batch(self) -> SampleBatch:
        """All evaluated rows of the design as one batch."""
        groups = (self.base, self.alt) + self.hybrids
        return SampleBatch(
            points=np.vstack([g.points for g in groups]),
            indicators=np.concatenate([g.indicators for g in groups]),
            f_values=np.concatenate([g.f_values for g in groups]),
            source=self.source,
        )


def design_stream_width(dimension: int) -> int:
    """Stream columns a paired design consumes: 2n plus one aux shift."""
    return 2 * dimension + 1


def draw_paired_design(model: ConstrainedModel, config: EstimatorConfig,
                       stream: PointStream | None = None) -> PairedDesign:
    """Draw the pick-freeze design from a single wide stream.

    One stream of dimension 2n + 1 supplies the primary design, the second
    design and one auxiliary shift per row in a single take, which keeps the
    whole design a pure function of the stream descriptor.  The nz_aux
    auxiliary uniforms of row l form the shifted systematic set
    (q + shift_l) / nz_aux, q = 0..nz_aux-1: a stratified (unbiased) sample
    whose estimate of the feasible complement marginal carries far less
    noise than nz_aux independent draws, which would otherwise put a
    non-decaying ratio-bias floor under the total-effect convergence.
    """
    n_dim = model.dimension
    width = design_stream_width(n_dim)
    if stream is None:
        stream = point_stream(config.kind, width, seed=config.seed, skip=config.skip)
    elif stream.dimension != width:
        raise ValueError(f"stream dimension must be {width}")
    if model.base_density is not None and model.base_sampler is None:
        raise ValueError(
            "model has a non-uniform base density but no base_sampler to draw from it"
        )
    source = stream.descriptor()
    source["offset"] = stream.cursor
    u = stream.take(config.n)
    first, second = u[:, :n_dim], u[:, n_dim:2 * n_dim]
    if model.base_sampler is not None:
        first = np.asarray(model.base_sampler(first), dtype=float)
        second = np.asarray(model.base_sampler(second), dtype=float)
    base = make_batch(model, first, source)
    alt = make_batch(model, second, source)
    hybrids = []
    for i in range(n_dim):
        pts = first.copy()
        pts[:, i] = second[:, i]
        hybrids.append(make_batch(model, pts, source))
    aux = (np.arange(config.nz_aux) + u[:, 2 * n_dim:2 * n_dim + 1]) / config.nz_aux
    return PairedDesign(
        model=model,
        base=base,
        alt=alt,
        hybrids=tuple(hybrids),
        aux=aux,
        source=source,
    )


def _bin_marginal(batch: SampleBatch, i: int, n_bins: int,
                  scaling: float) -> tuple[BinPartition, np.ndarray]:
    """Bin partition along coordinate i plus the per-bin feasible marginal."""
    part = partition_bins(batch, i, n_bins)
    marginal = _bin_sums(part, batch.indicators) / (scaling * part.bin_size)
    return part, marginal


def pick_freeze_main_effect(design: PairedDesign, i: int,
                            moments: SampleMoments | None = None,
                            n_bins: int | None = None) -> tuple[float, int]:
    """Main effect of input i from the paired design.

    The marginal density factor at the second design's coordinate is read
    from the bin-estimated marginal built on the primary design.  Terms whose
    marginal estimate is zero while the hybrid still lands in the feasible
    domain are skipped and counted; returns ``(estimate, skipped_terms)``.
    """
    m = moments or sample_moments(design.pooled_batch())
    if m.variance <= 0.0:
        raise DegenerateVarianceError("total variance is zero; indices undefined")
    part, marginal = _bin_marginal(
        design.base, i, n_bins or default_bin_count(design.n), m.scaling
    )
    p_alt = marginal[part.locate(design.alt.points[:, i])]
    f_hyb = design.hybrids[i].f_values
    ratio = np.zeros(design.n)
    np.divide(f_hyb, p_alt, out=ratio, where=p_alt > 0)
    invalid = (p_alt == 0.0) & (f_hyb != 0.0)
    terms = design.alt.f_values * (ratio - design.base.f_values)
    terms[invalid] = 0.0
    est = float(terms.sum()) / (m.scaling ** 2 * m.variance * design.n)
    return est, int(invalid.sum())


def _complement_marginal_estimate(model: ConstrainedModel, points: np.ndarray,
                                  i: int, aux: np.ndarray, scaling: float,
                                  chunk_rows: int = 1 << 20) -> np.ndarray:
    """Feasible marginal of all-but-i at each row, from auxiliary uniforms.

    Replaces coordinate i of every row by each auxiliary uniform and averages
    the indicator (times the base density, when non-uniform); only constraint
    evaluations are spent here, never model evaluations.
    """
    n, nz = aux.shape
    out = np.empty(n)
    step = max(1, chunk_rows // nz)
    for start in range(0, n, step):
        stop = min(start + step, n)
        rows = stop - start
        block = np.repeat(points[start:stop], nz, axis=0)
        block[:, i] = aux[start:stop].ravel()
        vals = model.constraint_set.indicator(block) * model.density_values(block)
        out[start:stop] = vals.reshape(rows, nz).mean(axis=1)
    return out / scaling


def pick_freeze_total_effect(design: PairedDesign, i: int,
                             moments: SampleMoments | None = None) -> tuple[float, int]:
    """Total effect of input i from the squared primary/hybrid differences.

    Only rows where the primary point and the hybrid are both feasible can
    contribute (the product of their feasible densities vanishes otherwise);
    each contribution is divided by the estimated feasible marginal of the
    complement block.  Rows whose marginal estimate comes out zero despite a
    feasible pair are skipped and counted; returns ``(estimate, skipped)``.
    """
    m = moments or sample_moments(design.pooled_batch())
    if m.variance <= 0.0:
        raise DegenerateVarianceError("total variance is zero; indices undefined")
    hyb = design.hybrids[i]
    valid = (design.base.indicators > 0) & (hyb.indicators > 0)
    marginal = _complement_marginal_estimate(
        design.model, design.base.points, i, design.aux, m.scaling
    )
    keep = valid & (marginal > 0)
    skipped = int((valid & (marginal == 0)).sum())
    diff = design.base.f_values[keep] - hyb.f_values[keep]
    total = float((diff * diff / marginal[keep]).sum())
    est = total / (2.0 * m.scaling ** 2 * m.variance * design.n)
    return est, skipped


# ---------------------------------------------------------------------------
# full analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IndexEstimate:
    """Complete index set from one paired-design run.

    Both main-effect estimators are retained (``main_effect`` points at the
    one selected by the strategy); totals always come from the pick-freeze
    form.  ``skipped_main`` / ``skipped_total`` count per-variable terms
    dropped because an estimated marginal vanished, and ``warnings`` flags
    raw negative estimates (which are never clamped).
    """

    main_effect: np.ndarray
    total_effect: np.ndarray
    main_effect_binned: np.ndarray
    main_effect_pick_freeze: np.ndarray
    f0: float
    variance: float
    scaling: float
    n: int
    n_cpu: int
    n_bins: int
    nz_aux: int
    strategy: str
    skipped_main: np.ndarray
    skipped_total: np.ndarray
    source: dict
    warnings: tuple[str, ...] = ()

    @property
    def dimension(self) -> int:
        return self.main_effect.size

    def records(self) -> list[dict]:
        """One flat record per variable for CSV/JSON emission."""
        out = []
        for i in range(self.dimension):
            rec = {
                "variable": i + 1,
                "S": float(self.main_effect[i]),
                "S_T": float(self.total_effect[i]),
                "estimator": self.strategy,
                "N": self.n,
                "N_bins": self.n_bins,
                "N_aux": self.nz_aux,
                "scaling": self.scaling,
                "f0": self.f0,
                "D": self.variance,
                "N_cpu": self.n_cpu,
                "skipped_terms": int(self.skipped_main[i] + self.skipped_total[i]),
            }
            rec.update(self.source)
            out.append(rec)
        return out


def full_analysis(model: ConstrainedModel, config: EstimatorConfig,
                  stream: PointStream | None = None) -> IndexEstimate:
    """Estimate every main and total effect from one paired design.

    The pick-freeze strategy takes both index families from the modified
    estimators; the binned strategy keeps the pick-freeze totals but takes
    the main effects from the binned estimator, which may reuse the entire
    pool of N*(n+2) evaluated points.  Either way the number of model
    evaluations is N*(n+2), and the moments (scaling, mean, variance) are
    estimated once from the full pool.
    """
    design = draw_paired_design(model, config, stream=stream)
    pooled = design.pooled_batch()
    moments = _moments(pooled.f_values, pooled.indicators)
    if moments.variance <= 0.0:
        raise DegenerateVarianceError("total variance is zero; indices undefined")
    n_dim = model.dimension
    binned_source = pooled if config.pool_reuse else design.base
    # the sqrt rule follows the base design size even when bins are filled
    # from the pooled rows: power-of-two bin counts respect the dyadic
    # stratification of the low-discrepancy stream, and pooling then adds
    # members per bin rather than more bins
    n_bins = config.n_bins or default_bin_count(design.n)

    main_binned = np.empty(n_dim)
    main_pf = np.empty(n_dim)
    total = np.ones(n_dim)
    skipped_main = np.zeros(n_dim, dtype=int)
    skipped_total = np.zeros(n_dim, dtype=int)
    for i in range(n_dim):
        main_binned[i] = binned_main_effect(
            binned_source, i, n_bins=n_bins, moments=moments
        )
        main_pf[i], skipped_main[i] = pick_freeze_main_effect(
            design, i, moments=moments, n_bins=n_bins
        )
        if n_dim >= 2:
            total[i], skipped_total[i] = pick_freeze_total_effect(
                design, i, moments=moments
            )

    main = main_binned if config.strategy == "binned" else main_pf
    notes = []
    if np.any(main < 0) or np.any(total < 0):
        notes.append("negative index estimate (small-sample noise); reported raw")
    return IndexEstimate(
        main_effect=main,
        total_effect=total,
        main_effect_binned=main_binned,
        main_effect_pick_freeze=main_pf,
        f0=moments.f0,
        variance=moments.variance,
        scaling=moments.scaling,
        n=design.n,
        n_cpu=design.n_cpu,
        n_bins=n_bins,
        nz_aux=config.nz_aux,
        strategy=config.strategy,
        skipped_main=skipped_main,
        skipped_total=skipped_total,
        source=design.source,
        warnings=tuple(notes),
    )


# ---------------------------------------------------------------------------
# known-density path
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KnownPdfIndices:
    """Index estimates with exact feasible-domain density values."""

    main_binned: float
    main_pick_freeze: float
    total_pick_freeze: float
    f0: float
    variance: float


def known_pdf_estimators(model: ConstrainedModel, base: SampleBatch,
                         alt: SampleBatch, i: int,
                         n_bins: int | None = None) -> KnownPdfIndices:
    """Indices of input i from points sampled inside the feasible domain.

    ``base`` and ``alt`` must hold independent samples of the model's
    explicit feasible-domain density (``model.constrained_pdf``).  The binned
    main effect is the variance of the per-bin conditional means over equally
    populated bins; the pick-freeze forms weight each hybrid by the ratio of
    the joint density at the hybrid point to the product of the factor
    marginals, which vanishes whenever the hybrid leaves the feasible domain.

    A zero marginal or joint density at a sampled point means the sampler and
    the declared density disagree and raises ``ValueError``.
    """
    pdf = model.constrained_pdf
    if pdf is None:
        raise ValueError("model carries no explicit constrained_pdf")
    if base.accepted_count != base.size or alt.accepted_count != alt.size:
        raise ValueError("known-density batches must lie inside the feasible domain")
    n = base.size
    f_base = base.f_values
    f_alt = alt.f_values

    f0 = float(f_base.mean())
    variance = float((f_base * f_base).mean()) - f0 * f0
    if variance <= 0.0:
        raise DegenerateVarianceError("total variance is zero; indices undefined")

    # binned: bins are equally probable under the feasible marginal, so the
    # variance of the bin means needs no density reweighting
    part = partition_bins(base, i, n_bins or default_bin_count(n))
    cond_mean = _bin_sums(part, f_base) / part.bin_size
    main_binned = (float((cond_mean * cond_mean).mean()) - f0 * f0) / variance

    hybrid = base.points.copy()
    hybrid[:, i] = alt.points[:, i]
    f_hyb = eval_extended(model, hybrid)
    joint_hyb = np.asarray(pdf.joint(hybrid), dtype=float)
    marg_alt = np.asarray(pdf.marginals[i](alt.points[:, i]), dtype=float)
    z_cols = [c for c in range(base.dimension) if c != i]
    comp_base = pdf.complement_marginal(i, base.points[:, z_cols])
    if np.any(marg_alt <= 0.0) or np.any(comp_base <= 0.0):
        raise ValueError(
            "declared density vanishes at a sampled point; sampler and "
            "constrained_pdf are inconsistent"
        )
    weight = joint_hyb / (marg_alt * comp_base)

    main_pf = float((f_alt * (f_hyb * weight - f_base)).sum()) / (variance * n)
    diff = f_base - f_hyb
    total_pf = float((diff * diff * weight).sum()) / (2.0 * variance * n)
    return KnownPdfIndices(
        main_binned=main_binned,
        main_pick_freeze=main_pf,
        total_pick_freeze=total_pf,
        f0=f0,
        variance=variance,
    )
