"""Experiment harness: single runs, convergence studies and parameter sweeps.

A convergence study repeats an estimate over L independent replicates at each
sample size of a schedule, reduces the replicate spread to one relative RMSE
per index, and fits a power trend c * N^k through the (model evaluations,
RMSE) points by least squares in log10-log10.  Pseudorandom replicates use
consecutive seeds; low-discrepancy replicates consume consecutive blocks of
one sequence, which is the offset device that stands in for reseeding.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ._io import write_csv, write_json
from .benchmarks import ReferenceCase, oracle_indices, reference, reference_case_ids
from .domain import ConstrainedModel, builtin_constraint, builtin_model
from .estimators import (EstimatorConfig, IndexEstimate, design_stream_width,
                         full_analysis)
from .quadrature import QuadratureResult, quadrature_indices, sweep_constraint_parameter
from .samplers import point_stream

__all__ = [
    "ExperimentConfig",
    "ConvergenceReport",
    "ComparisonSummary",
    "IndexSeries",
    "collect_index_series",
    "fit_power_trend",
    "relative_rmse",
    "run_estimate",
    "run_convergence",
    "run_sweep",
    "run_estimator_comparison",
]

SEED_ENV_VAR = "CONSOBOL_SEED"

DEFAULT_SCHEDULE = (2 ** 10, 2 ** 12, 2 ** 14, 2 ** 16, 2 ** 18)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    ``method`` selects pseudorandom ("mc"), low-discrepancy ("qmc") or grid
    ("quadrature") evaluation.  The JSON config file mirrors these fields;
    command-line flags override file values, and the environment variable
    ``CONSOBOL_SEED`` overrides the seed everywhere (and is echoed into the
    outputs).
    """

    model: str = "gfunction"
    model_args: tuple = ()
    constraint: str = "none"
    constraint_args: tuple = ()
    method: str = "qmc"
    strategy: str = "binned"
    n: int | None = None
    schedule: tuple[int, ...] = DEFAULT_SCHEDULE
    n_bins: int | None = None
    nz_aux: int = 64
    grid_k: int = 257
    bracket: bool = True
    replicates: int = 50
    seed: int = 0
    skip: int = 0
    param_grid: tuple[float, ...] = ()
    reference: str = "auto"
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.method not in ("mc", "qmc", "quadrature"):
            raise ValueError("method must be mc, qmc or quadrature")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        sched = tuple(int(v) for v in self.schedule)
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("schedule must be strictly increasing")
        self.schedule = sched
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            self.seed = int(env_seed)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        coerced = dict(data)
        for key in ("model_args", "constraint_args", "schedule", "param_grid"):
            if key in coerced and coerced[key] is not None:
                coerced[key] = tuple(
                    tuple(v) if isinstance(v, list) else v for v in coerced[key]
                )
        return cls(**coerced)

    def to_dict(self) -> dict:
        return asdict(self)

    def make_model(self) -> ConstrainedModel:
        return builtin_model(self.model, *self.model_args).with_constraint(
            builtin_constraint(self.constraint, *self.constraint_args)
        )

    def estimator_config(self, n: int, skip: int | None = None,
                         seed: int | None = None) -> EstimatorConfig:
        return EstimatorConfig(
            n=n,
            n_bins=self.n_bins,
            nz_aux=self.nz_aux,
            kind="pseudorandom" if self.method == "mc" else "sobol",
            seed=self.seed if seed is None else seed,
            skip=self.skip if skip is None else skip,
            strategy=self.strategy,
        )


# ---------------------------------------------------------------------------
# RMSE and trend fitting
# ---------------------------------------------------------------------------

def relative_rmse(estimates: Sequence[float], truth: float) -> tuple[float, bool]:
    """Root-mean-square of (estimate - truth)/truth over replicates.

    Falls back to the absolute RMSE when the reference value is zero; the
    second element of the pair reports that fallback.
    """
    arr = np.asarray(estimates, dtype=float)
    if truth == 0.0:
        return float(np.sqrt(np.mean(arr ** 2))), True
    return float(np.sqrt(np.mean(((arr - truth) / truth) ** 2))), False


def fit_power_trend(n_values: Sequence[float], errors: Sequence[float]) -> tuple[float, float]:
    """Least-squares fit of errors ~ c * N^k in log10-log10; returns (c, k)."""
    n_arr = np.asarray(n_values, dtype=float)
    e_arr = np.asarray(errors, dtype=float)
    if n_arr.size < 3:
        raise ValueError("trend fit needs at least 3 points")
    if np.any(e_arr <= 0):
        raise ValueError("trend fit needs positive errors")
    slope, intercept = np.polyfit(np.log10(n_arr), np.log10(e_arr), 1)
    return float(10.0 ** intercept), float(slope)


def _index_labels(dimension: int) -> list[str]:
    return [f"S{i}" for i in range(1, dimension + 1)] + [
        f"S{i}T" for i in range(1, dimension + 1)
    ]


@dataclass(frozen=True)
class ConvergenceReport:
    """(N_CPU, RMSE) series per index with the fitted power trend."""

    case: str
    method: str
    estimator: str
    replicates: int
    n_base: tuple[int, ...]
    n_cpu: tuple[int, ...]
    rmse: dict
    fits: dict
    absolute_fallback: tuple[str, ...] = ()

    @property
    def labels(self) -> list[str]:
        return list(self.rmse)

    def slope(self, label: str) -> float:
        return self.fits[label][1]

    def to_records(self) -> list[dict]:
        rows = []
        for j, (nb, nc) in enumerate(zip(self.n_base, self.n_cpu)):
            row = {"N": nb, "N_cpu": nc}
            for label in self.rmse:
                row[f"rmse_{label}"] = self.rmse[label][j]
            rows.append(row)
        return rows

    def summary(self) -> dict:
        return {
            "case": self.case,
            "method": self.method,
            "estimator": self.estimator,
            "replicates": self.replicates,
            "fits": {k: {"c": v[0], "slope": v[1]} for k, v in self.fits.items()},
            "absolute_fallback": list(self.absolute_fallback),
        }


def resolve_reference(config: ExperimentConfig,
                      model: ConstrainedModel | None = None) -> ReferenceCase:
    """Reference values for the configured problem.

    ``auto`` matches the stored exact benchmark table by model, constraint
    and parameters; ``oracle`` (or an unmatched auto) computes midpoint-rule
    reference values at a resolution fit for the dimension.
    """
    if config.reference not in ("auto", "oracle"):
        return reference(config.reference)
    if config.reference == "auto":
        for case_id in reference_case_ids():
            case = reference(case_id)
            if case.model[0] != config.model or case.constraint[0] != config.constraint:
                continue
            if _args_close(case.model[1], config.model_args) and _args_close(
                case.constraint[1], config.constraint_args
            ):
                return case
    mdl = model if model is not None else config.make_model()
    resolution = 4097 if mdl.dimension <= 2 else (96 if mdl.dimension <= 4 else 32)
    orc = oracle_indices(mdl, resolution)
    return ReferenceCase(
        case_id="oracle",
        model=(config.model, config.model_args),
        constraint=(config.constraint, config.constraint_args),
        f0=orc.f0,
        variance=orc.variance,
        main_effect=tuple(float(v) for v in orc.main_effect),
        total_effect=tuple(float(v) for v in orc.total_effect),
        note=f"midpoint oracle at resolution {resolution}",
    )


def _args_close(a, b) -> bool:
    fa = np.asarray([x for item in a for x in np.ravel(item)], dtype=float)
    fb = np.asarray([x for item in b for x in np.ravel(item)], dtype=float)
    return fa.shape == fb.shape and bool(np.allclose(fa, fb, atol=1e-12))


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

def _write_records(records: list[dict], columns: list[str],
                   config: ExperimentConfig) -> None:
    if config.out is None:
        return
    if config.format == "csv":
        write_csv(records, columns, config.out)
    else:
        write_json(records, config.out)


def run_estimate(config: ExperimentConfig) -> IndexEstimate | QuadratureResult:
    """One estimation run at the largest configured size (or grid)."""
    model = config.make_model()
    meta = {
        "model": config.model,
        "constraint": config.constraint,
        "method": config.method,
        "seed": config.seed,
    }
    if config.method == "quadrature":
        result = quadrature_indices(model, k=config.grid_k, bracket=config.bracket)
        records = [result.record() | meta]
    else:
        n = config.n or config.schedule[-1]
        result = full_analysis(model, config.estimator_config(n))
        records = [rec | meta for rec in result.records()]
    columns = sorted(set().union(*(rec.keys() for rec in records)))
    _write_records(records, columns, config)
    return result


@dataclass(frozen=True)
class IndexSeries:
    """Raw replicate estimates per schedule point for every tracked index.

    ``series`` maps labels like "S1", "S1T" (strategy-selected values) and
    "S1:binned" / "S1:pick_freeze" (the two main-effect variants) to arrays
    of shape (schedule points, replicates).  One collection serves both the
    convergence report and the estimator comparison.
    """

    n_base: tuple[int, ...]
    n_cpu: tuple[int, ...]
    series: dict


def collect_index_series(config: ExperimentConfig,
                         model: ConstrainedModel | None = None) -> IndexSeries:
    """Run the replicate loop once, keeping every estimator variant.

    Pseudorandom replicates use seeds ``seed + r``; low-discrepancy
    replicates consume consecutive blocks of one sequence starting at the
    configured skip, so replicate r sees the block at offset ``skip + r*N``.
    """
    model = model or config.make_model()
    n_dim = model.dimension
    width = design_stream_width(n_dim)
    labels = _index_labels(n_dim)
    tracked = labels + [f"S{i}:binned" for i in range(1, n_dim + 1)]
    tracked += [f"S{i}:pick_freeze" for i in range(1, n_dim + 1)]
    series = {lab: np.empty((len(config.schedule), config.replicates)) for lab in tracked}
    n_cpu = []
    for j, n in enumerate(config.schedule):
        stream = None
        if config.method == "qmc":
            stream = point_stream("sobol", width, skip=config.skip)
        for r in range(config.replicates):
            if config.method == "qmc":
                est = full_analysis(model, config.estimator_config(n), stream=stream)
            else:
                est = full_analysis(
                    model, config.estimator_config(n, seed=config.seed + r)
                )
            for i in range(n_dim):
                series[f"S{i + 1}"][j, r] = est.main_effect[i]
                series[f"S{i + 1}T"][j, r] = est.total_effect[i]
                series[f"S{i + 1}:binned"][j, r] = est.main_effect_binned[i]
                series[f"S{i + 1}:pick_freeze"][j, r] = est.main_effect_pick_freeze[i]
        n_cpu.append(n * (n_dim + 2))
    return IndexSeries(
        n_base=tuple(config.schedule), n_cpu=tuple(n_cpu), series=series
    )


def _report_from_series(config: ExperimentConfig, case: ReferenceCase,
                        n_base, n_cpu, series, labels, estimator: str) -> ConvergenceReport:
    rmse = {}
    fits = {}
    fallback = []
    for label in labels:
        ref_label = label.split(":")[0]
        truth = case.index_value(ref_label)
        values = []
        for j in range(len(n_base)):
            err, absolute = relative_rmse(series[label][j], truth)
            values.append(err)
            if absolute and ref_label not in fallback:
                fallback.append(ref_label)
        rmse[label] = values
        fits[label] = fit_power_trend(n_cpu, values)
    return ConvergenceReport(
        case=case.case_id,
        method=config.method,
        estimator=estimator,
        replicates=config.replicates,
        n_base=tuple(n_base),
        n_cpu=tuple(n_cpu),
        rmse=rmse,
        fits=fits,
        absolute_fallback=tuple(fallback),
    )


def run_convergence(config: ExperimentConfig,
                    case: ReferenceCase | None = None,
                    series: IndexSeries | None = None) -> ConvergenceReport:
    """Replicate-averaged RMSE and fitted slopes over the sample schedule."""
    model = config.make_model()
    case = case or resolve_reference(config, model)
    data = series or collect_index_series(config, model)
    labels = _index_labels(model.dimension)
    report = _report_from_series(config, case, data.n_base, data.n_cpu,
                                 data.series, labels, estimator=config.strategy)
    records = report.to_records()
    if config.format == "json":
        _write_records([report.summary()] + records, [], config)
    else:
        columns = ["N", "N_cpu"] + [f"rmse_{lab}" for lab in labels]
        _write_records(records, columns, config)
    return report


@dataclass(frozen=True)
class ComparisonSummary:
    """Paired convergence reports of the two main-effect estimators."""

    binned: ConvergenceReport
    pick_freeze: ConvergenceReport
    lower_rmse_at_largest: dict

    def to_records(self) -> list[dict]:
        rows = []
        for which, rep in (("binned", self.binned), ("pick_freeze", self.pick_freeze)):
            for row in rep.to_records():
                rows.append({"estimator": which} | row)
        return rows


def run_estimator_comparison(config: ExperimentConfig,
                             case: ReferenceCase | None = None,
                             series: IndexSeries | None = None) -> ComparisonSummary:
    """Binned vs pick-freeze main effects at matched model evaluation counts.

    Both estimators are computed from the same paired designs, so their
    RMSE series share the N_CPU axis exactly.
    """
    model = config.make_model()
    case = case or resolve_reference(config, model)
    data = series or collect_index_series(config, model)
    mains = [f"S{i}" for i in range(1, model.dimension + 1)]
    rep_binned = _report_from_series(
        config, case, data.n_base, data.n_cpu,
        {m: data.series[f"{m}:binned"] for m in mains}, mains, estimator="binned",
    )
    rep_pf = _report_from_series(
        config, case, data.n_base, data.n_cpu,
        {m: data.series[f"{m}:pick_freeze"] for m in mains}, mains, estimator="pick_freeze",
    )
    winner = {}
    for m in mains:
        b = rep_binned.rmse[m][-1]
        p = rep_pf.rmse[m][-1]
        winner[m] = "binned" if b < p else "pick_freeze"
    summary = ComparisonSummary(
        binned=rep_binned, pick_freeze=rep_pf, lower_rmse_at_largest=winner
    )
    records = summary.to_records()
    columns = ["estimator", "N", "N_cpu"] + [f"rmse_{m}" for m in mains]
    if config.format == "json":
        _write_records(records, [], config)
    else:
        _write_records(records, columns, config)
    return summary


def run_sweep(config: ExperimentConfig):
    """Quadrature indices along a constraint-parameter grid."""
    if not config.param_grid:
        raise ValueError("run_sweep needs a non-empty param_grid")
    model = builtin_model(config.model, *config.model_args)
    family = lambda p: builtin_constraint(config.constraint, p)
    table = sweep_constraint_parameter(
        model, family, config.param_grid, k=config.grid_k, bracket=config.bracket
    )
    rows = []
    for row in table.rows:
        note = ""
        if row["param"] == 0.0:
            note = "vacuous constraint (unconstrained limit)"
        rows.append(row | {"note": note})
    columns = list(table.columns) + ["note"]
    if config.out is not None:
        if config.format == "csv":
            write_csv(rows, columns, config.out)
        else:
            write_json(rows, config.out)
    return rows
