"""Command-line interface: estimate, converge, sweep and compare.

Examples
--------
Single estimate (quadrature)::

    consobol estimate --model product2d --constraint upper_triangle \
        --method quadrature --grid-k 257

Convergence study with 50 replicates::

    consobol converge --model gfunction --constraint linear_alpha \
        --param 0.5235987755982988 --method qmc --replicates 50 \
        --schedule 1024,4096,16384,65536,262144 --out rmse.csv

A JSON config file (``--config``) mirrors the ExperimentConfig fields;
explicit flags override file values, and the environment variable
CONSOBOL_SEED overrides the seed everywhere.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    ExperimentConfig,
    run_convergence,
    run_estimate,
    run_estimator_comparison,
    run_sweep,
)

__all__ = ["main", "build_parser", "config_from_args"]


def _parse_model_spec(text: str) -> tuple[str, tuple]:
    """Parse ``name`` or ``name(arg, ...)`` into builder name and args.

    ``gfunction(0,1)`` passes the numbers as one parameter vector;
    ``kfunction(4)`` passes the dimension.
    """
    if "(" not in text:
        return text, ()
    name, _, rest = text.partition("(")
    rest = rest.rstrip(")")
    values = tuple(float(v) for v in rest.split(",") if v.strip())
    if name == "gfunction":
        return name, (values,)
    if name == "kfunction":
        return name, (int(values[0]),)
    return name, values


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file mirroring ExperimentConfig")
    p.add_argument("--model", help="model name, e.g. gfunction or kfunction(4)")
    p.add_argument("--constraint", help="constraint name, e.g. linear_alpha")
    p.add_argument("--param", type=float,
                   help="constraint parameter (angle, curvature, ...)")
    p.add_argument("--method", choices=("mc", "qmc", "quadrature"))
    p.add_argument("--strategy", choices=("binned", "pick_freeze"))
    p.add_argument("--n", type=int, help="sample size for a single estimate")
    p.add_argument("--schedule", type=_parse_int_list,
                   help="comma-separated sample sizes, strictly increasing")
    p.add_argument("--bins", type=int, dest="n_bins",
                   help="bin count of the binned estimator")
    p.add_argument("--nz-aux", type=int, dest="nz_aux",
                   help="auxiliary uniforms per point for total effects")
    p.add_argument("--grid-k", type=int, dest="grid_k",
                   help="nodes per dimension for quadrature")
    p.add_argument("--no-bracket", action="store_true",
                   help="disable bounding-box bracketing for quadrature")
    p.add_argument("--replicates", type=int, help="replicate count L")
    p.add_argument("--seed", type=int, help="base seed (pseudorandom streams)")
    p.add_argument("--skip", type=int, help="initial Sobol' points to skip")
    p.add_argument("--reference",
                   help="reference case id, 'auto' (match benchmarks) or 'oracle'")
    p.add_argument("--out", help="output file path")
    p.add_argument("--format", choices=("csv", "json"), dest="fmt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consobol",
        description="Sobol' indices for models with inequality-constrained inputs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("estimate", "single index estimate at the largest size / grid"),
        ("converge", "replicate-averaged RMSE over the sample schedule"),
        ("sweep", "quadrature indices along a constraint-parameter grid"),
        ("compare", "binned vs pick-freeze main effects at matched cost"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "sweep":
            p.add_argument("--param-grid", type=_parse_float_list,
                           dest="param_grid",
                           help="comma-separated constraint parameter values")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        data.update(json.loads(Path(args.config).read_text()))
    if args.model:
        name, margs = _parse_model_spec(args.model)
        data["model"] = name
        data["model_args"] = margs
    if args.constraint:
        data["constraint"] = args.constraint
    if args.param is not None:
        data["constraint_args"] = (args.param,)
    direct = {
        "method": args.method,
        "strategy": args.strategy,
        "n": args.n,
        "schedule": args.schedule,
        "n_bins": args.n_bins,
        "nz_aux": args.nz_aux,
        "grid_k": args.grid_k,
        "replicates": args.replicates,
        "seed": args.seed,
        "skip": args.skip,
        "reference": args.reference,
        "out": args.out,
        "format": args.fmt,
    }
    if getattr(args, "param_grid", None) is not None:
        direct["param_grid"] = args.param_grid
    for key, value in direct.items():
        if value is not None:
            data[key] = value
    if args.no_bracket:
        data["bracket"] = False
    return ExperimentConfig.from_dict(data)


def _print_estimate(result) -> None:
    if hasattr(result, "records"):
        for rec in result.records():
            print(
                f"x{rec['variable']}: S={rec['S']:.6f} S_T={rec['S_T']:.6f} "
                f"(f0={rec['f0']:.6f} D={rec['D']:.6f} scaling={rec['scaling']:.6f} "
                f"N_cpu={rec['N_cpu']})"
            )
    else:
        rec = result.record()
        n = (len(rec) - 6) // 2
        for i in range(1, n + 1):
            print(f"x{i}: S={rec[f'S{i}']:.6f} S_T={rec[f'S{i}T']:.6f}")
        print(f"f0={rec['f0']:.6f} D={rec['D']:.6f} scaling={rec['scaling']:.6f} "
              f"nodes={rec['n_cpu']}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = config_from_args(args)
    if args.command == "estimate":
        _print_estimate(run_estimate(config))
    elif args.command == "converge":
        report = run_convergence(config)
        for label, (c, slope) in report.fits.items():
            print(f"{label}: slope={slope:.3f} (trend {c:.3g} * N^{slope:.3f})")
    elif args.command == "compare":
        summary = run_estimator_comparison(config)
        for label, winner in summary.lower_rmse_at_largest.items():
            b = summary.binned.rmse[label][-1]
            p = summary.pick_freeze.rmse[label][-1]
            print(f"{label}: binned rmse={b:.4g}, pick_freeze rmse={p:.4g} "
                  f"-> lower: {winner}")
    elif args.command == "sweep":
        rows = run_sweep(config)
        for row in rows:
            if row["error"]:
                print(f"param={row['param']}: ERROR {row['error']}")
            else:
                print(f"param={row['param']}: f0={row['f0']:.6f} D={row['D']:.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
