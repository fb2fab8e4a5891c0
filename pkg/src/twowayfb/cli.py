"""Command-line front end.

Subcommands: ``infer`` (fit a CSV panel and report t-statistics and
confidence intervals), ``cv`` (simulate plug-in or random-sampling fixed-b
critical values), ``mc`` (run a coverage experiment from a config file),
``asytab`` (regenerate the asymptotic critical value / coverage table).

Exit codes: 0 success, 2 input or schema error, 3 numerical failure,
4 configuration error. All randomized subcommands require --seed and are
deterministic given it; --format table output carries a timestamp header
unless --no-timestamp is passed, CSV output never does.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime, timezone

import numpy as np

from .bandwidth import DegenerateScoresError
from .fixedb import (
    DEFAULT_B_GRID,
    TABLE_INCREMENTS,
    TABLE_REPS,
    asymptotic_table,
    iid_limit_cv,
    plugin_inputs,
    simulate_plugin_cv,
    write_critical_values,
)
from .inference import DEFAULT_ESTIMATORS, InferenceOptions, run_inference
from .montecarlo import load_experiment_config, run_experiment
from .paneldata import PanelDataError, load_csv
from .regression import SingularDesignError, fit_pols, fit_twfe

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4


def _schema_from_args(args) -> dict:
    return {
        "unit": args.unit,
        "time": args.time,
        "y": args.y,
        "x": [c.strip() for c in args.x.split(",") if c.strip()],
    }


def _write_text(path: str | None, text: str, timestamp: bool) -> None:
    if timestamp:
        text = f"# generated {datetime.now(timezone.utc).isoformat()}\n" + text
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_infer(args) -> int:
    data = load_csv(
        args.input, _schema_from_args(args),
        add_intercept=args.intercept, delimiter=args.delimiter,
    )
    bandwidth: int | str
    if args.bandwidth == "andrews":
        bandwidth = "andrews"
    else:
        bandwidth = int(args.bandwidth)
        t_len = data.n_periods
        if not 1 <= bandwidth <= t_len:
            clamped = min(max(bandwidth, 1), t_len)
            print(
                f"warning: bandwidth {bandwidth} clamped to {clamped} (T={t_len})",
                file=sys.stderr,
            )
            bandwidth = clamped
    policies = ("normal", "fixed_b") if args.cv == "fixedb" else ("normal",)
    if "fixed_b" in policies and args.seed is None:
        raise ConfigError("--cv fixedb requires --seed")
    options = InferenceOptions(
        estimators=tuple(e.strip().upper().replace("CI", "CLUSTER_I").replace("CT", "CLUSTER_T")
                         if e.strip().upper() in ("CI", "CT") else e.strip().upper()
                         for e in args.estimators.split(",")),
        bandwidth=bandwidth,
        level=args.level,
        cv_policies=policies,
        twfe=args.twfe,
        seed=args.seed,
        cv_reps=args.cv_reps,
        cv_increments=args.cv_increments,
    )
    report = run_inference(data, options)
    if args.format == "csv":
        if args.out is None:
            raise ConfigError("--format csv requires --out")
        report.to_csv(args.out)
    else:
        _write_text(args.out, report.to_text(), timestamp=not args.no_timestamp)
    return EXIT_OK


def cmd_cv(args) -> int:
    if args.iid is None and args.input is None:
        raise ConfigError("cv needs either --iid KIND or an input dataset")
    if args.iid is not None:
        if args.b is None:
            raise ConfigError("--iid requires --b")
        cv = iid_limit_cv(
            args.iid, b=args.b, level=args.level,
            reps=args.cv_reps, increments=args.cv_increments, seed=args.seed,
        )
        sets = [cv]
    else:
        data = load_csv(
            args.input, _schema_from_args(args),
            add_intercept=args.intercept, delimiter=args.delimiter,
        )
        fit = fit_twfe(data) if args.twfe else fit_pols(data)
        if args.bandwidth == "andrews":
            from .bandwidth import andrews_bandwidth

            m = andrews_bandwidth(fit).m_hat
        else:
            m = min(max(int(args.bandwidth), 1), data.n_periods)
        try:
            coef = fit.regressor_names.index(args.coefficient)
        except ValueError:
            raise ConfigError(
                f"--coefficient '{args.coefficient}' not among {fit.regressor_names}"
            ) from None
        r = np.zeros(fit.n_regressors)
        r[coef] = 1.0
        inputs = plugin_inputs(fit, m, restriction=r)
        sets = list(
            simulate_plugin_cv(
                inputs, level=args.level, reps=args.cv_reps,
                increments=args.cv_increments, seed=args.seed,
            )
        )
    if args.out is None:
        for s in sets:
            print(f"{s.statistic_kind} b={s.b:.6g} level={s.level}: {s.value:.6f}")
    else:
        write_critical_values(sets, args.out)
    return EXIT_OK


def cmd_mc(args) -> int:
    config = load_experiment_config(args.config, seed=args.seed, threads=args.threads)
    report = run_experiment(config)
    if args.format == "csv":
        if args.out is None:
            raise ConfigError("--format csv requires --out")
        report.to_csv(args.out)
    else:
        _write_text(args.out, report.to_text(), timestamp=not args.no_timestamp)
    return EXIT_OK


def cmd_asytab(args) -> int:
    grid = DEFAULT_B_GRID if args.b_grid is None else tuple(
        float(tok) for tok in args.b_grid.split(",")
    )
    table = asymptotic_table(
        b_grid=grid, level=args.level, reps=args.reps,
        increments=args.increments, seed=args.seed,
    )
    if args.format == "csv":
        if args.out is None:
            raise ConfigError("--format csv requires --out")
        table.to_csv(args.out)
    else:
        _write_text(args.out, table.to_text(), timestamp=not args.no_timestamp)
    return EXIT_OK


class ConfigError(Exception):
    """Invalid flag combination or config content."""


def _add_schema_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--unit", required=True, help="unit id column name")
    p.add_argument("--time", required=True, help="period column name")
    p.add_argument("--y", required=True, help="outcome column name")
    p.add_argument("--x", required=True, help="comma list of regressor columns")
    p.add_argument("--delimiter", default=",")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--intercept", dest="intercept", action="store_true", default=True)
    g.add_argument("--no-intercept", dest="intercept", action="store_false")
    p.add_argument("--twfe", action="store_true", help="two-way fixed effects estimation")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output path (default: stdout for tables)")
    p.add_argument("--format", choices=("csv", "table"), default="table")
    p.add_argument("--no-timestamp", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twowayfb",
        description="Two-way cluster-robust panel inference with fixed-b critical values",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="fit a CSV panel and report tests and intervals")
    p.add_argument("input", help="CSV file")
    _add_schema_flags(p)
    p.add_argument("--estimators", default=",".join(DEFAULT_ESTIMATORS))
    p.add_argument("--bandwidth", default="andrews", help="integer lag or 'andrews'")
    p.add_argument("--level", type=float, default=0.95, help="CI coverage level")
    p.add_argument("--cv", choices=("normal", "fixedb"), default="normal")
    p.add_argument("--cv-reps", type=int, default=1000)
    p.add_argument("--cv-increments", type=int, default=500)
    p.add_argument("--seed", type=int, default=None)
    _add_output_flags(p)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("cv", help="simulate fixed-b critical values")
    p.add_argument("input", nargs="?", default=None, help="CSV file (plug-in mode)")
    p.add_argument("--iid", default=None,
                   choices=("IID_CHS", "IID_BCCHS", "IID_DKA", "IID_PLUGIN"),
                   help="simulate a random-sampling limit law instead")
    p.add_argument("--b", type=float, default=None, help="bandwidth fraction for --iid")
    p.add_argument("--unit"), p.add_argument("--time"), p.add_argument("--y")
    p.add_argument("--x", default="")
    p.add_argument("--delimiter", default=",")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--intercept", dest="intercept", action="store_true", default=True)
    g.add_argument("--no-intercept", dest="intercept", action="store_false")
    p.add_argument("--twfe", action="store_true")
    p.add_argument("--coefficient", default=None, help="coefficient name for the restriction")
    p.add_argument("--bandwidth", default="andrews")
    p.add_argument("--level", type=float, default=0.975, help="one-sided quantile level")
    p.add_argument("--cv-reps", type=int, default=TABLE_REPS)
    p.add_argument("--cv-increments", type=int, default=TABLE_INCREMENTS)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(fn=cmd_cv)

    p = sub.add_parser("mc", help="run a coverage experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    _add_output_flags(p)
    p.set_defaults(fn=cmd_mc)

    p = sub.add_parser("asytab", help="regenerate the asymptotic cv/coverage table")
    p.add_argument("--b-grid", default=None, help="comma list of b values")
    p.add_argument("--level", type=float, default=0.975)
    p.add_argument("--reps", type=int, default=TABLE_REPS)
    p.add_argument("--increments", type=int, default=TABLE_INCREMENTS)
    p.add_argument("--seed", type=int, required=True)
    _add_output_flags(p)
    p.set_defaults(fn=cmd_asytab)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PanelDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SingularDesignError, DegenerateScoresError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
