"""Command-line entry point: ``delasso {simulate,fit,qq,diagnose}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics
from .core_types import RegressionProblem
from .design import load_config, replication_streams
from .exceptions import ConfigError, DelassoError
from .experiment import (analyze, emit_report, run_experiment, simulate_dataset, summary_line,
                         _Context)
from .inference import write_test_csv
from .lasso import lasso, theory_lambda

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("delasso")


def _sigma_arg(value: str):
    if value in ("scaled", "robust"):
        return value
    if value.startswith("known:"):
        try:
            v = float(value.split(":", 1)[1])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad known sigma {value!r}")
        if v <= 0:
            raise argparse.ArgumentTypeError("known sigma must be positive")
        return v
    raise argparse.ArgumentTypeError("--sigma must be scaled, robust or known:<value>")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, help="override the RNG seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--out", type=Path, help="output path (default: stdout)")
    p.add_argument("--precision", choices=("nodewise", "oracle"))
    p.add_argument("--sigma", type=_sigma_arg, help="scaled | robust | known:<value>")
    p.add_argument("--alpha", type=float)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="delasso", description="Debiased Lasso inference.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="run a Monte-Carlo experiment")
    sim.add_argument("config", type=Path, help="TOML experiment config")
    sim.add_argument("--format", choices=("json", "csv"), help="default: from --out suffix, else json")
    sim.add_argument("--replications", type=int)

    fit = sub.add_parser("fit", parents=[common], help="test every coordinate of one dataset")
    fit.add_argument("data", type=Path, help="CSV: first column Y, remaining columns X")
    fit.add_argument("--lambda-mode", choices=("cv", "theory"), default="cv")

    qq = sub.add_parser("qq", parents=[common], help="Q-Q data for one simulated replication")
    qq.add_argument("config", type=Path)
    qq.add_argument("--replication", type=int, default=0)

    diag = sub.add_parser("diagnose", parents=[common], help="RE constants on a small design")
    diag.add_argument("data", type=Path, help="CSV: first column Y, remaining columns X")
    diag.add_argument("--x-only", action="store_true", help="every CSV column is a design column")
    diag.add_argument("-s", type=int, default=2)
    diag.add_argument("-c", type=float, default=3.0)
    diag.add_argument("-t", type=int, default=2)
    diag.add_argument("-q", type=int)
    diag.add_argument("--restarts", type=int, default=50)
    return parser


def read_csv_matrix(path) -> np.ndarray:
    """Numeric CSV with an optional header row."""
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(x) for x in first.strip().split(",")]
        skip = 0
    except ValueError:
        skip = 1
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    return data


def _config_with_overrides(args):
    config = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.alpha is not None:
        changes["alpha"] = args.alpha
    if args.precision is not None:
        changes["precision"] = args.precision
    if args.sigma is not None:
        if isinstance(args.sigma, float):
            changes.update(sigma_source="known", sigma=args.sigma)
        else:
            changes["sigma_source"] = args.sigma
    if getattr(args, "replications", None) is not None:
        changes["replications"] = args.replications
    return config.replace(**changes) if changes else config


def _write_text(args, text):
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)


def cmd_simulate(args) -> int:
    config = _config_with_overrides(args)
    report = run_experiment(config, threads=args.threads)
    fmt = args.format or (args.out.suffix.lstrip(".") if args.out and args.out.suffix in (".csv", ".json") else "json")
    if args.out is None:
        import tempfile

        with tempfile.NamedTemporaryFile("r", suffix="." + fmt) as tmp:
            emit_report(report, fmt, tmp.name)
            sys.stdout.write(Path(tmp.name).read_text())
    else:
        emit_report(report, fmt, args.out)
    print(summary_line(report), file=sys.stderr)
    if report.failures == len(report.per_replication):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.precision == "oracle":
        raise ConfigError("fit has no population covariance; only --precision nodewise is available")
    data = read_csv_matrix(args.data)
    if data.shape[1] < 2:
        raise ConfigError("fit input needs a response column and at least one design column")
    problem = RegressionProblem(data[:, 1:], data[:, 0])
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    a = analyze(problem, args.alpha if args.alpha is not None else 0.05,
                sigma=args.sigma or "scaled", lambda_mode=args.lambda_mode, rng=rng,
                threads=args.threads)
    out = args.out or Path("/dev/stdout")
    write_test_csv(out, a.debiased, a.report, a.intervals)
    print(f"lambda {a.lambda_used:.6g}  sigma_hat {a.sigma_hat:.6g} ({a.sigma_source})  "
          f"rejections {int(a.report.decisions.sum())}/{problem.p}", file=sys.stderr)
    return EXIT_OK


def cmd_qq(args) -> int:
    config = _config_with_overrides(args)
    ctx = _Context(config)
    problem, truth = simulate_dataset(config, args.replication, ctx.factor)
    rng = replication_streams(config.seed, args.replication)[3]
    a = analyze(problem, config.alpha, precision=ctx.oracle or "nodewise", sigma=truth.sigma,
                lambda_mode=config.lambda_mode, cv_folds=config.cv_folds, rng=rng,
                lambda_node=config.lambda_node)
    qq = diagnostics.qq_data(a.debiased, truth)
    qq.to_csv(args.out or Path("/dev/stdout"))
    print(f"ks_statistic {qq.ks_statistic:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    data = read_csv_matrix(args.data)
    X = data if args.x_only else data[:, 1:]
    n, p = X.shape
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    rep = diagnostics.re_report(X, args.s, args.c, args.t, args.q, args.restarts, rng)
    out = {"n": n, "p": p, "s": rep.s, "c": rep.c, "t": rep.t, "q": rep.q,
           "kappa_s_c": rep.kappa_s_c, "kappa_s_q_c": rep.kappa_s_q_c,
           "phi_max_t": rep.phi_max_t}
    if not args.x_only:
        problem = RegressionProblem(X, data[:, 0])
        fit = lasso(problem, theory_lambda(n, p))
        out["lasso_support_size"] = int(fit.active_set.size)
        try:
            phi_n = diagnostics.phi_max(X, min(n, p))
            out["support_size_bound"] = diagnostics.support_size_bound(phi_n, rep.kappa_s_c, args.s)
        except DelassoError as exc:
            out["support_size_bound"] = None
            log.info("support size bound unavailable: %s", exc)
    _write_text(args, json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "qq": cmd_qq, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DelassoError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
