"""Monte-Carlo harness: simulate, fit, test and aggregate error rates."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core_types import GroundTruth, RegressionProblem, materialize_covariance
from .debias import DebiasedFit, debias, decompose_bias, infty_k_norm, large_bias_set
from .design import (ExperimentConfig, design_factor, replication_streams, sample_design,
                     sample_response, sample_theta0)
from .diagnostics import standardized_residuals, ks_statistic
from .inference import (ConfidenceIntervals, TestReport, confidence_intervals,
                        predicted_average_power, robust_sigma, test)
from .lasso import (LassoFit, cross_validate, default_lambda_grid, lasso, lasso_path,
                    scaled_lasso, theory_lambda)
from .precision import (PrecisionEstimate, nodewise_precision, oracle_precision,
                        precision_error_norm)

log = logging.getLogger(__name__)

# theta0 stream used when the support is held fixed across replications
FIXED_THETA_INDEX = 2**32


@dataclass(frozen=True)
class Analysis:
    lasso: LassoFit
    lambda_used: float
    precision: PrecisionEstimate
    debiased: DebiasedFit
    sigma_hat: float
    sigma_source: str
    report: TestReport
    intervals: ConfidenceIntervals


def fit_lasso(problem: RegressionProblem, mode: str = "cv", folds: int = 5, n_lambda: int = 100,
              rng=None, ratio: float | None = None, sigma: float = 1.0) -> LassoFit:
    """Lasso at a cross-validated or theory-driven lambda.

    ``ratio`` is lambda_min / lambda_max for the grid; by default 1e-2 when
    n < p and 1e-3 otherwise. ``sigma`` scales the theory value
    ``sigma * sqrt(2 log p / n)``.
    """
    if mode == "theory":
        return lasso(problem, theory_lambda(problem.n, problem.p, sigma))
    if ratio is None:
        ratio = 1e-2 if problem.n < problem.p else 1e-3
    grid = default_lambda_grid(problem, n_lambda, ratio)
    lam_cv, _ = cross_validate(problem, grid, folds, rng)
    # warm-started path down to the selected value
    return lasso_path(problem, grid[grid >= lam_cv])[-1]


def analyze(problem: RegressionProblem, alpha: float = 0.05, *, precision="nodewise",
            sigma="scaled", lambda_mode="cv", cv_folds=5, n_lambda=100, lambda_node=None,
            rng=None, threads=1, theory_sigma=1.0) -> Analysis:
    """Full inference pipeline on one dataset.

    ``precision`` is ``"nodewise"`` or a ready :class:`PrecisionEstimate`;
    ``sigma`` is ``"scaled"``, ``"robust"`` or a known positive value.
    """
    lf = fit_lasso(problem, lambda_mode, cv_folds, n_lambda, rng, sigma=theory_sigma)
    if isinstance(precision, PrecisionEstimate):
        pe = precision
    elif precision == "nodewise":
        pe = nodewise_precision(problem.X, lambda_node, threads=threads)
    else:
        raise ValueError(f"precision must be 'nodewise' or a PrecisionEstimate, got {precision!r}")
    fit = debias(problem, lf, pe)
    if sigma == "scaled":
        sigma_hat, source = scaled_lasso(problem).sigma_hat, "scaled_lasso"
    elif sigma == "robust":
        sigma_hat, source = robust_sigma(fit), "robust_quantile"
    else:
        sigma_hat, source = float(sigma), "known"
    rep = test(fit, sigma_hat, alpha, source)
    ci = confidence_intervals(fit, sigma_hat, alpha=alpha)
    return Analysis(lf, lf.lam, pe, fit, float(sigma_hat), source, rep, ci)


@dataclass(frozen=True)
class ReplicationResult:
    replication: int
    seed: int
    type1_error: float | None = None
    avg_power: float | None = None
    null_rejections: int = 0
    n_null: int = 0
    alt_rejections: int = 0
    n_alt: int = 0
    sigma_hat: float | None = None
    lambda_used: float | None = None
    precision_error: float | None = None
    ks_statistic: float | None = None
    bias_norm_sq: float | None = None
    large_bias_fraction: float | None = None
    predicted_power: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


class _Context:
    """Per-config quantities shared by all replications (read-only)."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.factor = design_factor(config.cov)
        self.Sigma, self.Omega = materialize_covariance(config.cov)
        self.oracle = oracle_precision(config.cov) if config.precision == "oracle" else None


def simulate_dataset(config: ExperimentConfig, r: int, factor=None):
    """The (problem, truth) pair for replication ``r``; a pure function of (config, r)."""
    g_design, g_theta, g_noise, _ = replication_streams(config.seed, r)
    if not config.resample_theta:
        g_theta = replication_streams(config.seed, FIXED_THETA_INDEX)[1]
    if factor is None:
        factor = design_factor(config.cov)
    X = sample_design(config.cov, config.n, g_design, factor)
    truth = sample_theta0(config.p, config.s0, config.theta_value, g_theta, config.sigma)
    Y = sample_response(X, truth, g_noise)
    return RegressionProblem(X, Y), truth


def _rates(decisions, truth: GroundTruth):
    S = truth.support
    null = np.ones(truth.p, dtype=bool)
    null[S] = False
    d = np.asarray(decisions)
    n_null, n_alt = int(null.sum()), int(S.size)
    nr, ar = int(d[null].sum()), int(d[S].sum())
    return (nr / n_null if n_null else None, ar / n_alt if n_alt else None, nr, n_null, ar, n_alt)


def _replicate(ctx: _Context, r: int) -> ReplicationResult:
    config = ctx.config
    problem, truth = simulate_dataset(config, r, ctx.factor)
    cv_rng = replication_streams(config.seed, r)[3]
    sigma = config.sigma if config.sigma_source == "known" else config.sigma_source
    a = analyze(problem, config.alpha, precision=ctx.oracle or "nodewise", sigma=sigma,
                lambda_mode=config.lambda_mode, cv_folds=config.cv_folds,
                n_lambda=config.n_lambda, lambda_node=config.lambda_node, rng=cv_rng,
                theory_sigma=config.sigma)
    t1, pw, nr, nn, ar, na = _rates(a.report.decisions, truth)
    z = standardized_residuals(a.debiased, truth) / truth.sigma
    bd = decompose_bias(a.debiased, truth)
    k = max(truth.s0, 1)
    return ReplicationResult(
        replication=r, seed=config.seed, type1_error=t1, avg_power=pw,
        null_rejections=nr, n_null=nn, alt_rejections=ar, n_alt=na,
        sigma_hat=a.sigma_hat, lambda_used=a.lambda_used,
        precision_error=precision_error_norm(a.precision.Omega_hat, ctx.Omega),
        ks_statistic=ks_statistic(z),
        bias_norm_sq=infty_k_norm(bd.Delta, k) ** 2,
        large_bias_fraction=(large_bias_set(bd.Delta, 0.5).size / truth.s0) if truth.s0 else None,
        predicted_power=predicted_average_power(truth, ctx.Omega, config.n, config.alpha).average,
    )


def run_replication(config: ExperimentConfig, r: int, _ctx: _Context | None = None) -> ReplicationResult:
    """One Monte-Carlo replication; failures are returned with ``error`` set."""
    ctx = _ctx or _Context(config)
    try:
        return _replicate(ctx, r)
    except Exception as exc:  # record-and-continue
        log.warning("replication %d failed: %r", r, exc)
        return ReplicationResult(replication=r, seed=config.seed,
                                 error=f"{type(exc).__name__}: {exc}")


def _mean_std(values):
    v = np.array([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return None, None
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    per_replication: list[ReplicationResult]
    type1_mean: float | None
    type1_std: float | None
    power_mean: float | None
    power_std: float | None
    pooled_type1: float | None
    pooled_power: float | None
    predicted_power: float | None
    failures: int
    notes: list[str] = field(default_factory=list)

    @property
    def successful(self) -> list[ReplicationResult]:
        return [r for r in self.per_replication if r.ok]

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("type1_mean", "type1_std", "power_mean", "power_std",
                                           "pooled_type1", "pooled_power", "predicted_power",
                                           "failures", "notes")}
        d["config"] = self.config.to_dict()
        d["per_replication"] = [asdict(r) for r in self.per_replication]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        d = dict(d)
        d["config"] = ExperimentConfig.from_dict(d["config"])
        d["per_replication"] = [ReplicationResult(**r) for r in d["per_replication"]]
        return cls(**d)


def aggregate(config: ExperimentConfig, results: list[ReplicationResult]) -> ExperimentReport:
    good = [r for r in results if r.ok]
    t_mean, t_std = _mean_std(r.type1_error for r in good)
    p_mean, p_std = _mean_std(r.avg_power for r in good)
    nn = sum(r.n_null for r in good)
    na = sum(r.n_alt for r in good)
    pooled_t = sum(r.null_rejections for r in good) / nn if nn else None
    pooled_p = sum(r.alt_rejections for r in good) / na if na else None
    pred, _ = _mean_std(r.predicted_power for r in good)
    notes = []
    Sigma, _ = materialize_covariance(config.cov)
    if not np.allclose(np.diag(Sigma), 1.0):
        notes.append("Sigma_ii != 1: predicted power uses the unnormalized Omega_ii")
    notes.append("theta0 support resampled per replication" if config.resample_theta
                 else "theta0 support fixed across replications")
    return ExperimentReport(config, list(results), t_mean, t_std, p_mean, p_std, pooled_t,
                            pooled_p, pred, len(results) - len(good), notes)


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    ctx = _Context(config)
    reps = range(config.replications)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda r: run_replication(config, r, ctx), reps))
    else:
        results = [run_replication(config, r, ctx) for r in reps]
    return aggregate(config, results)


REPLICATION_COLUMNS = ("replication", "seed", "type1_error", "avg_power", "null_rejections",
                       "n_null", "alt_rejections", "n_alt", "sigma_hat", "lambda_used",
                       "precision_error", "ks_statistic", "bias_norm_sq",
                       "large_bias_fraction", "predicted_power", "error")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_report(report: ExperimentReport, format: str, path) -> None:
    """Write the report as JSON, or as CSV with one row per replication
    followed by a ``summary`` row of means."""
    if format == "json":
        with open(path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True, allow_nan=True)
            fh.write("\n")
    elif format == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(REPLICATION_COLUMNS)
            for r in report.per_replication:
                w.writerow([_cell(getattr(r, c)) for c in REPLICATION_COLUMNS])
            summary = {"replication": "summary", "type1_error": report.type1_mean,
                       "avg_power": report.power_mean, "predicted_power": report.predicted_power}
            w.writerow([_cell(summary.get(c)) for c in REPLICATION_COLUMNS])
    else:
        raise ValueError(f"unknown report format {format!r}")


def load_report(path) -> ExperimentReport:
    with open(path) as fh:
        return ExperimentReport.from_dict(json.load(fh))


def summary_line(report: ExperimentReport) -> str:
    def f(x):
        return "n/a" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.4f}"

    return (f"type1 {f(report.type1_mean)} (sd {f(report.type1_std)})  "
            f"power {f(report.power_mean)} (sd {f(report.power_std)})  "
            f"predicted {f(report.predicted_power)}  failures {report.failures}")
