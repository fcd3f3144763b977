import functools
import warnings

import numpy as np
import pytest

from delasso.core_types import CovarianceModel, RegressionProblem
from delasso.design import ExperimentConfig, replication_streams
from delasso.experiment import _Context, analyze, simulate_dataset


def orthonormal_design(n, p, rng, scales=None):
    """X with X^T X / n = diag(scales**2) (identity by default)."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    X = np.sqrt(n) * Q
    if scales is not None:
        X = X * scales
    return X


def random_problem(rng, n, p, s=3, sigma=0.5):
    X = rng.standard_normal((n, p))
    theta = np.zeros(p)
    theta[: min(s, p)] = rng.choice([-1.0, 1.0], min(s, p))
    return RegressionProblem(X, X @ theta + sigma * rng.standard_normal(n))


def study_config(b=5, precision="nodewise", replications=20, **kw):
    fields = dict(n=240, p=300, s0=30, theta_value=0.1, sigma=1.0,
                  cov=CovarianceModel.circulant(300, b), alpha=0.05,
                  replications=replications, seed=2014, precision=precision)
    fields.update(kw)
    return ExperimentConfig(**fields)


@functools.lru_cache(maxsize=None)
def study_analyses(b=5, precision="nodewise", reps=20):
    """(truth, Analysis) for the first ``reps`` replications of the study config."""
    config = study_config(b, precision, reps)
    ctx = _Context(config)
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for r in range(reps):
            problem, truth = simulate_dataset(config, r, ctx.factor)
            a = analyze(problem, config.alpha, precision=ctx.oracle or "nodewise",
                        rng=replication_streams(config.seed, r)[3])
            out.append((problem, truth, a))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@functools.lru_cache(maxsize=None)
def scaling_runs(seeds=20, ns=(240, 480, 960)):
    """{n: [ReplicationResult, ...]} for the study config at several sample sizes."""
    from delasso.experiment import run_replication

    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for n in ns:
            config = study_config(5, "nodewise", seeds).replace(n=n)
            ctx = _Context(config)
            out[n] = [run_replication(config, r, ctx) for r in range(seeds)]
    return out


@functools.lru_cache(maxsize=None)
def study_report(b=5, precision="nodewise", replications=20):
    """run_experiment on the study config, cached across test modules."""
    from delasso.experiment import run_experiment

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run_experiment(study_config(b, precision, replications))


ACCEPTANCE_LINES = []


def record_criterion(name, ok, detail):
    """Log one acceptance line; printed again in the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
