"""Acceptance criteria, one PASS/FAIL line each (see the terminal summary)."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delasso.core_types import GroundTruth, RegressionProblem
from delasso.debias import debias, decompose_bias, infty_k_norm
from delasso.experiment import emit_report, run_experiment, summary_line
from delasso.inference import G, confidence_intervals, decide, p_values, robust_sigma
from delasso.lasso import lasso, lambda_max
from delasso.precision import PrecisionEstimate

from conftest import (orthonormal_design, random_problem, record_criterion, scaling_runs,
                      study_analyses, study_config, study_report)
from oracles import infty_k_bruteforce, ista_objectives, kkt_violation, soft_threshold

pytestmark = pytest.mark.slow

BANDWIDTHS = (5, 25, 50, 75, 100)
REFERENCE_POWER = {5: 0.5766, 25: 0.5750, 50: 0.5350, 75: 0.4916, 100: 0.5150}
ALPHA = 0.05


@pytest.mark.parametrize("b", BANDWIDTHS)
def test_study_table(b):
    rep = study_report(b, "nodewise")
    t1_ok = ALPHA - 0.03 <= rep.type1_mean <= ALPHA + 0.04
    pw_ok = abs(rep.power_mean - REFERENCE_POWER[b]) <= 0.10
    record_criterion(f"study table b={b} type-I in [0.02, 0.09]", t1_ok,
                     f"type1_mean {rep.type1_mean:.4f}")
    record_criterion(f"study table b={b} power within 0.10 of {REFERENCE_POWER[b]}", pw_ok,
                     f"power_mean {rep.power_mean:.4f} (predicted {rep.predicted_power:.4f})")
    assert rep.failures == 0
    assert t1_ok and pw_ok


def test_type1_control_pooled():
    reps = [r for b in BANDWIDTHS for r in study_report(b, "nodewise").per_replication]
    pooled = sum(r.null_rejections for r in reps) / sum(r.n_null for r in reps)
    ok = pooled <= ALPHA + 0.02
    record_criterion("pooled null rejection rate <= alpha + 0.02", ok, f"pooled {pooled:.4f}")
    assert ok


@pytest.mark.parametrize("b", BANDWIDTHS)
def test_power_prediction_with_oracle_precision(b):
    rep = study_report(b, "oracle")
    gap = abs(rep.power_mean - rep.predicted_power)
    ok = gap <= 0.10
    record_criterion(f"oracle-precision power vs prediction b={b}", ok,
                     f"power_mean {rep.power_mean:.4f} predicted {rep.predicted_power:.4f} "
                     f"gap {gap:.4f}")
    assert ok


def test_qq_linearity():
    rep = study_report(75, "oracle")
    med = float(np.median([r.ks_statistic for r in rep.per_replication]))
    ok = med < 0.1
    record_criterion("b=75 oracle precision median KS < 0.1", ok, f"median KS {med:.4f}")
    assert ok


@settings(max_examples=100, deadline=None, derandomize=True)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 50), p=st.integers(1, 50),
       frac=st.floats(0.01, 1.0))
def _kkt_case(seed, n, p, frac):
    rng = np.random.default_rng(seed)
    prob = random_problem(rng, n, p)
    lam = frac * lambda_max(prob)
    fit = lasso(prob, lam)
    _kkt_case.worst = max(_kkt_case.worst, kkt_violation(prob.X, prob.Y, fit.theta_hat, lam))
    _kkt_case.count += 1


def test_solver_kkt_certificate():
    _kkt_case.worst, _kkt_case.count = 0.0, 0
    _kkt_case()
    ok = _kkt_case.worst <= 1e-6 and _kkt_case.count >= 100
    record_criterion("KKT certificate on 100 random instances", ok,
                     f"{_kkt_case.count} instances, worst violation {_kkt_case.worst:.2e}")
    assert ok


def test_solver_matches_proximal_gradient():
    rng = np.random.default_rng(2024)
    probs = [random_problem(rng, 12, 4) for _ in range(20)]
    lams = np.array([rng.uniform(0.05, 0.6) * lambda_max(p) for p in probs])
    oracle, _ = ista_objectives([p.X for p in probs], [p.Y for p in probs], lams)
    ours = np.array([lasso(p, l).objective for p, l in zip(probs, lams)])
    worst = float(np.abs(ours - oracle).max())
    ok = worst <= 1e-8
    record_criterion("objective vs proximal-gradient oracle (20 tiny instances)", ok,
                     f"worst gap {worst:.2e}")
    assert ok


def test_solver_orthogonal_design():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(20):
        X = orthonormal_design(30, 8, rng)
        Y = X @ rng.standard_normal(8) + 0.3 * rng.standard_normal(30)
        lam = rng.uniform(0.01, 1.0)
        fit = lasso(RegressionProblem(X, Y), lam)
        worst = max(worst, float(np.abs(fit.theta_hat - soft_threshold(X.T @ Y / 30, lam)).max()))
    ok = worst <= 1e-10
    record_criterion("orthogonal design soft-threshold", ok, f"worst deviation {worst:.2e}")
    assert ok


def test_formula_identities():
    g_err = max(abs(G(a, 0.0) - a) for a in np.linspace(0.001, 0.999, 999))
    g_ok = g_err <= 1e-12
    record_criterion("G(alpha, 0) = alpha", g_ok, f"max error {g_err:.2e}")

    rng = np.random.default_rng(5)
    mismatches = recon_err = 0
    for _ in range(200):
        n, p = int(rng.integers(10, 60)), int(rng.integers(2, 40))
        prob = random_problem(rng, n, p)
        pe = PrecisionEstimate(np.eye(p) + 0.1 * rng.standard_normal((p, p)), "random")
        fit = debias(prob, lasso(prob, rng.uniform(0.05, 1) * lambda_max(prob)), pe)
        sigma, alpha = rng.uniform(0.2, 3), rng.uniform(0.001, 0.5)
        rej = decide(p_values(fit, sigma), alpha) == 1
        ci = confidence_intervals(fit, sigma, alpha=alpha)
        mismatches += int(np.sum(rej != ((ci.lower > 0) | (ci.upper < 0))))
        truth = GroundTruth(rng.standard_normal(p), 1.0)
        bd = decompose_bias(fit, truth)
        target = np.sqrt(n) * (fit.theta_u - truth.theta0)
        recon_err = max(recon_err, float(np.abs(bd.Z + bd.Delta - target).max()))
    dual_ok = mismatches == 0
    recon_ok = recon_err <= 1e-10
    record_criterion("p-value / interval duality (200 instances)", dual_ok,
                     f"{mismatches} mismatching coordinates")
    record_criterion("Z + Delta reconstruction", recon_ok, f"max error {recon_err:.2e}")

    norm_err = 0.0
    for _ in range(200):
        v = rng.standard_normal(int(rng.integers(1, 11))) * rng.uniform(0.1, 10)
        k = int(rng.integers(1, v.size + 1))
        norm_err = max(norm_err, abs(infty_k_norm(v, k) - infty_k_bruteforce(v, k)))
    norm_ok = norm_err <= 1e-12
    record_criterion("(inf,k) norm vs exhaustive subsets (length <= 10)", norm_ok,
                     f"max error {norm_err:.2e}")
    assert g_ok and dual_ok and recon_ok and norm_ok


def test_scaling_trends():
    runs = scaling_runs()
    ns = sorted(runs)
    bias = [float(np.median([r.bias_norm_sq for r in runs[n][:10]])) for n in ns]
    perr = [float(np.median([r.precision_error for r in runs[n][:10]])) for n in ns]
    b_ok = all(a >= b for a, b in zip(bias, bias[1:]))
    p_ok = all(a >= b for a, b in zip(perr, perr[1:]))
    fmt = lambda xs: ", ".join(f"n={n}: {x:.4g}" for n, x in zip(ns, xs))
    record_criterion("median ||Delta||^2_(inf,s0) non-increasing in n", b_ok, fmt(bias))
    record_criterion("median precision error non-increasing in n", p_ok, fmt(perr))
    assert b_ok and p_ok


def test_noise_estimators():
    analyses = study_analyses(5, "nodewise", 20)
    scaled = float(np.median([a.sigma_hat for _, _, a in analyses]))
    robust = float(np.median([robust_sigma(a.debiased) for _, _, a in analyses]))
    s_ok, r_ok = 0.8 <= scaled <= 1.2, 0.8 <= robust <= 1.2
    record_criterion("scaled-Lasso sigma_hat median in [0.8, 1.2]", s_ok, f"{scaled:.4f}")
    record_criterion("robust sigma_hat median in [0.8, 1.2]", r_ok, f"{robust:.4f}")
    assert s_ok and r_ok


def test_determinism(tmp_path):
    config = study_config(5, "nodewise", 2)
    same = True
    for fmt in ("json", "csv"):
        a, b = tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"
        emit_report(run_experiment(config), fmt, a)
        emit_report(run_experiment(config, threads=2), fmt, b)
        same &= a.read_bytes() == b.read_bytes()
    record_criterion("byte-identical reports for identical config and seed", same,
                     "json and csv compared (serial vs 2 threads)")
    assert same
