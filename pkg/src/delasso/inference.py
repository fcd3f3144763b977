"""Coordinate-wise tests, confidence intervals and power calculations."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core_types import GroundTruth
from .debias import DebiasedFit
from .exceptions import DomainError, TooLarge, ZeroVariance

VAR_FLOOR = 1e-14
MINIMAX_MAX_P = 20
MINIMAX_MAX_S0 = 4


def std_normal_cdf(x):
    return special.ndtr(x)


def std_normal_quantile(q):
    q_arr = np.asarray(q, dtype=float)
    if np.any(~((q_arr > 0) & (q_arr < 1))):
        raise DomainError(f"quantile level must lie in (0, 1), got {q}")
    out = special.ndtri(q_arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TestReport:
    p_values: np.ndarray
    decisions: np.ndarray
    alpha: float
    sigma_used: float
    sigma_source: str

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class ConfidenceIntervals:
    lower: np.ndarray
    upper: np.ndarray
    level: float


@dataclass(frozen=True)
class PowerPrediction:
    per_coordinate: np.ndarray
    average: float | None


def _checked_var(fit: DebiasedFit) -> np.ndarray:
    v = np.asarray(fit.var_proxy)
    bad = np.flatnonzero(v <= VAR_FLOOR)
    if bad.size:
        raise ZeroVariance(f"variance proxy vanishes at coordinates {bad[:10].tolist()}")
    return v


def z_scores(fit: DebiasedFit, n: int | None = None) -> np.ndarray:
    """sqrt(n) * theta_u / sqrt(var_proxy), i.e. the statistic before dividing by sigma."""
    n = fit.n if n is None else n
    return np.sqrt(n) * np.asarray(fit.theta_u) / np.sqrt(_checked_var(fit))


def p_values(fit: DebiasedFit, sigma_hat: float, n: int | None = None) -> np.ndarray:
    """Two-sided p-values 2 (1 - Phi(|z_i| / sigma_hat))."""
    if not sigma_hat > 0:
        raise DomainError("sigma_hat must be positive")
    t = np.abs(z_scores(fit, n)) / sigma_hat
    # 2 * Phi(-t) equals 2 * (1 - Phi(t)) without cancellation in the tail
    return np.clip(2.0 * special.ndtr(-t), 0.0, 1.0)


def decide(p_vals, alpha: float) -> np.ndarray:
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    return (np.asarray(p_vals) <= alpha).astype(np.int8)


def test(fit: DebiasedFit, sigma_hat: float, alpha: float, sigma_source: str = "known",
         n: int | None = None) -> TestReport:
    pv = p_values(fit, sigma_hat, n)
    return TestReport(pv, decide(pv, alpha), alpha, float(sigma_hat), sigma_source)


def confidence_intervals(fit: DebiasedFit, sigma_hat: float, n: int | None = None,
                         alpha: float = 0.05) -> ConfidenceIntervals:
    """theta_u_i +/- Phi^{-1}(1 - alpha/2) sigma_hat sqrt(var_proxy_i / n)."""
    n = fit.n if n is None else n
    if not sigma_hat > 0:
        raise DomainError("sigma_hat must be positive")
    half = std_normal_quantile(1 - alpha / 2) * sigma_hat * np.sqrt(_checked_var(fit) / n)
    return ConfidenceIntervals(fit.theta_u - half, fit.theta_u + half, 1.0 - alpha)


def robust_sigma_from_z(z, quantile_alpha: float = 0.5) -> float:
    if not 0 < quantile_alpha < 1:
        raise DomainError("quantile_alpha must lie in (0, 1)")
    a = np.sort(np.abs(np.asarray(z, dtype=float)))
    k = math.ceil(a.size * quantile_alpha)
    return float(a[k - 1] / std_normal_quantile((1 + quantile_alpha) / 2))


def robust_sigma(fit: DebiasedFit, quantile_alpha: float = 0.5, n: int | None = None) -> float:
    """Noise level from the |z| order statistic of rank ceil(p * quantile_alpha).

    Divides by Phi^{-1}((1 + quantile_alpha) / 2), so with the default median
    rank this is |z|_(p/2) / Phi^{-1}(3/4).
    """
    return robust_sigma_from_z(z_scores(fit, n), quantile_alpha)


def G(alpha, u):
    """Power of the two-sided level-alpha z-test at standardized effect ``u``."""
    alpha_arr = np.asarray(alpha, dtype=float)
    u_arr = np.asarray(u, dtype=float)
    if np.any(~((alpha_arr > 0) & (alpha_arr < 1))):
        raise DomainError("alpha must lie in (0, 1)")
    if np.any(u_arr < 0):
        raise DomainError("u must be non-negative")
    c = special.ndtri(1 - alpha_arr / 2)
    # 2 - Phi(c + u) - Phi(c - u), written with upper tails
    out = special.ndtr(-(c + u_arr)) + special.ndtr(u_arr - c)
    return float(out) if out.ndim == 0 else out


def predicted_average_power(truth: GroundTruth, Omega, n: int, alpha: float) -> PowerPrediction:
    """Per-coordinate G(alpha, sqrt(n)|theta0_i| / (sigma sqrt(Omega_ii))) on the support.

    The average is ``None`` for an empty support.
    """
    S = truth.support
    omega_diag = np.diag(np.asarray(Omega))[S]
    u = np.sqrt(n) * np.abs(truth.theta0[S]) / (truth.sigma * np.sqrt(omega_diag))
    per = np.asarray(G(alpha, u), dtype=float).reshape(-1)
    return PowerPrediction(per, float(per.mean()) if per.size else None)


@dataclass(frozen=True)
class MinimaxQuantities:
    """Sample-size penalty of the debiased test relative to the minimax bound.

    ``eta`` admits the empty conditioning set; ``eta_nonempty`` requires
    ``|S| >= 1`` and is ``None`` when no such set exists (``s0 == 1``).
    ``sigma_eff_factor`` is ``1 / sqrt(eta)``, so the effective noise is
    ``sigma_eff_factor * sigma / sqrt(n)``.
    """

    eta: float | None
    eta_nonempty: float | None
    sigma_eff_factor: float | None
    increase_factor: float | None
    increase_factor_bound: float
    exact: bool


def conditional_variance(Sigma, i, S) -> float:
    S = list(S)
    if not S:
        return float(Sigma[i, i])
    b = Sigma[np.ix_(S, [i])]
    return float(Sigma[i, i] - (b.T @ np.linalg.solve(Sigma[np.ix_(S, S)], b))[0, 0])


def _eta(Sigma, s0, allow_empty):
    p = Sigma.shape[0]
    sizes = range(0 if allow_empty else 1, s0)
    best = None
    for i in range(p):
        others = [k for k in range(p) if k != i]
        vals = [conditional_variance(Sigma, i, S)
                for m in sizes for S in itertools.combinations(others, m)]
        if not vals:
            return None
        v = min(vals)
        best = v if best is None else max(best, v)
    return best


def minimax_quantities(Sigma, s0: int, exact: bool | None = None) -> MinimaxQuantities:
    """Exact conditional-variance quantities by subset enumeration.

    Enumeration is limited to ``p <= 20`` and ``s0 <= 4``; outside that only
    the eigenvalue bound sqrt(sigma_max / sigma_min) is returned, unless
    ``exact=True`` is requested, which raises :class:`TooLarge`.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    p = Sigma.shape[0]
    ev = np.linalg.eigvalsh(Sigma)
    bound = float(np.sqrt(ev[-1] / ev[0]))
    small = p <= MINIMAX_MAX_P and s0 <= MINIMAX_MAX_S0
    if exact is None:
        exact = small
    if not exact:
        return MinimaxQuantities(None, None, None, None, bound, False)
    if not small:
        raise TooLarge(f"exact enumeration capped at p <= {MINIMAX_MAX_P}, s0 <= {MINIMAX_MAX_S0}")
    if s0 < 1:
        raise DomainError("s0 must be >= 1")
    eta = _eta(Sigma, s0, True)
    eta_ne = _eta(Sigma, s0, False)
    omega_max = float(np.max(np.diag(np.linalg.inv(Sigma))))
    return MinimaxQuantities(eta, eta_ne, 1.0 / math.sqrt(eta), math.sqrt(omega_max * eta),
                             bound, True)


CSV_COLUMNS = ("index", "theta_hat", "theta_u", "var_proxy", "p_value", "decision",
               "ci_lower", "ci_upper")


def write_test_csv(path, fit: DebiasedFit, report: TestReport, ci: ConfidenceIntervals):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for i in range(fit.theta_u.size):
            w.writerow([i, repr(float(fit.theta_hat[i])), repr(float(fit.theta_u[i])),
                        repr(float(fit.var_proxy[i])), repr(float(report.p_values[i])),
                        int(report.decisions[i]), repr(float(ci.lower[i])),
                        repr(float(ci.upper[i]))])


def read_test_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in CSV_COLUMNS}
