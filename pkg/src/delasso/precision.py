"""Precision-matrix estimates: known Omega, or nodewise Lasso regressions."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core_types import CovarianceModel, materialize_covariance
from .exceptions import DegenerateTau, ShapeMismatch
from .lasso import DEFAULT_TOL, _column_sq, solve_lasso, theory_lambda


@dataclass(frozen=True)
class PrecisionEstimate:
    """Estimated precision matrix.

    For ``method="nodewise"``, ``gamma`` is the p x p matrix whose row ``j``
    holds the nodewise coefficients of column ``j`` on the others (zero on the
    diagonal) and ``tau_sq`` the matching residual scales. ``Omega_hat`` is
    generally not symmetric.
    """

    Omega_hat: np.ndarray
    method: str
    gamma: np.ndarray | None = field(default=None, repr=False)
    tau_sq: np.ndarray | None = field(default=None, repr=False)
    lambda_node: float | None = None
    max_kkt_violation: float | None = None

    @property
    def per_node(self):
        if self.gamma is None:
            return None
        p = self.gamma.shape[0]
        return [(np.delete(self.gamma[j], j), float(self.tau_sq[j])) for j in range(p)]

    def to_csv(self, path):
        np.savetxt(path, self.Omega_hat, delimiter=",", fmt="%.17g")


def _node(X, col_sq, j, lam, tol):
    fit = solve_lasso(X, X[:, j], lam, tol=tol, exclude=j, col_sq=col_sq)
    gamma = np.array(fit.theta_hat)
    resid = X[:, j] - X @ gamma
    tau_sq = float(resid @ X[:, j]) / X.shape[0]
    return gamma, tau_sq, fit.max_kkt_violation


def nodewise_precision(X, lambda_node: float | None = None, tol: float = DEFAULT_TOL,
                       threads: int = 1) -> PrecisionEstimate:
    """Nodewise-regression estimate ``Omega_hat = T^{-2} C``.

    Each column ``X_j`` is regressed on the remaining columns with the Lasso
    at ``lambda_node`` (default ``sqrt(2 log p / n)``); ``C`` has unit
    diagonal and ``-gamma_j`` off the diagonal in row ``j``, and
    ``tau_j^2 = (X_j - X_{-j} gamma_j)^T X_j / n``.
    """
    X = np.asfortranarray(X, dtype=np.float64)
    n, p = X.shape
    if p < 2:
        raise ShapeMismatch("nodewise regression needs at least two columns")
    if lambda_node is None:
        lambda_node = theory_lambda(n, p)
    if not lambda_node > 0:
        raise ValueError("lambda_node must be positive")
    col_sq = _column_sq(X)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(lambda j: _node(X, col_sq, j, lambda_node, tol), range(p)))
    else:
        out = [_node(X, col_sq, j, lambda_node, tol) for j in range(p)]
    gamma = np.vstack([o[0] for o in out])
    tau_sq = np.array([o[1] for o in out])
    bad = np.flatnonzero(tau_sq <= 0)
    if bad.size:
        raise DegenerateTau(int(bad[0]), float(tau_sq[bad[0]]))
    C = -gamma
    np.fill_diagonal(C, 1.0)
    Omega_hat = C / tau_sq[:, None]
    for a in (Omega_hat, gamma, tau_sq):
        a.setflags(write=False)
    return PrecisionEstimate(Omega_hat, "nodewise", gamma, tau_sq, float(lambda_node),
                             max(o[2] for o in out))


def oracle_precision(cov: CovarianceModel) -> PrecisionEstimate:
    _, Omega = materialize_covariance(cov)
    return PrecisionEstimate(Omega, "oracle")


def precision_error_norm(Omega_hat, Omega) -> float:
    """l_inf operator norm of the difference: the largest row l1 norm."""
    A = np.asarray(Omega_hat, dtype=float)
    B = np.asarray(Omega, dtype=float)
    if A.shape != B.shape:
        raise ShapeMismatch(f"shapes differ: {A.shape} vs {B.shape}")
    return float(np.abs(A - B).sum(axis=1).max())
