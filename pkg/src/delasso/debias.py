"""The debiased Lasso estimator and its bias decomposition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core_types import GroundTruth, RegressionProblem
from .exceptions import BadK, ShapeMismatch
from .lasso import LassoFit
from .precision import PrecisionEstimate


@dataclass(frozen=True)
class DebiasedFit:
    theta_u: np.ndarray
    var_proxy: np.ndarray
    lasso: LassoFit = field(repr=False)
    precision: PrecisionEstimate = field(repr=False)
    n: int = 0
    # n x p matrix X Omega_hat^T, kept for the bias decomposition
    _XOt: np.ndarray = field(default=None, repr=False, compare=False)
    _X: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def theta_hat(self) -> np.ndarray:
        return self.lasso.theta_hat


@dataclass(frozen=True)
class BiasDecomposition:
    Z: np.ndarray
    Delta: np.ndarray


def debias(problem: RegressionProblem, lasso_fit: LassoFit, precision: PrecisionEstimate) -> DebiasedFit:
    """theta_u = theta_hat + Omega_hat X^T (Y - X theta_hat) / n.

    ``var_proxy[i]`` is the i-th diagonal entry of
    ``Omega_hat Sigma_hat Omega_hat^T``, computed as ``||X Omega_hat[i]||^2 / n``.
    """
    X, Y, n, p = problem.X, problem.Y, problem.n, problem.p
    Om = precision.Omega_hat
    theta = lasso_fit.theta_hat
    if Om.shape != (p, p) or theta.shape != (p,):
        raise ShapeMismatch("precision / lasso fit do not match the problem dimension")
    resid = Y - X @ theta
    theta_u = theta + Om @ (X.T @ resid) / n
    XOt = X @ Om.T
    var_proxy = np.einsum("ij,ij->j", XOt, XOt) / n
    for a in (theta_u, var_proxy, XOt):
        a.setflags(write=False)
    return DebiasedFit(theta_u, var_proxy, lasso_fit, precision, n, XOt, X)


def decompose_bias(fit: DebiasedFit, truth: GroundTruth) -> BiasDecomposition:
    """Split sqrt(n)(theta_u - theta0) into the Gaussian part Z and the bias Delta.

    Delta = sqrt(n) (Omega_hat Sigma_hat - I)(theta0 - theta_hat), and Z is
    the remainder, so that Z + Delta reproduces the scaled error exactly.
    """
    n = fit.n
    d = truth.theta0 - fit.theta_hat
    # Omega_hat Sigma_hat d = Omega_hat X^T X d / n = (X Omega_hat^T)^T X d / n
    Delta = np.sqrt(n) * (fit._XOt.T @ (fit._X @ d) / n - d)
    Z = np.sqrt(n) * (fit.theta_u - truth.theta0) - Delta
    return BiasDecomposition(Z, Delta)


def infty_k_norm(v, k: int) -> float:
    """max over index sets A with |A| >= k of ||v_A||_2 / sqrt(|A|).

    For a fixed size m the best set is the m largest entries, and the root
    mean square of a descending prefix only shrinks with m, so the maximum is
    attained at the top-k entries.
    """
    v = np.abs(np.asarray(v, dtype=float).ravel())
    if not 1 <= k <= v.size:
        raise BadK(f"k={k} must lie in [1, {v.size}]")
    prefix = np.cumsum(np.sort(v)[::-1] ** 2)
    sizes = np.arange(1, v.size + 1)
    return float(np.sqrt((prefix[k - 1:] / sizes[k - 1:]).max()))


def large_bias_set(Delta, epsilon: float) -> np.ndarray:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return np.flatnonzero(np.abs(np.asarray(Delta)) > epsilon)
