"""l1-penalised least squares by cyclic coordinate descent.

The objective throughout is ``(1/2n) ||y - X theta||^2 + lam ||theta||_1``
with no intercept.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .core_types import RegressionProblem
from .exceptions import DegenerateResidual, NonFinite

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 100_000


@numba.njit(cache=True, nogil=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@numba.njit(cache=True, nogil=True)
def _objective(resid, theta, lam, n):
    return 0.5 * np.dot(resid, resid) / n + lam * np.sum(np.abs(theta))


@numba.njit(cache=True, nogil=True)
def _kkt_violation(X, resid, theta, lam, exclude):
    n, p = X.shape
    worst = 0.0
    for j in range(p):
        if j == exclude:
            continue
        g = np.dot(X[:, j], resid) / n
        if theta[j] > 0.0:
            v = abs(g - lam)
        elif theta[j] < 0.0:
            v = abs(g + lam)
        else:
            v = abs(g) - lam
        if v > worst:
            worst = v
    return worst


@numba.njit(cache=True, nogil=True)
def _sweep(X, col_sq, lam, theta, resid, idx, m):
    n = X.shape[0]
    max_change = 0.0
    for k in range(m):
        j = idx[k]
        cj = col_sq[j]
        if cj == 0.0:
            continue
        old = theta[j]
        z = np.dot(X[:, j], resid) / n + cj * old
        new = _soft(z, lam) / cj
        if new != old:
            d = new - old
            for i in range(n):
                resid[i] -= d * X[i, j]
            theta[j] = new
            if abs(d) > max_change:
                max_change = abs(d)
    return max_change


@numba.njit(cache=True, nogil=True)
def _cd(X, y, col_sq, lam, theta, tol, max_iter, exclude, trace):
    """Coordinate descent with active-set cycling.

    Full sweeps alternate with sweeps restricted to the current nonzeros.
    Stops once a full sweep moves no coordinate by more than ``tol`` and the
    KKT violation is at most ``tol``. Returns (sweeps, kkt, converged, resid).
    """
    n, p = X.shape
    resid = y - X @ theta
    full = np.empty(p, dtype=np.int64)
    m_full = 0
    for j in range(p):
        if j != exclude:
            full[m_full] = j
            m_full += 1
    active = np.empty(p, dtype=np.int64)
    record = trace.shape[0] > 0
    sweeps = 0
    kkt = np.inf
    converged = False
    while sweeps < max_iter:
        change = _sweep(X, col_sq, lam, theta, resid, full, m_full)
        if record:
            trace[sweeps] = _objective(resid, theta, lam, n)
        sweeps += 1
        if change < tol:
            kkt = _kkt_violation(X, resid, theta, lam, exclude)
            if kkt <= tol:
                converged = True
                break
        m_act = 0
        for k in range(m_full):
            j = full[k]
            if theta[j] != 0.0:
                active[m_act] = j
                m_act += 1
        while sweeps < max_iter and m_act > 0:
            change = _sweep(X, col_sq, lam, theta, resid, active, m_act)
            if record:
                trace[sweeps] = _objective(resid, theta, lam, n)
            sweeps += 1
            if change < tol:
                break
    if not converged:
        kkt = _kkt_violation(X, resid, theta, lam, exclude)
    return sweeps, kkt, converged, resid


@dataclass(frozen=True)
class LassoFit:
    theta_hat: np.ndarray
    lam: float
    iterations: int
    max_kkt_violation: float
    converged: bool
    objective: float
    objective_trace: np.ndarray | None = field(default=None, repr=False)

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.theta_hat)


@dataclass(frozen=True)
class ScaledLassoFit:
    theta_hat: np.ndarray
    sigma_hat: float
    lam: float
    converged: bool
    iterations: int = 0


def _column_sq(X):
    return np.einsum("ij,ij->j", X, X) / X.shape[0]


def solve_lasso(X, y, lam, *, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, warm_start=None,
                exclude=-1, col_sq=None, record_objective=False) -> LassoFit:
    """Array-level solver behind :func:`lasso`.

    ``exclude`` drops one column of ``X`` from the fit (its coefficient stays
    zero), which lets nodewise regressions share a single design array.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    X = np.ascontiguousarray(X, dtype=np.float64)
    # column access dominates; Fortran order keeps X[:, j] contiguous
    X = np.asfortranarray(X)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    if col_sq is None:
        col_sq = _column_sq(X)
    theta = np.zeros(p) if warm_start is None else np.array(warm_start, dtype=np.float64)
    if exclude >= 0:
        theta[exclude] = 0.0
    trace = np.empty(max_iter if record_objective else 0)
    sweeps, kkt, converged, resid = _cd(X, y, col_sq, float(lam), theta, float(tol),
                                        int(max_iter), int(exclude), trace)
    obj = 0.5 * resid @ resid / n + lam * np.abs(theta).sum()
    if not np.isfinite(obj):
        raise NonFinite("lasso objective is not finite")
    if not converged:
        warnings.warn(f"lasso did not converge in {max_iter} sweeps (kkt={kkt:.2e})",
                      RuntimeWarning, stacklevel=2)
    theta.setflags(write=False)
    return LassoFit(theta, float(lam), int(sweeps), float(kkt), bool(converged), float(obj),
                    trace[:sweeps].copy() if record_objective else None)


def lasso(problem: RegressionProblem, lam: float, tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER, warm_start=None, record_objective=False) -> LassoFit:
    """Fit the Lasso at a single ``lam``.

    A run that exhausts ``max_iter`` returns its last iterate with
    ``converged=False`` and a ``RuntimeWarning``.
    """
    return solve_lasso(problem.X, problem.Y, lam, tol=tol, max_iter=max_iter,
                       warm_start=warm_start, record_objective=record_objective)


def lasso_objective(X, y, theta, lam) -> float:
    r = y - X @ theta
    return 0.5 * r @ r / X.shape[0] + lam * np.abs(theta).sum()


def lambda_max(problem: RegressionProblem) -> float:
    """Smallest ``lam`` for which the zero vector is a solution."""
    return float(np.max(np.abs(problem.X.T @ problem.Y)) / problem.n)


def default_lambda_grid(problem: RegressionProblem, n_lambda: int = 100, ratio: float = 1e-3) -> np.ndarray:
    lmax = lambda_max(problem)
    if lmax == 0:
        return np.zeros(1)
    return np.geomspace(lmax, ratio * lmax, n_lambda)


def theory_lambda(n, p, sigma=1.0) -> float:
    return float(sigma * np.sqrt(2.0 * np.log(p) / n))


def _path(X, y, grid, tol, max_iter, col_sq=None):
    if np.any(np.diff(grid) > 0):
        raise ValueError("lambda grid must be sorted in descending order")
    X = np.asfortranarray(X, dtype=np.float64)
    if col_sq is None:
        col_sq = _column_sq(X)
    fits, warm = [], None
    for lam in grid:
        fit = solve_lasso(X, y, lam, tol=tol, max_iter=max_iter, warm_start=warm, col_sq=col_sq)
        fits.append(fit)
        warm = fit.theta_hat
    return fits


def lasso_path(problem: RegressionProblem, lambda_grid, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER) -> list[LassoFit]:
    """Warm-started fits along a descending ``lambda_grid``."""
    return _path(problem.X, problem.Y, np.asarray(lambda_grid, dtype=float), tol, max_iter)


def cross_validate(problem: RegressionProblem, lambda_grid=None, folds: int = 5,
                   rng: np.random.Generator | None = None, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER):
    """K-fold cross-validation of the held-out squared prediction error.

    Rows are randomly permuted and cut into ``folds`` contiguous blocks.
    Returns ``(lambda_cv, curve)`` where ``curve`` has columns
    ``(lambda, mean_error, standard_error)``. Ties resolve to the largest
    lambda.
    """
    n = problem.n
    if folds < 2 or n < folds:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(problem)
    grid = np.asarray(lambda_grid, dtype=float)
    if rng is None:
        rng = np.random.default_rng(0)
    perm = rng.permutation(n)
    blocks = np.array_split(perm, folds)
    X, Y = problem.X, problem.Y
    errors = np.empty((folds, grid.size))
    for k, test in enumerate(blocks):
        train = np.setdiff1d(perm, test, assume_unique=True)
        fits = _path(X[train], Y[train], grid, tol, max_iter)
        B = np.column_stack([f.theta_hat for f in fits])
        pred = X[test] @ B
        errors[k] = np.mean((Y[test, None] - pred) ** 2, axis=0)
    mean = errors.mean(axis=0)
    se = errors.std(axis=0, ddof=1) / np.sqrt(folds)
    best = np.flatnonzero(mean == mean.min())
    lambda_cv = float(grid[best].max())
    return lambda_cv, np.column_stack([grid, mean, se])


def scaled_lasso(problem: RegressionProblem, lam: float | None = None, tol: float = 1e-6,
                 max_iter: int = 200, lasso_tol: float = DEFAULT_TOL) -> ScaledLassoFit:
    """Joint estimate of coefficients and noise level.

    Alternates a Lasso solve at penalty ``sigma * lam`` with
    ``sigma = ||Y - X theta|| / sqrt(n)`` until the relative change in
    ``sigma`` drops below ``tol``. ``lam`` defaults to ``sqrt(2 log p / n)``.

    Raises :class:`DegenerateResidual` (with the flagged fit attached as
    ``.fit``) when the residual vanishes.
    """
    n, p = problem.n, problem.p
    if lam is None:
        lam = theory_lambda(n, p)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    X = np.asfortranarray(problem.X)
    Y = problem.Y
    col_sq = _column_sq(X)
    sigma = float(np.std(Y))
    theta = np.zeros(p)
    converged = False
    it = 0
    while it < max_iter and sigma > 0:
        it += 1
        fit = solve_lasso(X, Y, sigma * lam, tol=lasso_tol, warm_start=theta, col_sq=col_sq)
        theta = fit.theta_hat
        r = Y - X @ theta
        new_sigma = float(np.sqrt(r @ r / n))
        delta = abs(new_sigma - sigma) / sigma
        sigma = new_sigma
        if delta < tol:
            converged = True
            break
    if sigma <= 0:
        flagged = ScaledLassoFit(np.asarray(theta), 0.0, float(lam), False, it)
        err = DegenerateResidual("residual is exactly zero; noise level undefined")
        err.fit = flagged
        raise err
    if not converged:
        warnings.warn("scaled lasso did not converge", RuntimeWarning, stacklevel=2)
    return ScaledLassoFit(np.asarray(theta), sigma, float(lam), converged, it)
