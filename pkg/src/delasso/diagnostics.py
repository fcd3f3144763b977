"""Small-instance evaluation of restricted-eigenvalue constants and
normality diagnostics for the debiased coordinates."""

from __future__ import annotations

import csv
import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core_types import GroundTruth
from .debias import DebiasedFit
from .exceptions import TooLarge
from .lasso import LassoFit

log = logging.getLogger(__name__)

PHI_MAX_CAP = (20, 4)
RE_CAP = (12, 3)


@dataclass(frozen=True)
class REReport:
    kappa_s_c: float
    kappa_s_q_c: float | None
    phi_max_t: float
    s: int
    q: int | None
    c: float
    t: int
    exact: bool


@dataclass(frozen=True)
class QQData:
    theoretical: np.ndarray
    sample: np.ndarray
    ks_statistic: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("theoretical_quantile", "sample_quantile"))
            for a, b in zip(self.theoretical, self.sample):
                w.writerow((repr(float(a)), repr(float(b))))


def _gram(X):
    X = np.asarray(X, dtype=float)
    return X.T @ X / X.shape[0]


def phi_max(X, t: int) -> float:
    """Largest ||Xv||^2 / (n ||v||^2) over vectors with at most ``t`` nonzeros.

    Exact: enumerates the size-``t`` supports (smaller supports are nested in
    them) and takes the top eigenvalue of each Gram submatrix.
    """
    S = _gram(X)
    p = S.shape[0]
    if not 1 <= t <= p:
        raise ValueError(f"t={t} must lie in [1, {p}]")
    if t == p:
        return float(np.linalg.eigvalsh(S)[-1])
    if p > PHI_MAX_CAP[0] or t > PHI_MAX_CAP[1]:
        raise TooLarge(f"phi_max enumeration capped at p <= {PHI_MAX_CAP[0]}, t <= {PHI_MAX_CAP[1]}")
    best = 0.0
    for J in itertools.combinations(range(p), t):
        best = max(best, float(np.linalg.eigvalsh(S[np.ix_(J, J)])[-1]))
    return best


def _project_l1(V, radius):
    """Row-wise Euclidean projection of ``V`` onto l1 balls of the given radii."""
    out = np.zeros_like(V)
    a = np.abs(V)
    inside = a.sum(axis=1) <= radius
    out[inside] = V[inside]
    rows = np.flatnonzero(~inside & (radius > 0))
    if rows.size:
        u = -np.sort(-a[rows], axis=1)
        css = np.cumsum(u, axis=1) - radius[rows, None]
        k = np.arange(1, V.shape[1] + 1)
        rho = np.max(np.where(u - css / k > 0, k, 0), axis=1)
        theta = css[np.arange(rows.size), rho - 1] / rho
        out[rows] = np.sign(V[rows]) * np.maximum(a[rows] - theta[:, None], 0.0)
    return out


def _denominator_sets(V, J, q):
    """Index masks J2 = J + (q largest |v| coordinates) per row, or J alone."""
    mask = np.zeros(V.shape, dtype=bool)
    mask[:, J] = True
    if q is not None:
        top = np.argsort(-np.abs(V), axis=1)[:, :q]
        np.put_along_axis(mask, top, True, axis=1)
    return mask


def _cone_min(S, J, c, q, starts, iters=400):
    """Projected gradient on ||Xv||^2/(n ||v_D||^2) over the cone
    ||v_{J^c}||_1 <= c ||v_J||_1, batched over ``starts``. Returns the best
    ratio found (an upper bound on the minimum)."""
    p = S.shape[0]
    Jc = np.setdiff1d(np.arange(p), J)
    V = starts.copy()

    def feasible(V):
        V = V.copy()
        V[:, Jc] = _project_l1(V[:, Jc], c * np.abs(V[:, J]).sum(axis=1))
        nrm = np.linalg.norm(V[:, J], axis=1, keepdims=True)
        nrm[nrm == 0] = 1.0
        return V / nrm

    def value(V):
        mask = _denominator_sets(V, J, q)
        num = np.einsum("ij,jk,ik->i", V, S, V)
        den = np.sum(np.where(mask, V, 0.0) ** 2, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den > 0, num / den, np.inf), mask, num, den

    V = feasible(V)
    f, mask, num, den = value(V)
    step = np.full(V.shape[0], 0.5)
    for _ in range(iters):
        Vd = np.where(mask, V, 0.0)
        grad = 2.0 * (V @ S) / den[:, None] - 2.0 * (num / den**2)[:, None] * Vd
        cand = feasible(V - step[:, None] * grad)
        fc, mc, nc, dc = value(cand)
        ok = fc < f
        V = np.where(ok[:, None], cand, V)
        f = np.where(ok, fc, f)
        mask = np.where(ok[:, None], mc, mask)
        num = np.where(ok, nc, num)
        den = np.where(ok, dc, den)
        step = np.where(ok, step * 1.2, step * 0.5)
        if np.all(step < 1e-12):
            break
    return float(f.min())


def _re_kappa(X, s, c, q=None, restarts=50, rng=None):
    S = _gram(X)
    p = S.shape[0]
    if p > RE_CAP[0] or s > RE_CAP[1]:
        raise TooLarge(f"RE enumeration capped at p <= {RE_CAP[0]}, s <= {RE_CAP[1]}")
    if not 1 <= s <= p:
        raise ValueError(f"s={s} must lie in [1, {p}]")
    rng = np.random.default_rng(0) if rng is None else rng
    best = np.inf
    for m in range(1, s + 1):
        for J in itertools.combinations(range(p), m):
            J = np.array(J)
            starts = rng.standard_normal((restarts, p))
            starts[0, :] = 0.0
            starts[0, J] = 1.0
            # push mass off J to reach the cone boundary
            starts[1:, np.setdiff1d(np.arange(p), J)] *= rng.uniform(0, 2, (restarts - 1, 1))
            best = min(best, _cone_min(S, J, c, q, starts))
    return float(np.sqrt(max(best, 0.0)))


def re_constant(X, s: int, c: float, restarts: int = 50, rng=None) -> float:
    """Upper estimate of kappa(s, c), the restricted-eigenvalue constant.

    Supports ``J`` with ``|J| <= s`` are enumerated exactly; the inner minimum
    over the cone is found by projected gradient from ``restarts`` starts, so
    the returned value can only overestimate the true constant.
    """
    return _re_kappa(X, s, c, None, restarts, rng)


def re_constant_sqc(X, s: int, q: int, c: float, restarts: int = 50, rng=None) -> float:
    """As :func:`re_constant`, normalising by ``||v_{J2}||`` where J2 adds the
    ``q`` largest coordinates of ``v`` to ``J``."""
    p = np.asarray(X).shape[1]
    if not (q >= s and s + q <= p):
        raise ValueError("need q >= s and s + q <= p")
    return _re_kappa(X, s, c, q, restarts, rng)


def re_report(X, s, c, t, q=None, restarts=50, rng=None) -> REReport:
    return REReport(re_constant(X, s, c, restarts, rng),
                    None if q is None else re_constant_sqc(X, s, q, c, restarts, rng),
                    phi_max(X, t), s, q, c, t, True)


def support_size_bound(phi_max_n: float, kappa: float, s0: int) -> float:
    if kappa <= 0:
        return np.inf
    return 64.0 * phi_max_n**2 / kappa**2 * s0


def support_size_bound_check(lasso_fit: LassoFit, re: REReport | None, s0: int) -> bool:
    """Whether ||theta_hat||_0 <= 64 phi_max(n)^2 / kappa(s0, 3)^2 * s0.

    ``re`` must carry ``kappa_s_c`` computed with ``s = s0, c = 3`` and
    ``phi_max_t`` with ``t = min(n, p)``.
    """
    if re is None or not re.exact:
        raise TooLarge("exact restricted-eigenvalue constants are required")
    bound = support_size_bound(re.phi_max_t, re.kappa_s_c, s0)
    size = int(np.count_nonzero(lasso_fit.theta_hat))
    ok = size <= bound
    log.info("support size %d vs bound %.4g (%s)", size, bound, "ok" if ok else "violated")
    return bool(ok)


def ks_statistic(z) -> float:
    """Kolmogorov-Smirnov distance between the empirical cdf of ``z`` and Phi."""
    z = np.sort(np.asarray(z, dtype=float))
    m = z.size
    F = special.ndtr(z)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def ks_critical_value(m: int, level: float = 0.01) -> float:
    """Asymptotic Kolmogorov critical value, e.g. 1.628 / sqrt(m) at 1%."""
    from scipy.stats import kstwobign

    return float(kstwobign.isf(level) / np.sqrt(m))


def standardized_residuals(fit: DebiasedFit, truth: GroundTruth) -> np.ndarray:
    return np.sqrt(fit.n) * (fit.theta_u - truth.theta0) / np.sqrt(fit.var_proxy)


def qq_data(fit: DebiasedFit, truth: GroundTruth, sigma: float | None = None) -> QQData:
    """Sorted standardized residuals against N(0, 1) plotting positions.

    Residuals are divided by ``sigma`` (default: the true noise level) so that
    they are standard normal when the debiasing works.
    """
    sigma = truth.sigma if sigma is None else sigma
    z = standardized_residuals(fit, truth) / sigma
    return qq_from_z(z)


def qq_from_z(z) -> QQData:
    z = np.sort(np.asarray(z, dtype=float))
    m = z.size
    theo = special.ndtri((np.arange(1, m + 1) - 0.5) / m)
    return QQData(theo, z, ks_statistic(z))
