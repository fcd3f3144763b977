"""Shared containers: regression data, ground truth, covariance models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import NotPositiveDefinite, ShapeMismatch


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RegressionProblem:
    """Design ``X`` (n x p) and response ``Y`` (n,) of the model Y = X theta + W."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = _frozen(self.X)
        Y = _frozen(self.Y).ravel()
        if X.ndim != 2:
            raise ShapeMismatch(f"X must be 2-d, got shape {X.shape}")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ShapeMismatch(f"empty design {X.shape}")
        if Y.shape[0] != n:
            raise ShapeMismatch(f"Y has {Y.shape[0]} entries, X has {n} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("X and Y must be finite")
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def standardized(self) -> tuple["RegressionProblem", np.ndarray]:
        """Return a copy with columns rescaled to unit empirical second moment.

        The scales are returned so that coefficients can be mapped back via
        ``theta = theta_std / scales``.
        """
        scales = np.sqrt(np.mean(self.X**2, axis=0))
        scales[scales == 0] = 1.0
        return RegressionProblem(self.X / scales, self.Y), scales


@dataclass(frozen=True)
class GroundTruth:
    theta0: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "theta0", _frozen(self.theta0).ravel())
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.theta0)

    @property
    def s0(self) -> int:
        return int(np.count_nonzero(self.theta0))

    @property
    def p(self) -> int:
        return self.theta0.shape[0]


@dataclass(frozen=True)
class CovarianceModel:
    """Population covariance of the design rows.

    ``kind`` is one of ``"identity"``, ``"circulant"`` (banded circulant
    precision with unit diagonal, off-diagonal ``a`` within circular bandwidth
    ``b``) or ``"explicit"`` (a given ``Sigma``).
    """

    kind: str
    p: int
    b: int | None = None
    a: float | None = None
    Sigma: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("identity", "circulant", "explicit"):
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.p < 1:
            raise ValueError("p must be positive")
        if self.kind == "circulant":
            if self.b is None or self.b < 1:
                raise ValueError("circulant model needs bandwidth b >= 1")
            if not self.b < self.p / 2:
                raise ValueError(f"bandwidth b={self.b} must be < p/2={self.p / 2}")
            if self.a is None:
                object.__setattr__(self, "a", 1.0 / self.b)
            if circulant_eigenvalues(self.p, self.b, self.a).min() <= 0:
                raise NotPositiveDefinite(
                    f"circulant precision (p={self.p}, b={self.b}, a={self.a}) is not PD"
                )
        elif self.kind == "explicit":
            if self.Sigma is None:
                raise ValueError("explicit model needs Sigma")
            S = _frozen(self.Sigma)
            if S.shape != (self.p, self.p):
                raise ShapeMismatch(f"Sigma shape {S.shape} != ({self.p}, {self.p})")
            if not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max())):
                raise ValueError("explicit Sigma must be symmetric")
            object.__setattr__(self, "Sigma", S)

    @classmethod
    def identity(cls, p):
        return cls("identity", p)

    @classmethod
    def circulant(cls, p, b, a=None):
        return cls("circulant", p, b=b, a=a)

    @classmethod
    def explicit(cls, Sigma):
        Sigma = np.asarray(Sigma, dtype=float)
        return cls("explicit", Sigma.shape[0], Sigma=Sigma)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "p": self.p}
        if self.kind == "circulant":
            d.update(b=self.b, a=self.a)
        elif self.kind == "explicit":
            d["Sigma"] = self.Sigma.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict, p: int | None = None) -> "CovarianceModel":
        d = dict(d)
        kind = d.pop("kind")
        p = d.pop("p", p)
        if kind == "explicit":
            return cls.explicit(d["Sigma"])
        return cls(kind, p, **d)


@dataclass(frozen=True)
class EmpiricalCovariance:
    Sigma_hat: np.ndarray


def circulant_eigenvalues(p, b, a):
    """Eigenvalues of the banded circulant precision, from its symbol."""
    k = np.arange(p)[:, None]
    d = np.arange(1, b + 1)[None, :]
    return 1.0 + 2.0 * a * np.cos(2.0 * np.pi * k * d / p).sum(axis=1)


def circulant_precision(p, b, a):
    idx = np.arange(p)
    diff = np.abs(idx[:, None] - idx[None, :])
    dist = np.minimum(diff, p - diff)
    Omega = np.where((dist <= b) & (dist > 0), a, 0.0)
    np.fill_diagonal(Omega, 1.0)
    return Omega


def empirical_covariance(problem: RegressionProblem) -> EmpiricalCovariance:
    X = problem.X
    S = X.T @ X / problem.n
    S = 0.5 * (S + S.T)
    S.setflags(write=False)
    return EmpiricalCovariance(S)


def _spd_inverse(A, what):
    try:
        c = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{what} is not positive definite") from exc
    inv = linalg.cho_solve(c, np.eye(A.shape[0]))
    return 0.5 * (inv + inv.T)


def materialize_covariance(model: CovarianceModel) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Sigma, Omega)`` for the model, with ``Omega = Sigma^{-1}``."""
    p = model.p
    if model.kind == "identity":
        Sigma, Omega = np.eye(p), np.eye(p)
    elif model.kind == "circulant":
        Omega = circulant_precision(p, model.b, model.a)
        if np.linalg.eigvalsh(Omega)[0] <= 0:
            raise NotPositiveDefinite("circulant precision is not positive definite")
        Sigma = _spd_inverse(Omega, "Omega")
    else:
        Sigma = np.array(model.Sigma, dtype=float)
        if np.linalg.eigvalsh(Sigma)[0] <= 0:
            raise NotPositiveDefinite("Sigma is not positive definite")
        Omega = _spd_inverse(Sigma, "Sigma")
    Sigma.setflags(write=False)
    Omega.setflags(write=False)
    return Sigma, Omega
