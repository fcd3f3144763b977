"""Synthetic data generation: Gaussian designs, sparse coefficients, noise."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .core_types import CovarianceModel, GroundTruth, materialize_covariance
from .exceptions import ConfigError, NotPositiveDefinite

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

PRECISION_METHODS = ("nodewise", "oracle")
SIGMA_SOURCES = ("scaled", "robust", "known")
LAMBDA_MODES = ("cv", "theory")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    p: int
    s0: int
    theta_value: float
    sigma: float
    cov: CovarianceModel
    alpha: float = 0.05
    replications: int = 20
    seed: int = 0
    # pipeline options
    precision: str = "nodewise"
    sigma_source: str = "scaled"
    lambda_mode: str = "cv"
    cv_folds: int = 5
    n_lambda: int = 100
    resample_theta: bool = True
    lambda_node: float | None = None
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ConfigError("n and p must be positive")
        if not 0 <= self.s0 <= self.p:
            raise ConfigError(f"s0={self.s0} must lie in [0, p={self.p}]")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.cov.p != self.p:
            raise ConfigError(f"covariance dimension {self.cov.p} != p={self.p}")
        if self.precision not in PRECISION_METHODS:
            raise ConfigError(f"precision must be one of {PRECISION_METHODS}")
        if self.sigma_source not in SIGMA_SOURCES:
            raise ConfigError(f"sigma_source must be one of {SIGMA_SOURCES}")
        if self.lambda_mode not in LAMBDA_MODES:
            raise ConfigError(f"lambda_mode must be one of {LAMBDA_MODES}")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "extra"}
        d["cov"] = self.cov.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        try:
            p = int(d["p"])
            cov = d.pop("cov", {"kind": "identity"})
            if isinstance(cov, CovarianceModel):
                d["cov"] = cov
            else:
                d["cov"] = CovarianceModel.from_dict(cov, p=p)
            names = {f.name for f in dataclasses.fields(cls)}
            unknown = set(d) - names
            if unknown:
                raise ConfigError(f"unknown config keys: {sorted(unknown)}")
            return cls(**d)
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    """Read an :class:`ExperimentConfig` from a TOML file.

    Example::

        n = 240
        p = 300
        s0 = 30
        theta_value = 0.1
        sigma = 1.0
        alpha = 0.05
        replications = 20
        seed = 1

        [cov]
        kind = "circulant"
        b = 5
    """
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


def replication_streams(seed: int, r: int, n_streams: int = 4) -> list[np.random.Generator]:
    """Independent generators for replication ``r`` of a run seeded with ``seed``.

    Streams are derived from ``SeedSequence((seed, r))`` so replications can be
    run in any order, or concurrently, with identical results.
    """
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(r)])
    return [np.random.default_rng(child) for child in ss.spawn(n_streams)]


def design_factor(cov: CovarianceModel) -> np.ndarray:
    """Lower Cholesky factor of Sigma (None for the identity model)."""
    if cov.kind == "identity":
        return None
    Sigma, _ = materialize_covariance(cov)
    try:
        return linalg.cholesky(Sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Sigma has no Cholesky factor") from exc


def sample_design(cov: CovarianceModel, n: int, rng: np.random.Generator, factor=None) -> np.ndarray:
    """Draw ``n`` i.i.d. rows from N(0, Sigma) as ``L g`` with ``Sigma = L L^T``."""
    if factor is None:
        factor = design_factor(cov)
    G = rng.standard_normal((n, cov.p))
    if factor is None:
        return G
    return G @ factor.T


def sample_theta0(p: int, s0: int, theta_value: float, rng: np.random.Generator,
                  sigma: float = 1.0) -> GroundTruth:
    if not 0 <= s0 <= p:
        raise ValueError(f"s0={s0} must lie in [0, {p}]")
    theta0 = np.zeros(p)
    support = rng.choice(p, size=s0, replace=False)
    theta0[support] = theta_value
    return GroundTruth(theta0, sigma)


def sample_response(X: np.ndarray, truth: GroundTruth, rng: np.random.Generator) -> np.ndarray:
    if X.shape[1] != truth.p:
        raise ValueError(f"X has {X.shape[1]} columns, theta0 has {truth.p} entries")
    return X @ truth.theta0 + truth.sigma * rng.standard_normal(X.shape[0])
