import numpy as np
import pytest

from delasso.core_types import CovarianceModel, GroundTruth, materialize_covariance
from delasso.design import (ExperimentConfig, load_config, replication_streams, sample_design,
                            sample_response, sample_theta0)
from delasso.exceptions import ConfigError
from delasso.experiment import simulate_dataset


def test_identity_design_covariance():
    X = sample_design(CovarianceModel.identity(2), 10_000, np.random.default_rng(1))
    S = X.T @ X / X.shape[0]
    assert np.abs(S - np.eye(2)).max() < 0.05


def test_design_deterministic_given_seed():
    cov = CovarianceModel.circulant(20, 3)
    a = sample_design(cov, 50, np.random.default_rng(7))
    b = sample_design(cov, 50, np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_one_dimensional_variance():
    X = sample_design(CovarianceModel.explicit([[4.0]]), 10_000, np.random.default_rng(2))
    assert X.var() == pytest.approx(4.0, abs=0.2)


def test_whitened_rows_have_identity_covariance():
    cov = CovarianceModel.circulant(20, 3)
    _, Omega = materialize_covariance(cov)
    w, V = np.linalg.eigh(Omega)
    root = V @ np.diag(np.sqrt(w)) @ V.T
    X = sample_design(cov, 10_000, np.random.default_rng(3))
    W = X @ root
    assert np.abs(W.T @ W / W.shape[0] - np.eye(20)).max() < 0.05


def test_theta_full_support():
    t = sample_theta0(10, 10, 0.3, np.random.default_rng(0))
    np.testing.assert_array_equal(t.theta0, np.full(10, 0.3))


def test_theta_experiment_support():
    t = sample_theta0(300, 30, 0.1, np.random.default_rng(0))
    assert t.s0 == 30
    assert np.all(t.theta0[t.support] == 0.1)


def test_theta_empty_support():
    t = sample_theta0(10, 0, 0.3, np.random.default_rng(0))
    assert t.s0 == 0 and t.support.size == 0
    assert np.all(t.theta0 == 0)


def test_theta_support_is_uniform():
    counts = np.zeros(10)
    rng = np.random.default_rng(4)
    for _ in range(4000):
        counts[sample_theta0(10, 3, 1.0, rng).support] += 1
    # each index is selected with probability 3/10
    np.testing.assert_allclose(counts / 4000, 0.3, atol=0.03)


def test_noiseless_response(rng):
    X = rng.standard_normal((30, 5))
    truth = GroundTruth(rng.standard_normal(5), 1e-12)
    Y = sample_response(X, truth, rng)
    np.testing.assert_allclose(Y, X @ truth.theta0, atol=1e-9)


def test_pure_noise_response():
    X = np.ones((10_000, 3))
    Y = sample_response(X, GroundTruth(np.zeros(3), 1.0), np.random.default_rng(5))
    assert abs(Y.mean()) < 0.05
    assert Y.var() == pytest.approx(1.0, abs=0.05)


def test_response_reproducible(rng):
    X = rng.standard_normal((10, 3))
    truth = GroundTruth(np.ones(3), 2.0)
    a = sample_response(X, truth, np.random.default_rng(9))
    b = sample_response(X, truth, np.random.default_rng(9))
    assert np.array_equal(a, b)


def _config(**kw):
    base = dict(n=40, p=30, s0=3, theta_value=1.0, sigma=1.0,
                cov=CovarianceModel.circulant(30, 3), replications=2, seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


def test_dataset_is_pure_function_of_config_and_replication():
    cfg = _config()
    (p1, t1), (p2, t2) = simulate_dataset(cfg, 3), simulate_dataset(cfg, 3)
    assert np.array_equal(p1.X, p2.X) and np.array_equal(p1.Y, p2.Y)
    assert np.array_equal(t1.theta0, t2.theta0)
    p3, _ = simulate_dataset(cfg, 4)
    assert not np.array_equal(p1.X, p3.X)


def test_fixed_theta_option():
    cfg = _config(resample_theta=False)
    assert np.array_equal(simulate_dataset(cfg, 0)[1].theta0, simulate_dataset(cfg, 1)[1].theta0)


def test_replication_streams_are_distinct():
    a = [g.standard_normal() for g in replication_streams(1, 0)]
    b = [g.standard_normal() for g in replication_streams(1, 1)]
    assert len(set(a + b)) == 8


@pytest.mark.parametrize("bad", [dict(s0=31), dict(sigma=0.0), dict(alpha=1.0),
                                 dict(replications=0), dict(precision="clime"),
                                 dict(cov=CovarianceModel.identity(5))])
def test_invalid_config(bad):
    with pytest.raises(ConfigError):
        _config(**bad)


def test_load_config(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("""
n = 240
p = 300
s0 = 30
theta_value = 0.1
sigma = 1.0
alpha = 0.05
replications = 20
seed = 7

[cov]
kind = "circulant"
b = 5
""")
    cfg = load_config(path)
    assert cfg.cov == CovarianceModel.circulant(300, 5)
    assert (cfg.n, cfg.p, cfg.s0, cfg.seed) == (240, 300, 30, 7)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_load_config_errors(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("n = 10\np = 5\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("n = 10\np = 5\ns0 = 1\ntheta_value = 1.0\nsigma = 1.0\nbogus = 3\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("n = = 3")
    with pytest.raises(ConfigError):
        load_config(path)
