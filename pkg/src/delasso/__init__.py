"""Debiased Lasso: p-values and confidence intervals for high-dimensional
linear regression, plus a Monte-Carlo harness for its error rates."""

from .core_types import (CovarianceModel, EmpiricalCovariance, GroundTruth, RegressionProblem,
                         empirical_covariance, materialize_covariance)
from .debias import BiasDecomposition, DebiasedFit, debias, decompose_bias, infty_k_norm, large_bias_set
from .design import ExperimentConfig, load_config, sample_design, sample_response, sample_theta0
from .experiment import ExperimentReport, ReplicationResult, analyze, emit_report, run_experiment, run_replication
from .inference import (G, ConfidenceIntervals, PowerPrediction, TestReport, confidence_intervals,
                        decide, minimax_quantities, p_values, predicted_average_power, robust_sigma,
                        std_normal_cdf, std_normal_quantile)
from .lasso import LassoFit, ScaledLassoFit, cross_validate, lasso, lasso_path, scaled_lasso
from .precision import PrecisionEstimate, nodewise_precision, oracle_precision, precision_error_norm

__version__ = "0.1.0"
