"""Expected in-sample and out-of-sample Sharpe ratios of linear predictive strategies.

Models, simulation settings and calibration targets are plain dicts using the
same schema as the overfit-lab command-line configs (see docs/config.md).
Sharpe ratios are per step unless an annualization multiplier is passed.
"""

from ._core import (
    NumericalError,
    ValidationError,
    __version__,
    analyze,
    convexity_gap,
    expected_hat_sq,
    hat_diagonal,
    hyp1f1,
    implied_beta,
    kan_expected_is_sr,
    kan_expected_oos_sr,
    monte_carlo,
    resample_study,
    resolve_model,
    run_cli,
    shrink_covariance,
    uniform_beta_replication,
    univariate_replication,
)

__all__ = [
    "NumericalError",
    "ValidationError",
    "__version__",
    "analyze",
    "convexity_gap",
    "expected_hat_sq",
    "hat_diagonal",
    "hyp1f1",
    "implied_beta",
    "kan_expected_is_sr",
    "kan_expected_oos_sr",
    "monte_carlo",
    "resample_study",
    "resolve_model",
    "run_cli",
    "shrink_covariance",
    "uniform_beta_replication",
    "univariate_replication",
]
