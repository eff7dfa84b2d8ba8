"""Exact conjugate Bayesian inference for linear models with correlated Gaussian errors."""

__version__ = "0.1.0"

from .core import (
    ModelSpec,
    NormalGammaParams,
    PosteriorSummary,
    beta_n_marginal,
    beta_n_naive,
    mle_decomposition,
    posterior_update,
)
from .dists import GammaDist, MvNormal, MvT
from .errors import (
    BlmError,
    DimensionMismatch,
    IncompatibleComparison,
    NotPositiveDefinite,
    NumericalError,
    ValidationError,
)
from .evidence import (
    compare_models,
    log_evidence,
    log_evidence_reduced,
    model_posterior_probs,
)
from .predictive import (
    PredictionTarget,
    PredictiveT,
    lambda_marginal,
    marginal_linear,
    predict_known_lambda,
    predict_t,
)
