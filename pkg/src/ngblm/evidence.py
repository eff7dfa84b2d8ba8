"""Model evidence and posterior model probabilities.

Everything stays in log space; probabilities are formed only in
:func:`model_posterior_probs`.

The determinant ``|B0|`` with ``B0 = (A^{-1} + X A0^{-1} X^T)^{-1}`` is never
formed from an n x n matrix. The generalized determinant lemma gives
``|A^{-1} + X A0^{-1} X^T| = |A_n| / (|A| |A0|)``, which only needs the
p x p posterior factor and the cached factor of ``Sigma``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import special

from .core import marginal_data_covariance, posterior_update
from .dists import MvT
from .errors import EmptyModelList, IncompatibleComparison


@dataclass(frozen=True)
class ModelEvidence:
    label: str
    log_f_y: float
    log_z: float
    p: int = 0


def log_evidence(prior, model, y):
    """``log f(y)``, the log normalizing constant of the posterior."""
    return posterior_update(prior, model, y).log_evidence


def reduced_log_evidence(post):
    """Reduced log evidence of an already computed posterior."""
    prior = post.prior
    if prior.lambda_known is not None:
        lam = prior.lambda_known
        return 0.5 * post.logdet_B0 - lam * (prior.rate + 0.5 * (post.s2_n + post.d2_n))
    return 0.5 * post.logdet_B0 - post.posterior.shape * math.log(post.posterior.rate)


def log_evidence_reduced(prior, model, y):
    """``log z = log|B0|/2 - alpha_n log beta_n``.

    Drops the terms shared by every model with the same ``Sigma``,
    ``alpha0`` and ``beta0``. With known lambda it is
    ``log|B0|/2 - lambda beta_n``.
    """
    return reduced_log_evidence(posterior_update(prior, model, y))


def prior_predictive(prior, model):
    """Prior predictive of ``y``: t with ``2 alpha0`` dof, location ``X theta0``
    and dispersion ``(beta0/alpha0)(A^{-1} + X A0^{-1} X^T)``."""
    S = marginal_data_covariance(prior, model)
    return MvT(2.0 * prior.shape, model.X @ prior.theta, prior.rate / prior.shape * S)


def model_posterior_probs(log_evidences):
    """Softmax of log evidences, computed with log-sum-exp."""
    logs = np.asarray(log_evidences, dtype=float).ravel()
    if logs.size == 0:
        raise EmptyModelList("need at least one model")
    w = np.exp(logs - special.logsumexp(logs))
    return w / w.sum()


def _same_matrix(a, b):
    if a is None or b is None:
        return a is None and b is None
    return a.shape == b.shape and np.array_equal(a, b)


def check_comparable(priors, models, y):
    """Raise :class:`IncompatibleComparison` unless all models share ``Sigma``,
    ``alpha0``, ``beta0`` (and known lambda) and are fitted to the same data."""
    if len(models) == 0:
        raise EmptyModelList("need at least one model")
    if len(priors) != len(models):
        raise IncompatibleComparison(f"{len(priors)} priors for {len(models)} models")
    ref_p, ref_m = priors[0], models[0]
    for i, (pr, m) in enumerate(zip(priors, models)):
        if m.n != ref_m.n:
            raise IncompatibleComparison(f"model {i} has {m.n} observations, expected {ref_m.n}")
        if not _same_matrix(m.sigma, ref_m.sigma):
            raise IncompatibleComparison(f"model {i} uses a different correlation matrix")
        if pr.lambda_known != ref_p.lambda_known:
            raise IncompatibleComparison(f"model {i} uses a different known lambda")
        if ref_p.lambda_known is None and (pr.shape != ref_p.shape or pr.rate != ref_p.rate):
            raise IncompatibleComparison(
                f"model {i} has Gamma prior ({pr.shape}, {pr.rate}), "
                f"expected ({ref_p.shape}, {ref_p.rate})"
            )


def compare_models(priors, models, y, labels=None):
    """Evidence for each candidate model and their posterior probabilities.

    Returns
    -------
    evidences : list of ModelEvidence
    probs : ndarray
        Posterior model probabilities under a uniform model prior.
    """
    priors, models = list(priors), list(models)
    check_comparable(priors, models, y)
    if labels is None:
        labels = [f"model{i + 1}" for i in range(len(models))]
    out = []
    for label, pr, m in zip(labels, priors, models):
        post = posterior_update(pr, m, y)
        out.append(ModelEvidence(label, post.log_evidence, reduced_log_evidence(post), m.p))
    probs = model_posterior_probs([e.log_f_y for e in out])
    return out, probs
