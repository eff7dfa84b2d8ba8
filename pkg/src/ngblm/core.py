"""Normal-Gamma conjugate updating for ``y = X theta + eps``, ``eps ~ N(0, Sigma / lambda)``.

The prior is ``theta | lambda ~ N(theta0, (lambda A0)^{-1})`` and
``lambda ~ Ga(alpha0, beta0)`` (shape, rate). ``Sigma`` is known; its inverse
is written ``A``.

Whitening convention: with ``Sigma = L L^T`` the whitened design is
``H = L^{-1} X`` so that ``H^T H = X^T A X``. Equivalently ``H = U^T X``
where ``U = L^{-T}`` is the factor returned by
:func:`ngblm.linalg.precision_factor` (``A = U U^T``).
"""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np
from scipy import special

from .errors import (
    DimensionMismatch,
    DomainError,
    NotPositiveDefinite,
    SingularDesign,
    ValidationError,
)
from .linalg import (
    chol_solve,
    cholesky,
    forward_solve,
    inverse_from_chol,
    logdet_from_chol,
    precision_factor,
    symmetrize,
)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class NormalGammaParams:
    """Hyperparameters ``(theta, A, alpha, beta)`` of a Normal-Gamma distribution.

    When ``lambda_known`` is set the precision is treated as that fixed value
    and ``shape``/``rate`` are carried along but play no role.
    """

    theta: np.ndarray
    precision: np.ndarray
    shape: float
    rate: float
    lambda_known: float | None = None

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if theta.ndim != 1:
            raise DimensionMismatch(f"theta must be a vector, got shape {theta.shape}")
        prec = symmetrize(self.precision, "precision")
        if prec.shape != (theta.size, theta.size):
            raise DimensionMismatch(
                f"precision shape {prec.shape} does not match theta of length {theta.size}"
            )
        if self.lambda_known is not None:
            if not self.lambda_known > 0:
                raise DomainError(f"known lambda must be positive, got {self.lambda_known}")
            object.__setattr__(self, "lambda_known", float(self.lambda_known))
        elif not (self.shape > 0 and self.rate > 0):
            raise DomainError(f"need shape, rate > 0, got {self.shape}, {self.rate}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "precision", prec)
        object.__setattr__(self, "shape", float(self.shape))
        object.__setattr__(self, "rate", float(self.rate))

    @classmethod
    def isotropic(cls, p, precision=1e-3, theta=0.0, shape=1.0, rate=1.0, lambda_known=None):
        """Prior with ``theta0`` filled with a scalar and ``A0 = precision * I``."""
        return cls(np.full(p, float(theta)), precision * np.eye(p), shape, rate, lambda_known)

    @property
    def dim(self):
        return self.theta.size

    @cached_property
    def chol(self):
        """Lower Cholesky factor of the precision matrix."""
        return cholesky(self.precision)

    @property
    def logdet_precision(self):
        return logdet_from_chol(self.chol)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Design matrix plus known correlation structure.

    Parameters
    ----------
    X : array_like, shape (n, p)
    sigma : array_like, shape (n, n), optional
        Correlation (or any SPD covariance) matrix of the errors up to the
        factor ``1/lambda``. ``None`` means the identity.
    """

    X: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] < 1:
            raise DimensionMismatch(f"design must be n x p with p >= 1, got shape {X.shape}")
        object.__setattr__(self, "X", X)
        if self.sigma is not None:
            sigma = symmetrize(self.sigma, "sigma")
            if sigma.shape != (X.shape[0], X.shape[0]):
                raise DimensionMismatch(
                    f"sigma shape {sigma.shape} does not match {X.shape[0]} observations"
                )
            object.__setattr__(self, "sigma", sigma)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def identity(self):
        return self.sigma is None

    @cached_property
    def sigma_chol(self):
        """Lower factor ``L`` of ``Sigma``; ``None`` for identity correlation."""
        if self.sigma is None:
            return None
        return cholesky(self.sigma)

    @cached_property
    def U(self):
        """Precision factor ``U = L^{-T}`` with ``A = U U^T``."""
        if self.sigma is None:
            return np.eye(self.n)
        return precision_factor(self.sigma)

    def whiten(self, v):
        """Map ``v`` to ``U^T v = L^{-1} v``."""
        v = np.asarray(v, dtype=float)
        if self.sigma is None:
            return v.copy()
        return forward_solve(self.sigma_chol, v)

    @cached_property
    def H(self):
        """Whitened design, ``H^T H = X^T A X``."""
        return self.whiten(self.X)

    @cached_property
    def logdet_A(self):
        """``log|A| = -log|Sigma|``."""
        if self.sigma is None:
            return 0.0
        return -logdet_from_chol(self.sigma_chol)

    @property
    def A(self):
        if self.sigma is None:
            return np.eye(self.n)
        U = self.U
        return U @ U.T


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    """Result of :func:`posterior_update`.

    ``s2_n`` is the weighted residual sum of squares and ``d2_n`` the
    prior/posterior discrepancy; ``posterior.rate == prior.rate + (s2_n + d2_n)/2``
    when lambda is unknown. ``An_chol`` is the lower factor of the posterior
    precision and ``An_inv`` its inverse.
    """

    posterior: NormalGammaParams
    s2_n: float
    d2_n: float
    An_chol: np.ndarray
    An_inv: np.ndarray
    log_evidence: float
    logdet_B0: float = 0.0
    prior: NormalGammaParams | None = None
    model: ModelSpec | None = None
    y: np.ndarray | None = None

    @property
    def theta(self):
        return self.posterior.theta

    @property
    def shape(self):
        return self.posterior.shape

    @property
    def rate(self):
        return self.posterior.rate

    @property
    def lambda_known(self):
        return self.posterior.lambda_known

    @cached_property
    def y_white(self):
        return self.model.whiten(self.y)

    @classmethod
    def from_posterior(cls, posterior, log_evidence=math.nan, s2_n=math.nan, d2_n=math.nan):
        """Summary without the data, e.g. re-read from a report.

        Supports predictions for targets uncorrelated with the observations.
        """
        Rn = posterior.chol
        return cls(posterior, s2_n, d2_n, Rn, inverse_from_chol(Rn), log_evidence)


def _response(model, y):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.ndim != 1 or y.size != model.n:
        raise DimensionMismatch(f"y has shape {y.shape}, model has {model.n} observations")
    return y


def _check_prior(prior, model):
    if prior.dim != model.p:
        raise DimensionMismatch(f"prior has dimension {prior.dim}, design has {model.p} columns")


def log_normalizing_constant(n, logdet_B0, alpha0, beta0, alpha_n, beta_n):
    """``log f(y)`` from its scalar ingredients, all in log space."""
    return (
        -0.5 * n * LOG_2PI
        + 0.5 * logdet_B0
        + alpha0 * math.log(beta0)
        - special.gammaln(alpha0)
        + special.gammaln(alpha_n)
        - alpha_n * math.log(beta_n)
    )


def log_normalizing_constant_known(n, logdet_B0, lam, quad):
    """``log f(y | lambda)`` where ``quad`` is ``2 (beta_n - beta0)``."""
    return -0.5 * n * LOG_2PI + 0.5 * n * math.log(lam) + 0.5 * logdet_B0 - 0.5 * lam * quad


def posterior_update(prior, model, y):
    """Conjugate update of a Normal-Gamma prior.

    Computes ``A_n = A0 + H^T H``, solves ``A_n theta_n = A0 theta0 + X^T A y``
    through the Cholesky factor of ``A_n``, and forms
    ``beta_n = beta0 + (s2_n + d2_n) / 2`` from the residual and
    discrepancy quadratic forms. The log evidence uses
    ``log|B0| = log|A| + log|A0| - log|A_n|``.

    With no observations the prior is returned unchanged with zero log
    evidence.
    """
    _check_prior(prior, model)
    y = _response(model, y)
    n = model.n
    A0 = prior.precision
    if n == 0:
        Rn = prior.chol
        return PosteriorSummary(
            posterior=prior, s2_n=0.0, d2_n=0.0, An_chol=Rn,
            An_inv=inverse_from_chol(Rn), log_evidence=0.0, logdet_B0=0.0,
            prior=prior, model=model, y=y,
        )

    H = model.H
    yw = model.whiten(y)
    An = A0 + H.T @ H
    An = 0.5 * (An + An.T)
    try:
        Rn = cholesky(An)
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(
            exc.column, f"posterior precision A_n is not positive definite (pivot {exc.column})"
        ) from None
    theta_n = chol_solve(Rn, A0 @ prior.theta + H.T @ yw)

    resid = yw - H @ theta_n
    s2 = float(resid @ resid)
    dtheta = prior.theta - theta_n
    d2 = float(dtheta @ A0 @ dtheta)

    logdet_B0 = model.logdet_A + prior.logdet_precision - logdet_from_chol(Rn)
    if prior.lambda_known is None:
        alpha_n = prior.shape + 0.5 * n
        beta_n = prior.rate + 0.5 * (s2 + d2)
        log_ev = log_normalizing_constant(n, logdet_B0, prior.shape, prior.rate, alpha_n, beta_n)
    else:
        alpha_n, beta_n = prior.shape, prior.rate
        log_ev = log_normalizing_constant_known(n, logdet_B0, prior.lambda_known, s2 + d2)

    posterior = NormalGammaParams(theta_n, An, alpha_n, beta_n, prior.lambda_known)
    # reuse the factor already computed
    posterior.__dict__["chol"] = Rn
    return PosteriorSummary(
        posterior=posterior,
        s2_n=s2,
        d2_n=d2,
        An_chol=Rn,
        An_inv=inverse_from_chol(Rn),
        log_evidence=float(log_ev),
        logdet_B0=float(logdet_B0),
        prior=prior,
        model=model,
        y=y,
    )


def marginal_data_covariance(prior, model):
    """``A^{-1} + X A0^{-1} X^T``, the covariance of ``y`` given lambda (times lambda)."""
    sigma = np.eye(model.n) if model.sigma is None else model.sigma
    XA0inv = np.linalg.solve(prior.precision, model.X.T).T
    S = sigma + XA0inv @ model.X.T
    return 0.5 * (S + S.T)


def beta_n_marginal(prior, model, y):
    """``beta_n`` from the marginal of ``y`` given lambda, by a dense O(n^3) solve.

    Independent of the factor-based path in :func:`posterior_update`; meant as
    a cross-check.
    """
    _check_prior(prior, model)
    y = _response(model, y)
    r = y - model.X @ prior.theta
    if model.n == 0:
        return prior.rate
    S = marginal_data_covariance(prior, model)
    return prior.rate + 0.5 * float(r @ np.linalg.solve(S, r))


def beta_n_naive(prior, model, y):
    """``beta0 + (y'Ay + theta0'A0 theta0 - theta_n'A_n theta_n) / 2``.

    Subtracts large quadratic forms and loses accuracy when they nearly
    cancel; kept for cross-checking.
    """
    post = posterior_update(prior, model, y)
    yw = model.whiten(post.y)
    th0, thn = prior.theta, post.theta
    q = float(yw @ yw) + float(th0 @ prior.precision @ th0) - float(thn @ post.posterior.precision @ thn)
    return prior.rate + 0.5 * q


def mle_decomposition(model, prior, y):
    """Least-squares estimate and the weight matrix of the posterior mean.

    For uncorrelated errors, ``theta_n = (I - W) theta0 + W theta_hat`` with
    ``theta_hat = (X'X)^{-1} X'y`` and ``W = A_n^{-1} X'X``.

    Returns
    -------
    theta_hat : ndarray, shape (p,)
    W : ndarray, shape (p, p)

    Raises
    ------
    ValidationError
        If the model has a non-identity correlation matrix.
    SingularDesign
        If ``X'X`` cannot be factorized.
    """
    if not model.identity:
        raise ValidationError("the least-squares decomposition needs identity correlation")
    _check_prior(prior, model)
    y = _response(model, y)
    XtX = model.X.T @ model.X
    try:
        R = cholesky(XtX)
    except NotPositiveDefinite as exc:
        raise SingularDesign(f"X'X is singular or rank deficient (pivot {exc.column})") from None
    theta_hat = chol_solve(R, model.X.T @ y)
    post = posterior_update(prior, model, y)
    W = chol_solve(post.An_chol, XtX)
    return theta_hat, W
