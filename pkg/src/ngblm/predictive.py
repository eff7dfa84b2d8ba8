"""Posterior predictive distributions and posterior marginals.

Targets ``Z`` (m x 1) with design ``Xm`` may be correlated with the
observations: ``cov(Y, Z) = v / lambda`` and ``V(Z) = target_cov / lambda``.
Conditioning on ``Y = y`` and integrating ``theta`` out gives

    mean  = v'A y + (Xm - v'A X) theta_n
    B^{-1} = (target_cov - v'A v) + (Xm - v'A X) A_n^{-1} (Xm - v'A X)'

which is Normal with covariance ``B^{-1} / lambda`` for known lambda and a
t with ``2 alpha_n`` dof and dispersion ``(beta_n/alpha_n) B^{-1}`` otherwise.
Both correction terms are computed from whitened quantities:
``a = L^{-1} v`` gives ``v'A v = a'a`` and ``v'A X = a'H``.
"""

from dataclasses import dataclass

import numpy as np

from .dists import GammaDist, MvNormal, MvT
from .errors import DimensionMismatch, LambdaFixed, NotPositiveDefinite, ValidationError
from .linalg import forward_solve, symmetrize

# relative tolerance on negative eigenvalues of the conditional covariance
JOINT_PSD_RTOL = 1e-8

PredictiveT = MvT


@dataclass(frozen=True, eq=False)
class PredictionTarget:
    """Design rows and correlation structure of the responses to predict.

    Parameters
    ----------
    Xm : array_like, shape (m, p)
    cross_cov : array_like, shape (n, m), optional
        Cross covariance with the observations (scaled by lambda).
        ``None`` means uncorrelated.
    target_cov : array_like, shape (m, m), optional
        Covariance among the targets (scaled by lambda). Defaults to identity.
    """

    Xm: np.ndarray
    cross_cov: np.ndarray | None = None
    target_cov: np.ndarray | None = None

    def __post_init__(self):
        Xm = np.atleast_2d(np.asarray(self.Xm, dtype=float))
        m = Xm.shape[0]
        tc = np.eye(m) if self.target_cov is None else symmetrize(self.target_cov, "target_cov")
        if tc.shape != (m, m):
            raise DimensionMismatch(f"target_cov shape {tc.shape} does not match {m} targets")
        object.__setattr__(self, "Xm", Xm)
        object.__setattr__(self, "target_cov", tc)
        if self.cross_cov is not None:
            v = np.asarray(self.cross_cov, dtype=float)
            if v.ndim == 1:
                v = v[:, None]
            if v.shape[1] != m:
                raise DimensionMismatch(f"cross_cov has {v.shape[1]} columns for {m} targets")
            object.__setattr__(self, "cross_cov", v)

    @property
    def m(self):
        return self.Xm.shape[0]


def conditional_terms(post, tgt):
    """Mean vector and bracketed covariance ``B^{-1}`` of the predictive.

    Raises
    ------
    NotPositiveDefinite
        If ``target_cov - v'A v`` has a clearly negative eigenvalue, i.e. the
        joint covariance of observations and targets is not valid.
    """
    if tgt.Xm.shape[1] != post.theta.size:
        raise DimensionMismatch(
            f"target design has {tgt.Xm.shape[1]} columns, posterior has {post.theta.size}"
        )
    if tgt.cross_cov is None:
        G = tgt.Xm
        mean = G @ post.theta
        schur = tgt.target_cov
    else:
        model = post.model
        if model is None or post.y is None:
            raise ValidationError("correlated targets need a posterior that keeps its data")
        if tgt.cross_cov.shape[0] != model.n:
            raise DimensionMismatch(
                f"cross_cov has {tgt.cross_cov.shape[0]} rows, model has {model.n} observations"
            )
        a = model.whiten(tgt.cross_cov)
        schur = tgt.target_cov - a.T @ a
        G = tgt.Xm - a.T @ model.H
        mean = a.T @ post.y_white + G @ post.theta
        scale = max(1.0, float(np.max(np.abs(np.diag(tgt.target_cov)))))
        lowest = float(np.linalg.eigvalsh(0.5 * (schur + schur.T))[0])
        if lowest < -JOINT_PSD_RTOL * scale:
            raise NotPositiveDefinite(
                0,
                "joint covariance of observations and targets is not positive definite "
                f"(conditional covariance eigenvalue {lowest:.3g})",
            )
    h = forward_solve(post.An_chol, G.T).T
    B_inv = schur + h @ h.T
    return mean, 0.5 * (B_inv + B_inv.T)


def predict_known_lambda(post, tgt, lam=None):
    """Normal predictive for fixed precision ``lam`` (defaults to the prior's known lambda)."""
    if lam is None:
        lam = post.lambda_known
    if lam is None or not lam > 0:
        raise ValidationError("a positive lambda is required for the Normal predictive")
    mean, B_inv = conditional_terms(post, tgt)
    return MvNormal(mean, B_inv / lam)


def predict_t(post, tgt):
    """Student-t predictive with ``2 alpha_n`` degrees of freedom."""
    if post.lambda_known is not None:
        raise LambdaFixed("lambda is known; use predict_known_lambda")
    mean, B_inv = conditional_terms(post, tgt)
    return MvT(2.0 * post.shape, mean, post.rate / post.shape * B_inv)


def marginal_linear(post, T):
    """Posterior of ``T theta`` for a k x p matrix ``T``.

    t with ``2 alpha_n`` dof and dispersion ``(beta_n/alpha_n) T A_n^{-1} T'``,
    or Normal with covariance ``T A_n^{-1} T' / lambda`` when lambda is known.
    """
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if T.shape[1] != post.theta.size:
        raise DimensionMismatch(f"T has {T.shape[1]} columns, posterior has {post.theta.size}")
    h = forward_solve(post.An_chol, T.T).T
    S = h @ h.T
    S = 0.5 * (S + S.T)
    mean = T @ post.theta
    if post.lambda_known is not None:
        return MvNormal(mean, S / post.lambda_known)
    return MvT(2.0 * post.shape, mean, post.rate / post.shape * S)


def coordinate_marginals(post):
    """Univariate t marginal of each coefficient."""
    p = post.theta.size
    return [marginal_linear(post, np.eye(p)[j:j + 1]) for j in range(p)]


def lambda_marginal(post):
    """``lambda | y ~ Ga(alpha_n, beta_n)``."""
    if post.lambda_known is not None:
        raise LambdaFixed("lambda was declared known")
    return GammaDist(post.shape, post.rate)
