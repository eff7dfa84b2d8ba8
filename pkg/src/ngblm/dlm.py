"""Univariate dynamic linear model filtered by repeated conjugate updates.

    y_t     = phi_t theta_t + eps,       eps ~ N(0, 1/lambda)
    theta_t = G_t theta_{t-1} + omega,   omega ~ N(0, W_t / lambda)

The state carries the Normal-Gamma hyperparameters of ``(theta_t, lambda)``.
Each step evolves the state through ``G_t`` and ``W_t`` and then applies the
conjugate update with the single design row ``phi_t``. ``W_t = 0`` gives
the evolution ``G mu`` with covariance ``G P^{-1} G'`` and no added noise.
"""

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import ModelSpec, NormalGammaParams, PosteriorSummary, posterior_update
from .errors import DimensionMismatch, NotPositiveDefinite
from .linalg import spd_inverse, symmetrize
from .predictive import PredictionTarget, predict_t


@dataclass(frozen=True, eq=False)
class DlmState:
    """Filtered state after ``t`` observations.

    ``log_evidence`` accumulates the one-step log predictive densities, so it
    equals the log evidence of ``y_1..y_t``.
    """

    t: int
    mean: np.ndarray
    precision: np.ndarray
    shape: float
    rate: float
    log_evidence: float = 0.0

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        prec = symmetrize(self.precision, "precision")
        if prec.shape != (mean.size, mean.size):
            raise DimensionMismatch(f"precision shape {prec.shape} for state of size {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "precision", prec)

    @property
    def dim(self):
        return self.mean.size

    @property
    def covariance(self):
        """State covariance scaled by lambda, ``P^{-1}``."""
        return spd_inverse(self.precision)

    def as_prior(self):
        return NormalGammaParams(self.mean, self.precision, self.shape, self.rate)


def _provider(value):
    if callable(value):
        return value
    arr = None if value is None else np.asarray(value, dtype=float)
    return lambda t: arr


@dataclass(frozen=True)
class DlmSpec:
    """Evolution matrix ``G``, evolution covariance ``W`` and observation row ``phi``.

    Each may be a constant array or a callable ``t -> array`` evaluated at
    the 1-based index of the step being predicted. ``G=None`` means the
    identity and ``W=None`` means no evolution noise.
    """

    phi: np.ndarray | Callable
    G: np.ndarray | Callable | None = None
    W: np.ndarray | Callable | None = None

    def at(self, t):
        return _provider(self.phi)(t), _provider(self.G)(t), _provider(self.W)(t)


def dlm_evolve(state, G=None, W=None):
    """Prior for the next step: mean ``G mu``, covariance ``G P^{-1} G' + W``."""
    p = state.dim
    if G is None and W is None:
        return state
    G = np.eye(p) if G is None else np.atleast_2d(np.asarray(G, dtype=float))
    W = np.zeros((p, p)) if W is None else np.atleast_2d(np.asarray(W, dtype=float))
    if G.shape != (p, p) or W.shape != (p, p):
        raise DimensionMismatch(f"G {G.shape} and W {W.shape} must both be {p}x{p}")
    if np.array_equal(G, np.eye(p)) and not np.any(W):
        return state
    R = G @ state.covariance @ G.T + W
    try:
        P = spd_inverse(0.5 * (R + R.T))
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(
            exc.column, f"evolved state covariance is degenerate (pivot {exc.column})"
        ) from None
    return replace(state, mean=G @ state.mean, precision=P)


def _row(phi, p):
    phi = np.atleast_1d(np.asarray(phi, dtype=float)).ravel()
    if phi.size != p:
        raise DimensionMismatch(f"observation row has {phi.size} entries, state has {p}")
    return phi


def _update_summary(state, phi, y):
    phi = _row(phi, state.dim)
    return posterior_update(state.as_prior(), ModelSpec(phi[None, :]), [float(y)])


def dlm_update(state, phi, y):
    """Condition the (already evolved) state on one observation ``y``."""
    post = _update_summary(state, phi, y)
    ng = post.posterior
    return DlmState(
        t=state.t + 1,
        mean=ng.theta,
        precision=ng.precision,
        shape=ng.shape,
        rate=ng.rate,
        log_evidence=state.log_evidence + post.log_evidence,
    )


def _one_step(state, phi):
    phi = _row(phi, state.dim)
    post = PosteriorSummary.from_posterior(state.as_prior())
    return predict_t(post, PredictionTarget(phi[None, :]))


def dlm_forecast(state, phi_next, G_next=None, W_next=None):
    """One-step-ahead predictive of ``y_{t+1}``.

    t with ``2 alpha_t`` dof, location ``phi a`` and dispersion
    ``(beta_t/alpha_t)(1 + phi R phi')`` where ``a``, ``R`` are the evolved
    mean and covariance.
    """
    return _one_step(dlm_evolve(state, G_next, W_next), phi_next)


@dataclass(frozen=True, eq=False)
class DlmStep:
    t: int
    y: float
    forecast: object
    filtered: DlmState
    log_forecast: float = field(default=0.0)


def dlm_filter(spec, initial, ys):
    """Run evolve, forecast and update over the observations ``ys``."""
    state = initial
    steps = []
    for y in np.asarray(ys, dtype=float).ravel():
        t = state.t + 1
        phi, G, W = spec.at(t)
        prior = dlm_evolve(state, G, W)
        fc = _one_step(prior, phi)
        state = dlm_update(prior, phi, y)
        steps.append(DlmStep(t, float(y), fc, state, fc.logpdf([y])))
    return steps
