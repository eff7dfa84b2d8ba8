"""Gaussian-process regression on top of the conjugate linear model.

Observations at locations ``x_i`` have covariance
``(k(|x_i - x_j|) + nugget * delta_ij) / lambda`` with an isotropic
correlation ``k`` and a regression mean ``phi(x) theta``. Prediction at a
new location uses the correlated predictive with
``v(x) = [k(|x - x_i|)]_i`` and target variance ``1 + nugget``.

Kernel conventions (``r = d / lengthscale``):

- ``squared-exponential``: ``exp(-r**2)`` (no factor 1/2)
- ``exponential``: ``exp(-r)``
- ``matern-3/2``: ``(1 + sqrt(3) r) exp(-sqrt(3) r)``
"""

from dataclasses import dataclass, field
from typing import Callable
import math

import numpy as np
from scipy.spatial.distance import cdist

from .core import ModelSpec, posterior_update
from .errors import DimensionMismatch, DomainError, NotPositiveDefinite
from .predictive import PredictionTarget, predict_known_lambda, predict_t

FAMILIES = ("squared-exponential", "exponential", "matern-3/2")
_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class KernelSpec:
    family: str = "squared-exponential"
    lengthscale: float = 1.0
    nugget: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        if not self.lengthscale > 0:
            raise DomainError(f"lengthscale must be positive, got {self.lengthscale}")
        if not self.nugget >= 0:
            raise DomainError(f"nugget must be nonnegative, got {self.nugget}")

    def __call__(self, d):
        return kernel_eval(self, d)


def kernel_eval(k, d):
    """Correlation at distance ``d`` (scalar or array); the nugget is not included."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise DomainError("distances must be nonnegative")
    r = d / k.lengthscale
    if k.family == "squared-exponential":
        out = np.exp(-r * r)
    elif k.family == "exponential":
        out = np.exp(-r)
    else:
        s = _SQRT3 * r
        out = (1.0 + s) * np.exp(-s)
    return float(out) if out.ndim == 0 else out


def linear_regressors(x):
    """Default regressor map ``phi(x) = [1, x_1, ..., x_q]``."""
    x = np.atleast_2d(x)
    return np.hstack([np.ones((x.shape[0], 1)), x])


def _locations(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionMismatch(f"locations must be an n x q array, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class GpDataset:
    """Observed responses ``y`` at ``locations`` (n x q) and the regressor map."""

    locations: np.ndarray
    y: np.ndarray
    regressors: Callable[[np.ndarray], np.ndarray] = field(default=linear_regressors)

    def __post_init__(self):
        x = _locations(self.locations)
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if y.ndim != 1 or y.size != x.shape[0]:
            raise DimensionMismatch(f"{y.size} responses for {x.shape[0]} locations")
        object.__setattr__(self, "locations", x)
        object.__setattr__(self, "y", y)

    @property
    def design(self):
        return np.atleast_2d(self.regressors(self.locations))


def covariance_matrix(kernel, x1, x2=None, nugget=True):
    """Kernel matrix between location sets (Euclidean distance).

    With ``x2`` omitted this is the correlation matrix of ``x1`` including
    the nugget on the diagonal when ``nugget`` is true.
    """
    x1 = _locations(x1)
    same = x2 is None
    x2 = x1 if same else _locations(x2)
    K = kernel_eval(kernel, cdist(x1, x2))
    if same:
        K = 0.5 * (K + K.T)
        if nugget:
            K = K + kernel.nugget * np.eye(x1.shape[0])
    return K


def gp_model(data, kernel):
    return ModelSpec(data.design, covariance_matrix(kernel, data.locations))


def gp_fit(data, kernel, prior):
    """Conjugate posterior of the GP regression coefficients and precision."""
    model = gp_model(data, kernel)
    try:
        model.sigma_chol
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(
            exc.column,
            f"GP correlation matrix is not positive definite (pivot {exc.column}); "
            "locations may be duplicated or too close for this lengthscale, "
            "try a positive nugget",
        ) from None
    return posterior_update(prior, model, data.y)


def gp_target(data, kernel, x):
    """Prediction target at location(s) ``x`` (a q-vector or m x q array)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = covariance_matrix(kernel, data.locations, x)
    Xm = np.atleast_2d(data.regressors(x))
    return PredictionTarget(Xm, cross_cov=v, target_cov=covariance_matrix(kernel, x))


def gp_predict(fit, data, kernel, grid):
    """Univariate predictive at each grid location.

    Returns a list with one distribution per grid point: Student t when
    lambda is unknown, Normal when it is known.
    """
    grid = _locations(grid)
    if grid.shape[1] != data.locations.shape[1]:
        raise DimensionMismatch(
            f"grid has {grid.shape[1]} coordinates, data has {data.locations.shape[1]}"
        )
    out = []
    for x in grid:
        tgt = gp_target(data, kernel, x)
        if fit.lambda_known is None:
            out.append(predict_t(fit, tgt))
        else:
            out.append(predict_known_lambda(fit, tgt))
    return out
