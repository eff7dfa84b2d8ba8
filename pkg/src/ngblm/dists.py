"""Normal, multivariate t and Gamma distributions used by the model.

The multivariate t is parametrized by its *dispersion* matrix ``D``: the
density depends on ``D^{-1}`` and the covariance, when it exists, is
``nu / (nu - 2) * D``.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np
from scipy import special

from .errors import DimensionMismatch, DomainError, NegativeSupport, ValidationError
from .linalg import cholesky, forward_solve, logdet_from_chol

LOG_2PI = math.log(2.0 * math.pi)


def _vector(x, name):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class MvNormal:
    """Multivariate Normal with mean ``mean`` and covariance ``cov``."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _vector(self.mean, "mean")
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(
                f"covariance shape {cov.shape} does not match mean of length {mean.size}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.size

    @cached_property
    def chol(self):
        """Lower Cholesky factor of the covariance."""
        return cholesky(self.cov)

    def logpdf(self, y):
        return mvn_logpdf(self, y)


@dataclass(frozen=True, eq=False)
class MvT:
    """Multivariate t with ``dof`` degrees of freedom, location and dispersion."""

    dof: float
    mean: np.ndarray
    dispersion: np.ndarray

    def __post_init__(self):
        if not self.dof > 0:
            raise DomainError(f"degrees of freedom must be positive, got {self.dof}")
        mean = _vector(self.mean, "mean")
        disp = np.atleast_2d(np.asarray(self.dispersion, dtype=float))
        if disp.shape != (mean.size, mean.size):
            raise DimensionMismatch(
                f"dispersion shape {disp.shape} does not match mean of length {mean.size}"
            )
        object.__setattr__(self, "dof", float(self.dof))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "dispersion", disp)

    @property
    def dim(self):
        return self.mean.size

    @property
    def covariance(self):
        """``nu/(nu-2) D`` when ``nu > 2``, else ``None``."""
        if self.dof <= 2:
            return None
        return self.dof / (self.dof - 2.0) * self.dispersion

    @property
    def scale(self):
        """Per-coordinate scale ``sqrt(diag(D))``, with negative round-off clamped to 0."""
        return np.sqrt(np.clip(np.diag(self.dispersion), 0.0, None))

    @cached_property
    def chol(self):
        return cholesky(self.dispersion)

    def logpdf(self, y):
        return mvt_logpdf(self, y)

    def quantiles(self, probs):
        """Marginal quantiles, shape ``(dim, len(probs))``.

        Coordinates with zero scale are point masses and return the mean.
        """
        probs = np.atleast_1d(np.asarray(probs, dtype=float))
        z = np.array([t_quantile(self.dof, p) for p in probs])
        return self.mean[:, None] + self.scale[:, None] * z[None, :]


@dataclass(frozen=True)
class GammaDist:
    """Gamma distribution with shape ``alpha`` and rate ``beta``."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError(f"Gamma needs shape, rate > 0, got {self.shape}, {self.rate}")

    @property
    def mean(self):
        return self.shape / self.rate

    @property
    def var(self):
        return self.shape / self.rate**2

    def logpdf(self, y):
        return gamma_logpdf(self, y)


def mvn_logpdf(d, y):
    y = _vector(y, "y")
    if y.size != d.dim:
        raise DimensionMismatch(f"y has length {y.size}, distribution has dimension {d.dim}")
    L = d.chol
    z = forward_solve(L, y - d.mean)
    return -0.5 * d.dim * LOG_2PI - 0.5 * logdet_from_chol(L) - 0.5 * float(z @ z)


def mvt_logpdf(d, y):
    y = _vector(y, "y")
    n = d.dim
    if y.size != n:
        raise DimensionMismatch(f"y has length {y.size}, distribution has dimension {n}")
    nu = d.dof
    L = d.chol
    z = forward_solve(L, y - d.mean)
    q = float(z @ z)
    # log|nu D| = n log nu + log|D|
    logdet = n * math.log(nu) + logdet_from_chol(L)
    return (
        -0.5 * n * math.log(math.pi)
        - 0.5 * logdet
        + special.gammaln(0.5 * (nu + n))
        - special.gammaln(0.5 * nu)
        - 0.5 * (nu + n) * math.log1p(q / nu)
    )


def gamma_logpdf(d, y):
    y = float(y)
    if y < 0:
        raise NegativeSupport(f"Gamma density evaluated at negative value {y}")
    a, b = d.shape, d.rate
    if y == 0.0:
        if a == 1.0:
            return math.log(b)
        return math.inf if a < 1.0 else -math.inf
    return a * math.log(b) - special.gammaln(a) + (a - 1.0) * math.log(y) - b * y


def t_cdf(x, nu):
    """Student t CDF through the regularized incomplete beta function."""
    x = float(x)
    tail = 0.5 * special.betainc(0.5 * nu, 0.5, nu / (nu + x * x))
    return tail if x < 0 else 1.0 - tail


def t_quantile(nu, p, tol=1e-10):
    """Quantile of the standard Student t by bisection on :func:`t_cdf`.

    The starting bracket is the Normal quantile plus or minus ten units and
    is widened until it contains the root.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie strictly inside (0, 1), got {p}")
    if not nu > 0:
        raise ValidationError(f"degrees of freedom must be positive, got {nu}")
    if p == 0.5:
        return 0.0
    # solve in the lower tail and reflect; the upper-tail CDF loses digits near 1
    q = min(p, 1.0 - p)
    z = float(special.ndtri(q))
    lo, hi = z - 10.0, min(z + 10.0, 0.0)
    while t_cdf(lo, nu) > q:
        lo *= 2.0
    while hi - lo > tol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, nu) < q:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    return x if p < 0.5 else -x
