import sys

import numpy as np
import pytest

from ngblm.core import ModelSpec, NormalGammaParams


def random_spd(rng, n, cond=None):
    """Random SPD matrix; with ``cond`` set, eigenvalues are log-spaced over that range."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    if cond is None:
        M = rng.standard_normal((n, n))
        S = M @ M.T / n + 0.5 * np.eye(n)
    else:
        S = Q @ np.diag(np.logspace(0, -np.log10(cond), n)) @ Q.T
    return 0.5 * (S + S.T)


def random_instance(rng, n=None, p=None, correlated=True, nmax=50, pmax=8):
    """Random prior, model and data with SPD Sigma and A0."""
    n = int(rng.integers(1, nmax + 1)) if n is None else n
    p = int(rng.integers(1, pmax + 1)) if p is None else p
    X = rng.standard_normal((n, p))
    sigma = random_spd(rng, n) if correlated else None
    A0 = random_spd(rng, p)
    prior = NormalGammaParams(
        rng.standard_normal(p), A0, float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.5, 3.0))
    )
    theta = rng.standard_normal(p)
    y = X @ theta + rng.standard_normal(n)
    return prior, ModelSpec(X, sigma), y


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def scalar_case():
    """theta0=0, A0=1, alpha0=beta0=1, X=[[1]], Sigma=I, y=[2]."""
    prior = NormalGammaParams([0.0], [[1.0]], 1.0, 1.0)
    return prior, ModelSpec([[1.0]]), np.array([2.0])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        title, ok = results[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {title}")
