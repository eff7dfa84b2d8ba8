"""TOML run configuration.

Example::

    [prior]
    theta0 = 0.0        # scalar fill or list
    A0 = 0.001          # scalar times identity, nested list, or A0_file = "a0.txt"
    alpha0 = 1.0
    beta0 = 1.0
    # lambda = 4.0      # fix the precision instead of learning it

    [model]
    response = "y"
    x = "x"             # location / polynomial column(s)
    degree = 3          # polynomial design [1, x, ..., x^degree]; a list compares several
    # columns = ["x1", "x2"] and intercept = true for an explicit design
    covariance = "identity"   # or covariance_file = "sigma.txt"

    [model.kernel]      # GP correlation over the x columns
    family = "squared-exponential"
    lengthscale = 0.2
    nugget = 0.0

    [grid]              # GP prediction grid (1-D)
    start = 0.0
    stop = 1.0
    num = 101

    [dlm]
    G = 1.0             # scalar times identity or nested list
    W = 0.0

    [output]
    quantiles = [0.05, 0.5, 0.95]
"""

from dataclasses import dataclass, field
from pathlib import Path
import sys

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import ModelSpec, NormalGammaParams
from .errors import ConfigError, DimensionMismatch
from .gp import KernelSpec, covariance_matrix
from .io import read_matrix

DEFAULT_QUANTILES = (0.05, 0.5, 0.95)

_KNOWN = {
    "prior": {"theta0", "A0", "A0_file", "alpha0", "beta0", "lambda"},
    "model": {"response", "x", "degree", "columns", "intercept", "covariance",
              "covariance_file", "kernel"},
    "grid": {"start", "stop", "num"},
    "dlm": {"G", "W", "G_file", "W_file"},
    "output": {"quantiles", "out"},
}


def parse_quantiles(values):
    try:
        qs = tuple(float(q) for q in values)
    except (TypeError, ValueError):
        raise ConfigError(f"quantiles must be numbers, got {values!r}") from None
    if not qs:
        raise ConfigError("need at least one quantile")
    for q in qs:
        if not 0.0 < q < 1.0:
            raise ConfigError(f"quantile {q} is not strictly inside (0, 1)")
    return qs


def _square(value, p, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(p)
    arr = np.atleast_2d(arr)
    if arr.shape != (p, p):
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {p}x{p}")
    return arr


@dataclass
class PriorConfig:
    theta0: object = 0.0
    A0: object = 1e-3
    alpha0: float = 1.0
    beta0: float = 1.0
    lam: float | None = None

    def build(self, p):
        theta = np.asarray(self.theta0, dtype=float)
        theta = np.full(p, float(theta)) if theta.ndim == 0 else theta
        if theta.shape != (p,):
            raise DimensionMismatch(f"theta0 has length {theta.size}, model has {p} coefficients")
        return NormalGammaParams(theta, _square(self.A0, p, "A0"), self.alpha0, self.beta0, self.lam)


@dataclass
class ModelConfig:
    response: str = "y"
    x: list = field(default_factory=lambda: ["x"])
    degree: object = None
    columns: list | None = None
    intercept: bool = True
    covariance: np.ndarray | None = None
    kernel: KernelSpec | None = None

    def degrees(self, default):
        d = default if self.degree is None else self.degree
        return list(d) if isinstance(d, (list, tuple)) else [d]

    def design_spec(self, degree):
        if self.columns is not None:
            return {"kind": "columns", "columns": list(self.columns), "intercept": self.intercept}
        if len(self.x) != 1 and degree > 1:
            raise ConfigError("polynomial designs of degree > 1 need a single x column")
        return {"kind": "polynomial", "x": list(self.x), "degree": int(degree)}

    def sigma(self, table):
        if self.kernel is not None:
            return covariance_matrix(self.kernel, table.matrix(self.x))
        if self.covariance is not None:
            if self.covariance.shape != (len(table), len(table)):
                raise DimensionMismatch(
                    f"covariance file is {self.covariance.shape}, data has {len(table)} rows"
                )
            return self.covariance
        return None


def design_matrix(spec, table):
    """Build the design matrix and column labels described by ``spec`` from ``table``."""
    if spec["kind"] == "columns":
        cols = [table[c] for c in spec["columns"]]
        names = list(spec["columns"])
        if spec.get("intercept", True):
            cols.insert(0, np.ones(len(table)))
            names.insert(0, "intercept")
        if not cols:
            raise ConfigError("design has no columns")
        return np.column_stack(cols), names
    degree = int(spec["degree"])
    if degree < 0:
        raise ConfigError(f"degree must be >= 0, got {degree}")
    n = len(table)
    if degree == 0:
        return np.ones((n, 1)), ["intercept"]
    xs = spec["x"]
    if len(xs) > 1:
        # degree 1 over several coordinates: [1, x_1, ..., x_q]
        return np.column_stack([np.ones(n)] + [table[c] for c in xs]), ["intercept"] + list(xs)
    x = table[xs[0]]
    names = ["intercept"] + [xs[0] if k == 1 else f"{xs[0]}^{k}" for k in range(1, degree + 1)]
    return np.vander(x, degree + 1, increasing=True), names


@dataclass
class RunConfig:
    prior: PriorConfig = field(default_factory=PriorConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    quantiles: tuple = DEFAULT_QUANTILES
    out: str | None = None
    grid: dict | None = None
    G: object = None
    W: object = None
    source: str = "<defaults>"

    def model_spec(self, table, degree):
        X, names = design_matrix(self.model.design_spec(degree), table)
        return ModelSpec(X, self.model.sigma(table)), names

    def grid_points(self):
        if self.grid is None:
            return None
        try:
            start, stop, num = float(self.grid["start"]), float(self.grid["stop"]), int(self.grid["num"])
        except KeyError as exc:
            raise ConfigError(f"[grid] needs start, stop and num (missing {exc})") from None
        if num < 1:
            raise ConfigError("[grid] num must be >= 1")
        return np.linspace(start, stop, num)[:, None]


def _matrix_entry(block, key, base):
    fkey = f"{key}_file"
    if fkey in block:
        path = base / block[fkey]
        if not path.exists():
            raise ConfigError(f"{fkey}: file {path} does not exist")
        return read_matrix(path)
    return block.get(key)


def load_config(path=None):
    """Read a TOML configuration; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, base=path.parent, source=str(path))


def config_from_dict(raw, base=Path("."), source="<dict>"):
    base = Path(base)
    for section, body in raw.items():
        if section not in _KNOWN:
            raise ConfigError(f"{source}: unknown section [{section}]")
        unknown = set(body) - _KNOWN[section]
        if unknown:
            raise ConfigError(f"{source}: unknown keys in [{section}]: {', '.join(sorted(unknown))}")

    pr = raw.get("prior", {})
    A0 = _matrix_entry(pr, "A0", base)
    prior = PriorConfig(
        theta0=pr.get("theta0", 0.0),
        A0=1e-3 if A0 is None else A0,
        alpha0=float(pr.get("alpha0", 1.0)),
        beta0=float(pr.get("beta0", 1.0)),
        lam=None if "lambda" not in pr else float(pr["lambda"]),
    )

    md = raw.get("model", {})
    x = md.get("x", "x")
    x = [x] if isinstance(x, str) else list(x)
    cov = None
    if "covariance_file" in md:
        cov = _matrix_entry(md, "covariance", base)
    elif md.get("covariance", "identity") != "identity":
        raise ConfigError("model.covariance must be 'identity'; use covariance_file for a matrix")
    kernel = None
    if "kernel" in md:
        kb = dict(md["kernel"])
        try:
            kernel = KernelSpec(
                family=kb.get("family", "squared-exponential"),
                lengthscale=float(kb.get("lengthscale", 1.0)),
                nugget=float(kb.get("nugget", 0.0)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: bad [model.kernel]: {exc}") from None
    if cov is not None and kernel is not None:
        raise ConfigError("give either covariance_file or [model.kernel], not both")
    model = ModelConfig(
        response=md.get("response", "y"),
        x=x,
        degree=md.get("degree"),
        columns=md.get("columns"),
        intercept=bool(md.get("intercept", True)),
        covariance=cov,
        kernel=kernel,
    )

    out = raw.get("output", {})
    quantiles = parse_quantiles(out.get("quantiles", DEFAULT_QUANTILES))
    dl = raw.get("dlm", {})
    return RunConfig(
        prior=prior,
        model=model,
        quantiles=quantiles,
        out=out.get("out"),
        grid=raw.get("grid"),
        G=_matrix_entry(dl, "G", base),
        W=_matrix_entry(dl, "W", base),
        source=source,
    )
