"""Command-line interface: ``ngblm simulate|fit|evidence|predict|gp|dlm``.

Exit codes: 0 success, 2 invalid input or usage, 3 numerical failure.
"""

import argparse
import json
import math
from pathlib import Path
import sys

import numpy as np
from scipy import special

from . import __version__
from .config import (
    design_matrix,
    load_config,
    parse_quantiles,
)
from .core import NormalGammaParams, PosteriorSummary, posterior_update
from .dists import MvNormal, t_quantile
from .dlm import DlmSpec, DlmState, dlm_filter
from .errors import (
    ConfigError,
    NotPositiveDefinite,
    NumericalError,
    ParseError,
    SingularDesign,
    ValidationError,
)
from .evidence import compare_models, reduced_log_evidence
from .gp import GpDataset, covariance_matrix, gp_fit, gp_predict
from .io import GENERATOR, Table, fmt, format_csv, format_json, header_line, read_csv
from .predictive import (
    PredictionTarget,
    coordinate_marginals,
    lambda_marginal,
    predict_known_lambda,
    predict_t,
)

# dispersions at or below this fraction of the reference variance are reported as point masses
POINT_MASS_RTOL = 1e-10


def _qname(q):
    return f"q{q:g}"


def summarize(dist, quantiles, ref=1.0):
    """Mean, dof, scale, quantiles and point-mass flag of a univariate predictive."""
    mean = float(dist.mean[0])
    if isinstance(dist, MvNormal):
        var, dof = float(dist.cov[0, 0]), math.inf
        z = [float(special.ndtri(q)) for q in quantiles]
    else:
        var, dof = float(dist.dispersion[0, 0]), dist.dof
        z = [t_quantile(dof, q) for q in quantiles]
    point_mass = var <= POINT_MASS_RTOL * ref
    scale = 0.0 if point_mass else math.sqrt(var)
    qs = [mean + scale * zi for zi in z]
    return mean, dof, scale, qs, point_mass


def _predictive_rows(dists, quantiles, refs, coords):
    rows = []
    for i, (d, ref, c) in enumerate(zip(dists, refs, coords)):
        mean, dof, scale, qs, pm = summarize(d, quantiles, ref)
        rows.append([str(i + 1), *c, mean, dof, scale, *qs, "1" if pm else "0"])
    return rows


def _predictive_names(coord_names, quantiles):
    return ["point", *coord_names, "mean", "dof", "scale", *map(_qname, quantiles), "point_mass"]


def _prior_scale(post):
    if post.lambda_known is not None:
        return 1.0 / post.lambda_known
    return post.rate / post.shape


# ---------------------------------------------------------------------------
# workflows


def run_simulate(n=40, sigma=0.1, seed=0):
    """Data from ``y = 1 + sin(2 pi x) + sigma e`` at ``x_i = i / n``."""
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    if not sigma >= 0:
        raise ValidationError(f"sigma must be nonnegative, got {sigma}")
    n = int(n)
    rng = np.random.default_rng(seed)
    x = np.arange(1, n + 1) / n
    y = 1.0 + np.sin(2.0 * np.pi * x) + sigma * rng.standard_normal(n)
    head = header_line("simulate", seed, n=n, sigma=fmt(sigma))
    return format_csv(head, ["x", "y"], zip(x, y))


def _degree(cfg, default):
    degrees = cfg.model.degrees(default)
    if len(degrees) != 1:
        raise ConfigError("this command takes a single model; use 'evidence' to compare degrees")
    return degrees[0]


def _fit(table, cfg, default_degree=1):
    degree = _degree(cfg, default_degree)
    model, names = cfg.model_spec(table, degree)
    prior = cfg.prior.build(model.p)
    y = table[cfg.model.response]
    return posterior_update(prior, model, y), names, cfg.model.design_spec(degree)


def _params_dict(ng):
    return {
        "theta": ng.theta,
        "precision": ng.precision,
        "shape": ng.shape,
        "rate": ng.rate,
        "lambda": ng.lambda_known,
    }


def _correlation_kind(cfg):
    if cfg.model.kernel is not None:
        return "kernel"
    return "identity" if cfg.model.covariance is None else "matrix"


def run_fit(table, cfg, seed=0):
    """Posterior report as an ordered dict."""
    post, names, design = _fit(table, cfg)
    quantiles = cfg.quantiles
    marginals = []
    for name, dist in zip(names, coordinate_marginals(post)):
        mean, dof, scale, qs, _ = summarize(dist, quantiles, ref=0.0)
        marginals.append({
            "name": name,
            "center": mean,
            "scale": scale,
            "dof": None if math.isinf(dof) else dof,
            "quantiles": {f"{q:g}": v for q, v in zip(quantiles, qs)},
        })
    report = {
        "meta": {
            "command": "fit",
            "version": __version__,
            "generator": GENERATOR,
            "seed": seed,
            "config": cfg.source,
        },
        "n": post.model.n,
        "p": post.model.p,
        "design": design,
        "columns": names,
        "correlation": _correlation_kind(cfg),
        "prior": _params_dict(post.prior),
        "posterior": _params_dict(post.posterior),
        "s2_n": post.s2_n,
        "d2_n": post.d2_n,
        "log_evidence": post.log_evidence,
        "log_evidence_reduced": reduced_log_evidence(post),
        "marginals": marginals,
    }
    if post.lambda_known is None:
        g = lambda_marginal(post)
        report["lambda_marginal"] = {"shape": g.shape, "rate": g.rate, "mean": g.mean}
    return report


def run_evidence(table, cfgs, labels=None, seed=0):
    """Compare every (config, degree) model; returns the text table and the rows."""
    priors, models, names = [], [], []
    y = None
    for i, cfg in enumerate(cfgs):
        stem = Path(cfg.source).stem if labels is None else labels[i]
        yi = table[cfg.model.response]
        if y is not None and not np.array_equal(yi, y):
            raise ConfigError("all models must use the same response column")
        y = yi
        for d in cfg.model.degrees(1):
            model, _ = cfg.model_spec(table, d)
            priors.append(cfg.prior.build(model.p))
            models.append(model)
            names.append(f"{stem}:degree{d}")
    evidences, probs = compare_models(priors, models, y, labels=names)
    rows = [
        [e.label, str(e.p), fmt(e.log_f_y), fmt(e.log_z), fmt(pr)]
        for e, pr in zip(evidences, probs)
    ]
    head = header_line("evidence", seed, n=len(y), models=len(rows))
    cols = ["model", "p", "log_f_y", "log_z", "probability"]
    widths = [max(len(r[j]) for r in rows + [cols]) for j in range(len(cols))]
    lines = [head, "  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n", list(zip(evidences, probs))


def posterior_from_report(report):
    """Rebuild a posterior summary (without data) from a ``fit`` report."""
    try:
        pp = report["posterior"]
        ng = NormalGammaParams(
            np.asarray(pp["theta"], dtype=float),
            np.asarray(pp["precision"], dtype=float),
            pp["shape"],
            pp["rate"],
            pp["lambda"],
        )
        design = report["design"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"fit report is missing field {exc}") from None
    if report.get("correlation") == "kernel":
        raise ConfigError("kernel fits need the data for prediction; use the gp subcommand")
    return PosteriorSummary.from_posterior(ng, log_evidence=report.get("log_evidence", math.nan)), design


def _target_coords(targets, names):
    return [[targets[c][i] for c in names] for i in range(len(targets))]


def _predict_points(post, Xm, cross=None, tcov=None):
    dists, refs = [], []
    for i in range(Xm.shape[0]):
        v = None if cross is None else cross[:, i:i + 1]
        tc = [[1.0]] if tcov is None else [[tcov[i]]]
        tgt = PredictionTarget(Xm[i:i + 1], cross_cov=v, target_cov=tc)
        if post.lambda_known is None:
            dists.append(predict_t(post, tgt))
        else:
            dists.append(predict_known_lambda(post, tgt))
        refs.append(_prior_scale(post) * tc[0][0])
    return dists, refs


def run_predict(targets, cfg, seed=0, table=None, report=None):
    """Predictive table at the target rows, from data + config or from a fit report."""
    if report is not None:
        post, design = posterior_from_report(report)
        cross = tcov = None
    elif table is not None:
        post, _, design = _fit(table, cfg)
        cross = tcov = None
        if cfg.model.kernel is not None:
            k = cfg.model.kernel
            cross = covariance_matrix(k, table.matrix(cfg.model.x), targets.matrix(cfg.model.x))
            tcov = np.full(len(targets), 1.0 + k.nugget)
    else:
        raise ConfigError("predict needs --data or --fit")
    Xm, _ = design_matrix(design, targets)
    dists, refs = _predict_points(post, Xm, cross, tcov)
    coord_names = [c for c in targets.names if c != cfg.model.response]
    rows = _predictive_rows(dists, cfg.quantiles, refs, _target_coords(targets, coord_names))
    head = header_line("predict", seed, targets=len(targets))
    return format_csv(head, _predictive_names(coord_names, cfg.quantiles), rows)


def run_gp(table, cfg, seed=0, targets=None):
    """GP predictive table along the grid (or at the target rows)."""
    kernel = cfg.model.kernel
    if kernel is None:
        raise ConfigError("gp needs a [model.kernel] table")
    xs = cfg.model.x
    design = cfg.model.design_spec(_degree(cfg, 1))

    def regressors(locs):
        locs = np.atleast_2d(locs)
        sub = Table({c: locs[:, j] for j, c in enumerate(xs)}, xs)
        return design_matrix(design, sub)[0]

    data = GpDataset(table.matrix(xs), table[cfg.model.response], regressors)
    p = data.design.shape[1]
    fit = gp_fit(data, kernel, cfg.prior.build(p))
    if targets is not None:
        grid = targets.matrix(xs)
    else:
        grid = cfg.grid_points()
        if grid is None:
            raise ConfigError("gp needs --targets or a [grid] table")
        if len(xs) != 1:
            raise ConfigError("[grid] only supports one location column; use --targets")
    dists = gp_predict(fit, data, kernel, grid)
    refs = [_prior_scale(fit) * (1.0 + kernel.nugget)] * len(dists)
    rows = _predictive_rows(dists, cfg.quantiles, refs, grid.tolist())
    head = header_line(
        "gp", seed, kernel=kernel.family, lengthscale=fmt(kernel.lengthscale),
        nugget=fmt(kernel.nugget), log_evidence=fmt(fit.log_evidence),
    )
    return format_csv(head, _predictive_names(xs, cfg.quantiles), rows)


def _dlm_matrix(value, p, name):
    if value is None:
        return None
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(p)
    arr = np.atleast_2d(arr)
    if arr.shape != (p, p):
        raise ConfigError(f"[dlm] {name} has shape {arr.shape}, expected {p}x{p}")
    return arr


def run_dlm(table, cfg, seed=0):
    """Forecast-then-filter table, one row per observation."""
    if cfg.model.kernel is not None or cfg.model.covariance is not None:
        raise ConfigError("dlm observations are uncorrelated given the state; drop the covariance")
    degree = _degree(cfg, 0)
    Phi, names = design_matrix(cfg.model.design_spec(degree), table)
    p = Phi.shape[1]
    prior = cfg.prior.build(p)
    if prior.lambda_known is not None:
        raise ConfigError("dlm filtering learns lambda; remove prior.lambda")
    spec = DlmSpec(
        phi=lambda t: Phi[t - 1],
        G=_dlm_matrix(cfg.G, p, "G"),
        W=_dlm_matrix(cfg.W, p, "W"),
    )
    state = DlmState(0, prior.theta, prior.precision, prior.shape, prior.rate)
    steps = dlm_filter(spec, state, table[cfg.model.response])
    q = cfg.quantiles
    cols = ["t", "y", "forecast_mean", "forecast_dof", "forecast_scale",
            *(f"forecast_{_qname(v)}" for v in q), "forecast_logpdf",
            *(f"filtered_{nm}" for nm in names), "shape", "rate", "log_evidence"]
    rows = []
    for s in steps:
        mean, dof, scale, qs, _ = summarize(s.forecast, q, ref=0.0)
        rows.append([str(s.t), s.y, mean, dof, scale, *qs, s.log_forecast,
                     *s.filtered.mean, s.filtered.shape, s.filtered.rate, s.filtered.log_evidence])
    head = header_line("dlm", seed, steps=len(steps))
    return format_csv(head, cols, rows)


# ---------------------------------------------------------------------------
# argument handling


def _common(parser, data=True):
    if data:
        parser.add_argument("--data", help="input CSV with a header row")
    parser.add_argument("--config", action="append", help="TOML run configuration")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument("--seed", type=int, default=0, help="PRNG seed recorded in the output")
    parser.add_argument("--quantiles", help="comma-separated quantile levels, e.g. 0.05,0.5,0.95")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ngblm", description="Conjugate Normal-Gamma Bayesian linear models."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate y = 1 + sin(2 pi x) + sigma e")
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    _common(sub.add_parser("fit", help="posterior report (JSON)"))
    _common(sub.add_parser("evidence", help="model evidence and posterior model probabilities"))
    p = sub.add_parser("predict", help="posterior predictive at target rows (CSV)")
    _common(p)
    p.add_argument("--targets", required=True, help="CSV of target covariates")
    p.add_argument("--fit", help="fit report (JSON) to predict from instead of --data")
    p = sub.add_parser("gp", help="Gaussian-process predictive along a grid (CSV)")
    _common(p)
    p.add_argument("--targets", help="CSV of prediction locations (overrides [grid])")
    _common(sub.add_parser("dlm", help="dynamic linear model filtering (CSV)"))
    return parser


def _config(args, single=True):
    paths = args.config or [None]
    if single and len(paths) > 1:
        raise ConfigError(f"{args.command} takes one --config")
    cfgs = [load_config(p) for p in paths]
    if args.quantiles:
        qs = parse_quantiles(q for q in args.quantiles.split(",") if q.strip())
        for c in cfgs:
            c.quantiles = qs
    return cfgs


def _data(args):
    if not args.data:
        raise ConfigError(f"{args.command} needs --data")
    return read_csv(args.data)


def _emit(text, path):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def dispatch(args):
    cmd = args.command
    if cmd == "simulate":
        return run_simulate(args.n, args.sigma, args.seed), args.out
    if cmd == "evidence":
        cfgs = _config(args, single=False)
        text, _ = run_evidence(_data(args), cfgs, seed=args.seed)
        return text, args.out or cfgs[0].out
    cfg = _config(args)[0]
    out = args.out or cfg.out
    if cmd == "fit":
        return format_json(run_fit(_data(args), cfg, seed=args.seed)), out
    if cmd == "predict":
        targets = read_csv(args.targets)
        if args.fit:
            with open(args.fit, encoding="utf-8") as fh:
                try:
                    report = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"{args.fit}: {exc.msg}", exc.lineno) from None
            return run_predict(targets, cfg, seed=args.seed, report=report), out
        return run_predict(targets, cfg, seed=args.seed, table=_data(args)), out
    if cmd == "gp":
        targets = read_csv(args.targets) if args.targets else None
        return run_gp(_data(args), cfg, seed=args.seed, targets=targets), out
    if cmd == "dlm":
        return run_dlm(_data(args), cfg, seed=args.seed), out
    raise ConfigError(f"unknown command {cmd}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text, out = dispatch(args)
        _emit(text, out)
    except NotPositiveDefinite as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: check the covariance matrix, add a kernel nugget, or use a more "
              "informative prior precision A0", file=sys.stderr)
        return 3
    except (SingularDesign, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
