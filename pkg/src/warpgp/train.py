"""Gradient-based fitting of plain and warped GP models.

Both fits maximize a penalized log marginal likelihood (vague log-normal
hyperpriors on all kernel hyperparameters; for the warped model additionally
the stretch-factor prior) with L-BFGS over log-domain parameters, with
deterministic seeded restarts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from . import gp, kernels, warp
from .data import TimeSeries
from .errors import AllRestartsFailed, DataError, WarpGPError

log = logging.getLogger("warpgp")

_BAD = 1e25  # objective value reported to the optimizer on numerical failure


@dataclass(frozen=True)
class FitConfig:
    max_iter: int = 1000
    grad_tol: float = 1e-5
    restarts: int = 1
    restart_seed: int = 0
    sigma_d: float = 1.0
    hyperprior_scale: float = 3.0
    init_strategy: str = "heuristic"  # or "expression"

    def __post_init__(self):
        if self.max_iter < 1 or self.restarts < 1:
            raise WarpGPError("max_iter and restarts must be >= 1")
        if not (self.grad_tol > 0 and self.sigma_d > 0 and self.hyperprior_scale > 0):
            raise WarpGPError("tolerances and prior scales must be positive")
        if self.init_strategy not in ("heuristic", "expression"):
            raise WarpGPError(f"unknown init strategy {self.init_strategy!r}")

    def to_file(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for key, value in vars(self).items():
                fh.write(f"{key} = {value}\n")

    @classmethod
    def from_file(cls, path):
        kw = {}
        fields = {f: t for f, t in cls.__annotations__.items()}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DataError(f"{path}: malformed config line {line!r}")
                key, value = (s.strip() for s in line.split("=", 1))
                if key not in fields:
                    raise DataError(f"{path}: unknown config key {key!r}")
                typ = {"int": int, "float": float, "str": str}[fields[key]]
                kw[key] = typ(value)
        return cls(**kw)


@dataclass(frozen=True)
class TrainedModel:
    """Fitted model: kernel, hyperparameters, warp, data snapshot, diagnostics."""

    kernel: kernels.Kernel
    kernel_expr: str
    variant: str  # gp | wgp | wgp-seasonal
    theta: kernels.HyperVector
    warp_state: warp.WarpState | None
    series: TimeSeries
    sigma_d: float
    objective: float
    converged: bool
    jitter: float

    @property
    def seasonal(self):
        return self.variant == "wgp-seasonal"


def hyperprior_logpdf(theta, scale):
    """Independent zero-mean normal log-density on log-domain parameters."""
    v = theta.log_values if isinstance(theta, kernels.HyperVector) else np.asarray(theta, float)
    m = v.size
    value = float(-0.5 * np.sum((v / scale) ** 2) - m * (math.log(scale) + 0.5 * warp.LOG_2PI))
    grad = -v / scale**2
    return value, grad


def _param_kinds(k):
    """Classify every flat hyperparameter for the init heuristic."""
    kinds = []

    def visit(node):
        t = type(node)
        if t in (kernels.Sum, kernels.Product):
            for c in node.children:
                visit(c)
        elif t is kernels.Scale:
            kinds.append("scale")
            visit(node.child)
        elif t is kernels.Constant:
            kinds.append("scale")
        elif t is kernels.Noise:
            kinds.append("noise")
        elif t is kernels.Periodic:
            kinds.extend(["period", "periodic_length"])
        else:
            kinds.append("length")

    visit(k)
    return kinds


def _initial_theta(k, series, config):
    theta0 = kernels.hyper_vector(k)
    if config.init_strategy == "expression":
        return theta0
    span = float(series.x[-1] - series.x[0])
    out_var = float(np.var(series.f))
    kinds = _param_kinds(k)
    # split the output variance across additive signal components
    n_scales = max(kinds.count("scale"), 1)
    values = theta0.values.copy()
    for j, kind in enumerate(kinds):
        if kind == "length":
            values[j] = 0.25 * span
        elif kind == "scale":
            values[j] = max(out_var / n_scales, 1e-12)
        elif kind == "noise":
            values[j] = max(1e-2 * out_var, 1e-12)
        # period and periodic_length keep their expression values
    return theta0.replace_log(np.log(values))


def _restart_theta(theta0, restart, seed):
    if restart == 0:
        return theta0.log_values.copy()
    rng = np.random.default_rng(np.random.SeedSequence((seed, restart)))
    return theta0.log_values + rng.standard_normal(len(theta0))


def _optimize(fun, z0, config):
    """Minimize the wrapped negative objective; ignore numerical failures."""
    res = minimize(
        fun,
        z0,
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": config.max_iter,
            "maxcor": 10,
            "ftol": 1e-13,
            "gtol": config.grad_tol,
        },
    )
    return res


def _fit(series, k, config, *, warped, seasonal=False, kernel_expr=None):
    if len(series) < 2:
        raise DataError("fitting needs at least 2 observations")
    x, f = series.x, series.f
    m = kernels.n_params(k)
    n_lam = (x.size - 1) if warped else 0
    prior = warp.WarpPrior(config.sigma_d)
    expr = kernel_expr if kernel_expr is not None else kernels.kernel_to_string(k)

    def objective(z):
        theta_log = z[:m]
        try:
            with np.errstate(all="ignore"):
                return _objective_inner(z, theta_log)
        except (WarpGPError, FloatingPointError, OverflowError, np.linalg.LinAlgError):
            return _BAD, np.zeros_like(z)

    def _objective_inner(z, theta_log):
        hp, hp_grad = hyperprior_logpdf(theta_log, config.hyperprior_scale)
        if warped:
            log_lam = z[m:]
            value, d_theta, d_lam = warp.wgp_objective(
                x, f, log_lam, k, theta_log, prior, original=seasonal
            )
            grad = np.concatenate([d_theta + hp_grad, d_lam])
        else:
            value, d_theta, _ = gp.grad_log_marginal(x, f, k, theta_log)
            grad = d_theta + hp_grad
        value += hp
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            return _BAD, np.zeros_like(z)
        return -value, -grad

    theta0 = _initial_theta(k, series, config)
    best = None
    for restart in range(config.restarts):
        z0 = np.concatenate(
            [_restart_theta(theta0, restart, config.restart_seed), np.zeros(n_lam)]
        )
        res = _optimize(objective, z0, config)
        value, grad = objective(res.x)
        if value >= _BAD:
            log.debug("restart %d failed numerically", restart)
            continue
        if best is None or value < best[0]:
            best = (value, res.x, grad)
    if best is None:
        raise AllRestartsFailed(
            f"all {config.restarts} restart(s) ended in numerical failure"
        )

    neg_value, z, neg_grad = best
    theta = kernels.HyperVector(kernels.hyper_vector(k).names, z[:m])
    warp_state = warp.WarpState(x, z[m:]) if warped else None
    converged = bool(np.max(np.abs(neg_grad), initial=0.0) <= config.grad_tol)
    X = _model_inputs(x, warp_state, seasonal)
    jitter = gp.factorize(gp.build_cov(X, k, theta.log_values)).jitter
    variant = ("wgp-seasonal" if seasonal else "wgp") if warped else "gp"
    return TrainedModel(
        kernel=k,
        kernel_expr=expr,
        variant=variant,
        theta=theta,
        warp_state=warp_state,
        series=series,
        sigma_d=config.sigma_d,
        objective=-neg_value,
        converged=converged,
        jitter=jitter,
    )


def _model_inputs(x, warp_state, seasonal):
    if warp_state is None:
        return x
    xw = warp_state.warped
    return warp.combine_inputs(xw, x) if seasonal else xw


def fit_gp(series, k, config):
    """Fit a plain GP by penalized maximum marginal likelihood."""
    return _fit(series, k, config, warped=False)


def fit_wgp(series, k, config, *, seasonal=False, kernel_expr=None):
    """Jointly fit hyperparameters and per-gap stretch factors."""
    return _fit(
        series, k, config, warped=True, seasonal=seasonal, kernel_expr=kernel_expr
    )


def evaluate_objective(model, hyperprior_scale):
    """Training objective at the stored parameters (for diagnostics/tests)."""
    x, f = model.series.x, model.series.f
    hp, _ = hyperprior_logpdf(model.theta.log_values, hyperprior_scale)
    if model.warp_state is None:
        return gp.log_marginal(x, f, model.kernel, model.theta.log_values) + hp
    value, _, _ = warp.wgp_objective(
        x,
        f,
        model.warp_state.log_lambda,
        model.kernel,
        model.theta.log_values,
        warp.WarpPrior(model.sigma_d),
        original=model.seasonal,
    )
    return value + hp


def predict(model, x_query):
    """Posterior predictive at future inputs (model/standardized units)."""
    x_query = np.atleast_1d(np.asarray(x_query, dtype=float))
    x, f = model.series.x, model.series.f
    X = _model_inputs(x, model.warp_state, model.seasonal)
    if model.warp_state is None:
        Q = x_query
    else:
        xw_query = warp.extrapolate_warp(x, model.warp_state.warped, x_query)
        Q = (
            warp.combine_inputs(xw_query, x_query)
            if model.seasonal
            else xw_query
        )
    return gp.posterior(X, f, Q, model.kernel, model.theta.log_values)


# ---------------------------------------------------------------------------
# model file format (versioned plain text, one key per line)

_MODEL_MAGIC = "warpgp-model v1"


def _fmt_array(a):
    return " ".join(repr(float(v)) for v in np.asarray(a, dtype=float))


def _parse_array(s):
    s = s.strip()
    return np.array([float(t) for t in s.split()]) if s else np.zeros(0)


def save_model(model, path):
    """Serialize a TrainedModel to a diff-able text file."""
    lines = [_MODEL_MAGIC]
    lines.append(f"variant = {model.variant}")
    lines.append(f"kernel = {model.kernel_expr}")
    for name, lv in zip(model.theta.names, model.theta.log_values):
        lines.append(f"# theta {name} = {math.exp(lv):.9g}")
    lines.append(f"theta_log = {_fmt_array(model.theta.log_values)}")
    if model.warp_state is not None:
        lines.append(f"log_lambda = {_fmt_array(model.warp_state.log_lambda)}")
    lines.append(f"sigma_d = {float(model.sigma_d)!r}")
    lines.append(f"objective = {float(model.objective)!r}")
    lines.append(f"converged = {model.converged}")
    lines.append(f"jitter = {float(model.jitter)!r}")
    rec = model.series.standardization
    if rec is not None:
        lines.append(
            "standardization = "
            f"{float(rec.out_mean)!r} {float(rec.out_scale)!r} "
            f"{float(rec.in_offset)!r} {float(rec.in_scale)!r}"
        )
    lines.append(f"train_x = {_fmt_array(model.series.x)}")
    lines.append(f"train_f = {_fmt_array(model.series.f)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    """Load a TrainedModel written by save_model."""
    from .data import Standardization  # local import to avoid cycle at top

    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise DataError(f"cannot read model file {path}: {e}") from e
    if not lines or lines[0].strip() != _MODEL_MAGIC:
        raise DataError(f"{path}: not a {_MODEL_MAGIC!r} file")
    kv = {}
    for line in lines[1:]:
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    try:
        k = kernels.parse_kernel(kv["kernel"])
        theta = kernels.HyperVector(
            kernels.hyper_vector(k).names, _parse_array(kv["theta_log"])
        )
        x = _parse_array(kv["train_x"])
        f = _parse_array(kv["train_f"])
        rec = None
        if "standardization" in kv:
            rec = Standardization(*(float(t) for t in kv["standardization"].split()))
        series = TimeSeries(x, f, rec)
        variant = kv["variant"]
        warp_state = None
        if variant != "gp":
            warp_state = warp.WarpState(x, _parse_array(kv.get("log_lambda", "")))
        return TrainedModel(
            kernel=k,
            kernel_expr=kv["kernel"],
            variant=variant,
            theta=theta,
            warp_state=warp_state,
            series=series,
            sigma_d=float(kv.get("sigma_d", 1.0)),
            objective=float(kv["objective"]),
            converged=kv["converged"] == "True",
            jitter=float(kv["jitter"]),
        )
    except (KeyError, ValueError) as e:
        raise DataError(f"{path}: malformed model file ({e})") from e
