"""Input warping: stretch factors on gaps between adjacent observations.

The warp is parameterized by one log stretch factor per gap.  Warped inputs
follow the recurrence  xw[0] = x[0],  xw[i] = xw[i-1] + lam[i-1]*(x[i]-x[i-1]),
which keeps them strictly increasing for any finite log stretches.  Training
maximizes the GP log marginal likelihood on the warped inputs plus the
log-density of the stretches under a prior centered at no-warp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gp, kernels
from .errors import WarpGPError

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class WarpState:
    """Per-gap log stretch factors and the warped inputs they induce."""

    x: np.ndarray
    log_lambda: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(
            self, "log_lambda", np.asarray(self.log_lambda, dtype=float)
        )

    @property
    def warped(self):
        return warp_inputs(self.x, self.log_lambda)

    @classmethod
    def identity(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x, np.zeros(max(x.size - 1, 0)))


@dataclass(frozen=True)
class WarpPrior:
    """Log-normal prior on stretch factors, median 1 (no warp)."""

    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise WarpGPError("warp prior scale must be positive")

    def log_pdf(self, log_lam):
        """Sum of log-normal log-densities of lambda = exp(log_lam)."""
        log_lam = np.asarray(log_lam, dtype=float)
        s = self.sigma
        return float(
            np.sum(
                -log_lam
                - math.log(s)
                - 0.5 * LOG_2PI
                - 0.5 * (log_lam / s) ** 2
            )
        )

    def grad_log_pdf(self, log_lam):
        log_lam = np.asarray(log_lam, dtype=float)
        return -1.0 - log_lam / self.sigma**2


def _check_increasing(x):
    if x.size >= 2 and not np.all(np.diff(x) > 0.0):
        raise WarpGPError("inputs must be strictly increasing")


def warp_inputs(x, log_lam):
    """Apply the gap-stretch recurrence to strictly increasing inputs."""
    x = np.asarray(x, dtype=float)
    log_lam = np.asarray(log_lam, dtype=float)
    if log_lam.size != max(x.size - 1, 0):
        raise WarpGPError(
            f"need {x.size - 1} log stretches for {x.size} inputs, got {log_lam.size}"
        )
    _check_increasing(x)
    if x.size == 0:
        return x.copy()
    gaps = np.exp(log_lam) * np.diff(x)
    return np.concatenate(([x[0]], x[0] + np.cumsum(gaps)))


def warp_log_prior(log_lam, prior):
    """Log-density of the stretch factors under the warp prior."""
    log_lam = np.asarray(log_lam, dtype=float)
    if not np.all(np.isfinite(log_lam)):
        raise WarpGPError("log stretches must be finite")
    return prior.log_pdf(log_lam)


def wgp_objective(x, f, log_lam, k, theta, prior, *, original=None):
    """Warped-GP training objective and its gradient.

    Returns (value, d/d(log theta), d/d(log lambda)).  ``original=True``
    evaluates the kernel on two-channel (warped, original) inputs for
    seasonal models.
    """
    x = np.asarray(x, dtype=float)
    xw = warp_inputs(x, log_lam)
    X = (xw, x) if original else xw
    value, d_theta, d_xw = gp.grad_log_marginal(X, f, k, theta)
    # chain rule through the cumulative recurrence: gap i moves every
    # warped input after it by lambda_i * (x[i+1] - x[i])
    lam_gap = np.exp(log_lam) * np.diff(x)
    tail = np.cumsum(d_xw[::-1])[::-1]
    d_log_lam = lam_gap * tail[1:]
    value += warp_log_prior(log_lam, prior)
    d_log_lam = d_log_lam + prior.grad_log_pdf(log_lam)
    return value, d_theta, d_log_lam


def extrapolate_warp(x, xw, x_query):
    """Warped image of future query inputs, reusing the last stretch factor."""
    x = np.asarray(x, dtype=float)
    xw = np.asarray(xw, dtype=float)
    x_query = np.atleast_1d(np.asarray(x_query, dtype=float))
    if x.size != xw.size:
        raise WarpGPError("x and warped x differ in length")
    if np.any(x_query <= x[-1]):
        raise WarpGPError("query inputs must lie strictly after the last observation")
    if x.size < 2:
        lam = 1.0  # degenerate single-point warp
    else:
        lam = (xw[-1] - xw[-2]) / (x[-1] - x[-2])
    return xw[-1] + lam * (x_query - x[-1])


def combine_inputs(xw, x):
    """Pair warped and original coordinates into two-channel points."""
    xw = np.atleast_1d(np.asarray(xw, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if xw.size != x.size:
        raise WarpGPError("warped and original inputs differ in length")
    return (xw, x)
