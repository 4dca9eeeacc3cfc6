"""Exact Gaussian-process machinery.

Covariance assembly, Cholesky factorization with an escalating jitter ladder,
zero-mean log marginal likelihood with gradients (hyperparameters and warped
input coordinates), posterior prediction, and seeded prior sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from . import kernels
from .errors import NotPositiveDefinite

LOG_2PI = math.log(2.0 * math.pi)

# relative jitter levels tried in order until Cholesky succeeds
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)


@dataclass(frozen=True)
class GramFactor:
    """Lower Cholesky factor of a (possibly jittered) covariance matrix."""

    lower: np.ndarray
    jitter: float
    log_det: float

    def solve(self, b):
        """(Sigma + jitter I)^-1 b via the factor."""
        return cho_solve((self.lower, True), b)


@dataclass(frozen=True)
class PredictiveDistribution:
    """Independent Gaussian predictive marginals at query inputs."""

    inputs: np.ndarray
    mean: np.ndarray
    variance: np.ndarray

    def __len__(self):
        return self.mean.size


def build_cov(X, k, theta):
    """Training covariance matrix; Noise leaves act on the diagonal."""
    return kernels.gram(k, X, X, theta, same_index=True)


def factorize(S):
    """Cholesky of S + jitter*I, escalating jitter until it succeeds."""
    S = np.asarray(S, dtype=float)
    scale = float(np.mean(np.diag(S)))
    if not np.isfinite(scale):
        raise NotPositiveDefinite("covariance diagonal is not finite")
    for level in JITTER_LADDER:
        jitter = level * abs(scale)
        try:
            L = cholesky(S + jitter * np.eye(S.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            continue
        except Exception:
            continue
        log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
        return GramFactor(L, jitter, log_det)
    raise NotPositiveDefinite(
        f"Cholesky failed at all jitter levels up to {JITTER_LADDER[-1]:g}*mean(diag)"
    )


def log_marginal(X, f, k, theta):
    """Zero-mean Gaussian log marginal likelihood of outputs f at inputs X."""
    f = np.asarray(f, dtype=float)
    fac = factorize(build_cov(X, k, theta))
    alpha = fac.solve(f)
    n = f.size
    return float(-0.5 * fac.log_det - 0.5 * f @ alpha - 0.5 * n * LOG_2PI)


def grad_log_marginal(X, f, k, theta):
    """Gradient of the log marginal likelihood.

    Returns (value, d/d(log theta), d/d(warped input coordinates)).
    """
    f = np.asarray(f, dtype=float)
    K, H, G = kernels.gram_with_grads(k, X, X, theta, same_index=True)
    fac = factorize(K)
    alpha = fac.solve(f)
    n = f.size
    value = float(-0.5 * fac.log_det - 0.5 * f @ alpha - 0.5 * n * LOG_2PI)

    Sinv = cho_solve((fac.lower, True), np.eye(n))
    W = 0.5 * (np.outer(alpha, alpha) - Sinv)
    d_theta = np.einsum("ij,kij->k", W, H)

    # dSigma_ij/dx_p touches row p and (by symmetry) column p; diagonal
    # entries of stationary kernels do not depend on the input
    Gz = G.copy()
    np.fill_diagonal(Gz, 0.0)
    d_x = 2.0 * np.sum(W * Gz, axis=1)
    return value, d_theta, d_x


def posterior(X, f, Xq, k, theta):
    """Posterior predictive of noisy observations at query inputs Xq.

    Noise leaves are excluded from cross- and query-covariances; the fitted
    noise variance is added back to the predictive variance so that the
    distribution scores observations rather than latent values.
    """
    f = np.asarray(f, dtype=float)
    fac = factorize(build_cov(X, k, theta))
    alpha = fac.solve(f)
    Kcross = kernels.gram(k, X, Xq, theta)
    mean = Kcross.T @ alpha

    V = solve_triangular(fac.lower, Kcross, lower=True)
    latent_prior = np.diag(kernels.gram(k, Xq, Xq, theta)).copy()
    latent = latent_prior - np.sum(V * V, axis=0)
    np.maximum(latent, 0.0, out=latent)
    noise = kernels.noise_variances(k, Xq, theta)
    qw, _ = kernels.as_channels(Xq)
    return PredictiveDistribution(qw, mean, latent + noise)


def sample_prior(X, k, theta, seed):
    """Draw one function sample from the GP prior at inputs X."""
    fac = factorize(build_cov(X, k, theta))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(fac.lower.shape[0])
    return fac.lower @ z
