"""Shared helpers: finite differences, error metrics, random kernel trees."""

import numpy as np
import pytest

from warpgp import kernels


def central_diff(fun, z, eps=1e-5):
    """Central finite-difference gradient of a scalar function."""
    z = np.asarray(z, dtype=float)
    g = np.zeros_like(z)
    for j in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp[j] += eps
        zm[j] -= eps
        g[j] = (fun(zp) - fun(zm)) / (2.0 * eps)
    return g


def max_rel_err(a, b, floor=1e-6):
    """Worst-case elementwise relative error with an absolute floor."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def random_kernel(rng, two_channel=False):
    """A random small kernel tree with randomized hyperparameters."""
    leaves = [
        kernels.RBF(rng.uniform(0.5, 3.0)),
        kernels.Matern32(rng.uniform(0.5, 3.0)),
        kernels.Matern52(rng.uniform(0.5, 3.0)),
        kernels.Periodic(rng.uniform(1.0, 4.0), rng.uniform(0.5, 2.0)),
    ]
    if two_channel:
        leaves.append(
            kernels.Periodic(
                rng.uniform(1.0, 4.0), rng.uniform(0.5, 2.0),
                channel=kernels.ORIGINAL,
            )
        )
    picks = rng.choice(len(leaves), size=2, replace=False)
    a, b = leaves[picks[0]], leaves[picks[1]]
    form = rng.integers(3)
    if form == 0:
        k = kernels.Scale(rng.uniform(0.5, 2.0), a) + kernels.Scale(
            rng.uniform(0.5, 2.0), b
        )
    elif form == 1:
        k = kernels.Product((a, b))
    else:
        k = kernels.Scale(rng.uniform(0.5, 2.0), a)
    return k + kernels.Noise(rng.uniform(0.01, 0.1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240824)
