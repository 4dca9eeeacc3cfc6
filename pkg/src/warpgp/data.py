"""Time-series ingestion, standardization, splitting, and synthetic data.

The synthetic generator emulates non-stationarity by sampling log gap sizes
from a smooth GP, drawing the trend on the resulting stretched grid, and
reporting observations back on the equidistant grid.  A seasonal component,
when enabled, is drawn on the equidistant grid so its period stays fixed.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import gp, kernels
from .errors import DataError

log = logging.getLogger("warpgp")


@dataclass(frozen=True)
class Standardization:
    """Affine transforms applied to a series (kept for inversion)."""

    out_mean: float
    out_scale: float
    in_offset: float
    in_scale: float


@dataclass(frozen=True)
class TimeSeries:
    """Ordered (input, output) observations with strictly increasing inputs."""

    x: np.ndarray
    f: np.ndarray
    standardization: Standardization | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if x.size != f.size:
            raise DataError("inputs and outputs differ in length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(f))):
            raise DataError("series contains non-finite values")
        if x.size >= 2 and not np.all(np.diff(x) > 0.0):
            raise DataError("inputs must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "f", f)

    def __len__(self):
        return self.x.size


def load_csv(path, input_col=0, output_col=1, delimiter=","):
    """Read a (time, value) series from a headered CSV file.

    Columns may be given by header name or zero-based index.  Rows are sorted
    by input; exact duplicate inputs are nudged apart deterministically.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip().strip('"') for h in header]

        def col_index(col):
            if isinstance(col, int):
                if col >= len(header):
                    raise DataError(
                        f"{path}: column index {col} out of range ({len(header)} columns)"
                    )
                return col
            try:
                return header.index(col)
            except ValueError:
                raise DataError(
                    f"{path}: no column named {col!r} in header {header}"
                ) from None

        ci, co = col_index(input_col), col_index(output_col)
        xs, fs = [], []
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            for cidx, dest in ((ci, xs), (co, fs)):
                cell = row[cidx].strip() if cidx < len(row) else ""
                try:
                    dest.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric value {cell!r} at row {rownum}, "
                        f"column {header[cidx]!r}"
                    ) from None

    if len(xs) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(xs)}")
    x = np.array(xs)
    f = np.array(fs)
    order = np.argsort(x, kind="stable")
    x, f = x[order], f[order]

    span = float(x[-1] - x[0]) or 1.0
    bumped = 0
    for i in range(1, x.size):
        if x[i] <= x[i - 1]:
            bumped += 1
            x[i] = x[i - 1] + 1e-9 * span
    if bumped:
        log.info("%s: perturbed %d duplicate input(s) by ~1e-9*range", path, bumped)
    return TimeSeries(x, f)


def standardize(series):
    """Map outputs to mean 0 / sd 1 and inputs onto [0, n-1].

    Relative input spacings are preserved; the transform is recorded on the
    returned series so predictions can be mapped back to original units.
    """
    n = len(series)
    if n < 2:
        raise DataError("standardize needs at least 2 points")
    mean = float(np.mean(series.f))
    scale = float(np.std(series.f))
    if scale == 0.0:
        raise DataError("outputs have zero variance")
    in_offset = float(series.x[0])
    in_scale = float(series.x[-1] - series.x[0]) / (n - 1)
    rec = Standardization(mean, scale, in_offset, in_scale)
    return TimeSeries(
        (series.x - in_offset) / in_scale, (series.f - mean) / scale, rec
    )


def apply_standardization(x, rec):
    """Map raw inputs into the standardized input coordinate."""
    return (np.asarray(x, dtype=float) - rec.in_offset) / rec.in_scale


def destandardize_inputs(x, rec):
    return np.asarray(x, dtype=float) * rec.in_scale + rec.in_offset


def destandardize_outputs(f, rec):
    return np.asarray(f, dtype=float) * rec.out_scale + rec.out_mean


def destandardize_variance(v, rec):
    return np.asarray(v, dtype=float) * rec.out_scale**2


def split_forecast(series, holdout):
    """Suffix split: the final ceil(holdout*n) points become the test set."""
    if not 0.0 < holdout < 1.0:
        raise DataError("holdout fraction must be in (0, 1)")
    n = len(series)
    n_test = math.ceil(holdout * n)
    n_train = n - n_test
    if n_train < 1 or n_test < 1:
        raise DataError(f"degenerate split: {n_train} train / {n_test} test")
    return (
        TimeSeries(series.x[:n_train], series.f[:n_train]),
        TimeSeries(series.x[n_train:], series.f[n_train:]),
    )


# ---------------------------------------------------------------------------
# synthetic generation


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the non-stationary synthetic series generator."""

    instances: int = 100
    points: int = 100
    trend_kernel: str = "matern52"  # or "matern52+periodic"
    trend_length_scale_frac: float = 0.1
    warp_length_scale_frac: float = 0.1
    warp_amplitude: float = 1.0
    period: float = 10.0
    periodic_length_scale: float = 1.0
    periodic_amplitude: float = 0.5
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.points < 10:
            raise DataError("synthetic instances need at least 10 points")
        if self.trend_kernel not in ("matern52", "matern52+periodic"):
            raise DataError(f"unknown trend kernel {self.trend_kernel!r}")
        for name in (
            "trend_length_scale_frac",
            "warp_length_scale_frac",
            "warp_amplitude",
            "period",
            "periodic_length_scale",
            "periodic_amplitude",
            "noise_sigma",
        ):
            if not getattr(self, name) > 0.0:
                raise DataError(f"{name} must be positive")

    def to_dict(self):
        return {
            "instances": self.instances,
            "points": self.points,
            "trend_kernel": self.trend_kernel,
            "trend_length_scale_frac": self.trend_length_scale_frac,
            "warp_length_scale_frac": self.warp_length_scale_frac,
            "warp_amplitude": self.warp_amplitude,
            "period": self.period,
            "periodic_length_scale": self.periodic_length_scale,
            "periodic_amplitude": self.periodic_amplitude,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }


def _seed_for(config, index, stream):
    # independent substreams so seasonal/non-seasonal twins share draws
    return np.random.SeedSequence((config.seed, index, stream))


def synth_warp_profile(config, index):
    """Sampled log gap sizes g and the stretched grid the trend lives on."""
    n = config.points
    x = np.arange(n, dtype=float)
    span = float(n - 1)
    warp_kernel = kernels.Scale(
        config.warp_amplitude**2,
        kernels.RBF(config.warp_length_scale_frac * span),
    )
    theta = kernels.hyper_vector(warp_kernel)
    g = gp.sample_prior(x, warp_kernel, theta, _seed_for(config, index, 0))
    gaps = np.exp(g[1:])
    grid = np.concatenate(([0.0], np.cumsum(gaps)))
    # rescale so the stretched grid spans the same range as the uniform one
    grid *= span / grid[-1]
    return x, g, grid


def synth_instance(config, index):
    """Generate one synthetic series, deterministic in (config.seed, index)."""
    x, _, grid = synth_warp_profile(config, index)
    span = float(config.points - 1)

    trend_kernel = kernels.Matern52(config.trend_length_scale_frac * span)
    theta_t = kernels.hyper_vector(trend_kernel)
    f = gp.sample_prior(grid, trend_kernel, theta_t, _seed_for(config, index, 1))

    if config.trend_kernel == "matern52+periodic":
        per = kernels.Scale(
            config.periodic_amplitude**2,
            kernels.Periodic(config.period, config.periodic_length_scale),
        )
        theta_p = kernels.hyper_vector(per)
        f = f + gp.sample_prior(x, per, theta_p, _seed_for(config, index, 2))

    rng = np.random.default_rng(_seed_for(config, index, 3))
    f = f + config.noise_sigma * rng.standard_normal(x.size)
    return TimeSeries(x, f)


def write_csv(series, path):
    """Write a series as a two-column (input, output) CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["input", "output"])
        for xi, fi in zip(series.x, series.f):
            w.writerow([f"{xi:.17g}", f"{fi:.17g}"])
