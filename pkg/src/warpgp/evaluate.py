"""NLPD scoring and the comparative experiment harness.

Each benchmark run fits the requested model variants on every series
instance, scores the forecast suffix with negative log predictive density,
and aggregates mean +/- standard error across instances.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels, train
from .data import TimeSeries, split_forecast, standardize, apply_standardization
from .errors import DataError, WarpGPError

log = logging.getLogger("warpgp")

VARIANTS = ("gp", "wgp", "wgp-seasonal")


def nlpd(pred, actual):
    """Mean negative log Gaussian predictive density of held-out outputs."""
    actual = np.asarray(actual, dtype=float)
    if len(pred) != actual.size:
        raise DataError("prediction and actual lengths differ")
    var = np.asarray(pred.variance, dtype=float)
    if np.any(var <= 0.0):
        raise WarpGPError("non-positive predictive variance")
    z = (actual - pred.mean) ** 2 / var
    return float(np.mean(0.5 * (np.log(2.0 * math.pi * var) + z)))


def evaluate_variant(series, variant, kernel_spec, config, holdout=0.2):
    """Split, fit, forecast and score one model variant on one series.

    ``kernel_spec`` is a kernel expression string or tree; NLPD is computed
    in standardized output units.
    """
    if variant not in VARIANTS:
        raise WarpGPError(f"unknown variant {variant!r} (expected one of {VARIANTS})")
    k = (
        kernels.parse_kernel(kernel_spec)
        if isinstance(kernel_spec, str)
        else kernel_spec
    )
    train_raw, test_raw = split_forecast(series, holdout)
    train_std = standardize(train_raw)
    rec = train_std.standardization
    xq = apply_standardization(test_raw.x, rec)
    fq = (test_raw.f - rec.out_mean) / rec.out_scale

    if variant == "gp":
        model = train.fit_gp(train_std, k, config)
    else:
        model = train.fit_wgp(
            train_std, k, config, seasonal=(variant == "wgp-seasonal")
        )
    pred = train.predict(model, xq)
    return nlpd(pred, fq)


@dataclass(frozen=True)
class VariantResult:
    name: str
    scores: tuple  # (instance, nlpd) pairs for successful fits
    failures: tuple = ()  # instance indices that failed

    @property
    def values(self):
        return np.array([v for _, v in self.scores], dtype=float)

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def stderr(self):
        v = self.values
        if v.size < 2:
            return 0.0
        return float(np.std(v, ddof=1) / math.sqrt(v.size))


@dataclass(frozen=True)
class ExperimentReport:
    dataset: str
    results: tuple  # VariantResult per variant, in run order
    config: dict = field(default_factory=dict)

    def by_name(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)


def run_benchmark(instances, variants, kernel_specs, config, *,
                  dataset="dataset", holdout=0.2, external=None):
    """Fit and score every variant on every instance.

    ``instances`` is a sequence of TimeSeries; ``kernel_specs`` maps variant
    name to its kernel expression.  ``external`` optionally maps extra column
    names to per-instance NLPD vectors merged into the report unchanged.
    """
    instances = list(instances)
    if not instances:
        raise DataError("benchmark needs at least one instance")
    results = []
    for variant in variants:
        scores = []
        failures = []
        spec = kernel_specs[variant]
        for i, series in enumerate(instances):
            cfg = replace(config, restart_seed=config.restart_seed + i)
            try:
                scores.append((i, evaluate_variant(series, variant, spec, cfg, holdout)))
            except WarpGPError as e:
                log.warning("%s instance %d failed: %s", variant, i, e)
                failures.append(i)
        if not scores:
            raise WarpGPError(f"all instances failed for variant {variant!r}")
        results.append(VariantResult(variant, tuple(scores), tuple(failures)))
    for name, values in (external or {}).items():
        results.append(
            VariantResult(name, tuple(enumerate(np.asarray(values, dtype=float))))
        )
    return ExperimentReport(dataset, tuple(results))


# ---------------------------------------------------------------------------
# report serialization


def format_table(report):
    """Human-readable aligned comparison table (mean +/- stderr)."""
    header = ["dataset"] + [r.name for r in report.results]
    cells = [report.dataset]
    for r in report.results:
        if len(r.scores) > 1:
            cells.append(f"{r.mean:.4f}±{r.stderr:.4f}")
        else:
            cells.append(f"{r.mean:.4f}")
        if r.failures:
            cells[-1] += f" ({len(r.failures)} failed)"
    widths = [max(len(h), len(c)) for h, c in zip(header, cells)]
    line1 = "  ".join(h.rjust(w) for h, w in zip(header, widths))
    line2 = "  ".join(c.rjust(w) for c, w in zip(cells, widths))
    return line1 + "\n" + line2


def write_report_csv(report, path):
    """Machine-readable per-instance scores: variant, instance, nlpd."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "instance", "nlpd"])
        for r in report.results:
            for i, v in r.scores:
                w.writerow([r.name, i, f"{v:.12g}"])


def read_external_csv(path):
    """Read (variant, instance, nlpd) rows into {variant: values} vectors."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"variant", "instance", "nlpd"} <= set(
            reader.fieldnames
        ):
            raise DataError(f"{path}: expected columns variant, instance, nlpd")
        rows = {}
        for row in reader:
            try:
                rows.setdefault(row["variant"], []).append(
                    (int(row["instance"]), float(row["nlpd"]))
                )
            except ValueError as e:
                raise DataError(f"{path}: bad row {row} ({e})") from e
    for name, pairs in rows.items():
        pairs.sort()
        out[name] = np.array([v for _, v in pairs])
    return out


def report_from_csv(path, dataset="dataset"):
    """Rebuild an ExperimentReport from a scores CSV."""
    columns = read_external_csv(path)
    results = tuple(
        VariantResult(name, tuple(enumerate(values)))
        for name, values in columns.items()
    )
    if not results:
        raise DataError(f"{path}: no score rows")
    return ExperimentReport(dataset, results)
