"""Command-line interface: synth, fit, forecast, eval, report.

Every command prints its effective configuration as a ``# config:`` line so a
run can be replayed exactly.  Exit codes: 0 success, 1 usage error, 2 data
error, 3 numerical failure.  Output files are written atomically.

Set ``WIGP_LOG`` (debug/info/warning) to control log verbosity.
"""

from __future__ import annotations

import logging
import os
import sys
import tempfile
from dataclasses import replace

import click
import numpy as np

from . import data, evaluate, kernels, train
from .errors import (
    AllRestartsFailed,
    DataError,
    KernelParseError,
    NotPositiveDefinite,
    WarpGPError,
)

log = logging.getLogger("warpgp")

DEFAULT_KERNEL = "c * matern52(l) + noise(s)"
DEFAULT_SEASONAL_KERNEL = (
    "c * matern52(l) + cp * periodic({period}, lp)@orig + noise(s)"
)


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-warpgp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _echo_config(command, **kv):
    parts = " ".join(f"{k}={v}" for k, v in kv.items())
    click.echo(f"# config: {command} {parts}")


def _fit_config(sigma_d, restarts, seed, max_iter):
    return train.FitConfig(
        max_iter=max_iter,
        restarts=restarts,
        restart_seed=seed,
        sigma_d=sigma_d,
    )


@click.group()
def cli():
    """Gaussian-process forecasting with learned input warping."""


@cli.command()
@click.option("--instances", default=100, show_default=True, type=int)
@click.option("--points", default=100, show_default=True, type=int)
@click.option(
    "--kernel",
    "trend_kernel",
    default="matern52",
    show_default=True,
    type=click.Choice(["matern52", "matern52+periodic"]),
)
@click.option("--period", default=10.0, show_default=True, type=float)
@click.option("--noise", default=0.1, show_default=True, type=float)
@click.option("--warp-length-scale", default=0.1, show_default=True, type=float,
              help="Warp GP length scale as a fraction of the input range.")
@click.option("--warp-amplitude", default=1.0, show_default=True, type=float)
@click.option("--seed", required=True, type=int,
              help="Generator seed (required for reproducibility).")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def synth(instances, points, trend_kernel, period, noise, warp_length_scale,
          warp_amplitude, seed, out):
    """Generate synthetic non-stationary series as CSV files."""
    config = data.SynthConfig(
        instances=instances,
        points=points,
        trend_kernel=trend_kernel,
        period=period,
        noise_sigma=noise,
        warp_length_scale_frac=warp_length_scale,
        warp_amplitude=warp_amplitude,
        seed=seed,
    )
    _echo_config("synth", **config.to_dict(), out=out)
    os.makedirs(out, exist_ok=True)
    for i in range(instances):
        series = data.synth_instance(config, i)
        rows = ["input,output"] + [
            f"{x:.17g},{f:.17g}" for x, f in zip(series.x, series.f)
        ]
        _atomic_write(os.path.join(out, f"instance_{i:04d}.csv"), "\n".join(rows) + "\n")
    sidecar = "\n".join(f"{k} = {v}" for k, v in config.to_dict().items()) + "\n"
    _atomic_write(os.path.join(out, "synth_config.txt"), sidecar)
    click.echo(f"wrote {instances} instance(s) to {out}")


@cli.command()
@click.argument("data_path", type=click.Path())
@click.option("--kernel", "kernel_expr", default=DEFAULT_KERNEL, show_default=True)
@click.option("--variant", default="gp", show_default=True,
              type=click.Choice(list(evaluate.VARIANTS)))
@click.option("--sigma-d", default=1.0, show_default=True, type=float)
@click.option("--restarts", default=1, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--max-iter", default=1000, show_default=True, type=int)
@click.option("--input-col", default="0")
@click.option("--output-col", default="1")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def fit(data_path, kernel_expr, variant, sigma_d, restarts, seed, max_iter,
        input_col, output_col, out):
    """Fit a model to a CSV series and save it as a model file."""
    _echo_config(
        "fit", data=data_path, kernel=repr(kernel_expr), variant=variant,
        sigma_d=sigma_d, restarts=restarts, seed=seed, max_iter=max_iter, out=out,
    )
    k = kernels.parse_kernel(kernel_expr)
    series = data.load_csv(data_path, _col(input_col), _col(output_col))
    std = data.standardize(series)
    config = _fit_config(sigma_d, restarts, seed, max_iter)
    if variant == "gp":
        model = train.fit_gp(std, k, config)
    else:
        model = train.fit_wgp(
            std, k, config,
            seasonal=(variant == "wgp-seasonal"),
            kernel_expr=kernel_expr,
        )
    tmp_target = out
    train.save_model(model, tmp_target + ".tmp")
    os.replace(tmp_target + ".tmp", tmp_target)
    state = "converged" if model.converged else "NOT converged"
    click.echo(f"objective {model.objective:.6f} ({state}); model saved to {out}")


def _col(spec):
    try:
        return int(spec)
    except ValueError:
        return spec


@cli.command()
@click.argument("model_path", type=click.Path())
@click.option("--steps", default=10, show_default=True, type=int,
              help="Number of future points to forecast.")
@click.option("--spacing", type=float, default=None,
              help="Spacing between forecast points (original input units); "
                   "defaults to the median training spacing.")
@click.option("--at", "at_points", default=None,
              help="Comma-separated explicit forecast inputs (original units).")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Output CSV; defaults to stdout.")
def forecast(model_path, steps, spacing, at_points, out):
    """Forecast beyond the training range of a fitted model."""
    model = train.load_model(model_path)
    rec = model.series.standardization
    raw_x = (
        data.destandardize_inputs(model.series.x, rec)
        if rec is not None
        else model.series.x
    )
    if at_points is not None:
        try:
            targets = np.array([float(t) for t in at_points.split(",")])
        except ValueError:
            raise click.UsageError(f"--at must be comma-separated numbers: {at_points!r}")
    else:
        if spacing is None:
            spacing = float(np.median(np.diff(raw_x)))
        targets = raw_x[-1] + spacing * np.arange(1, steps + 1)
    _echo_config(
        "forecast", model=model_path, steps=steps, spacing=spacing,
        at=at_points, out=out or "-",
    )
    if np.any(targets <= raw_x[-1]):
        raise DataError("forecast horizon must lie strictly beyond the training range")

    xq = data.apply_standardization(targets, rec) if rec is not None else targets
    pred = train.predict(model, xq)
    mean, var = pred.mean, pred.variance
    if rec is not None:
        mean = data.destandardize_outputs(mean, rec)
        var = data.destandardize_variance(var, rec)
    sd = np.sqrt(var)
    rows = ["input,mean,variance,lower95,upper95"]
    for x, m, v, s in zip(targets, mean, var, sd):
        rows.append(
            f"{x:.17g},{m:.17g},{v:.17g},{m - 1.96 * s:.17g},{m + 1.96 * s:.17g}"
        )
    text = "\n".join(rows) + "\n"
    if out:
        _atomic_write(out, text)
        click.echo(f"wrote {len(targets)} forecast row(s) to {out}")
    else:
        click.echo(text, nl=False)


@cli.command("eval")
@click.option("--data", "data_path", required=True, type=click.Path(),
              help="CSV file or directory of instance CSVs.")
@click.option("--variants", default="gp,wgp", show_default=True,
              help="Comma-separated subset of gp,wgp,wgp-seasonal.")
@click.option("--kernel", "kernel_expr", default=DEFAULT_KERNEL, show_default=True)
@click.option("--seasonal-kernel", "seasonal_expr", default=None,
              help="Kernel for wgp-seasonal; defaults to the trend kernel "
                   "plus an original-channel periodic term.")
@click.option("--period", default=10.0, show_default=True, type=float,
              help="Period used in the default seasonal kernel.")
@click.option("--sigma-d", default=1.0, show_default=True, type=float)
@click.option("--restarts", default=1, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--max-iter", default=1000, show_default=True, type=int)
@click.option("--holdout", default=0.2, show_default=True, type=float)
@click.option("--input-col", default="0")
@click.option("--output-col", default="1")
@click.option("--external", type=click.Path(), default=None,
              help="Scores CSV (variant,instance,nlpd) merged into the report.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for report.txt and report.csv.")
def eval_cmd(data_path, variants, kernel_expr, seasonal_expr, period, sigma_d,
             restarts, seed, max_iter, holdout, input_col, output_col,
             external, out):
    """Benchmark model variants on a dataset, reporting NLPD."""
    variant_list = [v.strip() for v in variants.split(",") if v.strip()]
    for v in variant_list:
        if v not in evaluate.VARIANTS:
            raise click.UsageError(f"unknown variant {v!r}")
    if seasonal_expr is None:
        seasonal_expr = DEFAULT_SEASONAL_KERNEL.format(period=period)
    _echo_config(
        "eval", data=data_path, variants=",".join(variant_list),
        kernel=repr(kernel_expr), seasonal_kernel=repr(seasonal_expr),
        sigma_d=sigma_d, restarts=restarts, seed=seed, max_iter=max_iter,
        holdout=holdout, external=external, out=out,
    )
    kernel_specs = {
        "gp": kernel_expr,
        "wgp": kernel_expr,
        "wgp-seasonal": seasonal_expr,
    }
    instances, dataset = _load_instances(data_path, _col(input_col), _col(output_col))
    config = _fit_config(sigma_d, restarts, seed, max_iter)
    ext = evaluate.read_external_csv(external) if external else None
    report = evaluate.run_benchmark(
        instances, variant_list, kernel_specs, config,
        dataset=dataset, holdout=holdout, external=ext,
    )
    units = "# nlpd units: standardized output (add log(output scale) for original units)"
    table = evaluate.format_table(report)
    click.echo(table)
    click.echo(units)
    if out:
        os.makedirs(out, exist_ok=True)
        _atomic_write(os.path.join(out, "report.txt"), table + "\n" + units + "\n")
        csv_tmp = os.path.join(out, "report.csv.tmp")
        evaluate.write_report_csv(report, csv_tmp)
        os.replace(csv_tmp, os.path.join(out, "report.csv"))
        click.echo(f"report written to {out}")


def _load_instances(path, input_col, output_col):
    if os.path.isdir(path):
        files = sorted(
            f for f in os.listdir(path)
            if f.endswith(".csv") and f.startswith("instance_")
        )
        if not files:
            files = sorted(f for f in os.listdir(path) if f.endswith(".csv"))
        if not files:
            raise DataError(f"no CSV files in {path}")
        return (
            [data.load_csv(os.path.join(path, f), input_col, output_col) for f in files],
            os.path.basename(os.path.normpath(path)),
        )
    name = os.path.splitext(os.path.basename(path))[0]
    return [data.load_csv(path, input_col, output_col)], name


@cli.command()
@click.argument("scores_csv", type=click.Path())
@click.option("--dataset", default=None, help="Dataset label for the table.")
@click.option("--external", type=click.Path(), default=None,
              help="Additional scores CSV merged as extra columns.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def report(scores_csv, dataset, external, out):
    """Re-render the comparison table from a scores CSV."""
    _echo_config("report", scores=scores_csv, dataset=dataset,
                 external=external, out=out)
    name = dataset or os.path.splitext(os.path.basename(scores_csv))[0]
    rep = evaluate.report_from_csv(scores_csv, dataset=name)
    if external:
        extra = evaluate.read_external_csv(external)
        results = rep.results + tuple(
            evaluate.VariantResult(n, tuple(enumerate(v))) for n, v in extra.items()
        )
        rep = evaluate.ExperimentReport(rep.dataset, results)
    table = evaluate.format_table(rep)
    click.echo(table)
    if out:
        _atomic_write(out, table + "\n")


def main(argv=None):
    level = os.environ.get("WIGP_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except KernelParseError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    except click.ClickException as e:
        e.show()
        sys.exit(1)
    except DataError as e:
        click.echo(f"data error: {e}", err=True)
        sys.exit(2)
    except (NotPositiveDefinite, AllRestartsFailed, WarpGPError) as e:
        click.echo(f"numerical failure: {e}", err=True)
        sys.exit(3)
    sys.exit(0)


if __name__ == "__main__":
    main()
