"""NLPD scoring and the comparative benchmark harness."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from warpgp import data, evaluate, gp, train
from warpgp.errors import DataError, WarpGPError
from warpgp.gp import PredictiveDistribution

LOG_2PI = math.log(2.0 * math.pi)

KERNEL = "c * matern52(l) + noise(s)"


def pred(mean, var):
    mean = np.asarray(mean, dtype=float)
    return PredictiveDistribution(np.arange(mean.size, dtype=float), mean,
                                  np.asarray(var, dtype=float))


# ---------------------------------------------------------------------------
# nlpd


def test_nlpd_perfect_mean_unit_variance():
    p = pred([1.0, -2.0, 0.5], [1.0, 1.0, 1.0])
    assert evaluate.nlpd(p, [1.0, -2.0, 0.5]) == pytest.approx(0.5 * LOG_2PI)


def test_nlpd_density_one():
    p = pred([0.0], [1.0 / (2.0 * math.pi)])
    assert evaluate.nlpd(p, [0.0]) == pytest.approx(0.0, abs=1e-12)


def test_nlpd_matches_gaussian_density_oracle():
    p = pred([0.3, -1.1], [0.5, 2.0])
    actual = np.array([0.7, 0.2])
    oracle = -np.mean(
        [norm(0.3, math.sqrt(0.5)).logpdf(0.7), norm(-1.1, math.sqrt(2.0)).logpdf(0.2)]
    )
    assert evaluate.nlpd(p, actual) == pytest.approx(oracle, rel=1e-12)


def test_nlpd_input_validation():
    with pytest.raises(DataError):
        evaluate.nlpd(pred([0.0], [1.0]), [0.0, 1.0])
    with pytest.raises(WarpGPError):
        evaluate.nlpd(pred([0.0], [0.0]), [0.0])


def test_nlpd_destandardization_shift():
    # in original units the score shifts by exactly log(output scale)
    rng = np.random.default_rng(8)
    mean = rng.standard_normal(5)
    var = rng.uniform(0.5, 2.0, size=5)
    actual = rng.standard_normal(5)
    scale = 35.0
    base = evaluate.nlpd(pred(mean, var), actual)
    shifted = evaluate.nlpd(pred(mean * scale, var * scale**2), actual * scale)
    assert shifted == pytest.approx(base + math.log(scale), rel=1e-12)


# ---------------------------------------------------------------------------
# evaluate_variant


def test_evaluate_variant_rejects_unknown():
    ts = data.TimeSeries(np.arange(10.0), np.arange(10.0) % 3 + 1.0)
    with pytest.raises(WarpGPError):
        evaluate.evaluate_variant(ts, "deep-gp", KERNEL, train.FitConfig())


@pytest.fixture(scope="module")
def stationary_series():
    cfg = data.SynthConfig(points=60, seed=12, warp_amplitude=1e-6,
                           trend_length_scale_frac=0.3)
    return data.synth_instance(cfg, 0)


def test_evaluate_variant_end_to_end(stationary_series):
    cfg = train.FitConfig(max_iter=300, sigma_d=0.3)
    scores = {
        v: evaluate.evaluate_variant(stationary_series, v, KERNEL, cfg)
        for v in ("gp", "wgp")
    }
    assert all(np.isfinite(s) for s in scores.values())


def test_evaluate_variant_tiny_prior_matches_gp(stationary_series):
    g = evaluate.evaluate_variant(
        stationary_series, "gp", KERNEL, train.FitConfig(max_iter=300)
    )
    w = evaluate.evaluate_variant(
        stationary_series, "wgp", KERNEL,
        train.FitConfig(max_iter=300, sigma_d=1e-4),
    )
    assert w == pytest.approx(g, abs=1e-3)


# ---------------------------------------------------------------------------
# run_benchmark


@pytest.fixture(scope="module")
def instances():
    cfg = data.SynthConfig(points=40, seed=21, trend_length_scale_frac=0.4)
    return [data.synth_instance(cfg, i) for i in range(4)]


def test_benchmark_aggregates(instances):
    cfg = train.FitConfig(max_iter=200, sigma_d=0.3)
    report = evaluate.run_benchmark(
        instances, ("gp",), {"gp": KERNEL}, cfg, dataset="demo"
    )
    r = report.by_name("gp")
    assert len(r.scores) == 4 and not r.failures
    assert r.mean == pytest.approx(np.mean(r.values))
    assert r.stderr == pytest.approx(np.std(r.values, ddof=1) / 2.0)


def test_benchmark_single_instance_stderr_zero(instances):
    cfg = train.FitConfig(max_iter=200)
    report = evaluate.run_benchmark(instances[:1], ("gp",), {"gp": KERNEL}, cfg)
    assert report.by_name("gp").stderr == 0.0


def test_benchmark_order_independent(instances):
    cfg = train.FitConfig(max_iter=200, restarts=1)
    a = evaluate.run_benchmark(instances, ("gp",), {"gp": KERNEL}, cfg)
    b = evaluate.run_benchmark(instances[::-1], ("gp",), {"gp": KERNEL}, cfg)
    assert a.by_name("gp").mean == pytest.approx(b.by_name("gp").mean, rel=1e-12)


def test_benchmark_external_column(instances):
    cfg = train.FitConfig(max_iter=200)
    report = evaluate.run_benchmark(
        instances[:2], ("gp",), {"gp": KERNEL}, cfg,
        external={"deepgp": [0.5, 0.6]},
    )
    assert report.by_name("deepgp").mean == pytest.approx(0.55)


def test_benchmark_empty_errors():
    with pytest.raises(DataError):
        evaluate.run_benchmark([], ("gp",), {"gp": KERNEL}, train.FitConfig())


def test_benchmark_records_failures(instances, monkeypatch):
    calls = {"n": 0}
    real = evaluate.evaluate_variant

    def flaky(series, variant, spec, cfg, holdout=0.2):
        calls["n"] += 1
        if calls["n"] == 2:
            raise WarpGPError("injected fit failure")
        return real(series, variant, spec, cfg, holdout)

    monkeypatch.setattr(evaluate, "evaluate_variant", flaky)
    report = evaluate.run_benchmark(
        instances, ("gp",), {"gp": KERNEL}, train.FitConfig(max_iter=100)
    )
    r = report.by_name("gp")
    assert r.failures == (1,)
    assert len(r.scores) == 3
    assert "1 failed" in evaluate.format_table(report)


# ---------------------------------------------------------------------------
# report serialization


def test_report_csv_round_trip(tmp_path, instances):
    cfg = train.FitConfig(max_iter=200)
    report = evaluate.run_benchmark(
        instances[:2], ("gp", "wgp"), {"gp": KERNEL, "wgp": KERNEL}, cfg
    )
    path = str(tmp_path / "scores.csv")
    evaluate.write_report_csv(report, path)
    rebuilt = evaluate.report_from_csv(path, dataset="demo")
    for name in ("gp", "wgp"):
        assert rebuilt.by_name(name).mean == pytest.approx(
            report.by_name(name).mean, rel=1e-10
        )


def test_read_external_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(DataError):
        evaluate.read_external_csv(str(path))
    empty = tmp_path / "empty.csv"
    empty.write_text("variant,instance,nlpd\n")
    with pytest.raises(DataError):
        evaluate.report_from_csv(str(empty))


def test_format_table_layout(instances):
    cfg = train.FitConfig(max_iter=200)
    report = evaluate.run_benchmark(
        instances, ("gp",), {"gp": KERNEL}, cfg, dataset="synthetic"
    )
    table = evaluate.format_table(report)
    lines = table.splitlines()
    assert len(lines) == 2
    assert "dataset" in lines[0] and "gp" in lines[0]
    assert "synthetic" in lines[1] and "±" in lines[1]
