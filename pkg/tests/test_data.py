"""CSV ingestion, standardization, splitting, and the synthetic generator."""

import logging

import numpy as np
import pytest
from scipy.stats import spearmanr

from warpgp import data, gp, kernels
from warpgp.errors import DataError


def write(tmp_path, text, name="series.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# ---------------------------------------------------------------------------
# load_csv


def test_load_well_formed(tmp_path):
    path = write(tmp_path, "t,y\n0,1.5\n1,2.5\n2,0.5\n")
    ts = data.load_csv(path)
    assert len(ts) == 3
    assert np.allclose(ts.x, [0, 1, 2])
    assert np.allclose(ts.f, [1.5, 2.5, 0.5])


def test_load_sorts_rows(tmp_path):
    path = write(tmp_path, "t,y\n2,2\n0,0\n1,1\n")
    ts = data.load_csv(path)
    assert np.allclose(ts.x, [0, 1, 2])
    assert np.allclose(ts.f, [0, 1, 2])


def test_load_named_columns_and_delimiter(tmp_path):
    path = write(tmp_path, "y;t\n9;0\n8;1\n")
    ts = data.load_csv(path, "t", "y", delimiter=";")
    assert np.allclose(ts.x, [0, 1])
    assert np.allclose(ts.f, [9, 8])


def test_load_duplicate_inputs_perturbed(tmp_path, caplog):
    path = write(tmp_path, "t,y\n0,1\n1,2\n1,3\n2,4\n")
    with caplog.at_level(logging.INFO, logger="warpgp"):
        ts = data.load_csv(path)
    assert np.all(np.diff(ts.x) > 0.0)
    assert any("duplicate" in r.message for r in caplog.records)


def test_load_errors(tmp_path):
    with pytest.raises(DataError):
        data.load_csv(str(tmp_path / "missing.csv"))
    with pytest.raises(DataError, match="no column named"):
        data.load_csv(write(tmp_path, "t,y\n0,1\n1,2\n"), "nope", "y")
    with pytest.raises(DataError, match="out of range"):
        data.load_csv(write(tmp_path, "t,y\n0,1\n1,2\n"), 0, 5)
    with pytest.raises(DataError, match="row 3.*'y'"):
        data.load_csv(write(tmp_path, "t,y\n0,1\n1,oops\n"))
    with pytest.raises(DataError, match="at least 2"):
        data.load_csv(write(tmp_path, "t,y\n0,1\n"))
    with pytest.raises(DataError, match="empty"):
        data.load_csv(write(tmp_path, ""))


# ---------------------------------------------------------------------------
# TimeSeries invariants


def test_series_invariants():
    with pytest.raises(DataError):
        data.TimeSeries([0.0, 1.0], [1.0])
    with pytest.raises(DataError):
        data.TimeSeries([0.0, 1.0], [1.0, np.nan])
    with pytest.raises(DataError):
        data.TimeSeries([1.0, 0.0], [1.0, 2.0])


# ---------------------------------------------------------------------------
# standardization


def test_standardize_two_points():
    ts = data.standardize(data.TimeSeries([3.0, 7.0], [1.0, 3.0]))
    assert np.allclose(ts.f, [-1.0, 1.0])  # population sd convention
    assert np.allclose(ts.x, [0.0, 1.0])


def test_standardize_idempotent():
    rng = np.random.default_rng(0)
    f = rng.standard_normal(20)
    ts = data.standardize(data.TimeSeries(np.arange(20.0), f))
    again = data.standardize(ts)
    assert np.allclose(again.x, ts.x, atol=1e-12)
    assert np.allclose(again.f, ts.f, atol=1e-12)


def test_standardize_round_trip():
    rng = np.random.default_rng(1)
    x = np.cumsum(rng.uniform(0.5, 2.0, size=15))
    f = 100.0 + 30.0 * rng.standard_normal(15)
    ts = data.standardize(data.TimeSeries(x, f))
    rec = ts.standardization
    assert np.allclose(data.destandardize_inputs(ts.x, rec), x, rtol=1e-12)
    assert np.allclose(data.destandardize_outputs(ts.f, rec), f, rtol=1e-12)
    assert np.allclose(
        data.destandardize_variance(np.ones(3), rec), rec.out_scale**2
    )
    assert np.allclose(data.apply_standardization(x, rec), ts.x, rtol=1e-12)


def test_standardize_zero_variance_errors():
    with pytest.raises(DataError):
        data.standardize(data.TimeSeries([0.0, 1.0], [2.0, 2.0]))


# ---------------------------------------------------------------------------
# splitting


def test_split_fractions():
    ts = data.TimeSeries(np.arange(10.0), np.arange(10.0))
    tr, te = data.split_forecast(ts, 0.2)
    assert (len(tr), len(te)) == (8, 2)
    ts5 = data.TimeSeries(np.arange(5.0), np.arange(5.0))
    tr, te = data.split_forecast(ts5, 0.5)
    assert (len(tr), len(te)) == (2, 3)  # ceiling on the test side


def test_split_concatenation_identity():
    ts = data.TimeSeries(np.arange(9.0), np.arange(9.0) ** 2)
    tr, te = data.split_forecast(ts, 0.3)
    assert np.array_equal(np.concatenate([tr.x, te.x]), ts.x)
    assert np.array_equal(np.concatenate([tr.f, te.f]), ts.f)


def test_split_degenerate_errors():
    ts = data.TimeSeries(np.arange(3.0), np.arange(3.0))
    with pytest.raises(DataError):
        data.split_forecast(ts, 0.0)
    with pytest.raises(DataError):
        data.split_forecast(ts, 0.99)


# ---------------------------------------------------------------------------
# synthetic generator


def test_synth_deterministic():
    cfg = data.SynthConfig(points=40, seed=5)
    a = data.synth_instance(cfg, 3)
    b = data.synth_instance(cfg, 3)
    assert np.array_equal(a.f, b.f)
    c = data.synth_instance(cfg, 4)
    assert not np.array_equal(a.f, c.f)


def test_synth_zero_amplitude_warp_is_stationary_grid():
    cfg = data.SynthConfig(points=30, seed=1, warp_amplitude=1e-12)
    x, g, grid = data.synth_warp_profile(cfg, 0)
    assert np.allclose(grid, x, atol=1e-9)


def test_synth_seasonal_twin_differs_by_periodic_component():
    base = dict(points=50, seed=9, noise_sigma=0.05)
    plain = data.synth_instance(data.SynthConfig(**base), 2)
    seasonal = data.synth_instance(
        data.SynthConfig(trend_kernel="matern52+periodic", **base), 2
    )
    diff = seasonal.f - plain.f
    # the twin difference is exactly the periodic draw, reproducible directly
    cfg = data.SynthConfig(trend_kernel="matern52+periodic", **base)
    per = kernels.Scale(
        cfg.periodic_amplitude**2,
        kernels.Periodic(cfg.period, cfg.periodic_length_scale),
    )
    draw = gp.sample_prior(
        plain.x, per, kernels.hyper_vector(per),
        np.random.SeedSequence((cfg.seed, 2, 2)),
    )
    assert np.allclose(diff, draw, atol=1e-12)
    assert np.ptp(diff) > 0.0


def test_synth_nonstationarity_tracks_warp():
    # local volatility of first differences should follow the sampled gaps
    cfg = data.SynthConfig(points=100, seed=3)
    rhos = []
    for i in range(100):
        _, g, _ = data.synth_warp_profile(cfg, i)
        s = data.synth_instance(cfg, i)
        vol = np.convolve(np.abs(np.diff(s.f)), np.ones(5) / 5, mode="same")
        rhos.append(spearmanr(vol, np.exp(g[1:])).statistic)
    assert np.median(rhos) > 0.0


def test_synth_config_validation():
    with pytest.raises(DataError):
        data.SynthConfig(points=5)
    with pytest.raises(DataError):
        data.SynthConfig(trend_kernel="cubic")
    with pytest.raises(DataError):
        data.SynthConfig(noise_sigma=-0.1)


def test_write_csv_round_trip(tmp_path):
    cfg = data.SynthConfig(points=25, seed=2)
    s = data.synth_instance(cfg, 0)
    path = str(tmp_path / "inst.csv")
    data.write_csv(s, path)
    loaded = data.load_csv(path, "input", "output")
    assert np.allclose(loaded.x, s.x, rtol=1e-15)
    assert np.allclose(loaded.f, s.f, rtol=1e-15)
