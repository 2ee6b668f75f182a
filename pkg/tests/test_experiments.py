"""Experiment configs, regressions, trend test and small experiment runs."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cutwalk.experiments import (ExperimentConfig, fit_log_growth, run_annuli_experiment,
                                 run_Ax_frequency, run_cutpoint_growth,
                                 run_dyadic_block_stats, trend_test, write_outputs)

BD2 = {"family": "bd_lamperti", "a": 2.0}


def test_fit_exact_log_line():
    f = fit_log_growth([(math.e, 1.0), (math.e**2, 2.0), (math.e**3, 3.0)], "log")
    assert f.slope == pytest.approx(1.0)
    assert f.intercept == pytest.approx(0.0, abs=1e-12)
    assert f.r2 == pytest.approx(1.0)


def test_fit_constant_response():
    f = fit_log_growth([(10, 4.0), (100, 4.0), (1000, 4.0), (1e4, 4.0)])
    assert f.slope == pytest.approx(0.0, abs=1e-12)
    assert f.r2 == 1.0


def test_fit_noisy_slope_ci_coverage():
    # the 95% t interval should cover the true slope in about 95% of fits
    rng = np.random.default_rng(0)
    x = 2.0 ** np.arange(3, 20)
    n_fit = 2000
    hits = 0
    for _ in range(n_fit):
        y = 2 * np.log(x) + rng.normal(0, 0.1, x.size)
        f = fit_log_growth(list(zip(x, y)))
        hits += f.ci[0] < 2 < f.ci[1]
    assert f.n == x.size
    assert abs(hits / n_fit - 0.95) <= 3 * math.sqrt(0.95 * 0.05 / n_fit)


@pytest.mark.parametrize("pts", [[(1.5, 1), (2, 2)], [(2, 1), (2, 2), (3, 3)],
                                 [(3, 1), (2, 2), (4, 3)]])
def test_fit_rejects_bad_points(pts):
    with pytest.raises(ValueError):
        fit_log_growth(pts)


def test_fit_rejects_unknown_model():
    with pytest.raises(ValueError):
        fit_log_growth([(2, 1), (3, 2), (4, 3)], "cubic")


@given(st.floats(-5, 5), st.floats(-5, 5),
       st.sampled_from(["log", "loglog", "reciprocal-log2"]))
@settings(max_examples=50, deadline=None)
def test_fit_recovers_exact_lines(slope, intercept, model):
    from cutwalk.experiments import _transform
    x = np.array([16.0, 64.0, 256.0, 1024.0, 4096.0])
    y = intercept + slope * _transform(x, model)
    f = fit_log_growth(list(zip(x, y)), model)
    assert f.slope == pytest.approx(slope, abs=1e-8)
    assert f.intercept == pytest.approx(intercept, abs=1e-7)


def test_trend_test_detects_decrease():
    rng = np.random.default_rng(1)
    js = np.arange(10, 18)
    p = 0.5 / (js - 8)
    ind = rng.random((2000, js.size)) < p
    t = trend_test(ind, js)
    assert t["decreasing"] and t["slope"] < 0 and t["p_value"] < 0.05


def test_trend_test_flat():
    rng = np.random.default_rng(2)
    js = np.arange(10, 18)
    ind = rng.random((2000, js.size)) < 0.3
    t = trend_test(ind, js)
    assert abs(t["z"]) < 4


def test_trend_test_constant_indicators():
    t = trend_test(np.ones((10, 4)), np.arange(4))
    assert t["z"] == 0.0 and not t["decreasing"]


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(BD2, checkpoints=[4, 2])
    with pytest.raises(ValueError):
        ExperimentConfig(BD2, replicas=0)
    with pytest.raises(ValueError):
        ExperimentConfig(BD2, method="magic")
    with pytest.raises(ValueError):
        ExperimentConfig(BD2, j_lo=5, j_hi=4)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"generator": BD2, "nonsense": 1})


def test_config_round_trip(tmp_path):
    c = ExperimentConfig(BD2, replicas=3, checkpoints=[8, 16, 32])
    p = tmp_path / "c.json"
    p.write_text(json.dumps(c.to_dict()))
    assert ExperimentConfig.from_json(p) == c
    assert c.window(c.spec()) == 50.0
    assert ExperimentConfig(BD2, W=7).window(c.spec()) == 7.0


def _small_growth(seed=12345):
    return ExperimentConfig(BD2, replicas=8, steps=20_000, seed=seed,
                            checkpoints=[4, 8, 16, 32, 64])


def test_cutpoint_growth_table():
    res = run_cutpoint_growth(_small_growth())
    assert res.columns[0] == "x" and len(res.rows) == 5
    conf = res.column("strong_confirmed")
    cand = res.column("strong_candidate")
    assert np.all(np.asarray(conf) <= np.asarray(cand))
    assert np.all(np.diff(cand) >= 0)
    assert "strong_confirmed_vs_log" in res.fits


def test_cutpoint_growth_reproducible():
    a = run_cutpoint_growth(_small_growth()).to_csv()
    b = run_cutpoint_growth(_small_growth()).to_csv()
    c = run_cutpoint_growth(_small_growth(seed=1)).to_csv()
    assert a == b and a != c


def test_cutpoint_growth_refuses_recurrent():
    cfg = ExperimentConfig({"family": "bd_lamperti", "a": 0.5}, replicas=2, steps=100,
                           checkpoints=[4, 8, 16])
    with pytest.raises(ValueError):
        run_cutpoint_growth(cfg)
    cfg.exploratory = True
    run_cutpoint_growth(cfg)


def test_dyadic_blocks_ladder_and_direct():
    cfg = ExperimentConfig(BD2, replicas=200, j_lo=3, j_hi=7, burn_in=4)
    res = run_dyadic_block_stats(cfg)
    assert res.diagnostics["method"] == "ladder"
    assert "trend" in res.diagnostics and "p_E_vs_reciprocal_log2" in res.fits
    pe = np.asarray(res.column("p_E"))
    assert np.all((0 <= pe) & (pe <= 1))
    assert np.all(np.asarray(res.column("mean_M_E")) <= np.asarray(res.column("mean_M")) + 1e-12)
    d = run_dyadic_block_stats(ExperimentConfig(BD2, replicas=5, steps=5000, j_lo=3, j_hi=5,
                                                burn_in=3, method="direct"))
    assert d.diagnostics["method"] == "direct"


def test_dyadic_blocks_ladder_needs_birth_death():
    with pytest.raises(ValueError):
        run_dyadic_block_stats(ExperimentConfig({"family": "plus_one_minus_two", "a": 3.0},
                                                method="ladder", j_lo=3, j_hi=4))


def test_ax_frequency_runs_and_checks_parameters():
    cfg = ExperimentConfig(BD2, replicas=4, steps=20_000, j_lo=3, j_hi=6)
    res = run_Ax_frequency(cfg)
    assert res.columns[:3] == ["j", "x", "levels"]
    assert res.diagnostics["q"] == 3.0
    with pytest.raises(ValueError):
        run_Ax_frequency(ExperimentConfig(BD2, ell=1, epsilon=0.5))


def test_annuli_experiment_requires_vector():
    with pytest.raises(ValueError):
        run_annuli_experiment(ExperimentConfig(BD2))
    res = run_annuli_experiment(ExperimentConfig(
        {"family": "elliptic", "d": 2, "rho": 1.0, "sigma": 2.0}, replicas=3, steps=20_000,
        h=1.0, k=2, checkpoints=[10, 100]))
    assert len(res.rows) == 2
    assert 0 <= res.diagnostics["frac_none_beyond_burn_in"] <= 1


def test_write_outputs_manifest(tmp_path):
    res = run_cutpoint_growth(_small_growth())
    man = write_outputs(tmp_path, {res.name: res.to_csv()}, res.config, 0.0, "experiment")
    data = json.loads((tmp_path / "manifest.json").read_text())
    for key in ("command", "config", "versions", "files", "wall_clock_seconds"):
        assert key in data
    assert (tmp_path / "cutpoint_growth.csv").exists()
    assert man["files"] == data["files"]
