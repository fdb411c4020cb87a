import json
import math

import pytest

from fbdiv.schemes import ConfigError
from fbdiv.simulator import (
    CSV_COLUMNS,
    ExperimentConfig,
    SimulationResult,
    argmax_band,
    empirical_bopt,
    load_config,
    results_to_csv,
    results_to_json,
    run,
    sweep,
)


@pytest.mark.parametrize("scheme,B", [("rbf", None), ("zf-rvq", 10), ("purc", 4), ("zf-perfect", None)])
def test_single_trial_deterministic(scheme, B):
    cfg = ExperimentConfig(scheme, 4, 10.0, 40, B=B, trials=1, seed=3)
    a, b = run(cfg), run(cfg)
    assert a.mean_rate == b.mean_rate and a.trials == 1 and a.stderr == 0.0
    assert run(ExperimentConfig(scheme, 4, 10.0, 40, B=B, trials=1, seed=4)).mean_rate != a.mean_rate


def test_worker_count_independence():
    cfg = ExperimentConfig("zf-rvq", 4, 10.0, 100, B=10, trials=1000, seed=9)
    one = run(cfg, workers=1)
    two = run(cfg, workers=2)
    assert (one.mean_rate, one.stderr) == (two.mean_rate, two.stderr)


def test_explicit_rvq_method_is_reproducible():
    cfg = ExperimentConfig("zf-rvq", 4, 10.0, 32, B=8, trials=300, seed=1, rvq_method="explicit")
    assert run(cfg).mean_rate == run(cfg).mean_rate


def test_stderr_scales_with_trials():
    a = run(ExperimentConfig("rbf", 4, 10.0, 40, trials=4096, seed=1))
    b = run(ExperimentConfig("rbf", 4, 10.0, 40, trials=8192, seed=1))
    assert b.stderr / a.stderr == pytest.approx(1 / math.sqrt(2), rel=0.1)


def test_result_invariants():
    r = run(ExperimentConfig("purc", 4, 10.0, 60, B=3, trials=600, seed=2))
    assert math.isfinite(r.mean_rate) and r.mean_rate >= 0 and r.trials == 600
    assert r.config.K == 20


def test_rbf_defaults_to_log2m_bits():
    cfg = ExperimentConfig("rbf", 4, 10.0, 100)
    assert cfg.B == 2 and cfg.K == 50


def test_perfect_csit_defaults_to_T_users():
    assert ExperimentConfig("zf-perfect", 4, 10.0, 100).K == 100
    assert ExperimentConfig("zf-perfect", 4, 10.0, 100, B=25).K == 4


@pytest.mark.parametrize("kwargs,msg", [
    (dict(scheme="zf-rvq", B=2), "1\\+log2"),
    (dict(scheme="zf-rvq", B=30), "T/M"),
    (dict(scheme="rbf", B=3), "log2"),
    (dict(scheme="purc", B=1), "log2"),
    (dict(scheme="zf-rvq", B=10, trials=0), "trials"),
    (dict(scheme="zf-rvq"), "B: required"),
])
def test_validation_names_field(kwargs, msg):
    base = dict(M=4, snr_db=10.0, T=100)
    base.update(kwargs)
    with pytest.raises(ConfigError, match=msg):
        run(ExperimentConfig(**base))


def test_unknown_scheme():
    with pytest.raises(ConfigError, match="scheme"):
        ExperimentConfig("dpc", 4, 10.0, 100)


def test_from_dict_rejects_unknown_fields():
    with pytest.raises(ConfigError, match="bogus"):
        ExperimentConfig.from_dict({"scheme": "rbf", "M": 4, "snr_db": 10, "T": 40, "bogus": 1})


def test_sweep_points_match_standalone_runs():
    cfg = ExperimentConfig("zf-rvq", 4, 10.0, 100, B=10, trials=300, seed=5, sweep_axis="B", sweep_values=(10, 20))
    results = sweep(cfg)
    assert [r.config.B for r in results] == [10, 20]
    alone = run(ExperimentConfig("zf-rvq", 4, 10.0, 100, B=20, trials=300, seed=5))
    assert results[1].mean_rate == alone.mean_rate


def test_sweep_over_snr_and_T():
    cfg = ExperimentConfig("rbf", 4, 0.0, 40, trials=256, sweep_axis="P_dB", sweep_values=(0, 10, 20))
    rates = [r.mean_rate for r in sweep(cfg)]
    assert rates[0] < rates[1] < rates[2]
    cfg = ExperimentConfig("rbf", 4, 10.0, 40, trials=256, sweep_axis="T", sweep_values=(20, 40))
    assert [r.config.T for r in sweep(cfg)] == [20, 40]


def test_empirical_bopt_single_point_range():
    res = empirical_bopt(10.0, 4, 12, trials=200)
    assert res.b_opt == 3 and res.band == (3,)


def test_argmax_band():
    cfg = ExperimentConfig("zf-rvq", 4, 10.0, 100, B=10)
    mk = lambda b, m, s: SimulationResult(m, s, 100, ExperimentConfig("zf-rvq", 4, 10.0, 100, B=b))
    res = argmax_band([mk(5, 1.0, 0.1), mk(6, 2.0, 0.1), mk(7, 1.9, 0.1), mk(8, 1.5, 0.1)])
    assert res.b_opt == 6 and res.band == (6, 7)
    assert res.best.config.B == 6
    assert cfg.B == 10


def test_csv_and_json_output():
    r = run(ExperimentConfig("zf-rvq", 4, 10.0, 100, B=25, trials=256, seed=7))
    lines = results_to_csv([r]).splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    row = dict(zip(CSV_COLUMNS, lines[1].split(",")))
    assert row["scheme"] == "zf-rvq" and row["K"] == "4" and row["seed"] == "7"
    assert float(row["mean_rate"]) == r.mean_rate
    doc = json.loads(results_to_json([r]))
    again = ExperimentConfig.from_dict(doc["results"][0]["config"])
    assert run(again).mean_rate == r.mean_rate


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"scheme": "rbf", "M": 4, "snr_db": 10, "T": 40}))
    assert load_config(str(p))["T"] == 40
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(str(p))
