import math

import pytest

from unitarity.errors import BadParams, ValidationError
from unitarity.experiments import (
    ChannelSpec,
    ExperimentConfig,
    ResultRecord,
    fit_slope,
    run_distinguish,
    run_estimate,
    run_experiment,
    run_scaling,
)


def spec(name, d, **params):
    return ChannelSpec(dim=d, builtin=name, params=params)


def strip_timing(obj):
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in ("timestamp", "wall_seconds")}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def test_depolarizing_incoherent_success():
    cfg = ExperimentConfig.create("estimate", spec("depolarizing", 2), access="incoherent", repeats=50)
    res = run_estimate(cfg)
    assert res.oracle["u"] == pytest.approx(0.25)
    assert res.summary["success_fraction"] >= 2 / 3
    assert len(res.records) == 50


def test_unitary_coherent_queries():
    cfg = ExperimentConfig.create("estimate", spec("random_unitary", 8, seed=3), access="coherent", repeats=20)
    res = run_estimate(cfg)
    assert res.summary["success_fraction"] >= 2 / 3
    assert all(r.total_queries <= 8 * math.ceil(8 / 0.1**2) for r in res.records)


def test_zero_channel():
    cfg = ExperimentConfig.create("estimate", spec("zero", 3), repeats=5)
    res = run_estimate(cfg)
    assert all(r.value == 0.0 for r in res.records)
    assert res.summary["success_fraction"] == 1.0


def test_oracle_and_bounds_kinds():
    res = run_experiment(ExperimentConfig.create("oracle", spec("depolarizing", 2)))
    assert res.oracle["u"] == pytest.approx(0.25)
    res = run_experiment(ExperimentConfig.create("bounds", spec("identity", 3)))
    assert res.summary["lower"] == pytest.approx(1) and res.summary["upper"] == pytest.approx(1)


def test_result_roundtrip():
    cfg = ExperimentConfig.create("estimate", spec("dephasing", 2, p=0.3), epsilon=0.3, repeats=2)
    res = run_estimate(cfg)
    assert ResultRecord.from_dict(res.to_dict()) == res
    explicit = ChannelSpec.explicit([[[1, 0], [0, 1j]]])
    cfg2 = ExperimentConfig.create("oracle", explicit)
    assert ExperimentConfig.from_dict(cfg2.to_dict()) == cfg2


def test_config_errors():
    with pytest.raises(ValidationError):
        ExperimentConfig.create("estimate", spec("identity", 2), repeats=0)
    with pytest.raises(ValidationError):
        ExperimentConfig.create("plot", spec("identity", 2))
    with pytest.raises(ValidationError):
        ChannelSpec(dim=2)
    with pytest.raises(BadParams):
        ChannelSpec.explicit([[[1, 0], [0, 1]]]).with_dim(3)


def test_workers_do_not_change_results():
    cfg = ExperimentConfig.create("estimate", spec("amplitude_damping", 3, gamma=0.4), epsilon=0.2, repeats=4, seed=9)
    a = run_estimate(cfg, workers=1).to_dict()
    b = run_estimate(cfg, workers=3).to_dict()
    assert strip_timing(a) == strip_timing(b)


def test_scaling_rows_and_slopes():
    base = ExperimentConfig.create("scaling", spec("shift_mixture", 2), access="incoherent", epsilon=0.2)
    res = run_scaling([2, 4, 8], [0.4, 0.2], base)
    assert len(res.rows) == 6
    for row in res.rows:
        assert row["queries"] == row["predicted_queries"]
        assert row["achieved_error"] == pytest.approx(abs(row["estimate_median"] - row["oracle"]))
    assert fit_slope([r for r in res.rows if r["d"] == 4], "epsilon", invert=True) == pytest.approx(2, abs=0.1)
    assert res.summary["slope_queries_vs_d"]["0.2"] > 0.3


def test_scaling_needs_inputs():
    base = ExperimentConfig.create("scaling", spec("shift_mixture", 2))
    with pytest.raises(ValidationError):
        run_scaling([], [0.1], base)


def test_distinguish_default_budget():
    res = run_distinguish(4, trials=100, rng=0)
    assert res.summary["success_rate"] >= 0.9
    assert {r["truth"] for r in res.rows} == {"unitary", "depolarizing"}


def test_distinguish_starved_budget():
    res = run_distinguish(4, trials=400, rng=1, max_queries=1)
    assert res.summary["queries_per_trial"] == 0
    assert abs(res.summary["success_rate"] - 0.5) <= 3 * math.sqrt(0.25 / 400)


def test_distinguish_queries_grow_with_d():
    small = run_distinguish(2, trials=20, rng=2)
    large = run_distinguish(16, trials=20, rng=2)
    assert small.summary["success_rate"] >= 0.9 and large.summary["success_rate"] >= 0.9
    ratio = large.summary["queries_per_trial"] / small.summary["queries_per_trial"]
    assert ratio == pytest.approx(math.ceil(2 * math.sqrt(16)) / math.ceil(2 * math.sqrt(2)))
