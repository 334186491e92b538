"""Scenario generation, the replication loop, and result aggregation."""

import numpy as np
import pytest
from scipy.stats import norm

from npamp.amp import SolverSettings
from npamp.errors import NumericalError
from npamp.simulate import (SCENARIO_NAMES, SimConfig, builtin_config,
                            generate_scenario, qq_export, resolve_jobs,
                            run_simulation)

TINY = dict(n=40, p=80, beta_support=3, replications=6,
            solver=SolverSettings(alpha_grid=(1.5,)))


def test_response_follows_model_identity():
    cfg = SimConfig(heteroscedastic=True, **TINY)
    data, truth = generate_scenario(cfg, 0)
    rng_err = np.random.default_rng([cfg.error_seed, 0])
    eps = cfg.error.sample(rng_err, cfg.n)
    expected = data.x @ truth.beta0 + (1.0 + data.x @ truth.gamma0) * eps
    np.testing.assert_array_equal(data.y, expected)


def test_null_scenario_has_zero_gamma():
    cfg = SimConfig(**TINY)
    _, truth = generate_scenario(cfg, 0)
    assert not truth.gamma_support.any()
    cfg_het = SimConfig(heteroscedastic=True, gamma_pattern=(2.0, -1.0),
                        **TINY)
    _, truth_het = generate_scenario(cfg_het, 0)
    assert truth_het.gamma_support.sum() == 2
    # disjoint supports by default
    assert not (truth_het.gamma_support & (truth_het.beta0 != 0.0)).any()


def test_error_seed_isolated_from_design():
    cfg_a = SimConfig(**TINY)
    cfg_b = SimConfig(error_seed=991, **TINY)
    data_a, truth_a = generate_scenario(cfg_a, 2)
    data_b, truth_b = generate_scenario(cfg_b, 2)
    np.testing.assert_array_equal(data_a.x, data_b.x)
    np.testing.assert_array_equal(truth_a.beta0, truth_b.beta0)
    np.testing.assert_array_equal(truth_a.gamma0, truth_b.gamma0)
    assert not np.array_equal(data_a.y, data_b.y)


def test_design_fixed_across_replications_unless_redrawn():
    cfg = SimConfig(**TINY)
    x0 = generate_scenario(cfg, 0)[0].x
    x5 = generate_scenario(cfg, 5)[0].x
    np.testing.assert_array_equal(x0, x5)
    cfg_redraw = SimConfig(redraw_design=True, **TINY)
    xa = generate_scenario(cfg_redraw, 0)[0].x
    xb = generate_scenario(cfg_redraw, 5)[0].x
    assert not np.array_equal(xa, xb)


def test_ar_design_has_requested_covariance():
    cfg = SimConfig(ar_rho=0.7, **dict(TINY, n=60, p=60, replications=1))
    data, _ = generate_scenario(cfg, 0)
    emp = data.x.T @ data.x  # E = Sigma / n summed over n rows -> Sigma
    lag1 = np.diag(emp, 1).mean() / np.diag(emp).mean()
    assert lag1 == pytest.approx(0.7, abs=0.12)


def test_run_simulation_deterministic():
    cfg = SimConfig(**TINY)
    r1 = run_simulation(cfg)
    r2 = run_simulation(cfg)
    np.testing.assert_array_equal(r1.p_values, r2.p_values)
    np.testing.assert_array_equal(r1.t_stats, r2.t_stats)
    assert r1.fp == r2.fp and r1.tp == r2.tp
    assert r1.to_dict(full=True) == r2.to_dict(full=True)


def test_worker_count_does_not_change_results():
    cfg = SimConfig(**TINY)
    serial = run_simulation(cfg, n_jobs=1)
    parallel = run_simulation(cfg, n_jobs=2)
    np.testing.assert_array_equal(serial.p_values, parallel.p_values)
    assert serial.to_dict(full=True) == parallel.to_dict(full=True)


def test_resolve_jobs_precedence(monkeypatch):
    monkeypatch.delenv("NPAMP_JOBS", raising=False)
    assert resolve_jobs() == 1
    assert resolve_jobs(3) == 3
    monkeypatch.setenv("NPAMP_JOBS", "4")
    assert resolve_jobs() == 4
    assert resolve_jobs(2) == 2


def test_null_run_aggregates_over_all_coordinates():
    cfg = SimConfig(**TINY)
    res = run_simulation(cfg)
    assert res.tp is None
    assert res.fp == pytest.approx(
        float((res.p_values <= cfg.test_alpha).mean()))
    assert res.p_values.shape == (cfg.replications, cfg.p)
    assert res.null_t_pooled.size == cfg.replications * cfg.p
    assert res.failures == 0
    assert res.replications_used == cfg.replications
    assert res.sigma_mean.shape == (2, 2)
    assert res.u_mean[0] < 0.0 < res.u_mean[1]


def test_het_run_splits_rates_by_support():
    cfg = SimConfig(heteroscedastic=True, gamma_pattern=(4.0, -4.0), **TINY)
    res = run_simulation(cfg)
    mask = res.gamma_support
    assert mask.sum() == 2
    reject = res.p_values <= cfg.test_alpha
    assert res.tp == pytest.approx(float(reject[:, mask].mean()))
    assert res.fp == pytest.approx(float(reject[:, ~mask].mean()))
    assert res.null_t_pooled.size == cfg.replications * (cfg.p - 2)


def test_too_many_failures_abort():
    # an absurd initial support fraction makes the slope equation unsolvable
    cfg = SimConfig(**dict(TINY, solver=SolverSettings(alpha_grid=(1.5,),
                                                       omega_init=0.95)))
    with pytest.raises(NumericalError):
        run_simulation(cfg)


def test_estimated_u_path_runs():
    cfg = SimConfig(use_true_u=False, **dict(TINY, replications=3))
    res = run_simulation(cfg)
    assert res.replications_used == 3
    # pilot-estimated expectiles should sit near the scaled normal values
    assert res.u_mean[0] == pytest.approx(-0.2746, abs=0.12)
    assert res.u_mean[1] == pytest.approx(0.2746, abs=0.12)


def test_report_dict_has_no_timing():
    res = run_simulation(SimConfig(**dict(TINY, replications=2)))
    assert res.elapsed_seconds > 0.0
    for full in (False, True):
        payload = res.to_dict(full)
        assert "elapsed_seconds" not in payload
        assert all(not key.startswith("elapsed") for key in payload)


def test_qq_export_pairs_sorted_values():
    rng = np.random.default_rng(8)
    values = rng.standard_normal(101)
    pairs = qq_export(values)
    assert pairs.shape == (101, 2)
    np.testing.assert_array_equal(pairs[:, 1], np.sort(values))
    expected = norm.ppf((np.arange(1, 102) - 0.5) / 101)
    np.testing.assert_allclose(pairs[:, 0], expected, atol=1e-12)
    with pytest.raises(ValueError):
        qq_export([])


def test_builtin_scenarios_instantiate():
    assert "null_normal" in SCENARIO_NAMES
    assert "het_t3" in SCENARIO_NAMES
    assert "ar_null_03" in SCENARIO_NAMES
    for name in SCENARIO_NAMES:
        for profile in ("desk", "paper"):
            cfg = builtin_config(name, profile)
            assert cfg.name == name
            if profile == "desk":
                assert (cfg.n, cfg.p, cfg.replications) == (100, 200, 100)
            else:
                assert (cfg.n, cfg.p, cfg.replications) == (250, 500, 400)
    assert builtin_config("medium_sparsity", "paper").beta_support == 50
    assert builtin_config("medium_sparsity", "desk").beta_support == 20
    assert builtin_config("high_sparsity", "paper").beta_support == 5
    assert builtin_config("ar_het_07", "desk").ar_rho == 0.7
    assert builtin_config("ar_het_07", "desk").decorrelate


def test_builtin_config_overrides_and_validation():
    cfg = builtin_config("null_normal", "desk", replications=7,
                         levels=(0.6, 0.8))
    assert cfg.replications == 7 and cfg.levels == (0.6, 0.8)
    with pytest.raises(ValueError):
        builtin_config("no_such_scenario")
    with pytest.raises(ValueError):
        builtin_config("null_normal", "huge")


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n=300, p=200)
    with pytest.raises(ValueError):
        SimConfig(levels=(0.5, 0.5))
    with pytest.raises(ValueError):
        SimConfig(levels=(0.2, 1.2))
    with pytest.raises(ValueError):
        SimConfig(test_alpha=0.0)
    with pytest.raises(ValueError):
        SimConfig(heteroscedastic=True, gamma_pattern=())
    with pytest.raises(ValueError):
        SimConfig(n=4, p=6, beta_support=3, heteroscedastic=True,
                  gamma_pattern=(1.0,) * 4)
    with pytest.raises(ValueError):
        SimConfig(beta_support=2, heteroscedastic=True, gamma_overlap=True,
                  gamma_pattern=(1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        SimConfig(ar_rho=1.0)
