import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from greencell import optimizer
from greencell.analytics import BiasVector, compute_metrics
from greencell.optimizer import (
    GaConfig,
    POWER_GRID_DEFAULT,
    _crossover,
    _ga_stream,
    _level_bands,
    _mutate,
    _roulette,
    _seed_population,
    beta_sweep,
    compare_schemes,
    evaluate_bias,
    ga_optimize,
    power_law_bias,
)
from greencell.qbd import SolverError


def test_power_law_bias_values():
    assert power_law_bias(2.0, 3).values == (1.0, 4.0, 9.0, 16.0)
    assert power_law_bias(0.0, 3).values == (1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        power_law_bias(-0.5, 3)


def test_evaluate_bias_consistency(small_cfg):
    bias = power_law_bias(1.0, small_cfg.t_levels)
    metrics, fp = evaluate_bias(small_cfg, bias)
    assert fp.converged
    direct = compute_metrics(small_cfg, bias, fp.level_marginals, fp.rho, fp.chain_metrics)
    assert metrics.eta_ce == pytest.approx(direct.eta_ce, rel=1e-12)
    assert metrics.p_succ == pytest.approx(direct.p_succ, rel=1e-12)


class TestBetaSweep:
    def test_grid_shape_and_order(self, small_cfg):
        points = beta_sweep(small_cfg, betas=[0.0, 1.0], nus=[40.0, 44.0])
        assert [(p.beta, p.nu) for p in points] == [
            (0.0, 40.0), (1.0, 40.0), (0.0, 44.0), (1.0, 44.0)
        ]
        assert all(p.converged and p.metrics is not None for p in points)

    def test_nu_override_changes_metrics(self, small_cfg):
        lo, hi = beta_sweep(small_cfg, betas=[1.0], nus=[30.0, 50.0])
        assert lo.metrics.e_tot > hi.metrics.e_tot
        assert small_cfg.nu == 40.0  # original config untouched

    def test_default_nu_comes_from_config(self, small_cfg):
        (point,) = beta_sweep(small_cfg, betas=[0.5])
        assert point.nu == small_cfg.nu

    def test_solver_failure_is_captured(self, small_cfg, monkeypatch):
        real = evaluate_bias

        def flaky(cfg, bias, **kw):
            if bias.values[-1] > 1.0:
                raise SolverError("synthetic failure")
            return real(cfg, bias, **kw)

        monkeypatch.setattr(optimizer, "evaluate_bias", flaky)
        ok, bad = beta_sweep(small_cfg, betas=[0.0, 1.0])
        assert ok.metrics is not None and ok.error is None
        assert bad.metrics is None and not bad.converged
        assert "synthetic failure" in bad.error


@pytest.mark.parametrize(
    "kwargs",
    [
        {"pop_size": 1},
        {"max_iters": -1},
        {"p_mutation": 1.5},
        {"p_crossover": -0.1},
        {"b_min": 0.0},
        {"b_min": 2.0},
        {"b_max": 0.5},
        {"penalty": 0.0},
    ],
)
def test_ga_config_validation(kwargs):
    with pytest.raises(ValueError):
        GaConfig(**kwargs)


def test_seed_population_contents(small_cfg):
    ga = GaConfig(pop_size=12, b_min=1.0, b_max=64.0)
    pop = _seed_population(small_cfg, ga, _ga_stream(0, 0))
    assert len(pop) == 12
    assert all(b.values[0] == 1.0 for b in pop)
    assert all(ga.b_min <= g <= ga.b_max for b in pop for g in b.values[1:])
    # The flat (nearest-station) profile is part of the seed grid.
    assert any(b.values == (1.0,) * 4 for b in pop)
    # With T = 3 the in-bounds power laws are beta = 0 .. 3 ((T+1)^beta <= 64).
    grid = [b for beta in POWER_GRID_DEFAULT
            if all(1.0 <= (i + 1) ** beta <= 64.0 for i in range(4))
            for b in [power_law_bias(beta, 3)]]
    assert pop[: len(grid)] == grid


def test_seed_population_tight_bounds(small_cfg):
    # Bounds that exclude every non-flat power law still fill with randoms.
    ga = GaConfig(pop_size=5, b_min=1.0, b_max=1.5)
    pop = _seed_population(small_cfg, ga, _ga_stream(3, 0))
    assert len(pop) == 5
    assert all(1.0 <= g <= 1.5 for b in pop for g in b.values[1:])


@given(seed=st.integers(0, 1000))
def test_crossover_preserves_pinned_gene_and_bounds(seed):
    rng = _ga_stream(seed, 1)
    a = BiasVector((1.0, 2.0, 3.0, 4.0))
    b = BiasVector((1.0, 20.0, 30.0, 40.0))
    c1, c2 = _crossover(rng, a, b, p_cross=1.0)
    assert c1.values[0] == 1.0 and c2.values[0] == 1.0
    # Children are prefix/suffix splices of the parents at one point.
    joined = sorted(c1.values[1:] + c2.values[1:])
    assert joined == sorted(a.values[1:] + b.values[1:])


@given(seed=st.integers(0, 1000))
def test_mutation_respects_bounds(seed):
    rng = _ga_stream(seed, 2)
    ga = GaConfig(b_min=0.5, b_max=8.0, p_mutation=1.0)
    out = _mutate(rng, BiasVector((1.0, 2.0, 2.0, 2.0)), ga)
    assert out.values[0] == 1.0
    assert all(0.5 <= g <= 8.0 for g in out.values[1:])
    # Exactly one gene changed.
    assert sum(g != 2.0 for g in out.values[1:]) == 1


def test_crossover_noop_without_draw():
    rng = _ga_stream(0, 5)
    a = BiasVector((1.0, 2.0))
    b = BiasVector((1.0, 3.0))
    c1, c2 = _crossover(rng, a, b, p_cross=0.0)
    assert (c1, c2) == (a, b)


def test_roulette_indices_valid_and_fallback():
    rng = _ga_stream(1, 1)
    fitness = np.array([1.0, 2.0, 3.0])
    idx = _roulette(rng, fitness, 20)
    assert idx.shape == (20,)
    assert ((0 <= idx) & (idx < 3)).all()
    # Degenerate fitness falls back to uniform draws instead of dividing by 0.
    idx = _roulette(rng, np.array([-math.inf, -math.inf]), 10)
    assert ((0 <= idx) & (idx < 2)).all()


class TestGaOptimize:
    def test_tiny_run_structure_and_determinism(self, small_cfg):
        ga = GaConfig(pop_size=6, max_iters=3, seed=0)
        res1 = ga_optimize(small_cfg, ga)
        res2 = ga_optimize(small_cfg, ga)
        assert res1.best.bias == res2.best.bias
        assert res1.best.fitness == res2.best.fitness
        assert len(res1.history) == 4
        assert res1.n_evaluations == 6 + 3 * 6
        # Elitist selection: the (feasible, fitness) rank never degrades.
        keys = [(h.best_feasible, h.best_fitness) for h in res1.history]
        assert all(keys[i + 1] >= keys[i] for i in range(len(keys) - 1))

    def test_seeded_start_dominates_power_grid(self, small_cfg):
        # Generation 0 already contains the power-law profiles, so the best
        # fitness starts at least at the best in-bounds power law's value.
        ga = GaConfig(pop_size=8, max_iters=0, seed=1)
        res = ga_optimize(small_cfg, ga)
        etas = []
        for beta in (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0):
            metrics, fp = evaluate_bias(small_cfg, power_law_bias(beta, 3))
            if fp.converged and metrics.p_succ > small_cfg.p_req:
                etas.append(metrics.eta_ce)
        if etas and res.feasible_found:
            assert res.best.fitness >= max(etas) - 1e-9


def test_level_bands():
    assert _level_bands(10) == (3, 7)
    assert _level_bands(3) == (1, 3)
    assert _level_bands(1) == (1, 1)


def test_compare_schemes_tiny(small_cfg):
    ga = GaConfig(pop_size=6, max_iters=2, seed=0)
    result = compare_schemes(small_cfg, ga, betas=(0.0, 1.0, 2.0))
    assert [r.name.split("_beta_")[0] for r in result.rows] == ["nearest", "power_law", "ga"]
    nearest, power, ga_row = result.rows
    assert nearest.bias.values == (1.0,) * 4
    assert nearest.delta_e_tot_pct == pytest.approx(0.0, abs=1e-12)
    assert nearest.delta_eta_ce_pct == pytest.approx(0.0, abs=1e-12)
    for row in result.rows:
        if row.converged:
            assert row.share_low + row.share_mid + row.share_high == pytest.approx(1.0, abs=1e-9)
    assert result.ga_result is not None
    assert ga_row.feasible == result.ga_result.best.feasible
    # Deltas agree with the raw metrics.
    assert power.delta_e_tot_pct == pytest.approx(
        100.0 * (1.0 - power.metrics.e_tot / nearest.metrics.e_tot), rel=1e-12
    )
