import dataclasses
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from greencell.analytics import (
    BiasVector,
    area_throughput,
    association_split,
    average_users,
    compute_metrics,
    efficiencies,
    expected_rate_tier,
    expected_rates,
    interference_coefficient,
    power_and_carbon,
    success_probability,
    success_probability_tier,
    throughput_time_integral,
    user_components,
    _success_grid,
)

from oracles import midpoint


class TestBiasVector:
    def test_flat_and_len(self):
        b = BiasVector.flat(3)
        assert b.values == (1.0, 1.0, 1.0, 1.0)
        assert len(b) == 4
        np.testing.assert_array_equal(b.as_array(), np.ones(4))

    @pytest.mark.parametrize(
        "values", [(), (2.0, 1.0), (1.0, -3.0), (1.0, 0.0), (1.0, math.nan), (1.0, math.inf)]
    )
    def test_rejects_bad_vectors(self, values):
        with pytest.raises(ValueError):
            BiasVector(values)


def test_association_split_two_level_oracle(small_cfg):
    # pi = (1/2, 1/2), alpha = 4, biases (1, 16): weights (1/2, 1/2 * 4)
    cfg = dataclasses.replace(small_cfg, t_levels=1)
    split = association_split([0.5, 0.5], BiasVector((1.0, 16.0)), cfg)
    np.testing.assert_allclose(split.p_assoc, [0.2, 0.8], rtol=1e-14)
    np.testing.assert_allclose(split.lambda_tier, [0.5, 0.5], rtol=1e-14)


@given(
    raw=st.lists(st.floats(1e-3, 1.0), min_size=4, max_size=4),
    biases=st.lists(st.floats(0.1, 50.0), min_size=3, max_size=3),
)
def test_association_split_is_a_distribution(small_cfg, raw, biases):
    pi = np.array(raw) / sum(raw)
    split = association_split(pi, BiasVector((1.0, *biases)), small_cfg)
    assert split.p_assoc.sum() == pytest.approx(1.0, abs=1e-12)
    assert (split.p_assoc >= 0).all()


def test_interference_coefficient_reductions(small_cfg):
    pi = np.full(4, 0.25)
    bias = BiasVector.flat(3)
    # No active interferers: only the geometric term survives.
    assert interference_coefficient(0, pi, bias, np.zeros(4), small_cfg) == pytest.approx(
        small_cfg.lambda_b, rel=1e-13
    )
    # Fully occupied uniform network at tau = 1, alpha = 4: lambda (1 + pi/4).
    assert interference_coefficient(2, pi, bias, np.ones(4), small_cfg, tau=1.0) == pytest.approx(
        small_cfg.lambda_b * (1.0 + math.pi / 4.0), rel=1e-13
    )
    # Zero threshold kills the fading term regardless of occupancy.
    assert interference_coefficient(1, pi, bias, np.ones(4), small_cfg, tau=0.0) == pytest.approx(
        small_cfg.lambda_b, rel=1e-13
    )


class TestSuccessProbability:
    def test_zero_noise_closed_forms(self, small_cfg):
        cfg = dataclasses.replace(small_cfg, noise_power=0.0)
        pi = np.full(4, 0.25)
        bias = BiasVector.flat(3)
        occ = np.ones(4)
        tier, mixed = success_probability(pi, bias, occ, cfg, tau=1.0)
        np.testing.assert_allclose(tier, 1.0 / (1.0 + math.pi / 4.0), rtol=1e-9)
        assert mixed == pytest.approx(0.5600991535115574, rel=1e-9)
        _, mixed_low = success_probability(pi, bias, occ, cfg, tau=0.1)
        assert mixed_low == pytest.approx(0.9116988582913963, rel=1e-9)

    def test_zero_threshold_is_certain_success(self, small_cfg):
        pi = np.array([0.4, 0.3, 0.2, 0.1])
        bias = BiasVector((1.0, 2.0, 4.0, 8.0))
        tier, mixed = success_probability(pi, bias, np.full(4, 0.5), small_cfg, tau=0.0)
        np.testing.assert_allclose(tier, 1.0, atol=1e-12)
        assert mixed == pytest.approx(1.0, abs=1e-12)

    def test_empty_tier_reports_zero(self, small_cfg):
        pi = np.array([0.0, 0.5, 0.3, 0.2])
        bias = BiasVector((1.0, 1.5, 2.0, 3.0))
        occ = np.full(4, 0.3)
        assert success_probability_tier(0, pi, bias, occ, small_cfg) == 0.0
        tier, _ = success_probability(pi, bias, occ, small_cfg)
        assert tier[0] == 0.0

    def test_noisy_tier_against_midpoint(self, small_cfg):
        cfg = dataclasses.replace(small_cfg, noise_power=0.5, tau=1.0)
        pi = np.array([0.4, 0.3, 0.2, 0.1])
        bias = BiasVector((1.0, 2.0, 4.0, 8.0))
        occ = np.array([0.6, 0.5, 0.4, 0.3])
        i = 1
        b = bias.as_array()
        lam = cfg.lambda_b * pi
        ratios = b / b[i]
        scale = float((lam * ratios ** (2.0 / cfg.alpha)).sum())
        c = interference_coefficient(i, pi, bias, occ, cfg)
        noise_coef = cfg.tau * cfg.noise_power / cfg.p_t
        ref = math.pi * scale * midpoint(
            lambda u: np.exp(-noise_coef * u ** (cfg.alpha / 2.0) - math.pi * c * u),
            0.0,
            30.0 / (math.pi * c),
            400_000,
        )
        assert success_probability_tier(i, pi, bias, occ, cfg) == pytest.approx(ref, rel=1e-6)

    def test_grid_matches_scalar_path(self, small_cfg):
        pi = np.array([0.4, 0.3, 0.2, 0.1])
        bias = BiasVector((1.0, 2.0, 4.0, 8.0))
        occ = np.array([0.6, 0.5, 0.4, 0.3])
        taus = np.array([0.05, 0.1, 1.0, 5.0])
        grid = _success_grid(taus, pi, bias, occ, small_cfg)
        for k, tau in enumerate(taus):
            for i in range(4):
                scalar = success_probability_tier(i, pi, bias, occ, small_cfg, tau=tau)
                assert grid[k, i] == pytest.approx(scalar, abs=5e-8)


class TestUsers:
    def test_flat_bias_closed_form(self, small_cfg):
        # Flat biases make every level identical: density ratio lambda_U / lambda_B.
        pi = np.array([0.1, 0.2, 0.3, 0.4])
        users = average_users(pi, BiasVector.flat(3), small_cfg)
        np.testing.assert_allclose(users, 17.566370614359176, rtol=1e-13)

    def test_components_sum(self, small_cfg):
        pi = np.array([0.25, 0.25, 0.25, 0.25])
        bias = BiasVector((1.0, 3.0, 9.0, 27.0))
        comps = user_components(pi, bias, small_cfg)
        np.testing.assert_allclose(
            comps.clustered + comps.uniform, average_users(pi, bias, small_cfg), rtol=1e-14
        )

    @given(biases=st.lists(st.floats(0.2, 20.0), min_size=3, max_size=3))
    def test_density_conservation(self, small_cfg, biases):
        # Total served user density equals the arrival density for any bias.
        pi = np.array([0.4, 0.1, 0.2, 0.3])
        users = average_users(pi, BiasVector((1.0, *biases)), small_cfg)
        served = (small_cfg.lambda_b * pi * users).sum()
        assert served == pytest.approx(small_cfg.user_arrival_density, rel=1e-12)


def test_throughput_time_integral_known_function():
    # P_succ(tau) = exp(-tau) gives Integral exp(1 - 2^t) dt.
    ref = midpoint(lambda t: np.exp(1.0 - 2.0**t), 0.0, 40.0, 400_000)
    got = throughput_time_integral(lambda tau: math.exp(-tau), tol=1e-9)
    assert got == pytest.approx(ref, rel=1e-6)


class TestExpectedRates:
    def test_batched_matches_single_tier(self, small_cfg):
        pi = np.array([0.4, 0.3, 0.2, 0.1])
        bias = BiasVector((1.0, 2.0, 4.0, 8.0))
        occ = np.array([0.5, 0.4, 0.3, 0.2])
        block = np.array([0.1, 0.05, 0.02, 0.01])
        rates, tier, p_succ = expected_rates(pi, bias, occ, block, small_cfg)
        i = 1
        fn = lambda t: success_probability_tier(i, pi, bias, occ, small_cfg, tau=t)
        ref = expected_rate_tier(i, float(block[i]), fn, small_cfg)
        assert rates[i] == pytest.approx(ref, rel=1e-6)
        assert tier[i] == pytest.approx(fn(small_cfg.tau), abs=5e-8)
        split = association_split(pi, bias, small_cfg)
        assert p_succ == pytest.approx(float((tier * split.p_assoc).sum()), rel=1e-12)

    def test_full_blocking_kills_rate(self, small_cfg):
        fn = lambda t: 0.9
        assert expected_rate_tier(0, 1.0, fn, small_cfg) == 0.0
        pi = np.full(4, 0.25)
        rates, _, _ = expected_rates(pi, BiasVector.flat(3), np.full(4, 0.3), np.ones(4), small_cfg)
        np.testing.assert_array_equal(rates, np.zeros(4))

    def test_rate_scale_is_linear(self, small_cfg):
        pi = np.full(4, 0.25)
        bias = BiasVector.flat(3)
        occ = np.full(4, 0.3)
        block = np.full(4, 0.1)
        base, _, _ = expected_rates(pi, bias, occ, block, small_cfg)
        scaled_cfg = dataclasses.replace(small_cfg, rate_scale=2.5)
        scaled, _, _ = expected_rates(pi, bias, occ, block, scaled_cfg)
        np.testing.assert_allclose(scaled, 2.5 * base, rtol=1e-12)


def test_area_throughput_activity_weighting(small_cfg):
    users = np.array([2.0, 4.0, 0.0, 1.0])
    rho = np.array([1.0, 4.0, 0.0, 0.5])
    rate = np.array([0.3, 0.2, 0.9, 0.1])
    share = np.array([0.25, 0.25, 0.25, 0.25])
    # Tiers weight by rho/U; the empty tier contributes nothing.
    expected = small_cfg.user_arrival_density * (
        0.5 * 0.3 * 0.25 + 1.0 * 0.2 * 0.25 + 0.5 * 0.1 * 0.25
    )
    assert area_throughput(users, rho, rate, share, small_cfg) == pytest.approx(expected, rel=1e-12)


class TestPowerAndCarbon:
    def test_hand_values(self, small_cfg):
        cfg = dataclasses.replace(small_cfg, t_levels=1)
        lm = SimpleNamespace(n_mean=np.array([2.0, 1.0]))
        pi = np.array([0.5, 0.5])
        p0, p1 = (
            cfg.p0_static + cfg.delta_p * cfg.p_t * 2.0,
            cfg.p0_static + cfg.delta_p * cfg.p_t * 1.0,
        )
        out = power_and_carbon(pi, lm, cfg)
        assert out.p_tot == pytest.approx(0.5 * (p0 + p1) * cfg.lambda_b, rel=1e-13)
        assert out.p_grid == pytest.approx(0.5 * p0 * cfg.lambda_b, rel=1e-13)
        assert out.e_tot == pytest.approx(out.p_grid * cfg.xi_grid * cfg.delta_t, rel=1e-13)

    def test_renewable_intensity_term(self, small_cfg):
        cfg = dataclasses.replace(small_cfg, t_levels=1, xi_re=2e-5)
        lm = SimpleNamespace(n_mean=np.array([0.0, 3.0]))
        pi = np.array([0.25, 0.75])
        out = power_and_carbon(pi, lm, cfg)
        p1 = cfg.p0_static + cfg.delta_p * cfg.p_t * 3.0
        expected = (out.p_grid * cfg.xi_grid + 0.75 * p1 * cfg.lambda_b * 2e-5) * cfg.delta_t
        assert out.e_tot == pytest.approx(expected, rel=1e-13)

    def test_accounting_interval_linearity(self, small_cfg):
        lm = SimpleNamespace(n_mean=np.array([1.0, 2.0, 3.0, 4.0]))
        pi = np.full(4, 0.25)
        base = power_and_carbon(pi, lm, small_cfg)
        doubled = power_and_carbon(pi, lm, dataclasses.replace(small_cfg, delta_t=2.0))
        assert doubled.e_tot == pytest.approx(2.0 * base.e_tot, rel=1e-13)
        assert doubled.p_tot == pytest.approx(base.p_tot, rel=1e-13)


def test_efficiencies_edge_cases(small_cfg):
    assert efficiencies(0.0, 5.0, 2.0, small_cfg) == (0.0, 0.0)
    eta_ee, eta_ce = efficiencies(3.0, 6.0, 0.0, small_cfg)
    assert eta_ee == pytest.approx(0.5)
    assert math.isinf(eta_ce)
    eta_ee, eta_ce = efficiencies(3.0, 6.0, 1.5, small_cfg)
    assert eta_ee == pytest.approx(0.5)
    assert eta_ce == pytest.approx(3.0 * small_cfg.delta_t / 1.5)


def test_compute_metrics_cross_consistency(small_cfg):
    pi = np.array([0.1, 0.2, 0.3, 0.4])
    bias = BiasVector((1.0, 2.0, 4.0, 8.0))
    lm = SimpleNamespace(
        n_mean=np.array([1.0, 1.5, 2.0, 2.5]),
        p_occu=np.array([0.25, 0.375, 0.5, 0.625]),
        p_block=np.array([0.08, 0.05, 0.03, 0.02]),
    )
    users = average_users(pi, bias, small_cfg)
    m = compute_metrics(small_cfg, bias, pi, users, lm)
    split = association_split(pi, bias, small_cfg)
    assert m.p_succ == pytest.approx(float((m.p_succ_tier * split.p_assoc).sum()), rel=1e-12)
    assert m.eta_ee == pytest.approx(m.area_rate / m.p_tot, rel=1e-12)
    assert m.eta_ce == pytest.approx(m.area_rate * small_cfg.delta_t / m.e_tot, rel=1e-12)
    assert m.p_grid < m.p_tot
    assert m.e_tot > 0
    assert m.rate_tier.shape == (4,)
    assert 0.0 < m.p_succ < 1.0
