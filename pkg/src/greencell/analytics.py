"""Downlink analytics: association split, success probability, rate, power.

All formulas condition on the battery-level classes of the base stations: a
level-i station advertises bias B_i, so the plane splits into T+1 thinned
point processes whose densities follow the battery marginals.  Success
probabilities reduce to one semi-infinite integral per tier; throughput needs
that integral across a whole threshold sweep, so a batched evaluation path
shares the quadrature grid over tiers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .numerics import (
    exp_power_integral_vec,
    hyp_one_one_neg,
    integrate_decaying,
    interference_factor,
    simpson_adaptive,
)

SUCCESS_TOL = 1e-9        # absolute tolerance of the success-probability integral
RATE_TOL = 1e-7           # tolerance of the outer throughput integral
RATE_T_CAP = 40.0         # hard upper limit of the rate integral (threshold 2^40)
RATE_TAIL_FRACTION = 1e-6 # stop once a panel adds less than this fraction


@dataclass(frozen=True)
class BiasVector:
    """Association biases B_0..B_T with B_0 = 1 as the reference class."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("bias vector must not be empty")
        if vals[0] != 1.0:
            raise ValueError(f"bias of the reference level must be exactly 1, got {vals[0]!r}")
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise ValueError("biases must be finite and positive")
        object.__setattr__(self, "values", vals)

    @classmethod
    def flat(cls, t_levels: int) -> "BiasVector":
        return cls((1.0,) * (t_levels + 1))

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class TierSplit:
    """Association probabilities and thinned densities per battery level."""

    p_assoc: np.ndarray
    lambda_tier: np.ndarray


def association_split(level_marginals, bias: BiasVector, cfg) -> TierSplit:
    """Probability that the typical user associates with each level class.

    Biased max-power association over ``T+1`` independent thinned Poisson
    layers: layer i wins with probability proportional to its density times
    its bias raised to 2/alpha.
    """
    pi = np.asarray(level_marginals, dtype=float)
    lam = cfg.lambda_b * pi
    weights = lam * bias.as_array() ** (2.0 / cfg.alpha)
    return TierSplit(p_assoc=weights / weights.sum(), lambda_tier=lam)


def interference_coefficient(i: int, level_marginals, bias: BiasVector, p_occu, cfg, tau: float | None = None) -> float:
    """Effective interferer density seen by a user served at level i.

    The geometric term counts every station of each class inside the serving
    class's distance scale; the fading term adds the classes' active-channel
    interference weighted by their occupancy.
    """
    if tau is None:
        tau = cfg.tau
    b = bias.as_array()
    lam = cfg.lambda_b * np.asarray(level_marginals, dtype=float)
    ratios = b / b[i]
    z = interference_factor(tau, cfg.alpha, ratios)
    return float((lam * (ratios ** (2.0 / cfg.alpha) + np.asarray(p_occu, float) * z)).sum())


def success_probability_tier(i: int, level_marginals, bias: BiasVector, p_occu, cfg, tau: float | None = None) -> float:
    """Success probability conditioned on being served by a level-i station.

    Direct adaptive quadrature of the noise-and-interference integral after
    the u = x^2 substitution.  Empty tiers (no stations at level i) have no
    conditional distribution; the probability is defined as 0 there.
    """
    if tau is None:
        tau = cfg.tau
    pi = np.asarray(level_marginals, dtype=float)
    if pi[i] == 0.0:
        return 0.0
    b = bias.as_array()
    lam = cfg.lambda_b * pi
    ratios = b / b[i]
    scale_i = float((lam * ratios ** (2.0 / cfg.alpha)).sum())
    c_i = interference_coefficient(i, level_marginals, bias, p_occu, cfg, tau)
    noise_coef = tau * cfg.noise_power / cfg.p_t
    decay = math.pi * c_i
    if noise_coef == 0.0:
        return min(1.0, scale_i / c_i)
    half_alpha = cfg.alpha / 2.0
    u_scale = min(1.0 / decay, noise_coef ** (-1.0 / half_alpha))
    integral = integrate_decaying(
        lambda u: np.exp(-noise_coef * u**half_alpha - decay * u),
        scale=u_scale,
        tol=SUCCESS_TOL,
    )
    return float(np.clip(math.pi * scale_i * integral, 0.0, 1.0))


def _success_grid(taus: np.ndarray, level_marginals, bias: BiasVector, p_occu, cfg) -> np.ndarray:
    """Success probability for every (threshold, tier) pair, shape (K, T+1).

    Shares one vectorized hypergeometric evaluation across the full grid and
    reduces each fading integral to the canonical exp(-kappa v^{alpha/2} - v)
    form, so sweeping thresholds costs a handful of array operations.
    """
    taus = np.asarray(taus, dtype=float)
    pi = np.asarray(level_marginals, dtype=float)
    b = bias.as_array()
    lam = cfg.lambda_b * pi
    p_occ = np.asarray(p_occu, dtype=float)
    ratios = b[None, :] / b[:, None]            # [i, j] = B_j / B_i
    geom = ratios ** (2.0 / cfg.alpha)
    scale = geom @ lam                          # per-tier total geometric weight

    y = taus[:, None, None] / ratios[None, :, :]
    f = hyp_one_one_neg(cfg.alpha, y.reshape(-1)).reshape(y.shape)
    z = (
        2.0
        * taus[:, None, None]
        / (cfg.alpha - 2.0)
        * ratios[None, :, :] ** (2.0 / cfg.alpha - 1.0)
        * f
    )
    c = scale[None, :] + z @ (lam * p_occ)      # (K, T+1)

    noise_coef = taus * cfg.noise_power / cfg.p_t
    half_alpha = cfg.alpha / 2.0
    kappa = noise_coef[:, None] / (math.pi * c) ** half_alpha
    g = exp_power_integral_vec(kappa.reshape(-1), half_alpha).reshape(kappa.shape)
    p = np.clip(scale[None, :] * g / c, 0.0, 1.0)
    p[:, pi == 0.0] = 0.0
    return p


def success_probability(level_marginals, bias: BiasVector, p_occu, cfg, tau: float | None = None):
    """Per-tier success probabilities and their association-weighted mixture."""
    if tau is None:
        tau = cfg.tau
    tier = _success_grid(np.array([tau]), level_marginals, bias, p_occu, cfg)[0]
    split = association_split(level_marginals, bias, cfg)
    return tier, float((tier * split.p_assoc).sum())


class UserComponents(NamedTuple):
    clustered: np.ndarray
    uniform: np.ndarray


def user_components(level_marginals, bias: BiasVector, cfg) -> UserComponents:
    """Mean clustered and uniform users per level-i station, separately."""
    pi = np.asarray(level_marginals, dtype=float)
    b = bias.as_array()
    weights = b ** (2.0 / cfg.alpha)
    denom = cfg.lambda_b * float((pi * weights).sum())
    clustered = cfg.lambda_p * cfg.mean_cluster_users * weights / denom
    uniform = cfg.lambda_u1 * weights / denom
    return UserComponents(clustered=clustered, uniform=uniform)


def average_users(level_marginals, bias: BiasVector, cfg) -> np.ndarray:
    """Mean number of users served by a station at each battery level."""
    comps = user_components(level_marginals, bias, cfg)
    return comps.clustered + comps.uniform


def throughput_time_integral(p_succ_fn: Callable[[float], float], tol: float = RATE_TOL,
                             t_cap: float = RATE_T_CAP, tail_frac: float = RATE_TAIL_FRACTION) -> float:
    """Integral of P_succ(2^t - 1) over t in [0, t_cap] with early truncation."""

    def integrand(ts: np.ndarray) -> np.ndarray:
        return np.array([p_succ_fn(2.0**t - 1.0) for t in np.atleast_1d(ts)])

    total = 0.0
    edge, width = 0.0, 2.0
    while edge < t_cap:
        part = simpson_adaptive(integrand, edge, min(edge + width, t_cap), tol)
        total += part
        edge += width
        if part < tail_frac * total:
            break
    return total


def expected_rate_tier(i: int, p_block_i: float, p_succ_fn: Callable[[float], float], cfg) -> float:
    """Expected per-user throughput at tier i, single-tier quadrature path."""
    admitted = 1.0 - p_block_i
    if admitted <= 0.0:
        return 0.0
    base = p_succ_fn(cfg.tau)
    if base == 0.0:
        return 0.0
    return cfg.rate_scale * admitted * base * throughput_time_integral(p_succ_fn)


def expected_rates(level_marginals, bias: BiasVector, p_occu, p_block, cfg):
    """Per-tier rates plus tier/mixture success at the configured threshold.

    Batched variant of :func:`expected_rate_tier`: all tiers share one
    adaptive grid over the threshold exponent, and the per-tier Simpson
    refinement criterion is applied to the whole vector at once.
    """

    def grid(ts: np.ndarray) -> np.ndarray:
        return _success_grid(2.0 ** np.atleast_1d(ts) - 1.0, level_marginals, bias, p_occu, cfg)

    pi = np.asarray(level_marginals, dtype=float)
    n_tiers = pi.size
    live = pi > 0.0
    totals = np.zeros(n_tiers)
    edge, width = 0.0, 2.0
    while edge < RATE_T_CAP:
        part = _simpson_panel_vec(grid, edge, min(edge + width, RATE_T_CAP), RATE_TOL)
        totals += part
        edge += width
        if live.any() and np.all(part[live] < RATE_TAIL_FRACTION * totals[live]):
            break

    tier_at_tau = _success_grid(np.array([cfg.tau]), level_marginals, bias, p_occu, cfg)[0]
    split = association_split(level_marginals, bias, cfg)
    p_succ = float((tier_at_tau * split.p_assoc).sum())
    rates = cfg.rate_scale * (1.0 - np.asarray(p_block, float)) * tier_at_tau * totals
    return rates, tier_at_tau, p_succ


def _simpson_panel_vec(fvec, a: float, b: float, tol: float, max_depth: int = 12) -> np.ndarray:
    """Adaptive Simpson on one panel for a vector-valued integrand."""
    x = np.linspace(a, b, 5)
    fx = fvec(x)
    s_prev = _composite_vec(fx[::2], (b - a) / 2.0)
    s = _composite_vec(fx, (b - a) / 4.0)
    for _ in range(max_depth):
        if np.abs(s - s_prev).max() < 15.0 * tol:
            return s + (s - s_prev) / 15.0
        mid = 0.5 * (x[:-1] + x[1:])
        fmid = fvec(mid)
        x_new = np.empty(x.size + mid.size)
        x_new[0::2], x_new[1::2] = x, mid
        f_new = np.empty((x_new.size,) + fx.shape[1:])
        f_new[0::2], f_new[1::2] = fx, fmid
        x, fx = x_new, f_new
        s_prev, s = s, _composite_vec(fx, x[1] - x[0])
    return s


def _composite_vec(values: np.ndarray, h: float) -> np.ndarray:
    return h / 3.0 * (
        values[0] + values[-1] + 4.0 * values[1:-1:2].sum(axis=0) + 2.0 * values[2:-2:2].sum(axis=0)
    )


def area_throughput(users, rho, rate_tier, p_assoc, cfg) -> float:
    """Area throughput: per-tier user rates weighted by activity and share.

    The activity ratio rho_i / U_i is 1 under the identity arrival map;
    tiers with no users contribute nothing.
    """
    users = np.asarray(users, dtype=float)
    rho = np.asarray(rho, dtype=float)
    safe = np.where(users > 0.0, users, 1.0)
    terms = np.where(users > 0.0, rho / safe * np.asarray(rate_tier, float) * np.asarray(p_assoc, float), 0.0)
    return float(cfg.user_arrival_density * terms.sum())


class PowerCarbon(NamedTuple):
    p_tot: float
    p_grid: float
    e_tot: float


def power_and_carbon(level_marginals, lm, cfg) -> PowerCarbon:
    """Area power draw, its grid-powered share, and carbon emission.

    Only level-0 stations fall back to the grid; everything else runs on the
    harvested supply, whose carbon intensity is usually zero.
    """
    pi = np.asarray(level_marginals, dtype=float)
    lam = cfg.lambda_b * pi
    p_levels = cfg.p0_static + cfg.delta_p * cfg.p_t * np.asarray(lm.n_mean, float)
    p_tot = float((p_levels * lam).sum())
    p_grid = float(p_levels[0] * lam[0])
    e_tot = (p_grid * cfg.xi_grid + float((p_levels[1:] * lam[1:]).sum()) * cfg.xi_re) * cfg.delta_t
    return PowerCarbon(p_tot=p_tot, p_grid=p_grid, e_tot=e_tot)


def efficiencies(area_rate: float, p_tot: float, e_tot: float, cfg) -> tuple[float, float]:
    """Energy efficiency and carbon efficiency; zero rate yields (0, 0)."""
    if area_rate == 0.0:
        return 0.0, 0.0
    eta_ee = area_rate / p_tot
    eta_ce = area_rate * cfg.delta_t / e_tot if e_tot > 0.0 else math.inf
    return eta_ee, eta_ce


@dataclass(frozen=True)
class NetworkMetrics:
    """Everything downstream reporting needs for one (config, bias) point."""

    p_succ_tier: np.ndarray
    p_succ: float
    rate_tier: np.ndarray
    area_rate: float
    p_tot: float
    p_grid: float
    e_tot: float
    eta_ee: float
    eta_ce: float


def compute_metrics(cfg, bias: BiasVector, level_marginals, rho, lm) -> NetworkMetrics:
    """Full analytic pipeline downstream of a chain solution."""
    split = association_split(level_marginals, bias, cfg)
    rates, tier_at_tau, p_succ = expected_rates(level_marginals, bias, lm.p_occu, lm.p_block, cfg)
    users = average_users(level_marginals, bias, cfg)
    area = area_throughput(users, rho, rates, split.p_assoc, cfg)
    power = power_and_carbon(level_marginals, lm, cfg)
    eta_ee, eta_ce = efficiencies(area, power.p_tot, power.e_tot, cfg)
    return NetworkMetrics(
        p_succ_tier=tier_at_tau,
        p_succ=p_succ,
        rate_tier=rates,
        area_rate=area,
        p_tot=power.p_tot,
        p_grid=power.p_grid,
        e_tot=power.e_tot,
        eta_ee=eta_ee,
        eta_ce=eta_ce,
    )
