"""Spatial Monte-Carlo oracle for association, user-count, and SINR formulas.

Each drop samples one snapshot of the network inside a disc window with the
typical user at the origin: station positions and battery levels, hotspot
centers with their clustered users, uniformly spread users.  Per-drop RNG
streams are counter-based (Philox keyed by seed and drop index), so results
are reproducible and independent of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_KEY_MASK = (1 << 64) - 1


def _stream(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed & _KEY_MASK, index & _KEY_MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def default_window(cfg) -> float:
    """Default simulation disc radius, well past the edge-effect guard."""
    return 15.0 / math.sqrt(math.pi * cfg.lambda_b)


def min_window(cfg) -> float:
    return 10.0 / math.sqrt(math.pi * cfg.lambda_b)


def _disc_points(rng: np.random.Generator, n: int, radius: float, center=None) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    ang = 2.0 * math.pi * rng.random(n)
    pts = np.column_stack((r * np.cos(ang), r * np.sin(ang)))
    if center is not None:
        pts += center
    return pts


@dataclass
class Realization:
    """One sampled network snapshot inside the window disc."""

    bs_xy: np.ndarray          # (n_bs, 2)
    bs_levels: np.ndarray      # (n_bs,) battery level per station
    hotspot_xy: np.ndarray     # (n_hot, 2)
    clustered_xy: np.ndarray   # (n_cl, 2) users within hotspot radius of parent
    cluster_parent: np.ndarray # (n_cl,) index into hotspot_xy
    uniform_xy: np.ndarray     # (n_uni, 2)
    window_radius: float


def sample_realization(cfg, level_marginals, r_sim: float | None = None,
                       seed: int = 0, rng: np.random.Generator | None = None) -> Realization:
    """Draw one snapshot; all counts Poisson, all positions disc-uniform.

    Draw order is fixed (station count, positions, levels; hotspot count,
    positions, per-hotspot user counts, offsets; uniform count, positions),
    which is what makes seeded runs bit-reproducible.
    """
    if r_sim is None:
        r_sim = default_window(cfg)
    if r_sim < min_window(cfg):
        raise ValueError(
            f"window radius {r_sim:.3f} below edge-effect guard {min_window(cfg):.3f}"
        )
    if rng is None:
        rng = _stream(seed, 0)
    pi = np.asarray(level_marginals, dtype=float)
    area = math.pi * r_sim**2

    n_bs = rng.poisson(cfg.lambda_b * area)
    bs_xy = _disc_points(rng, n_bs, r_sim)
    cum = np.cumsum(pi)
    cum[-1] = 1.0
    bs_levels = np.searchsorted(cum, rng.random(n_bs), side="right")

    n_hot = rng.poisson(cfg.lambda_p * area)
    hotspot_xy = _disc_points(rng, n_hot, r_sim)
    per_hot = rng.poisson(cfg.mean_cluster_users, size=n_hot)
    cluster_parent = np.repeat(np.arange(n_hot), per_hot)
    offsets = _disc_points(rng, int(per_hot.sum()), cfg.hotspot_radius)
    clustered_xy = hotspot_xy[cluster_parent] + offsets if n_hot else offsets

    n_uni = rng.poisson(cfg.lambda_u1 * area)
    uniform_xy = _disc_points(rng, n_uni, r_sim)

    return Realization(
        bs_xy=bs_xy,
        bs_levels=bs_levels,
        hotspot_xy=hotspot_xy,
        clustered_xy=clustered_xy,
        cluster_parent=cluster_parent,
        uniform_xy=uniform_xy,
        window_radius=r_sim,
    )


@dataclass
class McEstimate:
    mean: float
    half_width_95: float
    n_samples: int
    seed: int


def estimate_success(cfg, level_marginals, bias, p_occu, n_drops: int,
                     seed: int = 0, r_sim: float | None = None) -> McEstimate:
    """Empirical success probability of the typical user at the origin.

    Serving station maximizes bias times long-term received power (the shared
    transmit power cancels); every other station interferes independently
    with its level's occupancy probability; all links fade exponentially.
    Only the station pattern matters here, so user processes are not drawn.
    A drop with an empty window counts as failure.
    """
    if n_drops < 1:
        raise ValueError("need at least one drop")
    if r_sim is None:
        r_sim = default_window(cfg)
    if r_sim < min_window(cfg):
        raise ValueError(
            f"window radius {r_sim:.3f} below edge-effect guard {min_window(cfg):.3f}"
        )
    pi = np.asarray(level_marginals, dtype=float)
    cum = np.cumsum(pi)
    cum[-1] = 1.0
    b = np.asarray(bias.values if hasattr(bias, "values") else bias, dtype=float)
    occ = np.asarray(p_occu, dtype=float)
    lam_area = cfg.lambda_b * math.pi * r_sim**2
    half_alpha = cfg.alpha / 2.0

    hits = np.zeros(n_drops)
    for d in range(n_drops):
        rng = _stream(seed, d)
        n = rng.poisson(lam_area)
        if n == 0:
            continue
        r2 = r_sim**2 * rng.random(n)
        levels = np.searchsorted(cum, rng.random(n), side="right")
        path = r2 ** (-half_alpha)
        serving = int(np.argmax(b[levels] * path))
        fading = rng.standard_exponential(n)
        active = rng.random(n) < occ[levels]
        active[serving] = False
        interference = cfg.p_t * float((fading[active] * path[active]).sum())
        signal = cfg.p_t * fading[serving] * path[serving]
        if signal > cfg.tau * (cfg.noise_power + interference):
            hits[d] = 1.0
    mean = float(hits.mean())
    std = float(hits.std(ddof=1)) if n_drops > 1 else 0.0
    return McEstimate(
        mean=mean,
        half_width_95=1.96 * std / math.sqrt(n_drops),
        n_samples=n_drops,
        seed=seed,
    )


@dataclass
class SharesEstimate:
    """Empirical association shares and users-per-station, by battery level."""

    assoc_share: np.ndarray
    assoc_share_half_width: np.ndarray
    users_per_bs: np.ndarray
    users_per_bs_half_width: np.ndarray
    n_samples: int
    seed: int


def estimate_shares(cfg, level_marginals, bias, n_drops: int,
                    seed: int = 0, r_sim: float | None = None) -> SharesEstimate:
    """Empirical association split and per-station load.

    Uniform users pick their own serving station; clustered users inherit
    their hotspot center's choice, so a whole cluster lands on one station.
    Drops with no stations or no users are skipped for the affected
    statistic.
    """
    if r_sim is None:
        r_sim = default_window(cfg)
    pi = np.asarray(level_marginals, dtype=float)
    n_levels = pi.size
    b = np.asarray(bias.values if hasattr(bias, "values") else bias, dtype=float)
    half_alpha = cfg.alpha / 2.0

    share_rows = np.full((n_drops, n_levels), np.nan)
    upb_rows = np.full((n_drops, n_levels), np.nan)
    for d in range(n_drops):
        rng = _stream(seed, d)
        real = sample_realization(cfg, pi, r_sim=r_sim, rng=rng)
        if real.bs_xy.shape[0] == 0:
            continue
        weights = b[real.bs_levels]

        def serving_levels(points: np.ndarray) -> np.ndarray:
            if points.shape[0] == 0:
                return np.empty(0, dtype=int)
            d2 = ((points[:, None, :] - real.bs_xy[None, :, :]) ** 2).sum(axis=2)
            choice = np.argmax(weights[None, :] * d2 ** (-half_alpha), axis=1)
            return real.bs_levels[choice]

        uni_levels = serving_levels(real.uniform_xy)
        center_levels = serving_levels(real.hotspot_xy)
        cl_levels = center_levels[real.cluster_parent] if real.cluster_parent.size else np.empty(0, dtype=int)

        counts = np.bincount(uni_levels, minlength=n_levels) + np.bincount(
            cl_levels, minlength=n_levels
        )
        total_users = counts.sum()
        if total_users > 0:
            share_rows[d] = counts / total_users
        bs_counts = np.bincount(real.bs_levels, minlength=n_levels)
        present = bs_counts > 0
        upb_rows[d, present] = counts[present] / bs_counts[present]

    def reduce(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n_valid = np.sum(~np.isnan(rows), axis=0)
        mean = np.nanmean(rows, axis=0)
        std = np.nanstd(rows, axis=0, ddof=1)
        half = 1.96 * std / np.sqrt(np.maximum(n_valid, 1))
        return mean, half

    share_mean, share_half = reduce(share_rows)
    upb_mean, upb_half = reduce(upb_rows)
    return SharesEstimate(
        assoc_share=share_mean,
        assoc_share_half_width=share_half,
        users_per_bs=upb_mean,
        users_per_bs_half_width=upb_half,
        n_samples=n_drops,
        seed=seed,
    )
