"""Coupling loop between battery statistics and cell loads.

The battery marginals fix the association split and hence the per-level user
counts; those user counts feed back as the chain's arrival rates.  The loop
is closed by plain Picard iteration (optionally damped) from a uniform start.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import analytics, qbd

DEFAULT_EPS = 1e-8
DEFAULT_MAX_SWEEPS = 100


def arrival_map(users, cfg) -> np.ndarray:
    """Per-level arrival rates from mean user counts.

    Identity by default; the affine knobs cover units where one user does
    not translate into exactly one call per unit time.
    """
    u = np.asarray(users, dtype=float)
    return cfg.arrival_scale * u + cfg.arrival_offset


@dataclass
class FixedPointResult:
    """Self-consistent operating point (or the last iterate if not converged)."""

    level_marginals: np.ndarray
    users: np.ndarray
    rho: np.ndarray
    iterations: int
    residual: float
    converged: bool
    chain_state: qbd.SteadyState
    chain_metrics: qbd.LevelMetrics


def solve(cfg, bias: analytics.BiasVector, eps: float = DEFAULT_EPS,
          max_sweeps: int = DEFAULT_MAX_SWEEPS, damping: float = 1.0,
          trace_path=None) -> FixedPointResult:
    """Iterate marginals -> users -> arrivals -> marginals until stationary.

    Non-convergence within ``max_sweeps`` is reported through the flag, not
    raised, so parameter sweeps can record the point and move on.  The
    returned marginals come from one final chain solve at the returned
    arrival rates, so marginals, users, rho, and the chain state are mutually
    consistent by construction; ``residual`` is the max-norm change of the
    marginals under that final sweep.
    """
    if not (eps > 0):
        raise ValueError("eps must be positive")
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    if not (0.0 < damping <= 1.0):
        raise ValueError("damping must lie in (0, 1]")

    t = cfg.t_levels
    params = qbd.ChainParams.from_config(cfg)
    pi = np.full(t + 1, 1.0 / (t + 1))
    trace = []
    converged = False
    iterations = 0
    for sweep in range(1, max_sweeps + 1):
        users = analytics.average_users(pi, bias, cfg)
        rho = arrival_map(users, cfg)
        ss = qbd.solve_steady_state(qbd.build_generator(params, rho))
        pi_new = (1.0 - damping) * pi + damping * ss.level_marginals
        diff = float(np.abs(pi_new - pi).max())
        trace.append((sweep, diff, pi_new.copy()))
        pi = pi_new
        iterations = sweep
        if diff < eps:
            converged = True
            break

    # Settle onto one more chain solve so the returned marginals and chain
    # state agree exactly, then recompute users and arrivals from those
    # returned marginals.  The reported residual is how far one further
    # full sweep would still move the marginals.
    ss = qbd.solve_steady_state(
        qbd.build_generator(params, arrival_map(analytics.average_users(pi, bias, cfg), cfg))
    )
    pi = ss.level_marginals
    lm = qbd.level_metrics(ss, cfg.n_channels)
    users = analytics.average_users(pi, bias, cfg)
    rho = arrival_map(users, cfg)
    check = qbd.solve_steady_state(qbd.build_generator(params, rho))
    residual = float(np.abs(check.level_marginals - pi).max())

    if trace_path is not None:
        _write_trace(trace_path, trace)

    return FixedPointResult(
        level_marginals=pi,
        users=users,
        rho=rho,
        iterations=iterations,
        residual=residual,
        converged=converged,
        chain_state=ss,
        chain_metrics=lm,
    )


def _write_trace(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n_levels = len(rows[0][2]) if rows else 0
        writer.writerow(["iteration", "residual"] + [f"pi_{i}" for i in range(n_levels)])
        for sweep, diff, pi in rows:
            writer.writerow([sweep, repr(float(diff))] + [repr(float(v)) for v in pi])
