"""Battery/channel Markov chain per base station.

State (i, j): battery holds i of T energy units, j of N channels busy.
Within a battery level the channel count behaves like an Erlang loss system;
levels are coupled by recharge (up) and consumption (down) transitions, which
gives the generator a block-tridiagonal quasi-birth-death structure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

ROW_SUM_TOL = 1e-12
RESIDUAL_TOL = 1e-10
DEGENERATE_LEVEL = 1e-14


class SolverError(RuntimeError):
    """Stationary solve failed: singular block or residual above tolerance."""


@dataclass(frozen=True)
class ChainParams:
    """Chain dimensions and rates, decoupled from the full network config.

    ``t_levels`` may be 0 here (battery dimension collapsed, pure loss
    system); the network-level config insists on t_levels >= 1.
    """

    n_channels: int
    t_levels: int
    mu: float
    omega: float
    nu: float
    static_drain: float

    @classmethod
    def from_config(cls, cfg) -> "ChainParams":
        return cls(
            n_channels=cfg.n_channels,
            t_levels=cfg.t_levels,
            mu=cfg.mu,
            omega=cfg.omega,
            nu=cfg.nu,
            static_drain=cfg.static_drain,
        )


def _as_params(params_or_cfg) -> ChainParams:
    if isinstance(params_or_cfg, ChainParams):
        return params_or_cfg
    return ChainParams.from_config(params_or_cfg)


@dataclass
class QbdGenerator:
    """Block-tridiagonal generator.

    d_blocks[i] holds the intra-level transitions plus the diagonal closing
    each global row to zero.  l_blocks[i] = nu * I moves level i -> i+1
    (defined for i < T), m_blocks[i] moves level i -> i-1 (defined for i > 0;
    slot 0 is kept as zeros so that index == level).
    """

    params: ChainParams
    rho: np.ndarray
    d_blocks: np.ndarray
    l_blocks: np.ndarray
    m_blocks: np.ndarray

    @property
    def n_states(self) -> int:
        return (self.params.t_levels + 1) * (self.params.n_channels + 1)

    def assemble(self) -> np.ndarray:
        """Dense generator with states ordered (i, j) -> i * (N + 1) + j."""
        p = self.params
        n = p.n_channels + 1
        full = np.zeros((self.n_states, self.n_states))
        for i in range(p.t_levels + 1):
            s = i * n
            full[s : s + n, s : s + n] = self.d_blocks[i]
            if i < p.t_levels:
                full[s : s + n, s + n : s + 2 * n] = self.l_blocks[i]
            if i > 0:
                full[s : s + n, s - n : s] = self.m_blocks[i]
        return full


def build_generator(params_or_cfg, rho) -> QbdGenerator:
    """Assemble the generator blocks for arrival rates ``rho`` (one per level)."""
    p = _as_params(params_or_cfg)
    rho = np.asarray(rho, dtype=float)
    t, nch = p.t_levels, p.n_channels
    if rho.shape != (t + 1,):
        raise ValueError(f"arrival vector has shape {rho.shape}, expected ({t + 1},)")
    if not np.all(np.isfinite(rho)) or np.any(rho < 0):
        raise ValueError("arrival rates must be finite and nonnegative")

    n = nch + 1
    j = np.arange(n, dtype=float)
    d = np.zeros((t + 1, n, n))
    l = np.zeros((max(t, 0), n, n))
    m = np.zeros((t + 1, n, n))

    idx = np.arange(n)
    for i in range(t + 1):
        blk = np.zeros((n, n))
        blk[idx[:-1], idx[:-1] + 1] = rho[i]          # admit a call
        blk[idx[1:], idx[1:] - 1] = j[1:] * p.mu      # complete one
        out_rate = np.where(j < nch, rho[i], 0.0) + j * p.mu
        if i < t:
            out_rate = out_rate + p.nu
        if i > 0:
            out_rate = out_rate + p.static_drain + j * p.omega
        blk[idx, idx] = -out_rate
        d[i] = blk
        if i < t:
            l[i] = p.nu * np.eye(n)
        if i > 0:
            m[i] = np.diag(p.static_drain + p.omega * j)
    return QbdGenerator(params=p, rho=rho, d_blocks=d, l_blocks=l, m_blocks=m)


@dataclass
class SteadyState:
    """Stationary distribution of the chain.

    pi has shape (T+1, N+1) and sums to one; level_marginals is the battery
    marginal; residual is the max-norm of pi @ A over the flattened states.
    """

    pi: np.ndarray
    level_marginals: np.ndarray
    residual: float


def solve_steady_state(gen: QbdGenerator) -> SteadyState:
    """Stationary solve by backward block recursion.

    Folds levels T..1 into level 0 one inverse at a time, solves the reduced
    level-0 generator for its null vector, then unrolls the recursion to
    recover the remaining level slices.
    """
    p = gen.params
    t = p.t_levels
    n = p.n_channels + 1

    try:
        q = np.empty_like(gen.d_blocks)
        q[t] = gen.d_blocks[t]
        for i in range(t - 1, -1, -1):
            q[i] = gen.d_blocks[i] - gen.l_blocks[i] @ np.linalg.solve(q[i + 1], gen.m_blocks[i + 1])

        head = _null_row_vector(q[0])
        slices = [head]
        for i in range(t):
            # pi_{i+1} = -pi_i L_i inv(Q_{i+1})
            rhs = -(slices[i] @ gen.l_blocks[i])
            slices.append(np.linalg.solve(q[i + 1].T, rhs))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular block during stationary solve: {exc}") from exc

    pi = np.vstack(slices)
    if np.any(pi < -1e-9 * max(pi.max(), 1.0)):
        raise SolverError("stationary solve produced significantly negative mass")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()

    residual = float(np.abs(pi.reshape(-1) @ gen.assemble()).max())
    if not np.isfinite(residual) or residual > RESIDUAL_TOL:
        raise SolverError(f"stationary residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}")
    return SteadyState(pi=pi, level_marginals=pi.sum(axis=1), residual=residual)


def _null_row_vector(q0: np.ndarray) -> np.ndarray:
    """Row vector x with x @ q0 = 0, first component pinned to 1."""
    a = q0.T
    n = a.shape[0]
    if n == 1:
        return np.ones(1)
    x = np.empty(n)
    x[0] = 1.0
    x[1:] = np.linalg.solve(a[1:, 1:], -a[1:, 0])
    return x


@dataclass
class LevelMetrics:
    """Per-battery-level service metrics conditioned on the level."""

    p_block: np.ndarray
    n_mean: np.ndarray
    p_occu: np.ndarray
    degenerate: np.ndarray  # levels with negligible mass; metrics zeroed there


def level_metrics(ss: SteadyState, n_channels: int) -> LevelMetrics:
    pi = ss.pi
    marg = ss.level_marginals
    j = np.arange(n_channels + 1, dtype=float)
    degenerate = marg < DEGENERATE_LEVEL
    safe = np.where(degenerate, 1.0, marg)
    p_block = np.where(degenerate, 0.0, pi[:, -1] / safe)
    n_mean = np.where(degenerate, 0.0, (pi * j).sum(axis=1) / safe)
    return LevelMetrics(
        p_block=p_block,
        n_mean=n_mean,
        p_occu=n_mean / n_channels,
        degenerate=degenerate,
    )


def simulate_trajectory(params_or_cfg, rho, n_events: int, seed: int = 0) -> np.ndarray:
    """Time-weighted state occupancy over ``n_events`` simulated transitions.

    Straight event-by-event simulation of the same chain the analytic solver
    handles, used as an independent check on the stationary distribution.
    Returns a (T+1, N+1) matrix of occupancy fractions.  Deterministic for a
    fixed seed.  If the chain hits an absorbing state the time average is a
    point mass there, which is what the long-run limit gives.
    """
    p = _as_params(params_or_cfg)
    rho = np.asarray(rho, dtype=float)
    t, nch = p.t_levels, p.n_channels
    if rho.shape != (t + 1,):
        raise ValueError(f"arrival vector has shape {rho.shape}, expected ({t + 1},)")
    n = nch + 1
    n_states = (t + 1) * n

    # Per-state transition table: up to four moves (recharge, discharge,
    # admit, complete), folded into cumulative probability thresholds.
    thresholds = []
    targets = []
    inv_rate = []
    for i in range(t + 1):
        for j in range(n):
            moves = []
            if i < t and p.nu > 0:
                moves.append((p.nu, (i + 1) * n + j))
            if i > 0 and p.static_drain + j * p.omega > 0:
                moves.append((p.static_drain + j * p.omega, (i - 1) * n + j))
            if j < nch and rho[i] > 0:
                moves.append((rho[i], i * n + j + 1))
            if j > 0 and p.mu > 0:
                moves.append((j * p.mu, i * n + j - 1))
            total = sum(r for r, _ in moves)
            if total == 0:
                thresholds.append(())
                targets.append(())
                inv_rate.append(0.0)
                continue
            acc, cum = 0.0, []
            for r, _ in moves:
                acc += r
                cum.append(acc / total)
            thresholds.append(tuple(cum[:-1]))
            targets.append(tuple(tgt for _, tgt in moves))
            inv_rate.append(1.0 / total)

    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    occ = [0.0] * n_states
    state = 0
    done = 0
    block = 1 << 15
    while done < n_events:
        todo = min(block, n_events - done)
        exps = rng.standard_exponential(todo).tolist()
        uans = rng.random(todo).tolist()
        for k in range(todo):
            inv = inv_rate[state]
            if inv == 0.0:
                # Absorbing: the long-run average collapses onto this state.
                occ = [0.0] * n_states
                occ[state] = 1.0
                out = np.array(occ).reshape(t + 1, n)
                return out
            occ[state] += exps[k] * inv
            u = uans[k]
            thr = thresholds[state]
            idx = 0
            for c in thr:
                if u >= c:
                    idx += 1
                else:
                    break
            state = targets[state][idx]
        done += todo

    out = np.array(occ)
    out /= out.sum()
    return out.reshape(t + 1, n)


def dump_chain(gen: QbdGenerator, ss: SteadyState, path) -> None:
    """Debug dump: one row per state with its generator row and probability."""
    full = gen.assemble()
    n = gen.params.n_channels + 1
    flat = ss.pi.reshape(-1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["level", "channels"] + [f"rate_{k}" for k in range(gen.n_states)] + ["pi"]
        )
        for s in range(gen.n_states):
            writer.writerow([s // n, s % n] + [repr(v) for v in full[s]] + [repr(flat[s])])
