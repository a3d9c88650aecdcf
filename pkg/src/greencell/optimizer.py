"""Bias-vector optimization: power-law sweeps and a genetic search.

The genetic algorithm maximizes carbon efficiency subject to the coverage
floor.  Infeasible individuals carry a large penalty proportional to the
coverage gap, and selection into the next generation ranks feasibility
before fitness outright, so a feasible individual can never be displaced
by an infeasible one regardless of penalty magnitude.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .analytics import BiasVector, NetworkMetrics, compute_metrics
from .config import NetworkConfig
from .fixedpoint import DEFAULT_EPS, DEFAULT_MAX_SWEEPS, FixedPointResult, solve
from .qbd import SolverError

POWER_GRID_DEFAULT = tuple(0.5 * k for k in range(9))  # 0, 0.5, ..., 4
ETA_CAP = 1e18

_KEY_MASK = (1 << 64) - 1


def power_law_bias(beta: float, t_levels: int) -> BiasVector:
    """Bias (i+1)**beta for level i; beta=0 recovers nearest-station."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return BiasVector(tuple(float(i + 1) ** beta for i in range(t_levels + 1)))


def evaluate_bias(cfg: NetworkConfig, bias: BiasVector,
                  eps: float = DEFAULT_EPS,
                  max_sweeps: int = DEFAULT_MAX_SWEEPS) -> tuple[NetworkMetrics, FixedPointResult]:
    """Solve the coupled system under `bias` and report network metrics."""
    fp = solve(cfg, bias, eps=eps, max_sweeps=max_sweeps)
    metrics = compute_metrics(
        cfg, bias, fp.level_marginals, fp.rho, fp.chain_metrics
    )
    return metrics, fp


@dataclass
class SweepPoint:
    beta: float
    nu: float
    metrics: NetworkMetrics | None
    converged: bool
    error: str | None = None


def beta_sweep(cfg: NetworkConfig, betas, nus=None,
               eps: float = DEFAULT_EPS,
               max_sweeps: int = DEFAULT_MAX_SWEEPS) -> list[SweepPoint]:
    """Grid evaluation over bias exponents and recharge rates.

    Solver failures at a grid point are captured in the point instead of
    aborting the sweep.
    """
    if nus is None:
        nus = (cfg.nu,)
    points = []
    for nu in nus:
        cfg_nu = cfg if nu == cfg.nu else dataclasses.replace(cfg, nu=float(nu))
        for beta in betas:
            bias = power_law_bias(float(beta), cfg.t_levels)
            try:
                metrics, fp = evaluate_bias(cfg_nu, bias, eps=eps, max_sweeps=max_sweeps)
                points.append(SweepPoint(float(beta), float(nu), metrics, fp.converged))
            except (SolverError, FloatingPointError) as exc:
                points.append(SweepPoint(float(beta), float(nu), None, False, str(exc)))
    return points


@dataclass(frozen=True)
class GaConfig:
    pop_size: int = 50
    max_iters: int = 100
    p_mutation: float = 0.2
    p_crossover: float = 0.7
    b_min: float = 1.0
    b_max: float = 64.0
    seed: int = 0
    penalty: float = 1e8

    def __post_init__(self) -> None:
        if self.pop_size < 2:
            raise ValueError("pop_size must be at least 2")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        for name in ("p_mutation", "p_crossover"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.b_min <= 1.0:
            raise ValueError("b_min must lie in (0, 1] so the pinned first gene fits")
        if self.b_max <= self.b_min:
            raise ValueError("b_max must exceed b_min")
        if self.penalty <= 0:
            raise ValueError("penalty must be positive")


@dataclass
class Individual:
    bias: BiasVector
    fitness: float
    feasible: bool
    metrics: NetworkMetrics | None
    converged: bool


@dataclass
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    best_feasible: bool
    best_bias: tuple


@dataclass
class GaResult:
    best: Individual
    history: list[GenerationStats]
    feasible_found: bool
    n_evaluations: int


def _ga_stream(seed: int, generation: int) -> np.random.Generator:
    key = np.array([seed & _KEY_MASK, generation & _KEY_MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _evaluate_individual(cfg: NetworkConfig, bias: BiasVector, ga: GaConfig,
                         eps: float, max_sweeps: int) -> Individual:
    try:
        metrics, fp = evaluate_bias(cfg, bias, eps=eps, max_sweeps=max_sweeps)
    except (SolverError, FloatingPointError):
        return Individual(bias, -ga.penalty, False, None, False)
    eta = min(metrics.eta_ce, ETA_CAP)
    feasible = fp.converged and metrics.p_succ > cfg.p_req
    if feasible:
        return Individual(bias, eta, True, metrics, True)
    gap = max(cfg.p_req - metrics.p_succ, 0.0)
    if not fp.converged:
        gap = max(gap, 1.0)
    return Individual(bias, eta - ga.penalty * gap, False, metrics, fp.converged)


def _seed_population(cfg: NetworkConfig, ga: GaConfig,
                     rng: np.random.Generator) -> list[BiasVector]:
    """Initial population: every in-bounds power-law profile, then log-uniform
    random vectors.  Seeding the grid profiles means the search starts no
    worse than the best power law."""
    t = cfg.t_levels
    genes_low, genes_high = math.log(ga.b_min), math.log(ga.b_max)
    population: list[BiasVector] = []
    for beta in POWER_GRID_DEFAULT:
        if len(population) >= ga.pop_size:
            break
        candidate = [(i + 1) ** beta for i in range(t + 1)]
        if all(ga.b_min <= g <= ga.b_max for g in candidate[1:]):
            population.append(BiasVector(tuple(candidate)))
    while len(population) < ga.pop_size:
        genes = np.exp(rng.uniform(genes_low, genes_high, size=t))
        population.append(BiasVector((1.0,) + tuple(genes)))
    return population


def _roulette(rng: np.random.Generator, fitness: np.ndarray, n: int) -> np.ndarray:
    if not np.isfinite(fitness).all():
        return rng.integers(0, fitness.size, size=n)
    shifted = fitness - fitness.min() + 1e-12
    total = shifted.sum()
    if not np.isfinite(total) or total <= 0:
        return rng.integers(0, fitness.size, size=n)
    return np.searchsorted(np.cumsum(shifted) / total, rng.random(n), side="right").clip(
        0, fitness.size - 1
    )


def _crossover(rng: np.random.Generator, a: BiasVector, b: BiasVector,
               p_cross: float) -> tuple[BiasVector, BiasVector]:
    t = len(a) - 1
    if t < 1 or rng.random() >= p_cross:
        return a, b
    point = int(rng.integers(1, t + 1))
    genes_a, genes_b = list(a.values), list(b.values)
    child1 = tuple(genes_a[:point] + genes_b[point:])
    child2 = tuple(genes_b[:point] + genes_a[point:])
    return BiasVector(child1), BiasVector(child2)


def _mutate(rng: np.random.Generator, ind: BiasVector, ga: GaConfig) -> BiasVector:
    t = len(ind) - 1
    if t < 1 or rng.random() >= ga.p_mutation:
        return ind
    idx = int(rng.integers(1, t + 1))
    genes = list(ind.values)
    genes[idx] = float(np.exp(rng.uniform(math.log(ga.b_min), math.log(ga.b_max))))
    return BiasVector(tuple(genes))


def _rank_key(ind: Individual) -> tuple:
    return (ind.feasible, ind.fitness)


def ga_optimize(cfg: NetworkConfig, ga: GaConfig | None = None,
                eps: float = DEFAULT_EPS,
                max_sweeps: int = DEFAULT_MAX_SWEEPS) -> GaResult:
    """Genetic search over bias vectors (first gene pinned to 1).

    Elitist: parents and offspring compete jointly each generation, ranked
    feasibility-first, so the best-so-far fitness trace is nondecreasing.
    Per-generation RNG streams are counter-based, keyed by (seed, generation).
    """
    if ga is None:
        ga = GaConfig()
    rng0 = _ga_stream(ga.seed, 0)
    population = [
        _evaluate_individual(cfg, b, ga, eps, max_sweeps)
        for b in _seed_population(cfg, ga, rng0)
    ]
    n_evals = len(population)
    population.sort(key=_rank_key, reverse=True)
    history = [_stats(0, population)]

    for gen in range(1, ga.max_iters + 1):
        rng = _ga_stream(ga.seed, gen)
        fitness = np.array([ind.fitness for ind in population])
        parents = _roulette(rng, fitness, ga.pop_size)
        offspring: list[BiasVector] = []
        for k in range(0, ga.pop_size - 1, 2):
            a = population[parents[k]].bias
            b = population[parents[k + 1]].bias
            c1, c2 = _crossover(rng, a, b, ga.p_crossover)
            offspring.append(_mutate(rng, c1, ga))
            offspring.append(_mutate(rng, c2, ga))
        if ga.pop_size % 2:
            lone = population[parents[-1]].bias
            offspring.append(_mutate(rng, lone, ga))
        children = [
            _evaluate_individual(cfg, b, ga, eps, max_sweeps) for b in offspring
        ]
        n_evals += len(children)
        pool = population + children
        pool.sort(key=_rank_key, reverse=True)
        population = pool[: ga.pop_size]
        history.append(_stats(gen, population))

    best = population[0]
    return GaResult(
        best=best,
        history=history,
        feasible_found=best.feasible,
        n_evaluations=n_evals,
    )


def _stats(generation: int, population: list[Individual]) -> GenerationStats:
    best = population[0]
    mean = float(np.mean([ind.fitness for ind in population]))
    return GenerationStats(
        generation=generation,
        best_fitness=best.fitness,
        mean_fitness=mean,
        best_feasible=best.feasible,
        best_bias=best.bias.values,
    )


@dataclass
class SchemeRow:
    """One comparison row: a bias scheme with its metrics and level shares."""

    name: str
    bias: BiasVector
    metrics: NetworkMetrics | None
    converged: bool
    feasible: bool
    share_low: float
    share_mid: float
    share_high: float
    delta_e_tot_pct: float | None = None
    delta_eta_ce_pct: float | None = None


@dataclass
class ComparisonResult:
    rows: list[SchemeRow]
    ga_result: GaResult | None = None


def _level_bands(t_levels: int) -> tuple[int, int]:
    """Split levels 0..T into low/mid/high bands (3/4/4 of 11 at T=10)."""
    n = t_levels + 1
    low_end = max(1, round(n * 3 / 11))
    mid_end = max(low_end + 1, round(n * 7 / 11))
    mid_end = min(mid_end, n - 1) if n > 2 else low_end
    return low_end, mid_end


def _band_shares(cfg: NetworkConfig, metrics: NetworkMetrics | None,
                 fp: FixedPointResult | None) -> tuple[float, float, float]:
    if fp is None:
        return (math.nan,) * 3
    total = fp.users.sum()
    if total <= 0:
        return (math.nan,) * 3
    shares = fp.users / total
    low_end, mid_end = _level_bands(cfg.t_levels)
    return (
        float(shares[:low_end].sum()),
        float(shares[low_end:mid_end].sum()),
        float(shares[mid_end:].sum()),
    )


def compare_schemes(cfg: NetworkConfig, ga: GaConfig | None = None,
                    betas=POWER_GRID_DEFAULT,
                    eps: float = DEFAULT_EPS,
                    max_sweeps: int = DEFAULT_MAX_SWEEPS) -> ComparisonResult:
    """Nearest-station baseline vs best feasible power law vs genetic search.

    Percentage deltas are relative to the nearest-station row (positive
    delta_e_tot_pct means lower energy draw than the baseline).
    """
    rows: list[SchemeRow] = []

    def build_row(name: str, bias: BiasVector) -> tuple[SchemeRow, FixedPointResult | None]:
        try:
            metrics, fp = evaluate_bias(cfg, bias, eps=eps, max_sweeps=max_sweeps)
        except (SolverError, FloatingPointError):
            return SchemeRow(name, bias, None, False, False, *(math.nan,) * 3), None
        feasible = fp.converged and metrics.p_succ > cfg.p_req
        return SchemeRow(
            name, bias, metrics, fp.converged, feasible,
            *_band_shares(cfg, metrics, fp),
        ), fp

    nearest, _ = build_row("nearest", power_law_bias(0.0, cfg.t_levels))
    rows.append(nearest)

    best_beta, best_eta = 0.0, -math.inf
    for beta in betas:
        try:
            metrics, fp = evaluate_bias(
                cfg, power_law_bias(float(beta), cfg.t_levels),
                eps=eps, max_sweeps=max_sweeps,
            )
        except (SolverError, FloatingPointError):
            continue
        if fp.converged and metrics.p_succ > cfg.p_req and metrics.eta_ce > best_eta:
            best_beta, best_eta = float(beta), metrics.eta_ce
    power_row, _ = build_row(f"power_law_beta_{best_beta:g}", power_law_bias(best_beta, cfg.t_levels))
    rows.append(power_row)

    ga_result = ga_optimize(cfg, ga, eps=eps, max_sweeps=max_sweeps)
    ga_row, _ = build_row("ga", ga_result.best.bias)
    ga_row.feasible = ga_result.best.feasible
    rows.append(ga_row)

    base = nearest.metrics
    if base is not None and base.e_tot > 0:
        for row in rows:
            if row.metrics is None:
                continue
            row.delta_e_tot_pct = 100.0 * (1.0 - row.metrics.e_tot / base.e_tot)
            if math.isfinite(base.eta_ce) and base.eta_ce > 0 and math.isfinite(row.metrics.eta_ce):
                row.delta_eta_ce_pct = 100.0 * (row.metrics.eta_ce / base.eta_ce - 1.0)
    return ComparisonResult(rows=rows, ga_result=ga_result)
