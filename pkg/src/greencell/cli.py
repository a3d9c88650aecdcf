"""Command-line front end: analyze | sweep | validate | optimize.

All outputs are CSV (plotting happens elsewhere).  Every file carries
reproducibility headers and a JSON manifest sidecar.  Exit codes: 0 ok,
2 config error, 3 numeric failure, 4 GA found no feasible bias.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import shlex
import sys
import time

import numpy as np

from . import __version__
from .analytics import BiasVector
from .config import ConfigError, NetworkConfig, config_hash, load_config
from .csvio import RunManifest, header_lines, write_csv, write_manifest
from .fixedpoint import DEFAULT_EPS, DEFAULT_MAX_SWEEPS
from .montecarlo import estimate_success
from .optimizer import (
    POWER_GRID_DEFAULT,
    GaConfig,
    SweepPoint,
    beta_sweep,
    compare_schemes,
    evaluate_bias,
    power_law_bias,
)
from .qbd import SolverError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INFEASIBLE = 4


def worker_count() -> int:
    """Workers for parallel sections; GREENCELL_WORKERS caps/overrides."""
    raw = os.environ.get("GREENCELL_WORKERS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"GREENCELL_WORKERS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError("GREENCELL_WORKERS must be at least 1")
    return n


def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated numbers, got {text!r}")
    if not values:
        raise ConfigError(f"{flag} is empty")
    return values


def _load_bias(cfg: NetworkConfig, args) -> BiasVector:
    if (args.beta is None) == (args.bias_file is None):
        raise ConfigError("give exactly one of --beta or --bias-file")
    if args.beta is not None:
        return power_law_bias(args.beta, cfg.t_levels)
    try:
        with open(args.bias_file) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read bias file: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bias file is not valid JSON: {exc}")
    if not isinstance(raw, list) or len(raw) != cfg.t_levels + 1:
        raise ConfigError(
            f"bias file must hold a JSON array of {cfg.t_levels + 1} numbers"
        )
    return BiasVector(tuple(float(v) for v in raw))


def _manifest_path(out: str) -> str:
    stem, _ = os.path.splitext(out)
    return stem + ".manifest.json"


def _finish(command: str, cfg_hash: str, seed: int, outputs: list[str],
            t_start: float, manifest_path: str) -> None:
    manifest = RunManifest(
        command=command,
        config_hash=cfg_hash,
        seed=seed,
        outputs=[os.path.abspath(p) for p in outputs],
        wall_clock_s=time.time() - t_start,
        tool_version=__version__,
    )
    write_manifest(manifest_path, manifest)
    for p in outputs:
        print(f"wrote {p}")


def cmd_analyze(args, command: str) -> int:
    t0 = time.time()
    cfg = load_config(args.config)
    bias = _load_bias(cfg, args)
    print(f"seed: {args.seed}")
    metrics, fp = evaluate_bias(cfg, bias, eps=args.eps, max_sweeps=args.max_sweeps)

    n = cfg.t_levels + 1
    row: dict = {}
    for i in range(n):
        row[f"bias_{i}"] = float(bias.values[i])
    row.update(
        p_succ=metrics.p_succ,
        area_rate=metrics.area_rate,
        p_tot=metrics.p_tot,
        p_grid=metrics.p_grid,
        e_tot=metrics.e_tot,
        eta_ee=metrics.eta_ee,
        eta_ce=metrics.eta_ce,
        converged=fp.converged,
        iterations=fp.iterations,
        residual=fp.residual,
    )
    for i in range(n):
        row[f"pi_{i}"] = float(fp.level_marginals[i])
    for i in range(n):
        row[f"users_{i}"] = float(fp.users[i])
    for i in range(n):
        row[f"p_block_{i}"] = float(fp.chain_metrics.p_block[i])
    for i in range(n):
        row[f"p_occu_{i}"] = float(fp.chain_metrics.p_occu[i])
    for i in range(n):
        row[f"p_succ_tier_{i}"] = float(metrics.p_succ_tier[i])
    for i in range(n):
        row[f"rate_tier_{i}"] = float(metrics.rate_tier[i])

    h = config_hash(cfg)
    write_csv(args.out, header_lines(__version__, h, args.seed, command),
              list(row), [row])
    _finish(command, h, args.seed, [args.out], t0, _manifest_path(args.out))
    return EXIT_OK


def _sweep_task(task) -> SweepPoint:
    cfg, beta, nu, eps, max_sweeps = task
    return beta_sweep(cfg, [beta], [nu], eps=eps, max_sweeps=max_sweeps)[0]


def cmd_sweep(args, command: str) -> int:
    t0 = time.time()
    cfg = load_config(args.config)
    betas = _parse_floats(args.betas, "--betas")
    nus = _parse_floats(args.nus, "--nus") if args.nus else [cfg.nu]
    print(f"seed: {args.seed}")

    tasks = [(cfg, b, nu, args.eps, args.max_sweeps) for nu in nus for b in betas]
    workers = worker_count()
    if workers > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_sweep_task, tasks))
    else:
        points = [_sweep_task(t) for t in tasks]
    points.sort(key=lambda p: (p.nu, p.beta))

    rows = []
    for p in points:
        m = p.metrics
        rows.append({
            "beta": p.beta,
            "nu": p.nu,
            "p_succ": m.p_succ if m else math.nan,
            "e_tot": m.e_tot if m else math.nan,
            "eta_ee": m.eta_ee if m else math.nan,
            "eta_ce": m.eta_ce if m else math.nan,
            "p_grid": m.p_grid if m else math.nan,
            "converged": p.converged,
        })
    h = config_hash(cfg)
    fields = ["beta", "nu", "p_succ", "e_tot", "eta_ee", "eta_ce", "p_grid", "converged"]
    write_csv(args.out, header_lines(__version__, h, args.seed, command), fields, rows)
    _finish(command, h, args.seed, [args.out], t0, _manifest_path(args.out))
    return EXIT_OK


def _validate_task(task) -> dict:
    cfg, beta, drops, seed, r_sim, eps, max_sweeps = task
    bias = power_law_bias(beta, cfg.t_levels)
    metrics, fp = evaluate_bias(cfg, bias, eps=eps, max_sweeps=max_sweeps)
    est = estimate_success(
        cfg, fp.level_marginals, bias, fp.chain_metrics.p_occu,
        drops, seed=seed, r_sim=r_sim,
    )
    return {
        "beta": beta,
        "analytic": metrics.p_succ,
        "mc_mean": est.mean,
        "ci_half_width": est.half_width_95,
        "n_drops": drops,
        "seed": seed,
    }


def cmd_validate(args, command: str) -> int:
    t0 = time.time()
    cfg = load_config(args.config)
    betas = _parse_floats(args.betas, "--betas")
    if args.drops < 1:
        raise ConfigError("--drops must be at least 1")
    print(f"seed: {args.seed}")

    tasks = [
        (cfg, b, args.drops, args.seed, args.r_sim, args.eps, args.max_sweeps)
        for b in betas
    ]
    workers = worker_count()
    if workers > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_validate_task, tasks))
    else:
        rows = [_validate_task(t) for t in tasks]
    rows.sort(key=lambda r: r["beta"])

    h = config_hash(cfg)
    fields = ["beta", "analytic", "mc_mean", "ci_half_width", "n_drops", "seed"]
    write_csv(args.out, header_lines(__version__, h, args.seed, command), fields, rows)
    _finish(command, h, args.seed, [args.out], t0, _manifest_path(args.out))
    return EXIT_OK


def cmd_optimize(args, command: str) -> int:
    t0 = time.time()
    cfg = load_config(args.config)
    try:
        ga = GaConfig(
            pop_size=args.pop,
            max_iters=args.iters,
            p_mutation=args.p_mut,
            p_crossover=args.p_cross,
            b_min=args.b_min,
            b_max=args.b_max,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    print(f"seed: {args.seed}")

    comparison = compare_schemes(cfg, ga, eps=args.eps, max_sweeps=args.max_sweeps)
    result = comparison.ga_result
    n = cfg.t_levels + 1
    h = config_hash(cfg)
    headers = header_lines(__version__, h, args.seed, command)

    best = result.best
    best_row = {
        "feasible": best.feasible,
        "fitness": best.fitness,
        "p_succ": best.metrics.p_succ if best.metrics else math.nan,
        "e_tot": best.metrics.e_tot if best.metrics else math.nan,
        "eta_ce": best.metrics.eta_ce if best.metrics else math.nan,
        "n_evaluations": result.n_evaluations,
    }
    for i in range(n):
        best_row[f"bias_{i}"] = float(best.bias.values[i])
    best_path = args.out + "_best.csv"
    write_csv(best_path, headers, list(best_row), [best_row])

    hist_rows = []
    for g in result.history:
        row = {
            "generation": g.generation,
            "best_fitness": g.best_fitness,
            "mean_fitness": g.mean_fitness,
            "best_feasible": g.best_feasible,
        }
        for i in range(n):
            row[f"bias_{i}"] = float(g.best_bias[i])
        hist_rows.append(row)
    history_path = args.out + "_history.csv"
    write_csv(history_path, headers, list(hist_rows[0]), hist_rows)

    comp_rows = []
    for r in comparison.rows:
        m = r.metrics
        row = {
            "scheme": r.name,
            "feasible": r.feasible,
            "converged": r.converged,
            "p_succ": m.p_succ if m else math.nan,
            "e_tot": m.e_tot if m else math.nan,
            "eta_ce": m.eta_ce if m else math.nan,
            "share_low": r.share_low,
            "share_mid": r.share_mid,
            "share_high": r.share_high,
            "delta_e_tot_pct": math.nan if r.delta_e_tot_pct is None else r.delta_e_tot_pct,
            "delta_eta_ce_pct": math.nan if r.delta_eta_ce_pct is None else r.delta_eta_ce_pct,
        }
        for i in range(n):
            row[f"bias_{i}"] = float(r.bias.values[i])
        comp_rows.append(row)
    comparison_path = args.out + "_comparison.csv"
    write_csv(comparison_path, headers, list(comp_rows[0]), comp_rows)

    outputs = [best_path, history_path, comparison_path]
    _finish(command, h, args.seed, outputs, t0, args.out + "_manifest.json")
    if not result.feasible_found:
        print("no feasible bias vector found", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greencell",
        description="Battery-aware cellular network analysis and bias optimization.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_help: str = "output CSV path") -> None:
        p.add_argument("config", help="JSON config file")
        p.add_argument("--out", required=True, help=out_help)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--eps", type=float, default=DEFAULT_EPS,
                       help="fixed-point tolerance")
        p.add_argument("--max-sweeps", type=int, default=DEFAULT_MAX_SWEEPS)

    p = sub.add_parser("analyze", help="metrics for one bias vector")
    common(p)
    p.add_argument("--beta", type=float, default=None, help="power-law exponent")
    p.add_argument("--bias-file", default=None, help="JSON array of per-level biases")
    p.set_defaults(handler=cmd_analyze)

    default_grid = ",".join(f"{b:g}" for b in POWER_GRID_DEFAULT)
    p = sub.add_parser("sweep", help="grid over bias exponents and recharge rates")
    common(p)
    p.add_argument("--betas", default=default_grid)
    p.add_argument("--nus", default="", help="comma list; defaults to the config value")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("validate", help="Monte-Carlo check of the coverage analysis")
    common(p)
    p.add_argument("--betas", default="0,1,2")
    p.add_argument("--drops", type=int, default=10000)
    p.add_argument("--r-sim", type=float, default=None, help="window radius override")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("optimize", help="genetic bias search plus scheme comparison")
    common(p, out_help="output file prefix (_best/_history/_comparison CSVs)")
    p.add_argument("--pop", type=int, default=50)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--p-mut", type=float, default=0.2)
    p.add_argument("--p-cross", type=float, default=0.7)
    p.add_argument("--b-min", type=float, default=1.0)
    p.add_argument("--b-max", type=float, default=64.0)
    p.set_defaults(handler=cmd_optimize)
    return parser


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    command = shlex.join(["greencell"] + list(argv))
    try:
        return args.handler(args, command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
