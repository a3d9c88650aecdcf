#!/usr/bin/env python3
"""Produce every plot-ready CSV for one config in one command.

Runs the beta/nu sweep, the Monte-Carlo validation overlay, and the
genetic-search scheme comparison through the standard CLI, dropping all
outputs into one directory.
"""

from __future__ import annotations

import argparse
import os
import sys

from greencell.cli import main as cli_main


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", help="JSON config file")
    ap.add_argument("--out-dir", default="study_out")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--drops", type=int, default=100000)
    ap.add_argument("--nus", default=None,
                    help="comma list for the sweep; defaults to 0.9/1.0/1.1 of the config value")
    args = ap.parse_args(argv)

    os.makedirs(args.out_dir, exist_ok=True)
    if args.nus is None:
        from greencell.config import load_config

        nu = load_config(args.config).nu
        args.nus = f"{0.9 * nu:g},{nu:g},{1.1 * nu:g}"

    def path(name: str) -> str:
        return os.path.join(args.out_dir, name)

    steps = [
        ["sweep", args.config, "--nus", args.nus, "--out", path("sweep.csv"),
         "--seed", str(args.seed)],
        ["validate", args.config, "--drops", str(args.drops),
         "--out", path("validate.csv"), "--seed", str(args.seed)],
        ["optimize", args.config, "--out", path("optimize"),
         "--seed", str(args.seed)],
    ]
    for step in steps:
        print(f"$ greencell {' '.join(step)}")
        code = cli_main(step)
        if code != 0:
            print(f"step failed with exit code {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
