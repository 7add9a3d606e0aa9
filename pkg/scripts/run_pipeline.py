#!/usr/bin/env python3
"""Run the full offline pipeline into a working directory.

Equivalent to `shopbench pipeline ...` with a few convenience defaults;
stages whose outputs already exist are skipped, so reruns resume.
"""

from __future__ import annotations

import argparse
import sys

from shopbench.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="runs/demo")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-products", type=int, default=240)
    parser.add_argument("--n-sessions", type=int, default=1000)
    parser.add_argument("--agent", default="replay", choices=("replay", "random", "endpoint"))
    parser.add_argument("--endpoint")
    parser.add_argument("--model")
    parser.add_argument("--force", action="store_true")
    args = parser.parse_args()

    argv = [
        "pipeline",
        "--workdir", args.workdir,
        "--seed", str(args.seed),
        "--n-products", str(args.n_products),
        "--n-sessions", str(args.n_sessions),
        "--agent", args.agent,
    ]
    if args.endpoint:
        argv += ["--endpoint", args.endpoint]
    if args.model:
        argv += ["--model", args.model]
    if args.force:
        argv.append("--force")
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
