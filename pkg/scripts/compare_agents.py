#!/usr/bin/env python3
"""Evaluate the replay and random baselines on one dataset and compare them.

Prints both summary tables plus McNemar p-values computed over steps (for
accuracy) and over sessions (for outcome correctness).
"""

from __future__ import annotations

import argparse
import sys

from shopbench.agents import RandomAgent, ReplayAgent
from shopbench.eval_harness import compare_reports, run_evaluation, summary_table
from shopbench.reasoning_synth import StubReasoningClient, Synthesizer
from shopbench.shopsim import Shop, gen_catalog
from shopbench.user_oracle import OracleConfig, generate_dataset


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-products", type=int, default=240)
    parser.add_argument("--n-sessions", type=int, default=500)
    args = parser.parse_args()

    shop = Shop(gen_catalog(args.seed, args.n_products))
    sessions = generate_dataset(shop, OracleConfig(seed=args.seed, n_sessions=args.n_sessions))
    sessions = Synthesizer(StubReasoningClient()).synthesize_dataset(sessions, concurrency=1)

    replay_report, _ = run_evaluation(ReplayAgent(sessions), sessions)
    random_report, _ = run_evaluation(RandomAgent(), sessions)

    print("== replay agent ==")
    print(summary_table(replay_report))
    print("\n== random agent ==")
    print(summary_table(random_report))

    comparison = compare_reports(replay_report, random_report)
    print("\n== significance ==")
    print(f"step-level McNemar p:    {comparison['step_mcnemar_p']:.6g}")
    print(f"outcome-level McNemar p: {comparison['outcome_mcnemar_p']:.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
