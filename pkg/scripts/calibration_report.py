#!/usr/bin/env python3
"""Generate a dataset and print its behavioral statistics against targets.

Useful when retuning the oracle policy constants: shows mean searches per
session, purchase rate, the search:filter ratio, session length, and the
action-category distribution.
"""

from __future__ import annotations

import argparse
import sys
import time

from shopbench.eval_harness import dataset_action_distribution
from shopbench.shopsim import Shop, gen_catalog
from shopbench.user_oracle import OracleConfig, dataset_statistics, generate_dataset

TARGETS = {
    "mean_searches_per_session": (2.82, 0.10),
    "purchase_rate": (0.139, 0.010),
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-products", type=int, default=240)
    parser.add_argument("--n-sessions", type=int, default=10_000)
    parser.add_argument("--typo-prob", type=float, default=0.25)
    args = parser.parse_args()

    shop = Shop(gen_catalog(args.seed, args.n_products))
    config = OracleConfig(seed=args.seed, n_sessions=args.n_sessions, typo_prob=args.typo_prob)
    started = time.monotonic()
    sessions = generate_dataset(shop, config)
    elapsed = time.monotonic() - started
    stats = dataset_statistics(sessions)

    print(f"generated {len(sessions)} sessions in {elapsed:.1f}s\n")
    for key, (target, tolerance) in TARGETS.items():
        value = stats[key]
        band = "ok" if abs(value - target) <= tolerance else "OUT OF BAND"
        print(f"{key:32s} {value:8.4f}  target {target} +/- {tolerance}  [{band}]")
    ratio = stats["search_filter_ratio"]
    print(f"{'search_filter_ratio':32s} {ratio:8.2f}  floor 7.0  "
          f"[{'ok' if ratio >= 7.0 else 'OUT OF BAND'}]")
    print(f"{'mean_actions_per_session':32s} {stats['mean_actions_per_session']:8.3f}")

    print("\naction distribution:")
    distribution = dataset_action_distribution(sessions)
    total = sum(distribution.values())
    for category, count in distribution.items():
        print(f"  {category:14s} {count:8d}  {100.0 * count / total:6.2f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main())
