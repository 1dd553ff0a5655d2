#!/usr/bin/env python3
"""Run all four algorithms on one seeded scenario and print a comparison."""

import argparse

import numpy as np

from noma_arena.config import ExperimentConfig, load_config
from noma_arena.harness import run


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--rounds", type=int, default=50)
    parser.add_argument("--tql-episodes", type=int, default=50)
    args = parser.parse_args()

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    print(f"{'algo':8s} {'mean':>8s} {'std':>8s}   per-seed")
    for algo in ("opt", "crl", "tql", "fm-max"):
        vals = [
            run(algo, cfg, seed, rounds=args.rounds, tql_episodes=args.tql_episodes).delivered
            for seed in range(1, args.seeds + 1)
        ]
        print(
            f"{algo:8s} {np.mean(vals):8.2f} {np.std(vals):8.2f}   "
            + " ".join(f"{v:.1f}" for v in vals)
        )


if __name__ == "__main__":
    main()
