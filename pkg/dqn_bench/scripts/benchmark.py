#!/usr/bin/env python3
"""Full benchmark run: train at reference scale and check the quality gates.

Gates (printed as PASS/FAIL lines):
  1. moving-average cumulative reward (window 200): final >= initial
  2. minibatch loss: final decile mean < first decile mean
  3. ordering on matched scenario streams: CRL > DQL > max-power baseline

Defaults run the reference setup (M=20, N=5, T=5, 5000 episodes); pass
--episodes to scale down for a quick look. The arena package must be
installed (the script spawns `noma-arena serve` and runs its algorithms
in-process for the ordering gate).
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from dqn_bench import DqnConfig, EnvClient, evaluate, moving_average, train


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--env-config", type=Path, default=None)
    parser.add_argument("--episodes", type=int, default=5000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--eval-episodes", type=int, default=10)
    parser.add_argument("--ma-window", type=int, default=200)
    parser.add_argument("--out-prefix", type=Path, default=Path("dql_benchmark"))
    args = parser.parse_args()

    cfg = DqnConfig(episodes=args.episodes, seed=args.seed)
    env = EnvClient.spawn_stdio(args.env_config)
    start = time.perf_counter()
    try:
        result = train(
            env,
            cfg,
            progress=lambda ep, r: print(f"episode {ep}: reward {r:.0f}", file=sys.stderr)
            if ep % 250 == 0
            else None,
        )
        dql = evaluate(result, env, args.eval_episodes, args.seed)
    finally:
        env.close()
    runtime = time.perf_counter() - start
    result.save_curves(
        args.out_prefix.with_suffix(".rewards.csv"),
        args.out_prefix.with_suffix(".loss.csv"),
    )

    window = min(args.ma_window, max(1, len(result.episode_rewards)))
    ma = moving_average(result.episode_rewards, window)
    gate1 = ma[-1] >= ma[0]
    print(f"[{'PASS' if gate1 else 'FAIL'}] reward trend: moving average {ma[0]:.2f} -> {ma[-1]:.2f}")

    losses = np.array(result.losses)
    k = max(1, len(losses) // 10)
    gate2 = losses[-k:].mean() < losses[:k].mean()
    print(
        f"[{'PASS' if gate2 else 'FAIL'}] loss trend: first decile {losses[:k].mean():.4f}, "
        f"final decile {losses[-k:].mean():.4f}"
    )

    # ordering against the arena's own algorithms on the same scenario stream
    from noma_arena.config import ExperimentConfig, load_config
    from noma_arena.harness import run as arena_run

    arena_cfg = load_config(args.env_config) if args.env_config else ExperimentConfig()
    crl = arena_run("crl", arena_cfg, args.seed).delivered
    fm_max = arena_run("fm-max", arena_cfg, args.seed).delivered
    gate3 = fm_max < dql < crl
    print(
        f"[{'PASS' if gate3 else 'FAIL'}] ordering: max-power {fm_max:.2f} < "
        f"DQL {dql:.2f} < CRL {crl:.2f}"
    )
    print(f"trained {args.episodes} episodes in {runtime / 60:.1f} min")
    return 0 if (gate1 and gate2 and gate3) else 1


if __name__ == "__main__":
    sys.exit(main())
