"""Command line: train the benchmark against a served arena environment."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .config import DqnConfig
from .protocol import EnvClient
from .train import DEFAULT_LEVELS, evaluate, train, write_sweep_row


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dqn-bench")
    parser.add_argument("--env-config", type=Path, default=None, help="arena TOML passed to the spawned server")
    parser.add_argument("--tcp", default=None, help="host:port of a running server (instead of spawning)")
    parser.add_argument("--episodes", type=int, default=5000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--learning-rate", type=float, default=5e-3)
    parser.add_argument("--epsilon-start", type=float, default=0.2)
    parser.add_argument("--epsilon-end", type=float, default=0.01)
    parser.add_argument("--target-update", type=int, default=10)
    parser.add_argument("--minibatch", type=int, default=300)
    parser.add_argument("--replay-capacity", type=int, default=50_000)
    parser.add_argument("--priority-exponent", type=float, default=0.6)
    parser.add_argument("--discount", type=float, default=1.0)
    parser.add_argument("--train-every", type=int, default=1)
    parser.add_argument("--hidden", default="50,35,20")
    parser.add_argument("--levels-dbm", default=",".join(str(p) for p in DEFAULT_LEVELS))
    parser.add_argument("--eval-episodes", type=int, default=10)
    parser.add_argument("--out-prefix", type=Path, default=Path("dql"))
    args = parser.parse_args(argv)

    cfg = DqnConfig(
        hidden_sizes=tuple(int(h) for h in args.hidden.split(",")),
        learning_rate=args.learning_rate,
        episodes=args.episodes,
        epsilon_start=args.epsilon_start,
        epsilon_end=args.epsilon_end,
        target_update_episodes=args.target_update,
        minibatch_size=args.minibatch,
        replay_capacity=args.replay_capacity,
        priority_exponent=args.priority_exponent,
        discount=args.discount,
        train_every_episodes=args.train_every,
        seed=args.seed,
    )
    levels = tuple(float(p) for p in args.levels_dbm.split(","))

    if args.tcp:
        host, port = args.tcp.rsplit(":", 1)
        env = EnvClient.connect_tcp(host, int(port))
    else:
        env = EnvClient.spawn_stdio(args.env_config)

    start = time.perf_counter()
    try:
        result = train(
            env,
            cfg,
            levels_dbm=levels,
            progress=lambda ep, r: print(f"episode {ep}: reward {r:.0f}", file=sys.stderr)
            if ep % 100 == 0
            else None,
        )
        delivered = evaluate(result, env, args.eval_episodes, args.seed)
    finally:
        env.close()
    runtime = time.perf_counter() - start

    result.save_curves(
        args.out_prefix.with_suffix(".rewards.csv"), args.out_prefix.with_suffix(".loss.csv")
    )
    write_sweep_row(args.out_prefix.with_suffix(".eval.csv"), "-", args.seed, delivered, runtime)
    print(f"greedy evaluation: {delivered:.2f} delivered (mean of {args.eval_episodes} episodes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
