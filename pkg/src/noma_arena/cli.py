"""Command line entry point: run | sweep | serve | export-ilp."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .harness import (
    DEFAULT_EVAL_WINDOW,
    DEFAULT_ROUNDS,
    DEFAULT_TQL_EPISODES,
    SweepSpec,
    run,
    sweep,
)


def _load(args) -> ExperimentConfig:
    if args.config:
        return load_config(args.config)
    return ExperimentConfig()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="TOML config file")
    p.add_argument("--seed", type=int, default=1)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="noma-arena")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one algorithm on one seeded scenario")
    _add_common(p_run)
    p_run.add_argument("--algo", required=True, choices=["crl", "tql", "fm-max", "opt"])
    p_run.add_argument("--rounds", type=int, default=DEFAULT_ROUNDS)
    p_run.add_argument("--tql-episodes", type=int, default=DEFAULT_TQL_EPISODES)
    p_run.add_argument("--eval-window", type=int, default=DEFAULT_EVAL_WINDOW)
    p_run.add_argument("--opt-time-budget", type=float, default=60.0)
    p_run.add_argument("--out", type=Path, default=None, help="result JSON path")
    p_run.add_argument("--trace", type=Path, default=None, help="JSON-lines round trace (crl)")
    p_run.add_argument("--curve-out", type=Path, default=None, help="learning-curve CSV (tql)")
    p_run.add_argument("--save-scenario", type=Path, default=None)

    p_sweep = sub.add_parser("sweep", help="sweep L_max or G over seeds and algorithms")
    p_sweep.add_argument("--config", type=Path, default=None)
    p_sweep.add_argument("--param", required=True, choices=["L_max", "G"])
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated values (bits for L_max)"
    )
    p_sweep.add_argument("--replications", type=int, default=20)
    p_sweep.add_argument("--base-seed", type=int, default=1)
    p_sweep.add_argument("--algos", default="crl,tql,fm-max,opt")
    p_sweep.add_argument("--rounds", type=int, default=DEFAULT_ROUNDS)
    p_sweep.add_argument("--tql-episodes", type=int, default=DEFAULT_TQL_EPISODES)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--out", type=Path, required=True, help="rows CSV path")
    p_sweep.add_argument("--summary-out", type=Path, default=None)

    p_serve = sub.add_parser("serve", help="serve the environment protocol")
    p_serve.add_argument("--config", type=Path, default=None)
    p_serve.add_argument("--transport", choices=["stdio", "tcp"], default="stdio")
    p_serve.add_argument("--port", type=int, default=0)
    p_serve.add_argument("--host", default="127.0.0.1")

    p_ilp = sub.add_parser("export-ilp", help="write the instance as an LP file")
    p_ilp.add_argument("--scenario", type=Path, default=None, help="scenario JSON")
    p_ilp.add_argument("--config", type=Path, default=None)
    p_ilp.add_argument("--seed", type=int, default=1)
    p_ilp.add_argument("--out", type=Path, required=True)

    args = parser.parse_args(argv)

    if args.command == "run":
        cfg = _load(args)
        if args.save_scenario:
            from .scenario import from_experiment, save_scenario

            save_scenario(from_experiment(cfg, args.seed), args.save_scenario)
        record = run(
            args.algo,
            cfg,
            args.seed,
            rounds=args.rounds,
            tql_episodes=args.tql_episodes,
            eval_window=args.eval_window,
            opt_time_budget_s=args.opt_time_budget,
            trace_path=args.trace,
            curve_path=args.curve_out,
        )
        payload = json.dumps(record.to_json_dict(), indent=1)
        if args.out:
            args.out.write_text(payload)
        print(payload)
        return 0

    if args.command == "sweep":
        spec = SweepSpec(
            param=args.param,
            values=[int(v) for v in args.values.split(",")],
            replications=args.replications,
            algos=tuple(args.algos.split(",")),
            base=_load(args),
            base_seed=args.base_seed,
            rounds=args.rounds,
            tql_episodes=args.tql_episodes,
            workers=args.workers,
        )
        result = sweep(spec)
        result.to_csv(args.out)
        if args.summary_out:
            result.save_summary(args.summary_out)
        failures = [r for r in result.rows if r[5]]
        print(f"wrote {len(result.rows)} rows to {args.out} ({len(failures)} failed)")
        return 0 if not failures else 1

    if args.command == "serve":
        from .envserver import serve_env

        serve_env(_load(args), transport=args.transport, port=args.port, host=args.host)
        return 0

    if args.command == "export-ilp":
        from .oracle import export_ilp
        from .scenario import from_experiment, load_scenario

        if args.scenario:
            scenario = load_scenario(args.scenario)
        else:
            scenario = from_experiment(_load(args), args.seed)
        count = export_ilp(scenario, args.out)
        print(f"wrote {count} binary variables to {args.out}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
