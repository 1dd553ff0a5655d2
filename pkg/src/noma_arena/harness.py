"""Experiment front door: single runs, parameter sweeps, CSV/JSON output.

Evaluation protocol shared by every algorithm: a run trains (if the
algorithm learns) on realisations 1..rounds of the seeded scenario stream,
then scores its final deterministic policy on the last ``eval_window``
realisations and reports the mean delivered count. The exact solver is run
per evaluation realisation and averaged over the same window, so on a given
seed its mean dominates every policy's mean by construction.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .baselines import greedy_schedule, max_power_schedule, tql_train
from .config import ExperimentConfig
from .crl import CrlParams, crl_train
from .matching import fm_frame
from .scenario import Scenario, from_experiment, realization
from .units import dbm_to_mw, energy_cost_micro, mw_to_micro

ALGORITHMS = ("crl", "tql", "fm-max", "opt")

DEFAULT_ROUNDS = 50
DEFAULT_TQL_EPISODES = 5000
DEFAULT_EVAL_WINDOW = 10


@dataclass
class ResultRecord:
    algo: str
    seed: int
    delivered: float  # mean total over the evaluation window
    runtime_s: float
    meta: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class SweepSpec:
    param: str  # "L_max" (bits) or "G"
    values: list
    replications: int = 20
    algos: tuple[str, ...] = ("crl", "tql", "fm-max", "opt")
    base: ExperimentConfig = field(default_factory=ExperimentConfig)
    base_seed: int = 1
    rounds: int = DEFAULT_ROUNDS
    tql_episodes: int = DEFAULT_TQL_EPISODES
    eval_window: int = DEFAULT_EVAL_WINDOW
    opt_time_budget_s: float = 60.0
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.param not in ("L_max", "G"):
            raise ValueError("sweep parameter must be L_max or G")
        unknown = set(self.algos) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")

    def apply(self, value) -> ExperimentConfig:
        if self.param == "L_max":
            return self.base.with_traffic(length_max_bits=int(value))
        return self.base.with_network(group_cap=int(value))

    def seeds(self) -> list[int]:
        return [self.base_seed + k for k in range(self.replications)]


def _evaluate_schedule(
    scenario: Scenario, schedule: np.ndarray, eval_rounds: list[int]
) -> tuple[float, dict]:
    """Mean delivered of a fixed (T, M) level-index schedule over realisations."""
    cfg = scenario.config
    levels_mw = np.array([dbm_to_mw(p) for p in cfg.power_levels_dbm])
    costs = np.array([energy_cost_micro(p) for p in cfg.power_levels_dbm], dtype=np.int64)
    spend = costs[schedule].sum(axis=0)
    budget = mw_to_micro(cfg.energy_budget_mw)
    assert spend.max(initial=0) <= budget, "schedule exceeds the energy budget"

    totals = []
    max_frame = 0
    for k in eval_rounds:
        real = realization(scenario, k)
        total = 0
        for t in range(1, real.num_frames + 1):
            fr = fm_frame(real, t, levels_mw[schedule[t - 1]])
            total += fr.served_total
            max_frame = max(max_frame, fr.served_total)
        totals.append(total)
    meta = {
        "per_round_delivered": totals,
        "max_device_spend_mw": float(spend.max(initial=0) / 1e6),
        "max_frame_delivered": max_frame,
    }
    return float(np.mean(totals)), meta


def run(
    algo: str,
    config: ExperimentConfig,
    seed: int,
    rounds: int = DEFAULT_ROUNDS,
    tql_episodes: int = DEFAULT_TQL_EPISODES,
    eval_window: int = DEFAULT_EVAL_WINDOW,
    opt_time_budget_s: float = 60.0,
    opt_cap: int = 1_000_000,
    trace_path: str | Path | None = None,
    curve_path: str | Path | None = None,
) -> ResultRecord:
    """Run one algorithm on one seeded scenario; see the module docstring."""
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algo {algo!r}; pick one of {ALGORITHMS}")
    scenario = from_experiment(config, seed)
    train_rounds = rounds if algo == "crl" else tql_episodes if algo == "tql" else rounds
    window = min(eval_window, train_rounds) or 1
    eval_rounds = list(range(max(1, train_rounds - window + 1), train_rounds + 1))

    start = time.perf_counter()
    meta: dict = {"rounds": train_rounds, "eval_rounds": eval_rounds}

    if algo == "crl":
        trace_fh = open(trace_path, "w") if trace_path else None
        try:
            sink = (
                (lambda r: trace_fh.write(json.dumps(r.to_json_dict()) + "\n"))
                if trace_fh
                else None
            )
            crl_run = crl_train(scenario, CrlParams(rounds=rounds), trace=sink)
        finally:
            if trace_fh:
                trace_fh.close()
        delivered, eval_meta = _evaluate_schedule(scenario, crl_run.schedule(), eval_rounds)
        meta |= eval_meta
        meta["training_delivered_last10"] = [
            r.total_delivered for r in crl_run.history[-10:]
        ]
    elif algo == "tql":
        tql_run = tql_train(scenario, episodes=tql_episodes)
        delivered, eval_meta = _evaluate_schedule(
            scenario, greedy_schedule(tql_run.tables), eval_rounds
        )
        meta |= eval_meta
        if curve_path:
            with open(curve_path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["episode", "delivered", "mean_frame_reward"])
                for ep, (total, rewards) in enumerate(
                    zip(tql_run.delivered, tql_run.rewards), start=1
                ):
                    writer.writerow([ep, total, f"{np.mean(rewards):.6f}"])
    elif algo == "fm-max":
        delivered, eval_meta = _evaluate_schedule(
            scenario, max_power_schedule(scenario), eval_rounds
        )
        meta |= eval_meta
    else:  # opt
        from .oracle import solve_offline

        objectives = []
        proven = []
        spends = []
        max_frame = 0
        for k in eval_rounds:
            real = realization(scenario, k)
            sol = solve_offline(real, cap=opt_cap, time_budget_s=opt_time_budget_s)
            objectives.append(sol.objective)
            proven.append(sol.proven)
            spends.append(float(sol.assignment.powers_mw.sum(axis=0).max(initial=0.0)))
            for cfgs in sol.certificate:
                max_frame = max(max_frame, sum(c.value for c in cfgs))
        delivered = float(np.mean(objectives))
        meta |= {
            "per_round_delivered": objectives,
            "proven": proven,
            "max_device_spend_mw": max(spends, default=0.0),
            "max_frame_delivered": max_frame,
        }

    runtime = time.perf_counter() - start
    return ResultRecord(algo=algo, seed=seed, delivered=delivered, runtime_s=runtime, meta=meta)


def _sweep_task(args) -> tuple:
    spec, value, seed, algo = args
    cfg = spec.apply(value)
    try:
        record = run(
            algo,
            cfg,
            seed,
            rounds=spec.rounds,
            tql_episodes=spec.tql_episodes,
            eval_window=spec.eval_window,
            opt_time_budget_s=spec.opt_time_budget_s,
        )
        return (value, algo, seed, record.delivered, record.runtime_s, "", record.meta)
    except Exception as exc:  # recorded per row, sweep continues
        return (value, algo, seed, None, None, f"{type(exc).__name__}: {exc}", {})


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[tuple]  # (value, algo, seed, delivered, runtime_s, error, meta)

    def data_rows(self) -> list[list[str]]:
        """Deterministic CSV payload; runtime is telemetry, not data."""
        out = []
        for value, algo, seed, delivered, runtime_s, error, _ in sorted(
            self.rows, key=lambda r: (str(r[0]), r[1], r[2])
        ):
            out.append(
                [
                    self.spec.param,
                    str(value),
                    algo,
                    str(seed),
                    "" if delivered is None else f"{delivered:.6f}",
                    "" if runtime_s is None else f"{runtime_s:.3f}",
                    error,
                ]
            )
        return out

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["param", "value", "algo", "seed", "delivered", "runtime_s", "error"])
            writer.writerows(self.data_rows())

    def summary(self) -> dict:
        cells: dict[tuple, list[float]] = {}
        for value, algo, seed, delivered, _, error, _ in self.rows:
            if error or delivered is None:
                continue
            cells.setdefault((value, algo), []).append(delivered)
        out: dict[str, dict] = {"param": self.spec.param, "cells": []}
        for (value, algo), xs in sorted(cells.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
            mean, lo, hi = mean_ci(xs)
            out["cells"].append(
                {
                    "value": value,
                    "algo": algo,
                    "n": len(xs),
                    "mean": mean,
                    "ci95": [lo, hi],
                }
            )
        return out

    def save_summary(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=1))


def mean_ci(xs: list[float], confidence: float = 0.95) -> tuple[float, float, float]:
    """Mean with a t-based confidence interval (collapses for n=1)."""
    arr = np.asarray(xs, dtype=float)
    mean = float(arr.mean())
    if len(arr) < 2:
        return mean, mean, mean
    sem = float(arr.std(ddof=1) / np.sqrt(len(arr)))
    if sem == 0.0:
        return mean, mean, mean
    half = float(stats.t.ppf(0.5 + confidence / 2, len(arr) - 1)) * sem
    return mean, mean - half, mean + half


def sweep(spec: SweepSpec) -> SweepResult:
    tasks = [
        (spec, value, seed, algo)
        for value in spec.values
        for seed in spec.seeds()
        for algo in spec.algos
    ]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]
    return SweepResult(spec=spec, rows=rows)
