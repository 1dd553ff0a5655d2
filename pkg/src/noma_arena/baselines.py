"""Tabular Q-learning over the battery MDP, plus the max-power anchor policy.

TQL shares the learner's world with the path-weight learner: same per-device
(energy, frame) states, same power actions, same black-box matcher and the
same normalised frame reward, so the two differ only in the learning rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .crl import TransitionGraph, build_transition_graph
from .matching import fm_frame
from .scenario import Scenario, realization
from .units import dbm_to_mw, energy_cost_micro, mw_to_micro

_TQL_STREAM = 22


@dataclass
class QTable:
    """Q-values living on the transition-graph edges.

    An edge IS a legal (state, action) pair, so storing one value per edge
    makes illegal actions unrepresentable. Out-edges are ordered by power
    level ascending, which realises the lowest-power tie-break for free.
    """

    tg: TransitionGraph
    alpha: float = 0.5
    values: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.values is None:
            self.values = np.zeros(self.tg.num_edges)


def legal_edges(q: QTable, node: int) -> list[int]:
    return q.tg.out_edges[node]


def tql_act(q: QTable, node: int, epsilon: float, rng: np.random.Generator) -> int:
    """Pick an out-edge: uniform with probability epsilon, else greedy.

    Greedy ties resolve to the first maximal edge, i.e. the lowest power.
    """
    edges = legal_edges(q, node)
    if not edges:
        raise ValueError(f"node {node} has no legal action")
    if rng.random() < epsilon:
        return edges[int(rng.integers(len(edges)))]
    vals = q.values[edges]
    return edges[int(np.argmax(vals))]


def tql_update(q: QTable, edge: int, reward: float) -> None:
    """One-step undiscounted backup; frames past the horizon are terminal."""
    tg = q.tg
    nxt = int(tg.edge_dst[edge])
    if tg.node_frame[nxt] > tg.num_frames:
        best_next = 0.0
    else:
        best_next = float(np.max(q.values[tg.out_edges[nxt]]))
    q.values[edge] += q.alpha * (reward + best_next - q.values[edge])


def linear_epsilon(start: float = 0.2, end: float = 0.01):
    """Annealing schedule over episode index 0..episodes-1."""

    def schedule(episode: int, episodes: int) -> float:
        if episodes <= 1:
            return end
        frac = episode / (episodes - 1)
        return start + (end - start) * frac

    return schedule


@dataclass
class TqlRun:
    tables: list[QTable]
    delivered: list[int]  # per episode, total over the frame horizon
    rewards: list[list[float]]  # per episode, per frame


def greedy_schedule(tables: list[QTable]) -> np.ndarray:
    """Deterministic rollout of each table (epsilon = 0), level indices (T, M)."""
    T = tables[0].tg.num_frames
    out = np.zeros((T, len(tables)), dtype=np.int64)
    for i, q in enumerate(tables):
        node = q.tg.start
        for t in range(T):
            edges = legal_edges(q, node)
            e = edges[int(np.argmax(q.values[edges]))]
            out[t, i] = q.tg.edge_action[e]
            node = int(q.tg.edge_dst[e])
    return out


def tql_train(
    scenario: Scenario,
    episodes: int,
    alpha: float = 0.5,
    epsilon_schedule=None,
    rng: np.random.Generator | None = None,
) -> TqlRun:
    """Independent epsilon-greedy learners, one per device, common reward.

    Each episode draws the next realisation of the scenario's seed stream,
    every device picks one power per frame, the matcher scores the joint
    action and each device backs up the normalised frame reward.
    """
    if rng is None:
        rng = np.random.default_rng([scenario.seed, _TQL_STREAM])
    if epsilon_schedule is None:
        epsilon_schedule = linear_epsilon()
    proto = build_transition_graph(
        scenario.config.energy_budget_mw,
        scenario.config.power_levels_dbm,
        scenario.num_frames,
    )
    tables = [QTable(tg=proto.fresh_copy(), alpha=alpha) for _ in range(scenario.num_devices)]
    for q in tables:
        q.values = np.zeros(q.tg.num_edges)

    M, T = scenario.num_devices, scenario.num_frames
    levels_mw = np.array([dbm_to_mw(p) for p in proto.levels_dbm])
    cap = scenario.config.per_frame_cap

    run = TqlRun(tables=tables, delivered=[], rewards=[])
    for ep in range(episodes):
        eps = epsilon_schedule(ep, episodes)
        real = realization(scenario, ep + 1)
        nodes = [q.tg.start for q in tables]
        chosen = np.zeros(M, dtype=np.int64)
        ep_rewards: list[float] = []
        total = 0
        for t in range(1, T + 1):
            powers = np.zeros(M)
            for i, q in enumerate(tables):
                chosen[i] = tql_act(q, nodes[i], eps, rng)
                powers[i] = levels_mw[q.tg.edge_action[chosen[i]]]
            fr = fm_frame(real, t, powers)
            reward = fr.served_total / cap
            ep_rewards.append(reward)
            total += fr.served_total
            for i, q in enumerate(tables):
                tql_update(q, int(chosen[i]), reward)
                nodes[i] = int(q.tg.edge_dst[chosen[i]])
        run.delivered.append(total)
        run.rewards.append(ep_rewards)
    return run


def max_power_schedule(scenario: Scenario) -> np.ndarray:
    """Every device at maximum power each frame until its budget runs dry.

    Returns level indices of shape (T, M).
    """
    cfg = scenario.config
    costs = [energy_cost_micro(p) for p in cfg.power_levels_dbm]
    max_idx, max_cost = len(costs) - 1, costs[-1]
    off_idx = costs.index(0)
    T, M = cfg.num_frames, cfg.num_devices
    budget = mw_to_micro(cfg.energy_budget_mw)
    out = np.full((T, M), off_idx, dtype=np.int64)
    if max_cost == 0:
        return out
    for i in range(M):
        remaining = budget
        for t in range(T):
            if max_cost <= remaining:
                out[t, i] = max_idx
                remaining -= max_cost
    return out


def max_power_baseline(scenario: Scenario) -> int:
    """Delivered count of the max-power schedule on the given realisation."""
    cfg = scenario.config
    levels_mw = np.array([dbm_to_mw(p) for p in cfg.power_levels_dbm])
    schedule = max_power_schedule(scenario)
    total = 0
    for t in range(1, scenario.num_frames + 1):
        fr = fm_frame(scenario, t, levels_mw[schedule[t - 1]])
        total += fr.served_total
    return total
