"""Bandit-style power learning over per-device battery transition graphs.

Each device carries a layered DAG whose nodes are (remaining energy, frame)
and whose edges are power actions; an episode is one start-terminal path.
Learning follows the exponential-weighting family for adversarial bandits:
paths are sampled from a mixture of a uniform draw over an edge-covering
path set (exploration) and a weight-proportional walk (exploitation), every
edge receives a bias-corrected importance-weighted reward, and edge weights
update multiplicatively. The slot-level matcher is invoked per frame as a
black box and its delivered count, normalised to [0, 1], is the common
reward for all devices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .matching import FrameMatchResult, fm_frame
from .scenario import Scenario, realization
from .units import dbm_to_mw, energy_cost_micro, mw_to_micro

_CRL_STREAM = 21


@dataclass(frozen=True)
class CrlParams:
    gamma: float = 0.5  # probability of the uniform covering-path draw
    beta: float = 0.01  # implicit-exploration bias in the reward estimate
    eta: float = 0.00075  # learning rate of the multiplicative update
    rounds: int = 50

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must be in (0, 1]")
        if self.eta <= 0.0:
            raise ValueError("eta must be positive")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")


class TransitionGraph:
    """Layered battery DAG for one device.

    Frames run 1..T+2: layers 1..T hold action edges (any power whose energy
    cost fits the remaining budget), layer T+1 holds a single zero-cost
    closure edge per node down to the terminal (0, T+2), discarding whatever
    budget is left. Energy is tracked in integer micro-mW so that nodes with
    equal remaining energy merge exactly. All start-terminal paths have T+1
    edges, and any path's total action cost fits the budget by construction.
    """

    def __init__(self, budget_mw: float, levels_dbm: tuple[float, ...], num_frames: int):
        if budget_mw < 0:
            raise ValueError("energy budget must be >= 0")
        if num_frames < 1:
            raise ValueError("num_frames must be >= 1")
        self.levels_dbm = tuple(float(p) for p in levels_dbm)
        self.num_frames = num_frames
        self.budget_micro = mw_to_micro(budget_mw)
        self.costs_micro = tuple(energy_cost_micro(p) for p in self.levels_dbm)
        self.off_action = next(
            k for k, c in enumerate(self.costs_micro) if c == 0
        )
        self._build()
        self.weights = np.ones(self.num_edges)

    def _build(self) -> None:
        T = self.num_frames
        node_energy: list[int] = []
        node_frame: list[int] = []
        index: dict[tuple[int, int], int] = {}

        def add_node(energy: int, frame: int) -> int:
            key = (energy, frame)
            if key not in index:
                index[key] = len(node_energy)
                node_energy.append(energy)
                node_frame.append(frame)
            return index[key]

        self.start = add_node(self.budget_micro, 1)
        edge_src: list[int] = []
        edge_dst: list[int] = []
        edge_action: list[int] = []
        edge_layer: list[int] = []

        frontier = [self.start]
        for t in range(1, T + 1):
            nxt: dict[int, None] = {}
            for u in sorted(frontier, key=lambda n: -node_energy[n]):
                e = node_energy[u]
                for a, cost in enumerate(self.costs_micro):
                    if cost <= e:
                        v = add_node(e - cost, t + 1)
                        edge_src.append(u)
                        edge_dst.append(v)
                        edge_action.append(a)
                        edge_layer.append(t)
                        nxt[v] = None
            frontier = list(nxt)

        self.terminal = add_node(0, T + 2)
        for u in sorted(frontier, key=lambda n: -node_energy[n]):
            edge_src.append(u)
            edge_dst.append(self.terminal)
            edge_action.append(self.off_action)
            edge_layer.append(T + 1)

        self.node_energy_micro = np.array(node_energy, dtype=np.int64)
        self.node_frame = np.array(node_frame, dtype=np.int64)
        self.edge_src = np.array(edge_src, dtype=np.int64)
        self.edge_dst = np.array(edge_dst, dtype=np.int64)
        self.edge_action = np.array(edge_action, dtype=np.int64)
        self.edge_layer = np.array(edge_layer, dtype=np.int64)
        self.num_nodes = len(node_energy)
        self.num_edges = len(edge_src)
        self.out_edges: list[list[int]] = [[] for _ in range(self.num_nodes)]
        self.in_edges: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for e in range(self.num_edges):
            self.out_edges[self.edge_src[e]].append(e)
            self.in_edges[self.edge_dst[e]].append(e)
        self.layer_edges: dict[int, np.ndarray] = {
            t: np.flatnonzero(self.edge_layer == t) for t in range(1, T + 2)
        }

    def fresh_copy(self) -> "TransitionGraph":
        """Same topology, weights reset to one."""
        clone = object.__new__(TransitionGraph)
        clone.__dict__.update(self.__dict__)
        clone.weights = np.ones(self.num_edges)
        return clone

    def edge_cost_micro(self, e: int) -> int:
        if self.edge_layer[e] > self.num_frames:
            return 0
        return self.costs_micro[self.edge_action[e]]

    def path_actions(self, path: tuple[int, ...]) -> list[int]:
        """Level indices for frames 1..T (the closure edge carries no frame)."""
        return [int(self.edge_action[e]) for e in path[: self.num_frames]]

    def path_cost_micro(self, path: tuple[int, ...]) -> int:
        return sum(self.edge_cost_micro(e) for e in path)

    def to_json_dict(self) -> dict:
        return {
            "budget_micro": int(self.budget_micro),
            "levels_dbm": list(self.levels_dbm),
            "num_frames": self.num_frames,
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_json_dict(cls, raw: dict) -> "TransitionGraph":
        tg = cls(
            raw["budget_micro"] / 1e6,
            tuple(raw["levels_dbm"]),
            raw["num_frames"],
        )
        weights = np.array(raw["weights"], dtype=float)
        if weights.shape != (tg.num_edges,):
            raise ValueError("weight vector does not match the rebuilt graph")
        tg.weights = weights
        return tg


def build_transition_graph(
    budget_mw: float, levels_dbm: tuple[float, ...], num_frames: int
) -> TransitionGraph:
    return TransitionGraph(budget_mw, levels_dbm, num_frames)


def analytic_graph_counts(num_frames: int, num_levels: int) -> dict[str, int]:
    """Closed-form node/edge/path counts for the merged-energy-level scheme.

    These hold when the energy levels per frame collapse to one node per
    spent-action count; the exact-partial-sum graph built here generally has
    different counts, so report both rather than forcing agreement.
    """
    T, P = num_frames, num_levels
    return {
        "nodes": 2 + T * P,
        "edges": P * (P * (T - 1) + T + 3) // 2,
        "paths": math.comb(T + P - 1, T),
    }


def count_paths(tg: TransitionGraph) -> int:
    """Exact start-terminal path count (unit-weight backward sum)."""
    saved = tg.weights
    tg.weights = np.ones(tg.num_edges)
    try:
        total = backward_path_weights(tg)[tg.start]
    finally:
        tg.weights = saved
    return int(round(total))


def graph_census(tg: TransitionGraph) -> dict[str, int]:
    return {"nodes": tg.num_nodes, "edges": tg.num_edges, "paths": count_paths(tg)}


@dataclass
class CoveringPaths:
    """Start-terminal paths touching every edge at least once."""

    paths: list[tuple[int, ...]]
    cover_count: np.ndarray  # per edge, number of covering paths through it

    def __len__(self) -> int:
        return len(self.paths)


def covering_paths(tg: TransitionGraph) -> CoveringPaths:
    """One path per edge through hop-shortest prefixes/suffixes, deduplicated.

    The DAG is layered, so the first incoming (resp. outgoing) edge of each
    node already realises a hop-shortest connection to the start (resp.
    terminal); two linear passes precompute them all.
    """
    parent = [-1] * tg.num_nodes  # edge leading back towards the start
    for e in range(tg.num_edges):
        v = tg.edge_dst[e]
        if parent[v] == -1:
            parent[v] = e
    succ = [-1] * tg.num_nodes  # edge leading on towards the terminal
    for e in range(tg.num_edges - 1, -1, -1):
        succ[tg.edge_src[e]] = e

    def back_to_start(node: int) -> list[int]:
        chain: list[int] = []
        while node != tg.start:
            e = parent[node]
            if e == -1:
                raise ValueError(f"node {node} unreachable from the start")
            chain.append(e)
            node = int(tg.edge_src[e])
        chain.reverse()
        return chain

    def on_to_terminal(node: int) -> list[int]:
        chain: list[int] = []
        while node != tg.terminal:
            e = succ[node]
            if e == -1:
                raise ValueError(f"terminal unreachable from node {node}")
            chain.append(e)
            node = int(tg.edge_dst[e])
        return chain

    seen: dict[tuple[int, ...], None] = {}
    for e in range(tg.num_edges):
        path = tuple(
            back_to_start(int(tg.edge_src[e])) + [e] + on_to_terminal(int(tg.edge_dst[e]))
        )
        seen.setdefault(path, None)

    paths = list(seen)
    cover = np.zeros(tg.num_edges, dtype=np.int64)
    for path in paths:
        cover[list(path)] += 1
    if (cover == 0).any():
        raise ValueError("edge cover is incomplete")
    return CoveringPaths(paths=paths, cover_count=cover)


def backward_path_weights(tg: TransitionGraph) -> np.ndarray:
    """Total weight of node-to-terminal paths (weight = product over edges)."""
    B = np.zeros(tg.num_nodes)
    B[tg.terminal] = 1.0
    for t in range(tg.num_frames + 1, 0, -1):
        sel = tg.layer_edges[t]
        np.add.at(B, tg.edge_src[sel], tg.weights[sel] * B[tg.edge_dst[sel]])
    return B


def forward_path_weights(tg: TransitionGraph) -> np.ndarray:
    """Total weight of start-to-node paths."""
    F = np.zeros(tg.num_nodes)
    F[tg.start] = 1.0
    for t in range(1, tg.num_frames + 2):
        sel = tg.layer_edges[t]
        np.add.at(F, tg.edge_dst[sel], tg.weights[sel] * F[tg.edge_src[sel]])
    return F


def sample_path(
    tg: TransitionGraph,
    cover: CoveringPaths,
    gamma: float,
    rng: np.random.Generator,
    suffix: np.ndarray | None = None,
) -> tuple[int, ...]:
    """Mixture draw: uniform covering path w.p. gamma, else a weight walk.

    The walk adds vertices one at a time, picking edge e=(v,u) with
    probability w(e)*B(u)/B(v); that is exactly path-weight-proportional
    sampling without touching the exponentially many paths.
    """
    if rng.random() < gamma:
        return cover.paths[int(rng.integers(len(cover.paths)))]
    if suffix is None:
        suffix = backward_path_weights(tg)
    path: list[int] = []
    node = tg.start
    while node != tg.terminal:
        edges = tg.out_edges[node]
        probs = np.array([tg.weights[e] * suffix[tg.edge_dst[e]] for e in edges])
        probs /= probs.sum()
        e = edges[int(rng.choice(len(edges), p=probs))]
        path.append(e)
        node = int(tg.edge_dst[e])
    return tuple(path)


def edge_probabilities(
    tg: TransitionGraph,
    cover: CoveringPaths,
    gamma: float,
    suffix: np.ndarray | None = None,
    prefix: np.ndarray | None = None,
) -> np.ndarray:
    """Probability that the mixture draw traverses each edge.

    Weight-walk part by forward/backward path sums: F(u) w(e) B(v) / B(s);
    covering part by how many covering paths contain the edge. Every edge
    keeps q >= gamma / |cover|, the exploration floor.
    """
    if suffix is None:
        suffix = backward_path_weights(tg)
    if prefix is None:
        prefix = forward_path_weights(tg)
    total = suffix[tg.start]
    walk = prefix[tg.edge_src] * tg.weights * suffix[tg.edge_dst] / total
    q = (1.0 - gamma) * walk + gamma * cover.cover_count / len(cover.paths)
    if (q <= 0.0).any():
        raise ValueError("some edge has zero traversal probability")
    return q


def update_weights(
    tg: TransitionGraph,
    path: tuple[int, ...],
    frame_rewards: np.ndarray,
    q: np.ndarray,
    beta: float,
    eta: float,
) -> None:
    """Importance-weighted multiplicative update applied to every edge.

    Estimate per edge: (beta + r * 1{edge on the sampled path}) / q(edge),
    where r is the frame reward of the edge's layer (closure layer: 0).
    """
    if (q <= 0.0).any():
        raise ValueError("edge probabilities must be positive")
    if len(frame_rewards) != tg.num_frames:
        raise ValueError("one reward per frame required")
    on_path = np.zeros(tg.num_edges, dtype=bool)
    on_path[list(path)] = True
    # Layers run 1..T+1; index T of the extended vector is the closure layer's 0.
    r_edge = np.append(np.asarray(frame_rewards, dtype=float), 0.0)[tg.edge_layer - 1]
    estimate = (beta + r_edge * on_path) / q
    tg.weights = tg.weights * np.exp(eta * estimate)


def renormalize_layers(tg: TransitionGraph) -> None:
    """Divide each layer's weights by the layer max.

    Uniform scaling inside a layer leaves walk probabilities, edge
    probabilities and the most probable path unchanged while keeping the
    exponential growth bounded over arbitrarily many rounds.
    """
    for t in range(1, tg.num_frames + 2):
        sel = tg.layer_edges[t]
        m = tg.weights[sel].max()
        if m > 0:
            tg.weights[sel] = tg.weights[sel] / m


def most_probable_path(tg: TransitionGraph) -> tuple[int, ...]:
    """Argmax-weight start-terminal path (log-space DP, first-index ties)."""
    log_w = np.log(tg.weights)
    best = np.full(tg.num_nodes, -np.inf)
    best[tg.terminal] = 0.0
    choice = [-1] * tg.num_nodes
    for t in range(tg.num_frames + 1, 0, -1):
        for e in tg.layer_edges[t]:
            u, v = int(tg.edge_src[e]), int(tg.edge_dst[e])
            score = log_w[e] + best[v]
            if score > best[u]:
                best[u] = score
                choice[u] = int(e)
    path: list[int] = []
    node = tg.start
    while node != tg.terminal:
        e = choice[node]
        path.append(e)
        node = int(tg.edge_dst[e])
    return tuple(path)


@dataclass
class RoundResult:
    round_index: int
    paths: list[tuple[int, ...]]  # per device, edge ids in its own graph
    frame_results: list[FrameMatchResult]
    rewards: list[float]  # per frame, normalised to [0, 1], common to devices
    total_delivered: int

    def to_json_dict(self) -> dict:
        return {
            "round": self.round_index,
            "paths": [list(p) for p in self.paths],
            "groups": [fr.groups for fr in self.frame_results],
            "rewards": self.rewards,
            "total_delivered": self.total_delivered,
        }


def crl_round(
    real: Scenario,
    graphs: list[TransitionGraph],
    cover: CoveringPaths,
    params: CrlParams,
    rng: np.random.Generator,
) -> RoundResult:
    """One learning round on one realisation.

    Sample a path per device from the current mixture, run the matcher per
    frame on the joint powers, grant each frame's normalised count to every
    device's frame edge, then update all weights against the pre-sampling
    edge probabilities.
    """
    M = real.num_devices
    T = real.num_frames
    levels_mw = np.array([dbm_to_mw(p) for p in graphs[0].levels_dbm])

    qs: list[np.ndarray] = []
    paths: list[tuple[int, ...]] = []
    for tg in graphs:
        suffix = backward_path_weights(tg)
        prefix = forward_path_weights(tg)
        qs.append(edge_probabilities(tg, cover, params.gamma, suffix, prefix))
        path = sample_path(tg, cover, params.gamma, rng, suffix)
        assert tg.path_cost_micro(path) <= tg.budget_micro
        paths.append(path)

    powers = np.zeros((T, M))
    for i, (tg, path) in enumerate(zip(graphs, paths)):
        for t, action in enumerate(tg.path_actions(path)):
            powers[t, i] = levels_mw[action]

    cap = real.config.per_frame_cap
    frame_results: list[FrameMatchResult] = []
    rewards: list[float] = []
    for t in range(1, T + 1):
        fr = fm_frame(real, t, powers[t - 1])
        frame_results.append(fr)
        rewards.append(fr.served_total / cap)

    reward_arr = np.array(rewards)
    for tg, path, q in zip(graphs, paths, qs):
        update_weights(tg, path, reward_arr, q, params.beta, params.eta)
        renormalize_layers(tg)

    return RoundResult(
        round_index=real.round_index,
        paths=paths,
        frame_results=frame_results,
        rewards=rewards,
        total_delivered=int(sum(fr.served_total for fr in frame_results)),
    )


@dataclass
class CrlRun:
    graphs: list[TransitionGraph]
    cover: CoveringPaths
    history: list[RoundResult] = field(default_factory=list)

    def schedule(self) -> np.ndarray:
        """Most-probable power actions, shape (T, M) of level indices."""
        T = self.graphs[0].num_frames
        out = np.zeros((T, len(self.graphs)), dtype=np.int64)
        for i, tg in enumerate(self.graphs):
            out[:, i] = tg.path_actions(most_probable_path(tg))
        return out


def crl_train(
    scenario: Scenario,
    params: CrlParams,
    rng: np.random.Generator | None = None,
    trace=None,
) -> CrlRun:
    """Train over fresh realisations 1..rounds of the scenario's seed stream."""
    if rng is None:
        rng = np.random.default_rng([scenario.seed, _CRL_STREAM])
    proto = build_transition_graph(
        scenario.config.energy_budget_mw,
        scenario.config.power_levels_dbm,
        scenario.num_frames,
    )
    graphs = [proto.fresh_copy() for _ in range(scenario.num_devices)]
    cover = covering_paths(proto)
    run = CrlRun(graphs=graphs, cover=cover)
    for k in range(1, params.rounds + 1):
        real = realization(scenario, k)
        result = crl_round(real, graphs, cover, params, rng)
        run.history.append(result)
        if trace is not None:
            trace(result)
    return run
