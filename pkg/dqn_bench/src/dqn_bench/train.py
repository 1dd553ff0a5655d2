"""Multi-agent training loop against the arena's environment service.

One dueling double-DQN per device. Every frame each agent picks a masked
epsilon-greedy (slot, power) pair from its own observation; the service
scores the joint action and returns the per-frame delivered count, which is
the common reward. Transitions land in per-agent prioritized replay; after
each episode every agent trains on one minibatch, and target networks
refresh on a fixed episode period.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import DqnConfig
from .encoding import ActionSpace, encode_state, state_length
from .nets import DuelingQNet, masked_argmax
from .protocol import EnvClient
from .replay import PrioritizedReplay, Transition

DEFAULT_LEVELS = (-100.0, 17.0, 21.0, 23.0)


def dbm_to_mw(level: float) -> float:
    return 0.0 if level <= -100.0 else 10.0 ** (level / 10.0)


@dataclass
class EnvShape:
    num_devices: int
    num_slots: int
    num_frames: int
    budget_mw: float


def probe_shape(env: EnvClient, seed: int) -> EnvShape:
    """Learn M, N, T and the budget by stepping one all-off episode."""
    reply = env.reset(seed)
    state = reply["state"]
    M, N = len(state), len(state[0]["gains"])
    budget = float(state[0]["energy"])
    done = False
    frame = 1
    while not done:
        reply = env.step(
            [{"device": i, "slot": None, "power": "off"} for i in range(M)]
        )
        done = reply["done"]
        frame = reply["frame"]
    return EnvShape(num_devices=M, num_slots=N, num_frames=frame - 1, budget_mw=budget)


@dataclass
class Agent:
    online: DuelingQNet
    target: DuelingQNet
    optimizer: torch.optim.Optimizer
    replay: PrioritizedReplay


@dataclass
class TrainResult:
    agents: list[Agent]
    shape: EnvShape
    actions: ActionSpace
    episode_rewards: list[float] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)  # one entry per minibatch

    def save_curves(self, reward_csv: str | Path, loss_csv: str | Path) -> None:
        with open(reward_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["episode", "cumulative_reward"])
            for ep, r in enumerate(self.episode_rewards, start=1):
                w.writerow([ep, f"{r:.6f}"])
        with open(loss_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["minibatch", "loss"])
            for k, loss in enumerate(self.losses, start=1):
                w.writerow([k, f"{loss:.8f}"])


def _act(agent: Agent, state: np.ndarray, mask: np.ndarray, epsilon: float, rng) -> int:
    legal = np.flatnonzero(mask)
    if rng.random() < epsilon:
        return int(legal[rng.integers(len(legal))])
    with torch.no_grad():
        q = agent.online(torch.as_tensor(state, dtype=torch.float32))
    return int(masked_argmax(q, torch.as_tensor(mask)))


def _train_minibatch(agent: Agent, cfg: DqnConfig, rng) -> float:
    idx, batch = agent.replay.sample(cfg.minibatch_size, cfg.priority_exponent, rng)
    states = torch.as_tensor(np.stack([t.state for t in batch]), dtype=torch.float32)
    actions = torch.as_tensor([t.action for t in batch], dtype=torch.int64)
    rewards = torch.as_tensor([t.reward for t in batch], dtype=torch.float32)
    next_states = torch.as_tensor(
        np.stack([t.next_state for t in batch]), dtype=torch.float32
    )
    next_masks = torch.as_tensor(np.stack([t.next_mask for t in batch]))
    done = torch.as_tensor([t.done for t in batch], dtype=torch.float32)

    with torch.no_grad():
        next_online = agent.online(next_states)
        next_actions = masked_argmax(next_online, next_masks)
        next_target = agent.target(next_states)
        next_values = next_target.gather(1, next_actions.unsqueeze(1)).squeeze(1)
        targets = rewards + cfg.discount * next_values * (1.0 - done)

    q = agent.online(states).gather(1, actions.unsqueeze(1)).squeeze(1)
    td_error = targets - q
    loss = (td_error**2).mean()
    agent.optimizer.zero_grad()
    loss.backward()
    agent.optimizer.step()
    agent.replay.update_priorities(idx, np.abs(td_error.detach().numpy()) + 1e-3)
    return float(loss.item())


def train(
    env: EnvClient,
    cfg: DqnConfig,
    levels_dbm=DEFAULT_LEVELS,
    progress=None,
) -> TrainResult:
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    shape = probe_shape(env, cfg.seed)
    costs = [dbm_to_mw(p) for p in levels_dbm]
    actions = ActionSpace(shape.num_slots, list(levels_dbm), costs)
    dim = state_length(shape.num_slots, shape.num_devices)

    agents = []
    for _ in range(shape.num_devices):
        online = DuelingQNet(dim, actions.size, cfg.hidden_sizes)
        target = DuelingQNet(dim, actions.size, cfg.hidden_sizes)
        target.load_state_dict(online.state_dict())
        agents.append(
            Agent(
                online=online,
                target=target,
                optimizer=torch.optim.RMSprop(online.parameters(), lr=cfg.learning_rate),
                replay=PrioritizedReplay(cfg.replay_capacity),
            )
        )

    result = TrainResult(agents=agents, shape=shape, actions=actions)
    M = shape.num_devices

    for episode in range(1, cfg.episodes + 1):
        eps = cfg.epsilon(episode - 1)
        reply = env.reset(cfg.seed)
        entries = reply["state"]
        frac = episode / cfg.episodes
        states = [
            encode_state(e, frac, eps, shape.num_slots, shape.num_frames, shape.budget_mw)
            for e in entries
        ]
        masks = [actions.legal_mask(e) for e in entries]
        cumulative = 0.0
        done = False
        while not done:
            chosen = [_act(agents[i], states[i], masks[i], eps, rng) for i in range(M)]
            wire = [{"device": i, **actions.to_wire(chosen[i])} for i in range(M)]
            reply = env.step(wire)
            done = reply["done"]
            reward = float(reply["reward"])
            cumulative += reward
            entries = reply["state"]
            next_states = [
                encode_state(e, frac, eps, shape.num_slots, shape.num_frames, shape.budget_mw)
                for e in entries
            ]
            next_masks = [actions.legal_mask(e) for e in entries]
            for i in range(M):
                agents[i].replay.add(
                    Transition(
                        state=states[i],
                        action=chosen[i],
                        reward=reward,
                        next_state=next_states[i],
                        next_mask=next_masks[i],
                        done=done,
                    ),
                    priority=agents[i].replay.max_priority(),
                )
            states, masks = next_states, next_masks

        result.episode_rewards.append(cumulative)
        if episode % cfg.train_every_episodes == 0:
            for agent in agents:
                if len(agent.replay) >= 1:
                    result.losses.append(_train_minibatch(agent, cfg, rng))
        if episode % cfg.target_update_episodes == 0:
            for agent in agents:
                agent.target.load_state_dict(agent.online.state_dict())
        if progress is not None:
            progress(episode, cumulative)

    return result


def evaluate(result: TrainResult, env: EnvClient, episodes: int, seed: int) -> float:
    """Greedy-policy mean delivered packets per episode."""
    shape, actions, agents = result.shape, result.actions, result.agents
    totals = []
    for _ in range(episodes):
        reply = env.reset(seed)
        entries = reply["state"]
        done = False
        total = 0.0
        while not done:
            wire = []
            for i, agent in enumerate(agents):
                state = encode_state(
                    entries[i], 1.0, 0.0, shape.num_slots, shape.num_frames, shape.budget_mw
                )
                mask = actions.legal_mask(entries[i])
                a = _act(agent, state, mask, epsilon=0.0, rng=np.random.default_rng(0))
                wire.append({"device": i, **actions.to_wire(a)})
            reply = env.step(wire)
            total += float(reply["reward"])
            entries = reply["state"]
            done = reply["done"]
        totals.append(total)
    return float(np.mean(totals))


def write_sweep_row(
    path: str | Path, value, seed: int, delivered: float, runtime_s: float
) -> None:
    """One CSV row in the arena's sweep schema, algo column 'dql'."""
    new = not Path(path).exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(["param", "value", "algo", "seed", "delivered", "runtime_s", "error"])
        w.writerow(["-", value, "dql", seed, f"{delivered:.6f}", f"{runtime_s:.3f}", ""])


def moving_average(xs, window: int) -> np.ndarray:
    arr = np.asarray(xs, dtype=float)
    if len(arr) < window:
        return arr.cumsum() / np.arange(1, len(arr) + 1)
    kernel = np.ones(window) / window
    return np.convolve(arr, kernel, mode="valid")
