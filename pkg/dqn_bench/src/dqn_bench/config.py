"""Benchmark hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class DqnConfig:
    hidden_sizes: tuple[int, int, int] = (50, 35, 20)
    learning_rate: float = 5e-3
    episodes: int = 5000
    epsilon_start: float = 0.2
    epsilon_end: float = 0.01
    target_update_episodes: int = 10
    minibatch_size: int = 300
    replay_capacity: int = 50_000
    priority_exponent: float = 0.6
    discount: float = 1.0
    train_every_episodes: int = 1
    seed: int = 1

    def __post_init__(self) -> None:
        if any(h <= 0 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must not exceed epsilon_start")
        if self.minibatch_size < 1 or self.replay_capacity < 1:
            raise ValueError("minibatch and replay capacity must be positive")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must be in [0, 1]")

    def epsilon(self, episode: int) -> float:
        """Linear anneal over the episode index, clamped at the end value."""
        if self.episodes <= 1:
            return self.epsilon_end
        frac = min(1.0, episode / (self.episodes - 1))
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
