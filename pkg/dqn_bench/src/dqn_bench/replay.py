"""Proportional prioritized replay over a fixed-capacity ring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    next_mask: np.ndarray
    done: bool


class PrioritizedReplay:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._priorities = np.zeros(capacity)
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._items)

    def add(self, item: Transition, priority: float) -> None:
        if priority <= 0:
            raise ValueError("priorities must be strictly positive")
        if len(self._items) < self.capacity:
            self._items.append(item)
            self._priorities[len(self._items) - 1] = priority
        else:
            self._items[self._cursor] = item
            self._priorities[self._cursor] = priority
            self._cursor = (self._cursor + 1) % self.capacity

    def max_priority(self) -> float:
        if not self._items:
            return 1.0
        return float(self._priorities[: len(self._items)].max())

    def sample(
        self, batch: int, exponent: float, rng: np.random.Generator
    ) -> tuple[np.ndarray, list[Transition]]:
        """Indices drawn proportional to priority**exponent, with replacement."""
        n = len(self._items)
        if n == 0:
            raise ValueError("cannot sample from an empty buffer")
        weights = self._priorities[:n] ** exponent
        probs = weights / weights.sum()
        idx = rng.choice(n, size=min(batch, n) if batch <= n else batch, p=probs)
        return idx, [self._items[i] for i in idx]

    def update_priorities(self, indices: np.ndarray, priorities: np.ndarray) -> None:
        if (priorities <= 0).any():
            raise ValueError("priorities must be strictly positive")
        self._priorities[indices] = priorities

    def sampling_distribution(self, exponent: float) -> np.ndarray:
        n = len(self._items)
        weights = self._priorities[:n] ** exponent
        return weights / weights.sum()
