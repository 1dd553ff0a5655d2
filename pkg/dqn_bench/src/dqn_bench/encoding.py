"""Observation encoding and the (slot, power) action space.

State vector layout (length N + M + 6), everything squashed near [0, 1]:
    [0:N)        per-slot gains as log10(g)/10 (0 when absent)
    [N:N+M)      served indicator for every device
    N+M          remaining energy / initial budget
    N+M+1        arrival / N
    N+M+2        deadline / (N + 1)
    N+M+3        frame / (T + 1)
    N+M+4        episode as a fraction of the training budget
    N+M+5        current exploration rate

Actions enumerate all (slot, power level) pairs: index = (slot-1) * P + level.
Pairs with the off level mean "do not transmit" and are always legal; powered
pairs are legal only inside the packet window and within remaining energy.
"""

from __future__ import annotations

import numpy as np


def state_length(num_slots: int, num_devices: int) -> int:
    return num_slots + num_devices + 6


def encode_state(
    entry: dict,
    episode_frac: float,
    epsilon: float,
    num_slots: int,
    num_frames: int,
    budget_mw: float,
) -> np.ndarray:
    gains = np.asarray(entry["gains"], dtype=float)
    served = np.asarray(entry["served"], dtype=float)
    with np.errstate(divide="ignore"):
        log_gains = np.where(gains > 0, np.log10(np.maximum(gains, 1e-30)) / 10.0, 0.0)
    scalars = np.array(
        [
            entry["energy"] / budget_mw if budget_mw > 0 else 0.0,
            entry["arrival"] / num_slots,
            entry["deadline"] / (num_slots + 1),
            entry["frame"] / (num_frames + 1),
            min(max(episode_frac, 0.0), 1.0),
            epsilon,
        ]
    )
    return np.concatenate([log_gains, served, scalars])


class ActionSpace:
    """All (slot, power level) pairs against one power-level table."""

    def __init__(self, num_slots: int, levels_dbm: list[float], costs_mw: list[float]):
        self.num_slots = num_slots
        self.levels_dbm = list(levels_dbm)
        self.costs_mw = list(costs_mw)
        self.off_level = self.costs_mw.index(0.0)
        self.size = num_slots * len(self.levels_dbm)

    def decode(self, action: int) -> tuple[int, int]:
        """action index -> (slot 1-based, level index)."""
        slot, level = divmod(action, len(self.levels_dbm))
        return slot + 1, level

    def to_wire(self, action: int) -> dict:
        slot, level = self.decode(action)
        if level == self.off_level:
            return {"slot": None, "power": "off"}
        return {"slot": slot, "power": f"{self.levels_dbm[level]:g}dbm"}

    def legal_mask(self, entry: dict) -> np.ndarray:
        """Never offer an action the environment would reject."""
        mask = np.zeros(self.size, dtype=bool)
        arrival, deadline = entry["arrival"], entry["deadline"]
        energy = entry["energy"]
        for a in range(self.size):
            slot, level = self.decode(a)
            if level == self.off_level:
                mask[a] = True
            else:
                in_window = arrival <= slot <= deadline - 1
                mask[a] = in_window and self.costs_mw[level] <= energy
        return mask
