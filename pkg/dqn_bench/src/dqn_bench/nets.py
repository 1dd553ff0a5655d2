"""Dueling MLP value network."""

from __future__ import annotations

import torch
from torch import nn


class DuelingQNet(nn.Module):
    """Three ReLU hidden layers splitting into value and advantage heads."""

    def __init__(self, state_dim: int, num_actions: int, hidden=(50, 35, 20)):
        super().__init__()
        layers: list[nn.Module] = []
        last = state_dim
        for h in hidden:
            layers += [nn.Linear(last, h), nn.ReLU()]
            last = h
        self.trunk = nn.Sequential(*layers)
        self.value_head = nn.Linear(last, 1)
        self.advantage_head = nn.Linear(last, num_actions)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.trunk(x)
        value = self.value_head(z)
        advantage = self.advantage_head(z)
        return value + advantage - advantage.mean(dim=-1, keepdim=True)


def masked_argmax(q_values: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Argmax over legal actions only (illegal entries pushed to -inf)."""
    neg = torch.full_like(q_values, float("-inf"))
    return torch.where(mask, q_values, neg).argmax(dim=-1)
