"""SIC decoding, SINR, rate, group feasibility and the delivered-packet count.

Every algorithm in the package is scored by ``count_delivered``; nothing else
decides success. Uplink SIC decodes strongest-first, so a device is interfered
only by co-slot transmitters of strictly lower gain (ties broken by device id,
lower id counting as lower gain).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import Scenario


class ConstraintViolation(ValueError):
    """An assignment breaks a hard scheduling constraint."""

    def __init__(self, device: int, constraint: str, detail: str):
        self.device = device
        self.constraint = constraint
        super().__init__(f"device {device} violates {constraint}: {detail}")


def snr_threshold(length_bits: float, bandwidth_hz: float) -> float:
    """Minimum receive SINR that fits the packet into one slot: 2^(L/W) - 1."""
    return 2.0 ** (length_bits / bandwidth_hz) - 1.0


def sinr(power_mw: float, gain: float, interference: float) -> float:
    """Receive SINR with noise normalised to 1."""
    return power_mw * gain / (1.0 + interference)


def rate(power_mw: float, gain: float, interference: float, bandwidth_hz: float) -> float:
    """Achievable rate in bits/s."""
    return bandwidth_hz * math.log2(1.0 + sinr(power_mw, gain, interference))


@dataclass
class SlotGroup:
    """Devices sharing one slot: (device, power mW, gain) triples."""

    slot: int
    members: list[tuple[int, float, float]]

    def sic_order(self) -> list[tuple[int, float, float]]:
        """Decode order, strongest first."""
        return sorted(self.members, key=lambda m: (m[2], m[0]), reverse=True)


def interference_for(device: int, group: SlotGroup) -> float:
    """Power received from co-slot members decoded after ``device``.

    That is the sum of p*g over members of strictly lower (gain, id); the SIC
    receiver has already removed the stronger ones.
    """
    me = [m for m in group.members if m[0] == device]
    if not me:
        raise ValueError(f"device {device} not in slot group {group.slot}")
    _, _, my_gain = me[0]
    my_key = (my_gain, device)
    return sum(p * g for d, p, g in group.members if (g, d) < my_key)


def slot_success_flags(
    group: SlotGroup, lengths_bits: np.ndarray | list[float], bandwidth_hz: float
) -> np.ndarray:
    """Per-member success of the one-shot SINR test, aligned with group.members.

    Member k succeeds iff p*g >= (2^(L/W)-1) * (1 + I), where I counts every
    lower-gain transmitter in the slot whether or not that transmitter itself
    succeeds. Independent of the member order handed in.
    """
    members = group.members
    if len(lengths_bits) != len(members):
        raise ValueError("one length per group member required")
    flags = np.zeros(len(members), dtype=bool)
    for k, (device, power, gain) in enumerate(members):
        interf = sum(p * g for d, p, g in members if (g, d) < (gain, device))
        theta = snr_threshold(float(lengths_bits[k]), bandwidth_hz)
        flags[k] = power * gain >= theta * (1.0 + interf)
    return flags


@dataclass
class Assignment:
    """Per-frame slot and power choice for every device.

    ``slots[t, i]`` is 0 for "no transmission" or a 1-based slot index;
    ``powers_mw[t, i]`` must be 0 exactly when no slot is chosen.
    """

    slots: np.ndarray  # (T, M) int
    powers_mw: np.ndarray  # (T, M) float

    @classmethod
    def empty(cls, num_frames: int, num_devices: int) -> "Assignment":
        return cls(
            slots=np.zeros((num_frames, num_devices), dtype=np.int64),
            powers_mw=np.zeros((num_frames, num_devices)),
        )

    def validate_static(self, scenario: Scenario) -> None:
        """Window, power-coupling and total-energy checks for all frames."""
        T, M = self.slots.shape
        if (T, M) != (scenario.num_frames, scenario.num_devices):
            raise ValueError("assignment shape does not match scenario")
        for t in range(T):
            _validate_frame(self, scenario, t + 1)
        spend = self.powers_mw.sum(axis=0)
        budget = scenario.config.energy_budget_mw
        for i in range(M):
            if spend[i] > budget * (1 + 1e-12) + 1e-9:
                raise ConstraintViolation(
                    i, "energy budget", f"spent {spend[i]:.6f} mW of {budget} mW"
                )


def _validate_frame(assignment: Assignment, scenario: Scenario, frame: int) -> None:
    t = frame - 1
    slots = assignment.slots[t]
    powers = assignment.powers_mw[t]
    N = scenario.num_slots
    for i in range(scenario.num_devices):
        j = int(slots[i])
        if j < 0 or j > N:
            raise ConstraintViolation(i, "slot index", f"slot {j} outside 0..{N}")
        if j == 0:
            if powers[i] != 0.0:
                raise ConstraintViolation(
                    i, "power without slot", f"power {powers[i]} mW but no slot chosen"
                )
            continue
        if powers[i] <= 0.0:
            raise ConstraintViolation(
                i, "slot without power", f"slot {j} chosen at power {powers[i]} mW"
            )
        a = int(scenario.arrivals[t, i])
        d = int(scenario.deadlines[t, i])
        if not a <= j <= d - 1:
            raise ConstraintViolation(
                i, "arrival/deadline window", f"slot {j} outside {{{a}..{d - 1}}}"
            )


def count_delivered(
    assignment: Assignment, scenario: Scenario, frame: int
) -> tuple[int, np.ndarray]:
    """Delivered-packet count for one frame plus per-device success flags.

    Builds the slot groups named by the assignment and applies the SINR test.
    If a slot attracts more than ``group_cap`` transmitters, only the cap many
    highest-gain ones are decodable; the rest still transmit (and interfere)
    but are marked failed. A device with no packet (length 0) never counts.
    Window and power-coupling violations raise instead of being patched.
    """
    _validate_frame(assignment, scenario, frame)
    t = frame - 1
    slots = assignment.slots[t]
    powers = assignment.powers_mw[t]
    gains = scenario.gains[t]
    lengths = scenario.lengths[t]
    W = scenario.config.bandwidth_hz
    cap = scenario.config.group_cap

    success = np.zeros(scenario.num_devices, dtype=bool)
    for j in np.unique(slots[slots > 0]):
        devices = np.flatnonzero(slots == j)
        group = SlotGroup(
            slot=int(j),
            members=[(int(i), float(powers[i]), float(gains[i, j - 1])) for i in devices],
        )
        flags = slot_success_flags(group, lengths[devices], W)
        if len(devices) > cap:
            order = sorted(
                range(len(devices)),
                key=lambda k: (group.members[k][2], group.members[k][0]),
                reverse=True,
            )
            decodable = set(order[:cap])
            flags = np.array([flags[k] and k in decodable for k in range(len(devices))])
        has_packet = lengths[devices] > 0
        success[devices] = flags & has_packet

    total = int(success.sum())
    assert total <= scenario.config.per_frame_cap
    return total, success
