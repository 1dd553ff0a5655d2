"""Online frame matching: slot-by-slot greedy NOMA grouping at fixed powers.

Slots arrive one at a time; once a slot's gains are revealed the grouping
decision for it is irrevocable. Admission per slot runs lowest-gain first,
which keeps the running feasibility sum tight, and the group cap keeps the
first admitted (lowest-gain) devices, leaving strong devices for later slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario
from .sinr import snr_threshold


@dataclass
class FrameMatchResult:
    groups: list[list[int]]  # per slot, devices in admission order
    served_total: int
    unserved: list[int]


def neighbors(
    slot: int,
    gains_col: np.ndarray,
    powers_mw: np.ndarray,
    lengths: np.ndarray,
    arrivals: np.ndarray,
    deadlines: np.ndarray,
    unserved: np.ndarray,
    bandwidth_hz: float,
) -> np.ndarray:
    """Devices eligible for the slot.

    Eligible means: not yet served this frame, a packet pending, powered on,
    the slot inside the arrival/deadline window, and solo-feasible at the
    device's own fixed power (p*g >= 2^(L/W)-1, boundary included).
    """
    thresholds = np.exp2(lengths / bandwidth_hz) - 1.0
    ok = (
        unserved
        & (lengths > 0)
        & (powers_mw > 0.0)
        & (arrivals <= slot)
        & (slot <= deadlines - 1)
        & (powers_mw * gains_col >= thresholds)
    )
    return np.flatnonzero(ok)


def greedy_slot(
    candidates: np.ndarray,
    gains_col: np.ndarray,
    powers_mw: np.ndarray,
    lengths: np.ndarray,
    bandwidth_hz: float,
    group_cap: int,
) -> list[int]:
    """Greedy admission in ascending gain order, capped at the group size.

    A candidate joins when its received power clears its SINR threshold
    against the interference sum of everyone admitted so far; the sum then
    grows by the newcomer's received power. Ties in gain break by device id
    (lower id treated as lower gain). Any prefix of the admission order stays
    jointly feasible, so truncating at the cap preserves feasibility.
    """
    order = sorted(candidates, key=lambda i: (gains_col[i], i))
    admitted: list[int] = []
    running = 0.0
    for i in order:
        v = powers_mw[i] * gains_col[i]
        theta = snr_threshold(float(lengths[i]), bandwidth_hz)
        if v >= theta * (1.0 + running):
            admitted.append(int(i))
            running += v
            if len(admitted) == group_cap:
                break
    return admitted


def fm_frame(scenario: Scenario, frame: int, powers_mw: np.ndarray) -> FrameMatchResult:
    """Run the online matcher over the frame's slots in arrival order.

    ``powers_mw[i]`` is device i's fixed power for this frame (0 = off). The
    decision for slot j reads only column j of the gain matrix, honouring the
    online reveal order.
    """
    M, N = scenario.num_devices, scenario.num_slots
    if powers_mw.shape != (M,):
        raise ValueError(f"powers must have shape ({M},)")
    t = frame - 1
    gains = scenario.gains[t]
    lengths = scenario.lengths[t]
    arrivals = scenario.arrivals[t]
    deadlines = scenario.deadlines[t]
    W = scenario.config.bandwidth_hz
    cap = scenario.config.group_cap

    unserved = np.ones(M, dtype=bool)
    groups: list[list[int]] = []
    for j in range(1, N + 1):
        col = gains[:, j - 1]
        cands = neighbors(j, col, powers_mw, lengths, arrivals, deadlines, unserved, W)
        group = greedy_slot(cands, col, powers_mw, lengths, W, cap)
        groups.append(group)
        unserved[group] = False

    return FrameMatchResult(
        groups=groups,
        served_total=int(sum(len(g) for g in groups)),
        unserved=[int(i) for i in np.flatnonzero(unserved)],
    )
