"""Unit conversions and the static uplink link budget."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .config import RadioParams

OFF_DBM = -100.0
"""Power level treated as "radio off".

It converts to exactly 0 mW so an idle frame charges no energy and the
zero-energy terminal state of a battery stays reachable.
"""

MICRO_PER_MW = 10**6


def dbm_to_mw(level_dbm: float) -> float:
    """dBm -> mW; levels at or below the off level map to exactly 0."""
    if level_dbm <= OFF_DBM:
        return 0.0
    return 10.0 ** (level_dbm / 10.0)


def energy_cost_micro(level_dbm: float) -> int:
    """Energy charged for one frame of transmission, in integer micro-mW.

    Integer bookkeeping keeps battery states exactly mergeable no matter
    in which order costs were subtracted.
    """
    return round(dbm_to_mw(level_dbm) * MICRO_PER_MW)


def mw_to_micro(value_mw: float) -> int:
    return round(value_mw * MICRO_PER_MW)


def path_loss_db(dist_km: float, radio: "RadioParams") -> float:
    """Large-scale loss: intercept + slope*log10(dist) + antenna + penetration.

    Distances below ``radio.min_distance_km`` are clamped; the log model is
    singular at zero range.
    """
    if dist_km < 0:
        raise ValueError(f"distance must be non-negative, got {dist_km}")
    d = max(dist_km, radio.min_distance_km)
    return (
        radio.pathloss_intercept_db
        + radio.pathloss_slope_db * math.log10(d)
        + radio.antenna_gain_db
        + radio.penetration_loss_db
    )


def noise_dbm(bandwidth_hz: float, radio: "RadioParams") -> float:
    """Thermal noise power over the resource-block bandwidth, in dBm."""
    return radio.noise_psd_dbm_hz + 10.0 * math.log10(bandwidth_hz) + radio.noise_figure_db


def noise_watts(bandwidth_hz: float, radio: "RadioParams") -> float:
    return 10.0 ** ((noise_dbm(bandwidth_hz, radio) - 30.0) / 10.0)
