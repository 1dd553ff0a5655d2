"""Dataclass configuration for network, radio and traffic, with TOML loading."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .units import OFF_DBM, dbm_to_mw

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class NetworkConfig:
    num_devices: int = 20
    num_slots: int = 5
    num_frames: int = 5
    group_cap: int = 2
    bandwidth_hz: float = 40_000.0
    power_levels_dbm: tuple[float, ...] = (OFF_DBM, 17.0, 21.0, 23.0)
    energy_budget_mw: float = 500.0
    area_side_m: float = 20.0
    slot_duration_s: float = 1.0

    def __post_init__(self) -> None:
        if self.num_devices < 1:
            raise ValueError("num_devices must be >= 1")
        if self.num_slots < 1:
            raise ValueError("num_slots must be >= 1")
        if self.num_frames < 1:
            raise ValueError("num_frames must be >= 1")
        if not 1 <= self.group_cap <= self.num_devices:
            raise ValueError(
                f"group_cap must be in 1..num_devices, got {self.group_cap}"
            )
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.energy_budget_mw < 0:
            raise ValueError("energy_budget_mw must be >= 0")
        if self.area_side_m <= 0:
            raise ValueError("area_side_m must be positive (zero-area square)")
        if self.slot_duration_s <= 0:
            raise ValueError("slot_duration_s must be positive")
        levels = tuple(float(p) for p in self.power_levels_dbm)
        if not levels:
            raise ValueError("power_levels_dbm must be non-empty")
        if list(levels) != sorted(levels):
            raise ValueError("power_levels_dbm must be sorted ascending")
        if len(set(levels)) != len(levels):
            raise ValueError("power_levels_dbm must not repeat levels")
        off_count = sum(1 for p in levels if dbm_to_mw(p) == 0.0)
        if off_count != 1:
            raise ValueError(
                f"power_levels_dbm must contain exactly one off level, found {off_count}"
            )
        object.__setattr__(self, "power_levels_dbm", levels)

    @property
    def on_levels_dbm(self) -> tuple[float, ...]:
        return tuple(p for p in self.power_levels_dbm if dbm_to_mw(p) > 0.0)

    @property
    def off_level_dbm(self) -> float:
        return next(p for p in self.power_levels_dbm if dbm_to_mw(p) == 0.0)

    @property
    def max_level_dbm(self) -> float:
        return self.power_levels_dbm[-1]

    @property
    def num_levels(self) -> int:
        return len(self.power_levels_dbm)

    @property
    def per_frame_cap(self) -> int:
        """Upper bound on packets decodable in one frame."""
        return min(self.num_devices, self.num_slots * self.group_cap)


@dataclass(frozen=True)
class RadioParams:
    carrier_freq_mhz: float = 900.0
    pathloss_intercept_db: float = 120.9
    pathloss_slope_db: float = 37.6
    antenna_gain_db: float = -4.0
    penetration_loss_db: float = 10.0
    noise_figure_db: float = 5.0
    noise_psd_dbm_hz: float = -174.0
    min_distance_km: float = 0.001

    def __post_init__(self) -> None:
        if self.min_distance_km <= 0:
            raise ValueError("min_distance_km must be positive")
        if self.noise_psd_dbm_hz >= 0:
            raise ValueError("noise_psd_dbm_hz must be negative")


@dataclass(frozen=True)
class TrafficSpec:
    length_min_bits: int = 100_000
    length_max_bits: int = 500_000

    def __post_init__(self) -> None:
        if self.length_min_bits < 0:
            raise ValueError("length_min_bits must be >= 0")
        if self.length_min_bits > self.length_max_bits:
            raise ValueError(
                f"length_min_bits ({self.length_min_bits}) exceeds "
                f"length_max_bits ({self.length_max_bits})"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    radio: RadioParams = field(default_factory=RadioParams)
    traffic: TrafficSpec = field(default_factory=TrafficSpec)

    def replace(self, **sections) -> "ExperimentConfig":
        return dataclasses.replace(self, **sections)

    def with_network(self, **kwargs) -> "ExperimentConfig":
        return self.replace(network=dataclasses.replace(self.network, **kwargs))

    def with_traffic(self, **kwargs) -> "ExperimentConfig":
        return self.replace(traffic=dataclasses.replace(self.traffic, **kwargs))


_SECTION_TYPES = {
    "network": NetworkConfig,
    "radio": RadioParams,
    "traffic": TrafficSpec,
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        payload = dict(raw.get(name, {}))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown keys in [{name}]: {sorted(unknown)}")
        if "power_levels_dbm" in payload:
            payload["power_levels_dbm"] = tuple(payload["power_levels_dbm"])
        sections[name] = cls(**payload)
    return ExperimentConfig(**sections)


def load_config(path: str | Path) -> ExperimentConfig:
    """Load an experiment config from a TOML file.

    Sections [network], [radio] and [traffic] are all optional; missing
    keys fall back to the defaults above.
    """
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return config_from_dict(raw)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "network": dataclasses.asdict(cfg.network)
        | {"power_levels_dbm": list(cfg.network.power_levels_dbm)},
        "radio": dataclasses.asdict(cfg.radio),
        "traffic": dataclasses.asdict(cfg.traffic),
    }
