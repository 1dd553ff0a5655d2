"""Scenario generation: device placement, traffic and noise-normalised gains.

A scenario is one realisation of the network: fixed device positions plus,
per frame, one packet task per device and a Rayleigh-faded gain matrix.
Learning algorithms consume a stream of realisations derived from the same
seed (``realization``): positions persist, traffic and fading are redrawn.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import (
    ExperimentConfig,
    NetworkConfig,
    RadioParams,
    TrafficSpec,
    config_from_dict,
    config_to_dict,
)
from .units import noise_watts, path_loss_db

# Sub-stream tags so that parallel draws stay decoupled and reproducible.
_POSITION_STREAM = 11
_TRAFFIC_STREAM = 12
_FADING_STREAM = 13


@dataclass(frozen=True)
class PacketTask:
    """One per-frame packet: length in bits plus its slot window.

    The packet may use slots ``arrival .. deadline-1``; ``length_bits == 0``
    means the device has nothing to send that frame.
    """

    length_bits: int
    arrival: int
    deadline: int

    def __post_init__(self) -> None:
        if self.arrival >= self.deadline:
            raise ValueError("arrival must precede deadline")
        if self.length_bits < 0:
            raise ValueError("length_bits must be >= 0")

    def window_contains(self, slot: int) -> bool:
        return self.arrival <= slot <= self.deadline - 1


@dataclass(frozen=True)
class Scenario:
    config: NetworkConfig
    radio: RadioParams
    traffic_spec: TrafficSpec
    positions: np.ndarray  # (M, 2) metres, base station at the origin
    lengths: np.ndarray  # (T, M) bits
    arrivals: np.ndarray  # (T, M) slot indices, 1-based
    deadlines: np.ndarray  # (T, M) slot indices, arrival < deadline <= N+1
    gains: np.ndarray  # (T, M, N) noise-normalised linear power gains
    seed: int
    round_index: int = 0

    def __post_init__(self) -> None:
        for name in ("positions", "lengths", "arrivals", "deadlines", "gains"):
            getattr(self, name).flags.writeable = False

    @property
    def num_devices(self) -> int:
        return self.config.num_devices

    @property
    def num_slots(self) -> int:
        return self.config.num_slots

    @property
    def num_frames(self) -> int:
        return self.config.num_frames

    def task(self, frame: int, device: int) -> PacketTask:
        t = frame - 1
        return PacketTask(
            length_bits=int(self.lengths[t, device]),
            arrival=int(self.arrivals[t, device]),
            deadline=int(self.deadlines[t, device]),
        )

    def frame_gains(self, frame: int) -> np.ndarray:
        return self.gains[frame - 1]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.config).encode())
        h.update(repr(self.radio).encode())
        h.update(repr(self.traffic_spec).encode())
        h.update(str(self.seed).encode())
        h.update(str(self.round_index).encode())
        for arr in (self.positions, self.lengths, self.arrivals, self.deadlines, self.gains):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def _distances_km(positions: np.ndarray) -> np.ndarray:
    return np.hypot(positions[:, 0], positions[:, 1]) / 1000.0


def unit_fading_gains(
    positions: np.ndarray, radio: RadioParams, bandwidth_hz: float
) -> np.ndarray:
    """Per-device noise-normalised gain with fading fixed at 1.

    ``power_mw * gain`` is then the receive SNR: the mW power is converted to
    watts, attenuated by path loss and divided by the noise power in watts.
    """
    dists = _distances_km(positions)
    pl_db = np.array([path_loss_db(d, radio) for d in dists])
    noise_w = noise_watts(bandwidth_hz, radio)
    return 10.0 ** (-pl_db / 10.0) * 1e-3 / noise_w


def draw_channel_gains(
    scenario: Scenario, frame: int, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Gain matrix (device x slot) for one frame.

    Rayleigh fading enters as a unit-mean exponential power factor, redrawn
    independently per (device, slot, frame). Without an explicit ``rng`` the
    draw is the deterministic stream keyed by (seed, round, frame) that also
    produced ``scenario.gains``.
    """
    if not 1 <= frame <= scenario.num_frames:
        raise ValueError(f"frame must be in 1..{scenario.num_frames}, got {frame}")
    if rng is None:
        rng = np.random.default_rng(
            [scenario.seed, _FADING_STREAM, scenario.round_index, frame]
        )
    base = unit_fading_gains(scenario.positions, scenario.radio, scenario.config.bandwidth_hz)
    fading = rng.exponential(1.0, size=(scenario.num_devices, scenario.num_slots))
    return base[:, None] * fading


def _draw_traffic(
    network: NetworkConfig, traffic: TrafficSpec, seed: int, round_index: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    M, N, T = network.num_devices, network.num_slots, network.num_frames
    lengths = np.empty((T, M), dtype=np.int64)
    arrivals = np.empty((T, M), dtype=np.int64)
    deadlines = np.empty((T, M), dtype=np.int64)
    for t in range(1, T + 1):
        rng = np.random.default_rng([seed, _TRAFFIC_STREAM, round_index, t])
        lengths[t - 1] = rng.integers(
            traffic.length_min_bits, traffic.length_max_bits + 1, size=M
        )
        arrivals[t - 1] = rng.integers(1, N + 1, size=M)
        deadlines[t - 1] = rng.integers(arrivals[t - 1] + 1, N + 2)
    return lengths, arrivals, deadlines


def _draw_gains(
    network: NetworkConfig,
    radio: RadioParams,
    positions: np.ndarray,
    seed: int,
    round_index: int,
) -> np.ndarray:
    base = unit_fading_gains(positions, radio, network.bandwidth_hz)
    T, M, N = network.num_frames, network.num_devices, network.num_slots
    gains = np.empty((T, M, N))
    for t in range(1, T + 1):
        rng = np.random.default_rng([seed, _FADING_STREAM, round_index, t])
        gains[t - 1] = base[:, None] * rng.exponential(1.0, size=(M, N))
    return gains


def generate_scenario(
    network: NetworkConfig,
    radio: RadioParams,
    traffic: TrafficSpec,
    seed: int,
    round_index: int = 0,
) -> Scenario:
    """Draw a full scenario: uniform placement, per-frame traffic and gains.

    Equal arguments give a bit-identical scenario; positions depend only on
    the seed, traffic and fading on (seed, round_index, frame).
    """
    M = network.num_devices
    half = network.area_side_m / 2.0
    rng_pos = np.random.default_rng([seed, _POSITION_STREAM])
    positions = rng_pos.uniform(-half, half, size=(M, 2))
    lengths, arrivals, deadlines = _draw_traffic(network, traffic, seed, round_index)
    gains = _draw_gains(network, radio, positions, seed, round_index)
    return Scenario(
        config=network,
        radio=radio,
        traffic_spec=traffic,
        positions=positions,
        lengths=lengths,
        arrivals=arrivals,
        deadlines=deadlines,
        gains=gains,
        seed=seed,
        round_index=round_index,
    )


def from_experiment(cfg: ExperimentConfig, seed: int, round_index: int = 0) -> Scenario:
    return generate_scenario(cfg.network, cfg.radio, cfg.traffic, seed, round_index)


def realization(scenario: Scenario, round_index: int) -> Scenario:
    """Fresh traffic and fading for the same placement, seed and spec."""
    if round_index == scenario.round_index:
        return scenario
    lengths, arrivals, deadlines = _draw_traffic(
        scenario.config, scenario.traffic_spec, scenario.seed, round_index
    )
    gains = _draw_gains(
        scenario.config, scenario.radio, scenario.positions, scenario.seed, round_index
    )
    return Scenario(
        config=scenario.config,
        radio=scenario.radio,
        traffic_spec=scenario.traffic_spec,
        positions=scenario.positions,
        lengths=lengths,
        arrivals=arrivals,
        deadlines=deadlines,
        gains=gains,
        seed=scenario.seed,
        round_index=round_index,
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    """JSON form: config, radio, positions, traffic, seed.

    Gains are not stored; they regenerate deterministically from the seed on
    load. Only the base realisation (round 0) round-trips through files.
    """
    if scenario.round_index != 0:
        raise ValueError("only the base realisation (round_index 0) is serialisable")
    cfg = ExperimentConfig(scenario.config, scenario.radio, scenario.traffic_spec)
    full = config_to_dict(cfg)
    T, M = scenario.num_frames, scenario.num_devices
    traffic = [
        [
            {
                "length_bits": int(scenario.lengths[t, i]),
                "arrival": int(scenario.arrivals[t, i]),
                "deadline": int(scenario.deadlines[t, i]),
            }
            for i in range(M)
        ]
        for t in range(T)
    ]
    return {
        "config": {"network": full["network"], "traffic": full["traffic"]},
        "radio": full["radio"],
        "positions": scenario.positions.tolist(),
        "traffic": traffic,
        "seed": scenario.seed,
    }


def scenario_from_dict(raw: dict) -> Scenario:
    cfg = config_from_dict(
        {
            "network": raw["config"]["network"],
            "radio": raw["radio"],
            "traffic": raw["config"].get("traffic", {}),
        }
    )
    network, radio = cfg.network, cfg.radio
    T, M = network.num_frames, network.num_devices
    positions = np.array(raw["positions"], dtype=float).reshape(M, 2)
    lengths = np.empty((T, M), dtype=np.int64)
    arrivals = np.empty((T, M), dtype=np.int64)
    deadlines = np.empty((T, M), dtype=np.int64)
    for t in range(T):
        for i in range(M):
            task = raw["traffic"][t][i]
            lengths[t, i] = task["length_bits"]
            arrivals[t, i] = task["arrival"]
            deadlines[t, i] = task["deadline"]
    seed = int(raw["seed"])
    gains = _draw_gains(network, radio, positions, seed, round_index=0)
    return Scenario(
        config=network,
        radio=radio,
        traffic_spec=cfg.traffic,
        positions=positions,
        lengths=lengths,
        arrivals=arrivals,
        deadlines=deadlines,
        gains=gains,
        seed=seed,
        round_index=0,
    )


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=1))


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))
