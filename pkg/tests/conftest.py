import hypothesis
import numpy as np
import pytest

from noma_arena.config import ExperimentConfig, NetworkConfig, RadioParams, TrafficSpec

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.load_profile("ci")


@pytest.fixture
def default_config() -> ExperimentConfig:
    """Reference defaults: M=20, N=5, T=5, G=2, 40 kHz, 20 m square."""
    return ExperimentConfig()


def tiny_config(
    num_devices=3,
    num_slots=2,
    num_frames=2,
    group_cap=2,
    energy_budget_mw=500.0,
    power_levels_dbm=(-100.0, 17.0, 23.0),
    length_min_bits=100_000,
    length_max_bits=500_000,
) -> ExperimentConfig:
    return ExperimentConfig(
        network=NetworkConfig(
            num_devices=num_devices,
            num_slots=num_slots,
            num_frames=num_frames,
            group_cap=min(group_cap, num_devices),
            power_levels_dbm=power_levels_dbm,
            energy_budget_mw=energy_budget_mw,
        ),
        radio=RadioParams(),
        traffic=TrafficSpec(length_min_bits=length_min_bits, length_max_bits=length_max_bits),
    )


def make_scenario_direct(
    gains,  # (T, M, N)
    lengths,  # (T, M) bits
    arrivals=None,
    deadlines=None,
    config: ExperimentConfig | None = None,
    seed: int = 0,
):
    """Hand-built scenario with explicit gains/traffic, bypassing the generator."""
    from noma_arena.scenario import Scenario

    gains = np.asarray(gains, dtype=float)
    lengths = np.asarray(lengths, dtype=np.int64)
    T, M, N = gains.shape
    if config is None:
        config = tiny_config(num_devices=M, num_slots=N, num_frames=T)
    if arrivals is None:
        arrivals = np.ones((T, M), dtype=np.int64)
    if deadlines is None:
        deadlines = np.full((T, M), N + 1, dtype=np.int64)
    return Scenario(
        config=config.network,
        radio=config.radio,
        traffic_spec=config.traffic,
        positions=np.zeros((M, 2)),
        lengths=lengths,
        arrivals=np.asarray(arrivals, dtype=np.int64),
        deadlines=np.asarray(deadlines, dtype=np.int64),
        gains=gains,
        seed=seed,
    )
