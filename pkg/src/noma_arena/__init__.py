"""Online NOMA grouping and power allocation testbed."""

from .config import ExperimentConfig, NetworkConfig, RadioParams, TrafficSpec, load_config
from .crl import CrlParams, build_transition_graph, crl_train
from .harness import ResultRecord, SweepSpec, run, sweep
from .matching import fm_frame
from .scenario import (
    PacketTask,
    Scenario,
    draw_channel_gains,
    from_experiment,
    generate_scenario,
    load_scenario,
    realization,
    save_scenario,
)
from .sinr import Assignment, count_delivered
from .units import dbm_to_mw, path_loss_db

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "CrlParams",
    "ExperimentConfig",
    "NetworkConfig",
    "PacketTask",
    "RadioParams",
    "ResultRecord",
    "Scenario",
    "SweepSpec",
    "TrafficSpec",
    "build_transition_graph",
    "count_delivered",
    "crl_train",
    "dbm_to_mw",
    "draw_channel_gains",
    "fm_frame",
    "from_experiment",
    "generate_scenario",
    "load_config",
    "load_scenario",
    "path_loss_db",
    "realization",
    "run",
    "save_scenario",
    "sweep",
]
