"""Deep-Q benchmark client for the noma-arena environment service."""

from .config import DqnConfig
from .encoding import ActionSpace, encode_state, state_length
from .nets import DuelingQNet, masked_argmax
from .protocol import EnvClient, EnvError
from .replay import PrioritizedReplay, Transition
from .train import evaluate, moving_average, train

__version__ = "0.1.0"

__all__ = [
    "ActionSpace",
    "DqnConfig",
    "DuelingQNet",
    "EnvClient",
    "EnvError",
    "PrioritizedReplay",
    "Transition",
    "encode_state",
    "evaluate",
    "masked_argmax",
    "moving_average",
    "state_length",
    "train",
]
