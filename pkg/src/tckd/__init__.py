"""tckd: keystroke-dynamics modeling with a dual-channel temporal-character network."""

from .data import DatasetSplit, KeystrokeEvent, KeystrokeSample, TokenizedSequence, Vocabulary
from .model import DualChannelModel, ModelConfig
from .params import ParameterSet
from .tensor import Tensor, backward

__version__ = "0.1.0"

__all__ = [
    "DatasetSplit",
    "DualChannelModel",
    "KeystrokeEvent",
    "KeystrokeSample",
    "ModelConfig",
    "ParameterSet",
    "Tensor",
    "TokenizedSequence",
    "Vocabulary",
    "backward",
    "__version__",
]
