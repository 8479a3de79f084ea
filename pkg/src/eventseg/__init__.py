"""LSTM activity segmentation of concatenated smart-room event streams."""

from .core import DEFAULT_VOCABULARY, Event, EventStream, ObjectState, Vocabulary
from .encoder import StatusAugmentation, encode_stream
from .lstm import LstmModel, TrainingConfig, compute_target_weight, train
from .segmenter import SegmentationResult, segment
from .validator import ValidatorConfig, validate

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_VOCABULARY",
    "Event",
    "EventStream",
    "LstmModel",
    "ObjectState",
    "SegmentationResult",
    "StatusAugmentation",
    "TrainingConfig",
    "ValidatorConfig",
    "Vocabulary",
    "compute_target_weight",
    "encode_stream",
    "segment",
    "train",
    "validate",
]
