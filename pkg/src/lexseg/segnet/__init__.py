"""Class-agnostic two-class segmentation network and its training loop."""

from lexseg.segnet.model import (
    ModelConfig,
    build_model,
    count_parameters,
    predict_likelihood,
    predict_probabilities,
)
from lexseg.segnet.train import (
    IGNORE_INDEX,
    TrainExample,
    TrainHyper,
    TrainState,
    load_checkpoint,
    load_train_config,
    save_checkpoint,
    segmentation_loss,
    train,
)

__all__ = [
    "IGNORE_INDEX",
    "ModelConfig",
    "TrainExample",
    "TrainHyper",
    "TrainState",
    "build_model",
    "count_parameters",
    "load_checkpoint",
    "load_train_config",
    "predict_likelihood",
    "predict_probabilities",
    "save_checkpoint",
    "segmentation_loss",
    "train",
]
