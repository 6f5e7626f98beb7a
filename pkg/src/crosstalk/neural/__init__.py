"""Small sequence-model engine: layers, builders, training, checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .kernels import backend_name
from .models import (
    ARCH_IDS,
    SequenceModel,
    build_gd_backbone,
    build_linear,
    build_model,
    build_rosd,
    build_tcn,
    forward,
    receptive_field,
)
from .train import Adam, TrainConfig, TrainHistory, batch_loss, grad_check, train

__all__ = [
    "ARCH_IDS",
    "Adam",
    "SequenceModel",
    "TrainConfig",
    "TrainHistory",
    "backend_name",
    "batch_loss",
    "build_gd_backbone",
    "build_linear",
    "build_model",
    "build_rosd",
    "build_tcn",
    "forward",
    "grad_check",
    "load_checkpoint",
    "receptive_field",
    "save_checkpoint",
    "train",
]
