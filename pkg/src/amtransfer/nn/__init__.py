"""Pure-numpy neural network core: ops, ConvLSTM cell, autoencoder, training."""

from .cell import ConvLSTMCellParams, conv_lstm_step
from .model import (
    Activation,
    AutoencoderModel,
    GroupTag,
    LayerKind,
    LayerSpec,
    default_architecture,
)
from .training import TrainingConfig, train
from .gradcheck import GradCheckReport, gradient_check
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Activation",
    "AutoencoderModel",
    "ConvLSTMCellParams",
    "GradCheckReport",
    "GroupTag",
    "LayerKind",
    "LayerSpec",
    "TrainingConfig",
    "conv_lstm_step",
    "default_architecture",
    "gradient_check",
    "load_checkpoint",
    "save_checkpoint",
    "train",
]
