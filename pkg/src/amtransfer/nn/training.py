"""Training loop: Adam on mean-squared reconstruction error.

Deterministic by contract: given the same model state, data, and config
(seed included), two runs produce identical loss histories and parameters
under single-threaded execution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import TrainingContractError, ValidationError
from ..structuring import Concatenation, FrameLabel
from .model import AutoencoderModel


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 50
    batch_size: int = 8
    learning_rate: float = 1e-3
    seed: int = 0
    shuffle: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "shuffle": self.shuffle,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
        }


class Adam:
    """Adam updates over a model's trainable layers; state keyed by tensor."""

    def __init__(self, model: AutoencoderModel, config: TrainingConfig) -> None:
        self.config = config
        self.step_count = 0
        self._m: dict[tuple[int, str], np.ndarray] = {}
        self._v: dict[tuple[int, str], np.ndarray] = {}
        for n, layer in enumerate(model.layers):
            for name, p in layer.params.items():
                self._m[(n, name)] = np.zeros_like(p)
                self._v[(n, name)] = np.zeros_like(p)

    def step(self, model: AutoencoderModel) -> None:
        cfg = self.config
        self.step_count += 1
        bias1 = 1.0 - cfg.beta1 ** self.step_count
        bias2 = 1.0 - cfg.beta2 ** self.step_count
        for n, layer in enumerate(model.layers):
            if not layer.trainable or not layer.grads:
                continue
            for name, g in layer.grads.items():
                m = self._m[(n, name)]
                v = self._v[(n, name)]
                m *= cfg.beta1
                m += (1.0 - cfg.beta1) * g
                v *= cfg.beta2
                v += (1.0 - cfg.beta2) * g * g
                update = (cfg.learning_rate / bias1) * m / (
                    np.sqrt(v / bias2) + cfg.eps
                )
                layer.params[name] -= update.astype(layer.params[name].dtype)
            layer.grads = {}


def windows_to_array(
    windows: Sequence[Concatenation] | np.ndarray, require_normal: bool = False
) -> np.ndarray:
    """Stack concatenations into a (N, T, H, W) float array.

    With ``require_normal`` every concatenation must carry the normal
    label; an anomalous or unlabeled one violates the autoencoder's
    train-on-normals contract.
    """
    if isinstance(windows, np.ndarray):
        if windows.ndim != 4:
            raise ValidationError(f"window array must be 4-D, got {windows.shape}")
        return windows
    if not windows:
        raise ValidationError("empty window set")
    if require_normal:
        for c in windows:
            if c.label is not FrameLabel.NORMAL:
                raise TrainingContractError(
                    f"window at start index {c.start_index} is {c.label.value};"
                    " the autoencoder trains on normal windows only"
                )
    return np.stack([c.pixels for c in windows], axis=0)


def train(
    model: AutoencoderModel,
    windows: Sequence[Concatenation] | np.ndarray,
    config: TrainingConfig,
    optimizer: Adam | None = None,
    on_epoch: Callable[[int, float], None] | None = None,
    stop_check: Callable[[int, float], bool] | None = None,
) -> list[float]:
    """Train in place; returns (and appends to) the per-epoch loss history.

    Loss per epoch is the mean over batches of the batch MSE. An existing
    optimizer may be passed to continue training with preserved Adam state.
    ``stop_check(epoch, loss)`` returning True ends training after that
    epoch (early stopping); it does not perturb the data order of the
    epochs that did run.
    """
    data = windows_to_array(windows, require_normal=True)
    model._check_input(data)
    optimizer = optimizer or Adam(model, config)
    rng = np.random.default_rng(config.seed)
    history: list[float] = []
    n = len(data)
    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        losses = []
        for start in range(0, n, config.batch_size):
            batch = data[order[start : start + config.batch_size]]
            losses.append(model.loss_and_grads(batch))
            optimizer.step(model)
        epoch_loss = float(np.mean(losses))
        history.append(epoch_loss)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)
        if stop_check is not None and stop_check(epoch, epoch_loss):
            break
    model.free_caches()
    model.training_config = config.to_dict()
    model.loss_history.extend(history)
    return history
