"""Parameter-based transfer: layer-group fine-tuning strategies.

A transfer run starts from a source-trained autoencoder and fine-tunes it
on target-process windows under one of three schedules:

    retrain_all        one phase, every layer trainable
    convlstm_then_cnn  re-train the ConvLSTM group first (CNN frozen),
                       then the CNN group (ConvLSTM frozen)
    cnn_then_convlstm  the same two phases in reverse order

Each phase freezes the complement of its trainable group, trains, and
thaws. Frozen layers stay bit-identical through a phase, batch-norm
statistics included. After the schedule the detection threshold is
recomputed on the target training windows and the model is evaluated on
the target test set; a scratch baseline trained on the target alone with
the same epoch budget anchors the improvement judgment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ShapeError, TaggingError, ValidationError
from .nn.model import AutoencoderModel, GroupTag, LayerKind
from .nn.training import TrainingConfig, train, windows_to_array
from .scoring import (
    CostMetric,
    Normalization,
    RegularityReport,
    ThresholdRule,
    WindowCost,
    reconstruction_costs,
    regularity,
    score_and_evaluate,
)
from .structuring import Concatenation


class TrainableGroup(str, Enum):
    ALL = "all"
    CNN = "cnn"
    CONVLSTM = "convlstm"


class StrategyName(str, Enum):
    RETRAIN_ALL = "retrain_all"
    CONVLSTM_THEN_CNN = "convlstm_then_cnn"
    CNN_THEN_CONVLSTM = "cnn_then_convlstm"
    SCRATCH_BASELINE = "scratch_baseline"


class TransferredLevel(str, Enum):
    DATA_REPRESENTATION = "data_representation"
    DATA_STRUCTURING = "data_structuring"
    MODEL_ARCHITECTURE = "model_architecture"
    MODEL_PARAMETERS = "model_parameters"


@dataclass(frozen=True)
class TransferPhase:
    trainable_group: TrainableGroup
    epochs: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "trainable_group", TrainableGroup(self.trainable_group))
        if self.epochs < 0:
            raise ValidationError("phase epochs must be >= 0")


@dataclass(frozen=True)
class TransferStrategy:
    name: StrategyName
    phases: tuple[TransferPhase, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "name", StrategyName(self.name))
        object.__setattr__(
            self,
            "phases",
            tuple(
                p if isinstance(p, TransferPhase) else TransferPhase(**p)
                for p in self.phases
            ),
        )

    @property
    def total_epochs(self) -> int:
        return sum(p.epochs for p in self.phases)

    def to_dict(self) -> dict:
        return {
            "name": self.name.value,
            "phases": [
                {"trainable_group": p.trainable_group.value, "epochs": p.epochs}
                for p in self.phases
            ],
        }


def default_strategies(epoch_budget: int = 200) -> dict[StrategyName, TransferStrategy]:
    """The three fine-tuning schedules under a total epoch budget.

    The reference budget is 200 epochs: retrain_all spends all of them in
    one phase; the staged strategies split the budget evenly across their
    two phases (100 + 100 at the reference budget).
    """
    half = epoch_budget // 2
    return {
        StrategyName.RETRAIN_ALL: TransferStrategy(
            StrategyName.RETRAIN_ALL,
            (TransferPhase(TrainableGroup.ALL, epoch_budget),),
        ),
        StrategyName.CONVLSTM_THEN_CNN: TransferStrategy(
            StrategyName.CONVLSTM_THEN_CNN,
            (
                TransferPhase(TrainableGroup.CONVLSTM, half),
                TransferPhase(TrainableGroup.CNN, epoch_budget - half),
            ),
        ),
        StrategyName.CNN_THEN_CONVLSTM: TransferStrategy(
            StrategyName.CNN_THEN_CONVLSTM,
            (
                TransferPhase(TrainableGroup.CNN, half),
                TransferPhase(TrainableGroup.CONVLSTM, epoch_budget - half),
            ),
        ),
    }


_LEARNABLE_GROUPS = {
    LayerKind.CONV2D: GroupTag.CNN,
    LayerKind.CONV2D_TRANSPOSE: GroupTag.CNN,
    LayerKind.CONV_LSTM: GroupTag.CONVLSTM,
}


def assign_groups(model: AutoencoderModel) -> AutoencoderModel:
    """(Re)compute freeze-group tags in place and return the model.

    Learnable layers map by kind (convolutions to cnn, ConvLSTM to
    convlstm); each batch-norm layer inherits the group of the nearest
    preceding learnable layer (a leading batch norm joins the cnn group).
    """
    current = GroupTag.CNN
    for n, layer in enumerate(model.layers):
        kind = layer.spec.kind
        if kind in _LEARNABLE_GROUPS:
            current = _LEARNABLE_GROUPS[kind]
            tag = current
        elif kind is LayerKind.BATCH_NORM:
            tag = current
        else:
            raise TaggingError(f"no freeze group defined for layer kind {kind!r}")
        layer.spec = replace(layer.spec, group_tag=tag)
        model.specs[n] = layer.spec
    return model


def _apply_phase_freeze(model: AutoencoderModel, group: TrainableGroup) -> None:
    model.set_frozen(False)
    if group is TrainableGroup.CNN:
        model.set_frozen(True, GroupTag.CONVLSTM)
    elif group is TrainableGroup.CONVLSTM:
        model.set_frozen(True, GroupTag.CNN)


@dataclass(frozen=True)
class TransferConfig:
    """Fine-tuning and evaluation settings shared by all strategies."""

    batch_size: int = 8
    learning_rate: float = 1e-3
    seed: int = 0
    threshold_rule: ThresholdRule = ThresholdRule.KTH_MIN_REGULARITY
    k: int = 3
    percentile: float = 99.0
    metric: CostMetric = CostMetric.SQUARED
    window_cost: WindowCost = WindowCost.SUM
    normalization: Normalization = Normalization.PAPER
    #: Sr-gap early stop: halt a phase when mean train regularity minus
    #: mean regularity of held-out anomalies drops below this gap
    #: (anomalies regularizing). None disables it.
    early_stop_gap: float | None = None
    early_stop_check_every: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "threshold_rule", ThresholdRule(self.threshold_rule))
        object.__setattr__(self, "metric", CostMetric(self.metric))
        object.__setattr__(self, "window_cost", WindowCost(self.window_cost))
        object.__setattr__(self, "normalization", Normalization(self.normalization))

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "threshold_rule": self.threshold_rule.value,
            "k": self.k,
            "percentile": self.percentile,
            "metric": self.metric.value,
            "window_cost": self.window_cost.value,
            "normalization": self.normalization.value,
            "early_stop_gap": self.early_stop_gap,
            "early_stop_check_every": self.early_stop_check_every,
        }


@dataclass
class ScratchBaseline:
    """Target-only model trained with the same budget as a transfer run."""

    model: AutoencoderModel
    loss_history: list[float]
    accuracy_pct: float
    report: RegularityReport

    @property
    def best_loss(self) -> float:
        return min(self.loss_history) if self.loss_history else float("inf")


@dataclass
class TransferRunReport:
    strategy: dict
    config: dict
    phases: list[dict]
    pre_accuracy_pct: float
    post_accuracy_pct: float
    pre_report: dict
    post_report: dict
    scratch_accuracy_pct: float | None = None
    scratch_best_loss: float | None = None
    final_loss: float | None = None
    loss_below_scratch: bool | None = None
    improved: bool | None = None
    verdict: str | None = None
    levels_transferred: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "strategy": self.strategy,
            "config": self.config,
            "phases": self.phases,
            "pre_accuracy_pct": self.pre_accuracy_pct,
            "post_accuracy_pct": self.post_accuracy_pct,
            "pre_report": self.pre_report,
            "post_report": self.post_report,
            "scratch_accuracy_pct": self.scratch_accuracy_pct,
            "scratch_best_loss": self.scratch_best_loss,
            "final_loss": self.final_loss,
            "loss_below_scratch": self.loss_below_scratch,
            "improved": self.improved,
            "verdict": self.verdict,
            "levels_transferred": self.levels_transferred,
            "notes": self.notes,
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path


def _evaluate(
    model: AutoencoderModel,
    train_windows: Sequence[Concatenation],
    test_windows: Sequence[Concatenation],
    config: TransferConfig,
) -> RegularityReport:
    return score_and_evaluate(
        model,
        train_windows,
        test_windows,
        rule=config.threshold_rule,
        k=config.k,
        percentile=config.percentile,
        metric=config.metric,
        window_cost=config.window_cost,
        normalization=config.normalization,
    )


def _check_feature_space(
    model: AutoencoderModel, windows: Sequence[Concatenation] | np.ndarray
) -> None:
    data = windows_to_array(windows)
    if data.shape[1:] != model.input_shape:
        raise ShapeError(
            "feature spaces differ, transductive transfer invalid: model"
            f" expects windows {model.input_shape}, target data has"
            f" {data.shape[1:]}"
        )


def _sr_gap_stopper(
    model: AutoencoderModel,
    train_windows: Sequence[Concatenation],
    anomaly_holdout: Sequence[Concatenation],
    config: TransferConfig,
):
    """Stop callback tracking the train-vs-anomaly regularity gap."""

    def stop(epoch: int, loss: float) -> bool:
        if (epoch + 1) % config.early_stop_check_every:
            return False
        from .scoring import regularity_stats

        _, train_r = reconstruction_costs(
            model, train_windows, config.metric, config.window_cost
        )
        stats = regularity_stats(train_r, config.normalization)
        _, train_sr = regularity(stats, train_r)
        _, anom_r = reconstruction_costs(
            model, anomaly_holdout, config.metric, config.window_cost
        )
        _, anom_sr = regularity(stats, anom_r)
        gap = float(train_sr.mean() - anom_sr.mean())
        return gap < config.early_stop_gap

    return stop


def make_scratch_baseline(
    model_template: AutoencoderModel,
    target_train: Sequence[Concatenation],
    target_test: Sequence[Concatenation],
    epochs: int,
    config: TransferConfig,
    seed_offset: int = 7919,
) -> ScratchBaseline:
    """Train a fresh model on the target only, same budget, and evaluate."""
    scratch = AutoencoderModel.build(
        [replace(s, frozen=False) for s in model_template.specs],
        model_template.input_shape,
        seed=model_template.seed + seed_offset,
        dtype=model_template.dtype,
    )
    history = train(
        scratch,
        target_train,
        TrainingConfig(
            epochs=epochs,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            seed=config.seed + seed_offset,
        ),
    )
    report = _evaluate(scratch, target_train, target_test, config)
    return ScratchBaseline(
        model=scratch,
        loss_history=history,
        accuracy_pct=report.accuracy_pct,
        report=report,
    )


def run_transfer(
    source_model: AutoencoderModel,
    target_train: Sequence[Concatenation],
    target_test: Sequence[Concatenation],
    strategy: TransferStrategy,
    config: TransferConfig = TransferConfig(),
    scratch: ScratchBaseline | None = None,
    anomaly_holdout: Sequence[Concatenation] | None = None,
) -> tuple[AutoencoderModel, TransferRunReport]:
    """Fine-tune a copy of ``source_model`` on the target per ``strategy``.

    The source model is never mutated. Phase seeds derive from the config
    seed plus the cumulative epoch offset, so a schedule split across two
    runs reproduces the single-run result. When a ``scratch`` baseline is
    given (or after building one yourself with the same budget), the
    report's ``improved`` flag records post-transfer accuracy >= scratch
    accuracy and ``loss_below_scratch`` records final fine-tune loss <
    the scratch run's best loss.
    """
    _check_feature_space(source_model, target_train)
    _check_feature_space(source_model, target_test)

    model = source_model.copy()
    assign_groups(model)

    pre_report = _evaluate(model, target_train, target_test, config)

    stop_check = None
    if config.early_stop_gap is not None and anomaly_holdout:
        stop_check = _sr_gap_stopper(model, target_train, anomaly_holdout, config)

    phase_rows: list[dict] = []
    epoch_offset = 0
    for phase in strategy.phases:
        _apply_phase_freeze(model, phase.trainable_group)
        history = train(
            model,
            target_train,
            TrainingConfig(
                epochs=phase.epochs,
                batch_size=config.batch_size,
                learning_rate=config.learning_rate,
                seed=config.seed + epoch_offset,
            ),
            stop_check=stop_check,
        )
        phase_rows.append(
            {
                "trainable_group": phase.trainable_group.value,
                "epochs_requested": phase.epochs,
                "epochs_run": len(history),
                "loss_history": history,
            }
        )
        epoch_offset += phase.epochs
    model.set_frozen(False)

    post_report = _evaluate(model, target_train, target_test, config)

    final_loss = None
    for row in reversed(phase_rows):
        if row["loss_history"]:
            final_loss = row["loss_history"][-1]
            break

    levels = [
        TransferredLevel.DATA_REPRESENTATION.value,
        TransferredLevel.DATA_STRUCTURING.value,
        TransferredLevel.MODEL_ARCHITECTURE.value,
        TransferredLevel.MODEL_PARAMETERS.value,
    ]

    report = TransferRunReport(
        strategy=strategy.to_dict(),
        config=config.to_dict(),
        phases=phase_rows,
        pre_accuracy_pct=pre_report.accuracy_pct,
        post_accuracy_pct=post_report.accuracy_pct,
        pre_report=pre_report.to_dict(),
        post_report=post_report.to_dict(),
        final_loss=final_loss,
        levels_transferred=levels,
    )
    if scratch is not None:
        report.scratch_accuracy_pct = scratch.accuracy_pct
        report.scratch_best_loss = scratch.best_loss
        report.improved = report.post_accuracy_pct >= scratch.accuracy_pct
        if final_loss is not None:
            report.loss_below_scratch = final_loss < scratch.best_loss
    return model, report


class Verdict(str, Enum):
    POSITIVE_TRANSFER = "positive_transfer"
    NEUTRAL = "neutral"
    NEGATIVE_TRANSFER = "negative_transfer"


def post_transfer_validate(
    report: TransferRunReport, margin: float = 1.0
) -> Verdict:
    """Judge the transfer against the scratch baseline.

    Within ``margin`` accuracy points of the baseline is neutral; above is
    positive transfer, below is negative transfer. The verdict is written
    back onto the report.
    """
    if report.scratch_accuracy_pct is None:
        raise ValidationError(
            "post-transfer validation needs a scratch baseline accuracy"
        )
    delta = report.post_accuracy_pct - report.scratch_accuracy_pct
    if delta > margin:
        verdict = Verdict.POSITIVE_TRANSFER
    elif delta < -margin:
        verdict = Verdict.NEGATIVE_TRANSFER
    else:
        verdict = Verdict.NEUTRAL
    report.verdict = verdict.value
    return verdict


def append_knowledge_record(
    report: TransferRunReport, path: str | Path
) -> Path:
    """Append the validated run to the cumulative knowledge record (JSONL)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = {
        "strategy": report.strategy["name"],
        "pre_accuracy_pct": report.pre_accuracy_pct,
        "post_accuracy_pct": report.post_accuracy_pct,
        "scratch_accuracy_pct": report.scratch_accuracy_pct,
        "improved": report.improved,
        "verdict": report.verdict,
        "levels_transferred": report.levels_transferred,
    }
    with open(path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    return path


def plot_loss_curves(
    histories: dict[str, list[float]], path: str | Path, title: str = "Fine-tuning loss"
) -> Path:
    """Loss-vs-epoch curves for several runs on one axis."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name, history in histories.items():
        ax.plot(range(1, len(history) + 1), history, label=name, linewidth=1.4)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss (MSE)")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
