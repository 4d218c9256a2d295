"""Transfer strategies: schedules, freezing, verdicts, knowledge records."""

import json

import numpy as np
import pytest

from amtransfer.errors import ShapeError, ValidationError
from amtransfer.nn.model import AutoencoderModel, GroupTag, LayerKind
from amtransfer.transfer import (
    StrategyName,
    TrainableGroup,
    TransferConfig,
    TransferPhase,
    TransferRunReport,
    TransferStrategy,
    Verdict,
    append_knowledge_record,
    assign_groups,
    default_strategies,
    make_scratch_baseline,
    post_transfer_validate,
    run_transfer,
)

from conftest import make_window_set


QUICK = TransferConfig(batch_size=4, learning_rate=1e-3, seed=0, k=2)


def target_sets(seed=0):
    train = list(make_window_set(6, seed=seed).to_concatenations())
    test = list(
        make_window_set(8, anomalous_at=(5,), seed=seed + 50).to_concatenations()
    )
    return train, test


class TestStrategies:
    def test_default_budget_split(self):
        strategies = default_strategies(epoch_budget=12)
        assert set(strategies) == {
            StrategyName.RETRAIN_ALL,
            StrategyName.CONVLSTM_THEN_CNN,
            StrategyName.CNN_THEN_CONVLSTM,
        }
        retrain = strategies[StrategyName.RETRAIN_ALL]
        assert [(p.trainable_group, p.epochs) for p in retrain.phases] == [
            (TrainableGroup.ALL, 12)
        ]
        staged = strategies[StrategyName.CONVLSTM_THEN_CNN]
        assert [(p.trainable_group, p.epochs) for p in staged.phases] == [
            (TrainableGroup.CONVLSTM, 6),
            (TrainableGroup.CNN, 6),
        ]
        reversed_staged = strategies[StrategyName.CNN_THEN_CONVLSTM]
        assert [(p.trainable_group, p.epochs) for p in reversed_staged.phases] == [
            (TrainableGroup.CNN, 6),
            (TrainableGroup.CONVLSTM, 6),
        ]

    def test_every_strategy_spends_the_budget(self):
        for budget in (1, 2, 12, 200):
            for strategy in default_strategies(budget).values():
                assert strategy.total_epochs == budget

    def test_odd_budget_split(self):
        staged = default_strategies(7)[StrategyName.CONVLSTM_THEN_CNN]
        assert [p.epochs for p in staged.phases] == [3, 4]

    def test_phase_validation(self):
        with pytest.raises(ValidationError):
            TransferPhase(TrainableGroup.ALL, epochs=-1)
        with pytest.raises(ValueError):
            TransferPhase("everything", epochs=1)

    def test_strategy_dict_round_trip(self):
        strategy = default_strategies(12)[StrategyName.CNN_THEN_CONVLSTM]
        doc = strategy.to_dict()
        rebuilt = TransferStrategy(name=doc["name"], phases=tuple(doc["phases"]))
        assert rebuilt == strategy


class TestAssignGroups:
    def test_groups_follow_preceding_learnable_layer(self):
        model = AutoencoderModel.build(input_shape=(4, 8, 8), seed=0)
        assign_groups(model)
        tags = [layer.spec.group_tag for layer in model.layers]
        kinds = [layer.spec.kind for layer in model.layers]
        current = GroupTag.CNN
        for kind, tag in zip(kinds, tags):
            if kind is LayerKind.CONV_LSTM:
                current = GroupTag.CONVLSTM
            elif kind is not LayerKind.BATCH_NORM:
                current = GroupTag.CNN
            assert tag is current

    def test_group_sizes(self):
        model = assign_groups(AutoencoderModel.build(input_shape=(4, 8, 8), seed=0))
        tags = [layer.spec.group_tag for layer in model.layers]
        assert tags.count(GroupTag.CONVLSTM) == 5
        assert tags.count(GroupTag.CNN) == 9


class TestRunTransfer:
    def test_source_model_never_mutated(self, small_model):
        train, test = target_sets()
        before = {n: t.copy() for n, t in small_model.named_parameters()}
        strategy = default_strategies(2)[StrategyName.RETRAIN_ALL]
        run_transfer(small_model, train, test, strategy, QUICK)
        for name, tensor in small_model.named_parameters():
            assert np.array_equal(before[name], tensor)

    def test_frozen_group_untouched_per_phase(self, small_model):
        train, test = target_sets()
        strategy = TransferStrategy(
            StrategyName.CONVLSTM_THEN_CNN,
            (TransferPhase(TrainableGroup.CONVLSTM, 2),),
        )
        tuned, _ = run_transfer(small_model, train, test, strategy, QUICK)
        for (name, src), (_, new) in zip(
            small_model.named_parameters(), tuned.named_parameters()
        ):
            idx = int(name[5:7])
            layer = tuned.layers[idx]
            if layer.spec.group_tag is GroupTag.CNN:
                assert np.array_equal(src, new), name
            elif layer.spec.kind is LayerKind.CONV_LSTM:
                assert not np.array_equal(src, new), name

    def test_empty_schedule_returns_equivalent_model(self, small_model):
        train, test = target_sets()
        strategy = TransferStrategy(StrategyName.RETRAIN_ALL, ())
        tuned, report = run_transfer(small_model, train, test, strategy, QUICK)
        for (_, src), (_, new) in zip(
            small_model.named_parameters(), tuned.named_parameters()
        ):
            assert np.array_equal(src, new)
        assert report.final_loss is None
        assert report.pre_accuracy_pct == report.post_accuracy_pct

    def test_repeated_runs_are_bit_identical(self, small_model):
        """Phase seeds come from cumulative epoch offsets, never from state."""
        train, test = target_sets()
        strategy = default_strategies(2)[StrategyName.CNN_THEN_CONVLSTM]
        first, report_a = run_transfer(small_model, train, test, strategy, QUICK)
        second, report_b = run_transfer(small_model, train, test, strategy, QUICK)
        for (_, ta), (_, tb) in zip(
            first.named_parameters(), second.named_parameters()
        ):
            assert np.array_equal(ta, tb)
        assert report_a.phases == report_b.phases

    def test_feature_space_guard(self, small_model):
        train, test = target_sets()
        wrong = list(make_window_set(6, hw=(16, 16)).to_concatenations())
        strategy = default_strategies(1)[StrategyName.RETRAIN_ALL]
        with pytest.raises(ShapeError, match="transductive transfer invalid"):
            run_transfer(small_model, wrong, test, strategy, QUICK)

    def test_unfrozen_after_run(self, small_model):
        train, test = target_sets()
        strategy = TransferStrategy(
            StrategyName.CNN_THEN_CONVLSTM,
            (TransferPhase(TrainableGroup.CNN, 1),),
        )
        tuned, _ = run_transfer(small_model, train, test, strategy, QUICK)
        assert not any(layer.spec.frozen for layer in tuned.layers)

    def test_report_phase_rows(self, small_model):
        train, test = target_sets()
        strategy = default_strategies(2)[StrategyName.CONVLSTM_THEN_CNN]
        _, report = run_transfer(small_model, train, test, strategy, QUICK)
        assert [row["trainable_group"] for row in report.phases] == ["convlstm", "cnn"]
        assert all(row["epochs_run"] == row["epochs_requested"] for row in report.phases)
        assert report.final_loss == report.phases[-1]["loss_history"][-1]
        assert report.levels_transferred == [
            "data_representation",
            "data_structuring",
            "model_architecture",
            "model_parameters",
        ]

    def test_scratch_comparison_fields(self, small_model):
        train, test = target_sets()
        scratch = make_scratch_baseline(small_model, train, test, epochs=1, config=QUICK)
        strategy = default_strategies(2)[StrategyName.RETRAIN_ALL]
        _, report = run_transfer(
            small_model, train, test, strategy, QUICK, scratch=scratch
        )
        assert report.scratch_accuracy_pct == scratch.accuracy_pct
        assert report.scratch_best_loss == scratch.best_loss
        assert report.improved == (
            report.post_accuracy_pct >= scratch.accuracy_pct
        )
        assert report.loss_below_scratch == (
            report.final_loss < scratch.best_loss
        )

    def test_scratch_best_loss_is_minimum(self, small_model):
        train, test = target_sets()
        scratch = make_scratch_baseline(small_model, train, test, epochs=3, config=QUICK)
        assert scratch.best_loss == min(scratch.loss_history)


class TestVerdicts:
    def make_report(self, post, scratch):
        return TransferRunReport(
            strategy={"name": "retrain_all", "phases": []},
            config=QUICK.to_dict(),
            phases=[],
            pre_accuracy_pct=0.0,
            post_accuracy_pct=post,
            pre_report={},
            post_report={},
            scratch_accuracy_pct=scratch,
        )

    def test_bands(self):
        assert post_transfer_validate(self.make_report(94.0, 84.0)) is Verdict.POSITIVE_TRANSFER
        assert post_transfer_validate(self.make_report(84.0, 84.0)) is Verdict.NEUTRAL
        assert post_transfer_validate(self.make_report(70.0, 84.0)) is Verdict.NEGATIVE_TRANSFER

    def test_margin_is_inclusive_boundary(self):
        assert post_transfer_validate(self.make_report(85.0, 84.0)) is Verdict.NEUTRAL
        assert post_transfer_validate(self.make_report(85.1, 84.0)) is Verdict.POSITIVE_TRANSFER
        assert post_transfer_validate(self.make_report(83.0, 84.0)) is Verdict.NEUTRAL

    def test_custom_margin(self):
        assert (
            post_transfer_validate(self.make_report(89.0, 84.0), margin=10.0)
            is Verdict.NEUTRAL
        )

    def test_verdict_written_back(self):
        report = self.make_report(94.0, 84.0)
        post_transfer_validate(report)
        assert report.verdict == "positive_transfer"

    def test_requires_scratch_baseline(self):
        report = self.make_report(94.0, None)
        with pytest.raises(ValidationError, match="scratch baseline"):
            post_transfer_validate(report)


class TestKnowledgeRecord:
    def test_appends_jsonl(self, tmp_path):
        report = TestVerdicts().make_report(94.0, 84.0)
        post_transfer_validate(report)
        path = tmp_path / "knowledge_record.jsonl"
        append_knowledge_record(report, path)
        append_knowledge_record(report, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        record = json.loads(lines[0])
        assert record["strategy"] == "retrain_all"
        assert record["verdict"] == "positive_transfer"
        assert record["levels_transferred"] == []

    def test_report_save_round_trip(self, tmp_path):
        report = TestVerdicts().make_report(94.0, 84.0)
        post_transfer_validate(report)
        path = report.save(tmp_path / "run.json")
        doc = json.loads(path.read_text())
        assert doc["post_accuracy_pct"] == 94.0
        assert doc["verdict"] == "positive_transfer"
        assert doc["schema_version"] == 1
