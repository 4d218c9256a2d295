"""Finite-difference verification of analytic gradients."""

import numpy as np
import pytest

from amtransfer.nn.gradcheck import (
    GradCheckReport,
    check_cell,
    check_model,
    gradient_check,
    random_cell,
)
from amtransfer.nn.model import AutoencoderModel


class TestCellGradients:
    @pytest.mark.parametrize("seed", range(5))
    def test_random_cells_pass_at_1e_5(self, seed):
        report = check_cell(random_cell(seed=seed), tolerance=1e-5, seed=seed)
        assert report.passed, report.render()

    def test_zero_input_cell(self):
        params = random_cell(seed=9)
        x = np.zeros((2, params.in_channels, *params.state_hw))
        report = check_cell(params, x=x, tolerance=1e-5)
        assert report.passed, report.render()

    def test_covers_every_tensor(self):
        report = check_cell(random_cell(seed=0))
        assert set(report.per_tensor) == set(random_cell(seed=0).tensors())


class TestModelGradients:
    def test_full_model_passes_at_1e_4(self):
        model = AutoencoderModel.build(input_shape=(4, 8, 8), seed=3, dtype=np.float64)
        report = check_model(model, coords_per_tensor=4, seed=3)
        assert report.tolerance == 1e-4
        assert report.passed, report.render()

    def test_float32_model_rejected(self):
        model = AutoencoderModel.build(input_shape=(4, 8, 8), seed=0)
        with pytest.raises(ValueError, match="float64"):
            check_model(model)

    def test_dispatcher_routes_both_targets(self):
        cell_report = gradient_check(random_cell(seed=1), seed=1)
        assert cell_report.passed
        model = AutoencoderModel.build(input_shape=(4, 8, 8), seed=1, dtype=np.float64)
        model_report = gradient_check(model, coords_per_tensor=2, seed=1)
        assert model_report.passed


class TestReport:
    def test_failures_and_max(self):
        report = GradCheckReport(
            tolerance=1e-5,
            per_tensor={"wx": 2e-6, "wh": 4e-5, "b": 1e-8},
        )
        assert report.max_rel_error == 4e-5
        assert not report.passed
        assert report.failures == ["wh"]

    def test_empty_report_passes(self):
        report = GradCheckReport(tolerance=1e-5)
        assert report.max_rel_error == 0.0
        assert report.passed

    def test_render_marks_each_tensor(self):
        report = GradCheckReport(
            tolerance=1e-5,
            per_tensor={"wx": 2e-6, "wh": 4e-5},
        )
        text = report.render()
        assert "wx" in text and "ok" in text
        assert "FAIL" in text
        assert text.strip().endswith("FAIL")

    def test_render_pass_line(self):
        report = GradCheckReport(tolerance=1e-4, per_tensor={"b": 1e-9})
        assert report.render().strip().endswith("PASS")
