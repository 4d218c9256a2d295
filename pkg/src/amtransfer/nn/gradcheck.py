"""Dual-route gradient verification.

Compares the analytic backward pass against central finite differences in
double precision. The ConvLSTM cell is checked over every parameter
coordinate; the full autoencoder stack samples a handful of coordinates
per tensor (the loss there is the real training MSE, so this validates
the exact path the optimizer uses).

Relative error per coordinate is |ga - gn| / max(|ga|, |gn|, 1e-4); the
floor keeps near-zero gradients from inflating the ratio into noise.

Finite differences use a step ladder: coordinates are probed at 1e-6 and,
when the error there exceeds tolerance, re-probed at smaller steps and
scored by their best agreement. Batch norm can put enormous curvature on
single coordinates (a channel whose variance sits near the norm epsilon),
where the h=1e-6 difference is dominated by truncation error even though
the analytic gradient is exact; shrinking h makes the oracle converge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cell import ConvLSTMCellParams, conv_lstm_step, conv_lstm_step_backward
from .model import AutoencoderModel

FD_STEPS = (1e-6, 1e-7, 1e-8)
REL_ERR_FLOOR = 1e-4


@dataclass
class GradCheckReport:
    tolerance: float
    per_tensor: dict[str, float] = field(default_factory=dict)

    @property
    def max_rel_error(self) -> float:
        return max(self.per_tensor.values()) if self.per_tensor else 0.0

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    @property
    def failures(self) -> list[str]:
        return [n for n, e in self.per_tensor.items() if e > self.tolerance]

    def render(self) -> str:
        lines = [f"gradient check (tolerance {self.tolerance:g})"]
        for name, err in sorted(self.per_tensor.items()):
            flag = "ok" if err <= self.tolerance else "FAIL"
            lines.append(f"  {name:<28s} max rel err {err:.3e}  {flag}")
        lines.append(
            f"overall max rel err {self.max_rel_error:.3e} -> "
            + ("PASS" if self.passed else "FAIL")
        )
        return "\n".join(lines)


def _rel_err(ga: float, gn: float) -> float:
    return abs(ga - gn) / max(abs(ga), abs(gn), REL_ERR_FLOOR)


def _fd_coordinate(flat: np.ndarray, idx: int, loss, ga: float, tolerance: float) -> float:
    """Best central-difference agreement for one coordinate."""
    orig = flat[idx]
    best = np.inf
    for h in FD_STEPS:
        flat[idx] = orig + h
        up = loss()
        flat[idx] = orig - h
        down = loss()
        flat[idx] = orig
        gn = (up - down) / (2.0 * h)
        best = min(best, _rel_err(ga, gn))
        if best <= tolerance:
            break
    return best


def random_cell(
    in_channels: int = 2,
    hidden_channels: int = 3,
    kernel_size: int = 3,
    state_hw: tuple[int, int] = (4, 4),
    seed: int = 0,
    weight_scale: float = 0.4,
) -> ConvLSTMCellParams:
    """Float64 cell with every tensor random (peepholes included)."""
    rng = np.random.default_rng(seed)
    params = ConvLSTMCellParams.initialize(
        in_channels, hidden_channels, kernel_size, state_hw, rng, dtype=np.float64
    )
    for tensor in params.tensors().values():
        tensor[...] = rng.normal(0.0, weight_scale, size=tensor.shape)
    return params


def check_cell(
    params: ConvLSTMCellParams,
    x: np.ndarray | None = None,
    tolerance: float = 1e-5,
    seed: int = 0,
) -> GradCheckReport:
    """Full-coordinate check of one ConvLSTM step.

    The scalar loss is a fixed random projection of (H_t, C_t) so every
    output element influences it.
    """
    rng = np.random.default_rng(seed)
    n = 2
    hc, (sh, sw) = params.hidden_channels, params.state_hw
    if x is None:
        x = rng.normal(0.0, 1.0, size=(n, params.in_channels, sh, sw))
    x = np.asarray(x, dtype=np.float64)
    h0 = rng.normal(0.0, 0.5, size=(x.shape[0], hc, sh, sw))
    c0 = rng.normal(0.0, 0.5, size=(x.shape[0], hc, sh, sw))
    u = rng.normal(0.0, 1.0, size=(x.shape[0], hc, sh, sw))
    v = rng.normal(0.0, 1.0, size=(x.shape[0], hc, sh, sw))

    def loss() -> float:
        h1, c1, _ = conv_lstm_step(params, x, h0, c0)
        return float(np.sum(u * h1) + np.sum(v * c1))

    h1, c1, cache = conv_lstm_step(params, x, h0, c0)
    _, _, _, grads = conv_lstm_step_backward(params, cache, u.copy(), v.copy())

    report = GradCheckReport(tolerance=tolerance)
    for name, tensor in params.tensors().items():
        analytic = grads[name]
        worst = 0.0
        flat = tensor.reshape(-1)
        ga_flat = analytic.reshape(-1)
        for idx in range(flat.size):
            err = _fd_coordinate(flat, idx, loss, float(ga_flat[idx]), tolerance)
            worst = max(worst, err)
        report.per_tensor[name] = worst
    return report


def check_model(
    model: AutoencoderModel,
    x: np.ndarray | None = None,
    tolerance: float = 1e-4,
    coords_per_tensor: int = 8,
    seed: int = 0,
) -> GradCheckReport:
    """Sampled-coordinate check of the full stack's training loss."""
    if model.dtype != np.float64:
        raise ValueError("gradient check requires a float64 model")
    rng = np.random.default_rng(seed)
    t, h, w = model.input_shape
    if x is None:
        x = rng.uniform(0.1, 0.9, size=(2, t, h, w))
    x = np.asarray(x, dtype=np.float64)

    def loss() -> float:
        out = model.forward(x, training=True, update_stats=False)
        diff = out - x
        return float(np.mean(diff * diff))

    model.loss_and_grads(x)
    report = GradCheckReport(tolerance=tolerance)
    for n, layer in enumerate(model.layers):
        for name, tensor in layer.params.items():
            analytic = layer.grads[name].reshape(-1)
            flat = tensor.reshape(-1)
            k = min(coords_per_tensor, flat.size)
            coords = rng.choice(flat.size, size=k, replace=False)
            worst = 0.0
            for idx in coords:
                err = _fd_coordinate(flat, idx, loss, float(analytic[idx]), tolerance)
                worst = max(worst, err)
            report.per_tensor[f"layer{n:02d}.{name}"] = worst
    model.free_caches()
    return report


def gradient_check(
    target: ConvLSTMCellParams | AutoencoderModel,
    x: np.ndarray | None = None,
    tolerance: float | None = None,
    seed: int = 0,
    coords_per_tensor: int = 8,
) -> GradCheckReport:
    """Dispatch to the cell or full-model check by target type."""
    if isinstance(target, ConvLSTMCellParams):
        return check_cell(target, x, tolerance if tolerance is not None else 1e-5, seed)
    if isinstance(target, AutoencoderModel):
        return check_model(
            target, x, tolerance if tolerance is not None else 1e-4,
            coords_per_tensor, seed,
        )
    raise TypeError(f"cannot gradient-check {type(target).__name__}")
