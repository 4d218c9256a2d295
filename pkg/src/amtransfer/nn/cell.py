"""Convolutional LSTM cell with peephole connections.

One step computes, with * a same-padding convolution and ⊙ the Hadamard
product:

    i_t = σ(W_xi * X_t + W_Hi * H_{t-1} + W_ci ⊙ C_{t-1} + b_i)
    f_t = σ(W_xf * X_t + W_Hf * H_{t-1} + W_cf ⊙ C_{t-1} + b_f)
    g_t = tanh(W_xg * X_t + W_Hg * H_{t-1} + b_g)
    C_t = f_t ⊙ C_{t-1} + i_t ⊙ g_t
    o_t = σ(W_xo * X_t + W_Ho * H_{t-1} + W_co ⊙ C_t + b_o)
    H_t = o_t ⊙ tanh(C_t)

The output gate peeks at the *new* cell state C_t. Peephole weights have
the full cell-state shape (channels, H, W), which ties a cell instance to
a concrete spatial size.

Gate kernels are stored stacked along the output-channel axis in the
order (i, f, g, o); the W_xi / W_Hi / ... views expose the per-gate
slices. The stacked layout lets one GEMM per step serve all four gates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from .ops import (
    conv2d_backward,
    conv2d_forward,
    same_pads,
    sigmoid,
    sigmoid_backward,
    tanh,
    tanh_backward,
)

GATE_ORDER = ("i", "f", "g", "o")

#: Initial forget-gate bias; positive so early training retains state.
FORGET_BIAS_INIT = 1.0


@dataclass
class ConvLSTMCellParams:
    """Parameter tensors for one ConvLSTM cell at a fixed spatial size."""

    in_channels: int
    hidden_channels: int
    kernel_size: int
    state_hw: tuple[int, int]
    wx: np.ndarray = field(repr=False, default=None)  # (4h, in, k, k)
    wh: np.ndarray = field(repr=False, default=None)  # (4h, h, k, k)
    b: np.ndarray = field(repr=False, default=None)  # (4h,)
    wci: np.ndarray = field(repr=False, default=None)  # (h, H, W)
    wcf: np.ndarray = field(repr=False, default=None)
    wco: np.ndarray = field(repr=False, default=None)

    @classmethod
    def initialize(
        cls,
        in_channels: int,
        hidden_channels: int,
        kernel_size: int,
        state_hw: tuple[int, int],
        rng: np.random.Generator,
        dtype=np.float32,
    ) -> "ConvLSTMCellParams":
        """Glorot-uniform kernels, zero peepholes, forget bias 1."""
        h = hidden_channels
        k = kernel_size

        def glorot(shape, fan_in, fan_out):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-limit, limit, size=shape).astype(dtype)

        wx = glorot((4 * h, in_channels, k, k), in_channels * k * k, h * k * k)
        wh = glorot((4 * h, h, k, k), h * k * k, h * k * k)
        b = np.zeros(4 * h, dtype=dtype)
        b[h : 2 * h] = FORGET_BIAS_INIT
        sh, sw = state_hw
        zeros = lambda: np.zeros((h, sh, sw), dtype=dtype)
        return cls(
            in_channels=in_channels,
            hidden_channels=h,
            kernel_size=k,
            state_hw=(sh, sw),
            wx=wx,
            wh=wh,
            b=b,
            wci=zeros(),
            wcf=zeros(),
            wco=zeros(),
        )

    def _gate_slice(self, tensor: np.ndarray, gate: str) -> np.ndarray:
        n = GATE_ORDER.index(gate)
        h = self.hidden_channels
        return tensor[n * h : (n + 1) * h]

    @property
    def w_xi(self) -> np.ndarray:
        return self._gate_slice(self.wx, "i")

    @property
    def w_xf(self) -> np.ndarray:
        return self._gate_slice(self.wx, "f")

    @property
    def w_xg(self) -> np.ndarray:
        return self._gate_slice(self.wx, "g")

    @property
    def w_xo(self) -> np.ndarray:
        return self._gate_slice(self.wx, "o")

    @property
    def w_hi(self) -> np.ndarray:
        return self._gate_slice(self.wh, "i")

    @property
    def w_hf(self) -> np.ndarray:
        return self._gate_slice(self.wh, "f")

    @property
    def w_hg(self) -> np.ndarray:
        return self._gate_slice(self.wh, "g")

    @property
    def w_ho(self) -> np.ndarray:
        return self._gate_slice(self.wh, "o")

    @property
    def b_i(self) -> np.ndarray:
        return self._gate_slice(self.b, "i")

    @property
    def b_f(self) -> np.ndarray:
        return self._gate_slice(self.b, "f")

    @property
    def b_g(self) -> np.ndarray:
        return self._gate_slice(self.b, "g")

    @property
    def b_o(self) -> np.ndarray:
        return self._gate_slice(self.b, "o")

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "wx": self.wx,
            "wh": self.wh,
            "b": self.b,
            "wci": self.wci,
            "wcf": self.wcf,
            "wco": self.wco,
        }

    def validate_shapes(self) -> None:
        h, k = self.hidden_channels, self.kernel_size
        checks = {
            "wx": (4 * h, self.in_channels, k, k),
            "wh": (4 * h, h, k, k),
            "b": (4 * h,),
            "wci": (h, *self.state_hw),
            "wcf": (h, *self.state_hw),
            "wco": (h, *self.state_hw),
        }
        for name, expected in checks.items():
            got = getattr(self, name).shape
            if got != expected:
                raise ShapeError(f"cell tensor {name} has shape {got}, expected {expected}")


def _check_state(name: str, tensor: np.ndarray, expected: tuple) -> None:
    if tensor.shape != expected:
        raise ShapeError(f"{name} has shape {tensor.shape}, expected {expected}")


def conv_lstm_step(
    params: ConvLSTMCellParams,
    x_t: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, dict]:
    """One ConvLSTM step. Returns (H_t, C_t, cache-with-gate-record).

    ``x_t`` is (N, in_channels, H, W); states are (N, hidden, H, W). The
    cache carries everything the backward pass needs plus the gate
    activations under keys "i", "f", "g", "o".
    """
    params.validate_shapes()
    n = x_t.shape[0]
    hc = params.hidden_channels
    sh, sw = params.state_hw
    _check_state("x_t", x_t, (n, params.in_channels, sh, sw))
    _check_state("h_prev", h_prev, (n, hc, sh, sw))
    _check_state("c_prev", c_prev, (n, hc, sh, sw))

    pads = same_pads(params.kernel_size, 1)
    zx, cache_x = conv2d_forward(x_t, params.wx, params.b, 1, pads)
    zh, cache_h = conv2d_forward(h_prev, params.wh, None, 1, pads)
    z = zx + zh

    zi = z[:, 0 * hc : 1 * hc] + params.wci[None] * c_prev
    zf = z[:, 1 * hc : 2 * hc] + params.wcf[None] * c_prev
    zg = z[:, 2 * hc : 3 * hc]
    i = sigmoid(zi)
    f = sigmoid(zf)
    g = tanh(zg)
    c_t = f * c_prev + i * g
    zo = z[:, 3 * hc : 4 * hc] + params.wco[None] * c_t
    o = sigmoid(zo)
    tc = tanh(c_t)
    h_t = o * tc

    cache = {
        "i": i,
        "f": f,
        "g": g,
        "o": o,
        "c_prev": c_prev,
        "c_t": c_t,
        "tc": tc,
        "conv_x": cache_x,
        "conv_h": cache_h,
    }
    return h_t, c_t, cache


def conv_lstm_step_backward(
    params: ConvLSTMCellParams,
    cache: dict,
    dh_t: np.ndarray,
    dc_t: np.ndarray,
    need_param_grads: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict | None]:
    """Backward through one step.

    ``dh_t`` / ``dc_t`` are gradients arriving at H_t and C_t (the latter
    from the next step's recurrence). Returns (dx_t, dh_prev, dc_prev,
    param grads keyed like ``params.tensors()``, or None when skipped).
    """
    i, f, g, o = cache["i"], cache["f"], cache["g"], cache["o"]
    c_prev, c_t, tc = cache["c_prev"], cache["c_t"], cache["tc"]
    hc = params.hidden_channels

    do = dh_t * tc
    dc = dc_t + tanh_backward(dh_t * o, tc)

    dzo = sigmoid_backward(do, o)
    dc = dc + dzo * params.wco[None]

    df = dc * c_prev
    di = dc * g
    dg = dc * i
    dc_prev = dc * f

    dzi = sigmoid_backward(di, i)
    dzf = sigmoid_backward(df, f)
    dzg = tanh_backward(dg, g)

    dc_prev = dc_prev + dzi * params.wci[None] + dzf * params.wcf[None]

    dz = np.concatenate([dzi, dzf, dzg, dzo], axis=1)
    dx, dwx, db = conv2d_backward(dz, params.wx, cache["conv_x"], need_param_grads)
    dh_prev, dwh, _ = conv2d_backward(dz, params.wh, cache["conv_h"], need_param_grads)

    grads = None
    if need_param_grads:
        grads = {
            "wx": dwx,
            "wh": dwh,
            "b": db,
            "wci": (dzi * c_prev).sum(axis=0),
            "wcf": (dzf * c_prev).sum(axis=0),
            "wco": (dzo * c_t).sum(axis=0),
        }
    return dx, dh_prev, dc_prev, grads
