"""Time-distributed convolutional LSTM autoencoder.

The default stack mirrors the reference architecture: a two-stage strided
convolutional encoder, a three-layer ConvLSTM bottleneck unrolled over the
window, and a transposed-convolution decoder, with batch normalization
between learnable layers and a sigmoid output. All convolutional and
batch-norm layers are time-distributed: they treat the window's T frames
as independent batch entries, while the ConvLSTM layers carry state across
the T steps and emit one hidden map per step (sequence to sequence).

Windows are (B, T, H, W) arrays with a single implicit input channel; the
model adds and removes the channel axis internally. H and W must be
divisible by 4 (two stride-2 encoder stages, two stride-2 decoder stages).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ..errors import ShapeError
from .cell import ConvLSTMCellParams, conv_lstm_step, conv_lstm_step_backward
from .ops import (
    batchnorm_backward,
    batchnorm_forward,
    conv2d_backward,
    conv2d_forward,
    conv2d_transpose_backward,
    conv2d_transpose_forward,
    conv_out_size,
    relu,
    relu_backward,
    same_pads,
    sigmoid,
    sigmoid_backward,
    tanh,
    tanh_backward,
)


class LayerKind(str, Enum):
    CONV2D = "conv2d"
    BATCH_NORM = "batch_norm"
    CONV_LSTM = "conv_lstm"
    CONV2D_TRANSPOSE = "conv2d_transpose"


class Activation(str, Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    TANH = "tanh"
    NONE = "none"


class GroupTag(str, Enum):
    CNN = "cnn"
    CONVLSTM = "convlstm"


_ACT_FORWARD = {Activation.RELU: relu, Activation.SIGMOID: sigmoid, Activation.TANH: tanh}
_ACT_BACKWARD = {
    Activation.RELU: relu_backward,
    Activation.SIGMOID: sigmoid_backward,
    Activation.TANH: tanh_backward,
}


@dataclass(frozen=True)
class LayerSpec:
    """Declarative description of one stack row."""

    kind: LayerKind
    in_channels: int
    out_channels: int
    kernel_size: int = 1
    stride: int = 1
    activation: Activation = Activation.NONE
    group_tag: GroupTag = GroupTag.CNN
    frozen: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", LayerKind(self.kind))
        object.__setattr__(self, "activation", Activation(self.activation))
        object.__setattr__(self, "group_tag", GroupTag(self.group_tag))
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeError("channel counts must be positive")
        if self.kind is LayerKind.BATCH_NORM and self.in_channels != self.out_channels:
            raise ShapeError("batch_norm cannot change the channel count")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
            "stride": self.stride,
            "activation": self.activation.value,
            "group_tag": self.group_tag.value,
            "frozen": self.frozen,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LayerSpec":
        return cls(**doc)


def default_architecture() -> list[LayerSpec]:
    """The reference 14-row stack (8 learnable layers + 6 batch norms)."""
    conv = lambda i, o: LayerSpec(
        LayerKind.CONV2D, i, o, kernel_size=5, stride=2,
        activation=Activation.RELU, group_tag=GroupTag.CNN,
    )
    bn = lambda c, tag: LayerSpec(LayerKind.BATCH_NORM, c, c, group_tag=tag)
    clstm = lambda i, o: LayerSpec(
        LayerKind.CONV_LSTM, i, o, kernel_size=3, stride=1,
        activation=Activation.RELU, group_tag=GroupTag.CONVLSTM,
    )
    convt = lambda i, o, k, s, act: LayerSpec(
        LayerKind.CONV2D_TRANSPOSE, i, o, kernel_size=k, stride=s,
        activation=act, group_tag=GroupTag.CNN,
    )
    return [
        conv(1, 128),
        bn(128, GroupTag.CNN),
        conv(128, 64),
        bn(64, GroupTag.CNN),
        clstm(64, 64),
        bn(64, GroupTag.CONVLSTM),
        clstm(64, 32),
        clstm(32, 64),
        bn(64, GroupTag.CONVLSTM),
        convt(64, 64, 5, 2, Activation.RELU),
        bn(64, GroupTag.CNN),
        convt(64, 128, 5, 2, Activation.RELU),
        bn(128, GroupTag.CNN),
        convt(128, 1, 2, 1, Activation.SIGMOID),
    ]


def _fold_time(x: np.ndarray) -> tuple[np.ndarray, int, int]:
    b, t = x.shape[:2]
    return x.reshape(b * t, *x.shape[2:]), b, t


class _Layer:
    """Runtime layer: parameter tensors plus forward/backward."""

    def __init__(self, spec: LayerSpec) -> None:
        self.spec = spec
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    @property
    def trainable(self) -> bool:
        return not self.spec.frozen

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def _activate(self, y: np.ndarray) -> np.ndarray:
        act = self.spec.activation
        if act is Activation.NONE:
            return y
        out = _ACT_FORWARD[act](y)
        self._act_out = out
        return out

    def _deactivate(self, dy: np.ndarray) -> np.ndarray:
        act = self.spec.activation
        if act is Activation.NONE:
            return dy
        return _ACT_BACKWARD[act](dy, self._act_out)

    def forward(self, x: np.ndarray, training: bool, update_stats: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def free_cache(self) -> None:
        self._cache = None
        self._act_out = None


class _Conv2DLayer(_Layer):
    def __init__(self, spec: LayerSpec, rng: np.random.Generator, dtype) -> None:
        super().__init__(spec)
        k, ci, co = spec.kernel_size, spec.in_channels, spec.out_channels
        limit = np.sqrt(6.0 / (ci * k * k + co * k * k))
        self.params = {
            "weight": rng.uniform(-limit, limit, size=(co, ci, k, k)).astype(dtype),
            "bias": np.zeros(co, dtype=dtype),
        }
        self.pads = same_pads(k, spec.stride)

    def forward(self, x, training, update_stats):
        flat, b, t = _fold_time(x)
        y, self._cache = conv2d_forward(
            flat, self.params["weight"], self.params["bias"], self.spec.stride, self.pads
        )
        self._bt = (b, t)
        y = self._activate(y)
        return y.reshape(b, t, *y.shape[1:])

    def backward(self, dy):
        b, t = self._bt
        dy = self._deactivate(dy.reshape(b * t, *dy.shape[2:]))
        dx, dw, db = conv2d_backward(
            dy, self.params["weight"], self._cache, need_param_grads=self.trainable
        )
        if self.trainable:
            self.grads = {"weight": dw, "bias": db}
        return dx.reshape(b, t, *dx.shape[1:])


class _ConvTranspose2DLayer(_Layer):
    def __init__(self, spec: LayerSpec, rng: np.random.Generator, dtype) -> None:
        super().__init__(spec)
        k, ci, co = spec.kernel_size, spec.in_channels, spec.out_channels
        limit = np.sqrt(6.0 / (ci * k * k + co * k * k))
        self.params = {
            "weight": rng.uniform(-limit, limit, size=(ci, co, k, k)).astype(dtype),
            "bias": np.zeros(co, dtype=dtype),
        }
        self.pads = same_pads(k, spec.stride)

    def forward(self, x, training, update_stats):
        flat, b, t = _fold_time(x)
        y, self._cache = conv2d_transpose_forward(
            flat, self.params["weight"], self.params["bias"], self.spec.stride, self.pads
        )
        self._bt = (b, t)
        y = self._activate(y)
        return y.reshape(b, t, *y.shape[1:])

    def backward(self, dy):
        b, t = self._bt
        dy = self._deactivate(dy.reshape(b * t, *dy.shape[2:]))
        dx, dw, db = conv2d_transpose_backward(
            dy, self.params["weight"], self._cache, need_param_grads=self.trainable
        )
        if self.trainable:
            self.grads = {"weight": dw, "bias": db}
        return dx.reshape(b, t, *dx.shape[1:])


class _BatchNormLayer(_Layer):
    def __init__(self, spec: LayerSpec, rng: np.random.Generator, dtype) -> None:
        super().__init__(spec)
        c = spec.in_channels
        self.params = {"gamma": np.ones(c, dtype=dtype), "beta": np.zeros(c, dtype=dtype)}
        self.buffers = {
            "running_mean": np.zeros(c, dtype=dtype),
            "running_var": np.ones(c, dtype=dtype),
        }

    def forward(self, x, training, update_stats):
        flat, b, t = _fold_time(x)
        # A frozen batch norm is a fixed affine map: running statistics,
        # never batch statistics, and no stat updates.
        use_batch_stats = training and self.trainable
        y, self._cache = batchnorm_forward(
            flat,
            self.params["gamma"],
            self.params["beta"],
            self.buffers["running_mean"],
            self.buffers["running_var"],
            training=use_batch_stats,
            update_stats=use_batch_stats and update_stats,
        )
        self._bt = (b, t)
        return y.reshape(b, t, *y.shape[1:])

    def backward(self, dy):
        b, t = self._bt
        dx, dgamma, dbeta = batchnorm_backward(
            dy.reshape(b * t, *dy.shape[2:]), self._cache
        )
        if self.trainable:
            self.grads = {"gamma": dgamma, "beta": dbeta}
        return dx.reshape(b, t, *dx.shape[1:])


class _ConvLSTMLayer(_Layer):
    def __init__(
        self, spec: LayerSpec, state_hw: tuple[int, int], rng: np.random.Generator, dtype
    ) -> None:
        super().__init__(spec)
        self.cell = ConvLSTMCellParams.initialize(
            spec.in_channels, spec.out_channels, spec.kernel_size, state_hw, rng, dtype
        )
        self.params = self.cell.tensors()
        self.dtype = dtype

    def forward(self, x, training, update_stats):
        b, t = x.shape[:2]
        hc = self.spec.out_channels
        sh, sw = self.cell.state_hw
        h_t = np.zeros((b, hc, sh, sw), dtype=x.dtype)
        c_t = np.zeros_like(h_t)
        steps = []
        outs = []
        for step in range(t):
            h_t, c_t, cache = conv_lstm_step(self.cell, x[:, step], h_t, c_t)
            steps.append(cache)
            outs.append(h_t)
        self._cache = steps
        y = np.stack(outs, axis=1)
        return self._activate(y)

    def backward(self, dy):
        dy = self._deactivate(dy)
        steps = self._cache
        b, t = dy.shape[:2]
        hc = self.spec.out_channels
        sh, sw = self.cell.state_hw
        dh_next = np.zeros((b, hc, sh, sw), dtype=dy.dtype)
        dc_next = np.zeros_like(dh_next)
        dx_steps = [None] * t
        need = self.trainable
        total = (
            {name: np.zeros_like(p) for name, p in self.params.items()} if need else None
        )
        for step in reversed(range(t)):
            dh = dy[:, step] + dh_next
            dx, dh_next, dc_next, grads = conv_lstm_step_backward(
                self.cell, steps[step], dh, dc_next, need_param_grads=need
            )
            dx_steps[step] = dx
            if need:
                for name, g in grads.items():
                    total[name] += g
        if need:
            self.grads = total
        return np.stack(dx_steps, axis=1)


def _build_layer(
    spec: LayerSpec, state_hw: tuple[int, int], rng: np.random.Generator, dtype
) -> _Layer:
    if spec.kind is LayerKind.CONV2D:
        return _Conv2DLayer(spec, rng, dtype)
    if spec.kind is LayerKind.CONV2D_TRANSPOSE:
        return _ConvTranspose2DLayer(spec, rng, dtype)
    if spec.kind is LayerKind.BATCH_NORM:
        return _BatchNormLayer(spec, rng, dtype)
    return _ConvLSTMLayer(spec, state_hw, rng, dtype)


@dataclass
class AutoencoderModel:
    """Built autoencoder: ordered runtime layers plus training metadata."""

    layers: list[_Layer]
    specs: list[LayerSpec]
    input_shape: tuple[int, int, int]
    dtype: np.dtype
    seed: int
    training_config: dict = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list)

    @classmethod
    def build(
        cls,
        specs: list[LayerSpec] | None = None,
        input_shape: tuple[int, int, int] = (4, 32, 32),
        seed: int = 0,
        dtype=np.float32,
    ) -> "AutoencoderModel":
        """Initialize all layers for a concrete input shape.

        ``input_shape`` is (T, H, W); H and W must be divisible by 4 so the
        two stride-2 encoder stages and two stride-2 decoder stages
        round-trip the spatial size exactly.
        """
        specs = list(specs) if specs is not None else default_architecture()
        t, h, w = input_shape
        if t < 1:
            raise ShapeError(f"window length must be >= 1, got {t}")
        if h % 4 or w % 4:
            raise ShapeError(
                f"input H and W must be divisible by 4, got {h}x{w}"
            )
        rng = np.random.default_rng(seed)
        dtype = np.dtype(dtype)
        layers: list[_Layer] = []
        cur_c, cur_h, cur_w = 1, h, w
        for spec in specs:
            if spec.in_channels != cur_c:
                raise ShapeError(
                    f"layer {spec.kind.value} expects {spec.in_channels} channels,"
                    f" stack provides {cur_c}"
                )
            layers.append(_build_layer(spec, (cur_h, cur_w), rng, dtype))
            if spec.kind in (LayerKind.CONV2D,):
                pads = same_pads(spec.kernel_size, spec.stride)
                cur_h = conv_out_size(cur_h, spec.kernel_size, spec.stride, pads[0], pads[1])
                cur_w = conv_out_size(cur_w, spec.kernel_size, spec.stride, pads[2], pads[3])
            elif spec.kind is LayerKind.CONV2D_TRANSPOSE:
                pads = same_pads(spec.kernel_size, spec.stride)
                cur_h = (cur_h - 1) * spec.stride + spec.kernel_size - (pads[0] + pads[1])
                cur_w = (cur_w - 1) * spec.stride + spec.kernel_size - (pads[2] + pads[3])
            cur_c = spec.out_channels
        if (cur_c, cur_h, cur_w) != (1, h, w):
            raise ShapeError(
                f"stack output {cur_c}x{cur_h}x{cur_w} does not round-trip"
                f" the input 1x{h}x{w}"
            )
        return cls(layers=layers, specs=specs, input_shape=(t, h, w), dtype=dtype, seed=seed)

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        t, h, w = self.input_shape
        if x.ndim != 4 or x.shape[1:] != (t, h, w):
            raise ShapeError(
                f"expected input (B, {t}, {h}, {w}), got {x.shape}"
            )
        return x

    def forward(
        self, x: np.ndarray, training: bool = False, update_stats: bool = True
    ) -> np.ndarray:
        """Reconstruct a batch of windows. Input and output are (B, T, H, W)."""
        x = self._check_input(x)
        y = x[:, :, None]
        for layer in self.layers:
            y = layer.forward(y, training, update_stats)
        return y[:, :, 0]

    def loss_and_grads(self, x: np.ndarray) -> float:
        """Mean-squared reconstruction error; leaves grads on each layer."""
        x = self._check_input(x)
        out = self.forward(x, training=True)
        diff = out - x
        loss = float(np.mean(diff * diff))
        dout = (2.0 / diff.size) * diff.astype(self.dtype)
        dy = dout[:, :, None]
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return loss

    def reconstruction_loss(self, x: np.ndarray, batch_size: int = 32) -> float:
        """Inference-mode MSE over a set of windows."""
        x = self._check_input(x)
        total = 0.0
        for start in range(0, len(x), batch_size):
            batch = x[start : start + batch_size]
            out = self.forward(batch, training=False)
            diff = out - batch
            total += float(np.sum(diff * diff))
        return total / x.size

    def free_caches(self) -> None:
        for layer in self.layers:
            layer.free_cache()

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for n, layer in enumerate(self.layers):
            for name, p in layer.params.items():
                out.append((f"layer{n:02d}.{name}", p))
        return out

    def named_buffers(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for n, layer in enumerate(self.layers):
            for name, b in layer.buffers.items():
                out.append((f"layer{n:02d}.{name}", b))
        return out

    def parameter_counts(self) -> list[int]:
        return [layer.param_count() for layer in self.layers]

    def total_parameters(self) -> int:
        return sum(self.parameter_counts())

    def set_frozen(self, frozen: bool, group: GroupTag | None = None) -> None:
        """Freeze/thaw all layers, or only those carrying ``group``."""
        for n, layer in enumerate(self.layers):
            if group is None or layer.spec.group_tag is group:
                layer.spec = replace(layer.spec, frozen=frozen)
                self.specs[n] = layer.spec

    def copy(self) -> "AutoencoderModel":
        """Deep copy (independent parameter and buffer tensors)."""
        clone = AutoencoderModel.build(
            [replace(s) for s in self.specs], self.input_shape, self.seed, self.dtype
        )
        for src, dst in zip(self.layers, clone.layers):
            for name, p in src.params.items():
                dst.params[name][...] = p
            for name, b in src.buffers.items():
                dst.buffers[name][...] = b
            if isinstance(dst, _ConvLSTMLayer):
                dst.cell.wx = dst.params["wx"]
                dst.cell.wh = dst.params["wh"]
                dst.cell.b = dst.params["b"]
                dst.cell.wci = dst.params["wci"]
                dst.cell.wcf = dst.params["wcf"]
                dst.cell.wco = dst.params["wco"]
        clone.training_config = dict(self.training_config)
        clone.loss_history = list(self.loss_history)
        return clone

    def render_architecture_table(self) -> str:
        """Printable stack summary: one row per layer."""
        _, h, w = self.input_shape
        kind_names = {
            LayerKind.CONV2D: "Conv2D",
            LayerKind.BATCH_NORM: "BatchNorm",
            LayerKind.CONV_LSTM: "ConvLSTM",
            LayerKind.CONV2D_TRANSPOSE: "Conv2DTranspose",
        }
        rows = []
        cur_h, cur_w = h, w
        for layer in self.layers:
            spec = layer.spec
            if spec.kind is LayerKind.CONV2D:
                cur_h //= spec.stride
                cur_w //= spec.stride
            elif spec.kind is LayerKind.CONV2D_TRANSPOSE:
                cur_h *= spec.stride
                cur_w *= spec.stride
            kernel = (
                f"{spec.kernel_size}x{spec.kernel_size}"
                if spec.kind is not LayerKind.BATCH_NORM
                else "-"
            )
            rows.append(
                (
                    kind_names[spec.kind],
                    f"{spec.in_channels}->{spec.out_channels}"
                    if spec.kind is not LayerKind.BATCH_NORM
                    else str(spec.in_channels),
                    kernel,
                    str(spec.stride) if spec.kind is not LayerKind.BATCH_NORM else "-",
                    spec.activation.value if spec.activation is not Activation.NONE else "-",
                    f"{cur_h}x{cur_w}",
                    spec.group_tag.value,
                    str(layer.param_count()),
                )
            )
        headers = ("Layer", "Channels", "Kernel", "Stride", "Activation", "Output", "Group", "Params")
        widths = [max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(len(headers))]
        fmt = lambda row: "  ".join(c.ljust(wd) for c, wd in zip(row, widths)).rstrip()
        lines = [fmt(headers), fmt(tuple("-" * wd for wd in widths))]
        lines.extend(fmt(r) for r in rows)
        lines.append(f"Total parameters: {self.total_parameters()}")
        return "\n".join(lines)
