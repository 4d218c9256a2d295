"""Low-level tensor ops: convolution, transposed convolution, batch norm.

All convolutions are lowered to GEMM via im2col / col2im. Tensors use the
NCHW layout; every op preserves the input dtype so the whole stack can run
in float32 for speed or float64 for gradient checking.

Padding convention: a layer with kernel k and stride s pads a total of
k - s pixels per spatial axis, split (low, high) = (total // 2, rest).
With input sizes divisible by s this makes stride-s convolutions divide
the spatial size by exactly s and stride-s transposed convolutions
multiply it by exactly s; the k=2, s=1 transposed layer preserves shape.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..errors import ShapeError

Pads = tuple[int, int, int, int]


def same_pads(kernel: int, stride: int) -> Pads:
    """(top, bottom, left, right) padding for the shape contract above."""
    total = kernel - stride
    if total < 0:
        raise ShapeError(f"kernel {kernel} smaller than stride {stride}")
    low, high = total // 2, total - total // 2
    return (low, high, low, high)


def conv_out_size(size: int, kernel: int, stride: int, pad_low: int, pad_high: int) -> int:
    return (size + pad_low + pad_high - kernel) // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pads: Pads) -> np.ndarray:
    """(N, C, H, W) -> (N*Ho*Wo, C*kh*kw) patch matrix."""
    pt, pb, pl, pr = pads
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, ho, wo = windows.shape[:4]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    return np.ascontiguousarray(cols)


def _col2im(
    cols: np.ndarray,
    x_shape: tuple[int, int, int, int],
    kh: int,
    kw: int,
    stride: int,
    pads: Pads,
) -> np.ndarray:
    """Scatter-add adjoint of _im2col: patches back to (N, C, H, W)."""
    n, c, h, w = x_shape
    pt, pb, pl, pr = pads
    hp, wp = h + pt + pb, w + pl + pr
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    cols = cols.reshape(n, ho, wo, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    xp = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols[
                :, :, i, j
            ]
    return xp[:, :, pt : hp - pb, pl : wp - pr]


def conv2d_forward(
    x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int, pads: Pads
) -> tuple[np.ndarray, tuple]:
    """Cross-correlation. x (N,Cin,H,W), weight (Cout,Cin,kh,kw) -> (N,Cout,Ho,Wo)."""
    n, c_in, h, w = x.shape
    c_out, c_in_w, kh, kw = weight.shape
    if c_in != c_in_w:
        raise ShapeError(f"conv2d input has {c_in} channels, weight expects {c_in_w}")
    ho = conv_out_size(h, kh, stride, pads[0], pads[1])
    wo = conv_out_size(w, kw, stride, pads[2], pads[3])
    cols = _im2col(x, kh, kw, stride, pads)
    out = cols @ weight.reshape(c_out, -1).T
    if bias is not None:
        out += bias
    out = out.reshape(n, ho, wo, c_out).transpose(0, 3, 1, 2)
    cache = (cols, x.shape, weight.shape, stride, pads)
    return np.ascontiguousarray(out), cache


def conv2d_backward(
    dout: np.ndarray, weight: np.ndarray, cache: tuple, need_param_grads: bool = True
) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Gradients (dx, dweight, dbias) for conv2d_forward."""
    cols, x_shape, w_shape, stride, pads = cache
    c_out = w_shape[0]
    dout_mat = dout.transpose(0, 2, 3, 1).reshape(-1, c_out)
    dw = db = None
    if need_param_grads:
        dw = (dout_mat.T @ cols).reshape(w_shape)
        db = dout_mat.sum(axis=0)
    dcols = dout_mat @ weight.reshape(c_out, -1)
    dx = _col2im(dcols, x_shape, w_shape[2], w_shape[3], stride, pads)
    return dx, dw, db


def conv2d_transpose_forward(
    x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int, pads: Pads
) -> tuple[np.ndarray, tuple]:
    """Transposed convolution (adjoint of conv2d w.r.t. its input).

    x (N,Cin,H,W), weight (Cin,Cout,kh,kw) -> (N,Cout,Ho,Wo) with
    Ho = (H-1)*stride + kh - pad_total.
    """
    n, c_in, h, w = x.shape
    c_in_w, c_out, kh, kw = weight.shape
    if c_in != c_in_w:
        raise ShapeError(
            f"conv2d_transpose input has {c_in} channels, weight expects {c_in_w}"
        )
    ho = (h - 1) * stride + kh - (pads[0] + pads[1])
    wo = (w - 1) * stride + kw - (pads[2] + pads[3])
    x_mat = x.transpose(0, 2, 3, 1).reshape(n * h * w, c_in)
    cols = x_mat @ weight.reshape(c_in, -1)
    out = _col2im(cols, (n, c_out, ho, wo), kh, kw, stride, pads)
    if bias is not None:
        out += bias[None, :, None, None]
    cache = (x_mat, x.shape, weight.shape, (n, c_out, ho, wo), stride, pads)
    return out, cache


def conv2d_transpose_backward(
    dout: np.ndarray, weight: np.ndarray, cache: tuple, need_param_grads: bool = True
) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Gradients (dx, dweight, dbias) for conv2d_transpose_forward."""
    x_mat, x_shape, w_shape, out_shape, stride, pads = cache
    n, c_in, h, w = x_shape
    kh, kw = w_shape[2], w_shape[3]
    dcols = _im2col(dout, kh, kw, stride, pads)
    dw = db = None
    if need_param_grads:
        dw = (x_mat.T @ dcols).reshape(w_shape)
        db = dout.sum(axis=(0, 2, 3))
    dx_mat = dcols @ weight.reshape(c_in, -1).T
    dx = dx_mat.reshape(n, h, w, c_in).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dx), dw, db


BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def batchnorm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    update_stats: bool,
    eps: float = BN_EPS,
    momentum: float = BN_MOMENTUM,
) -> tuple[np.ndarray, tuple]:
    """Per-channel batch norm over (N, H, W); biased batch variance.

    In training mode the batch statistics normalize and (optionally) update
    the running statistics in place; in eval mode the running statistics
    are used and never touched.
    """
    if training:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        if update_stats:
            running_mean *= momentum
            running_mean += (1.0 - momentum) * mean
            running_var *= momentum
            running_var += (1.0 - momentum) * var
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    cache = (xhat, inv_std, gamma, training)
    return out, cache


def batchnorm_backward(
    dout: np.ndarray, cache: tuple
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dgamma, dbeta); handles both statistic modes."""
    xhat, inv_std, gamma, training = cache
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    scale = (gamma * inv_std)[None, :, None, None]
    if not training:
        return dout * scale, dgamma, dbeta
    m = dout.shape[0] * dout.shape[2] * dout.shape[3]
    dx = scale * (
        dout
        - dbeta[None, :, None, None] / m
        - xhat * dgamma[None, :, None, None] / m
    )
    return dx, dgamma, dbeta


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dout: np.ndarray, out: np.ndarray) -> np.ndarray:
    return dout * (out > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def sigmoid_backward(dout: np.ndarray, out: np.ndarray) -> np.ndarray:
    return dout * out * (1.0 - out)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(dout: np.ndarray, out: np.ndarray) -> np.ndarray:
    return dout * (1.0 - out * out)
