"""Differentiable operations for single-example (unbatched) 1D signals.

Activations are laid out ``channels x length``. ``conv1d`` weights are
``(out, in, kernel)``; ``conv_transpose1d`` weights are ``(in, out, kernel)``
so that the same array drives a convolution and its adjoint.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .tensor import Tensor, as_tensor, make_node


def conv1d_out_len(length: int, kernel: int, stride: int = 1, padding: int = 0) -> int:
    return (length + 2 * padding - kernel) // stride + 1


def conv_transpose1d_out_len(length: int, kernel: int, stride: int = 1, padding: int = 0) -> int:
    return (length - 1) * stride - 2 * padding + kernel


def _im2col(xp: np.ndarray, kernel: int, stride: int, l_out: int) -> np.ndarray:
    """(C, Lp) -> (C * kernel, l_out) patch matrix."""
    win = sliding_window_view(xp, kernel, axis=1)[:, ::stride][:, :l_out]  # C, l_out, k
    return win.transpose(0, 2, 1).reshape(-1, l_out)


def _col2im(cols: np.ndarray, channels: int, kernel: int, stride: int, l_out: int, length: int) -> np.ndarray:
    """Scatter-add (C * kernel, l_out) patches back onto a length-``length`` signal."""
    cols = cols.reshape(channels, kernel, l_out)
    out = np.zeros((channels, length))
    span = stride * (l_out - 1) + 1
    for k in range(kernel):
        out[:, k:k + span:stride] += cols[:, k, :]
    return out


def conv1d(x, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim != 2 or weight.data.ndim != 3:
        raise ShapeError("SHAPE_MISMATCH", f"conv1d expects C x L input and O x I x K weight, got {x.shape}, {weight.shape}")
    c_out, c_in, k = weight.shape
    if x.shape[0] != c_in:
        raise ShapeError("SHAPE_MISMATCH", f"conv1d input has {x.shape[0]} channels, weight expects {c_in}")
    if stride < 1 or padding < 0:
        raise ShapeError("BAD_GEOMETRY", f"stride={stride}, padding={padding}")
    length = x.shape[1]
    l_out = conv1d_out_len(length, k, stride, padding)
    if l_out < 1:
        raise ShapeError("BAD_GEOMETRY", f"input length {length} too short for kernel {k}")
    xp = np.pad(x.data, ((0, 0), (padding, padding))) if padding else x.data
    cols = _im2col(xp, k, stride, l_out)
    w2 = weight.data.reshape(c_out, c_in * k)
    y = w2 @ cols
    if bias is not None:
        y += bias.data[:, None]

    def grad_fn(g):
        gx = gw = gb = None
        if x.requires_grad:
            gxp = _col2im(w2.T @ g, c_in, k, stride, l_out, xp.shape[1])
            gx = gxp[:, padding:padding + length] if padding else gxp
        if weight.requires_grad:
            gw = (g @ cols.T).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=1)
        return gx, gw, gb

    parents = (x, weight) + ((bias,) if bias is not None else ())
    return make_node(y, parents, grad_fn)


def conv_transpose1d(x, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim != 2 or weight.data.ndim != 3:
        raise ShapeError("SHAPE_MISMATCH", f"conv_transpose1d expects C x L input and I x O x K weight, got {x.shape}, {weight.shape}")
    c_in, c_out, k = weight.shape
    if x.shape[0] != c_in:
        raise ShapeError("SHAPE_MISMATCH", f"conv_transpose1d input has {x.shape[0]} channels, weight expects {c_in}")
    if stride < 1 or padding < 0:
        raise ShapeError("BAD_GEOMETRY", f"stride={stride}, padding={padding}")
    length = x.shape[1]
    l_out = conv_transpose1d_out_len(length, k, stride, padding)
    if l_out < 1:
        raise ShapeError("BAD_GEOMETRY", f"output length {l_out} <= 0")
    full_len = (length - 1) * stride + k
    w2 = weight.data.reshape(c_in, c_out * k)
    full = _col2im(w2.T @ x.data, c_out, k, stride, length, full_len)
    y = full[:, padding:full_len - padding] if padding else full
    if bias is not None:
        y = y + bias.data[:, None]

    def grad_fn(g):
        gx = gw = gb = None
        gfull = np.pad(g, ((0, 0), (padding, padding))) if padding else g
        cols = _im2col(gfull, k, stride, length)
        if x.requires_grad:
            gx = w2 @ cols
        if weight.requires_grad:
            gw = (x.data @ cols.T).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=1)
        return gx, gw, gb

    parents = (x, weight) + ((bias,) if bias is not None else ())
    return make_node(y, parents, grad_fn)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_node(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return make_node(y, (x,), lambda g: (g * (1.0 - y * y),))


ACTIVATIONS = {"relu": relu, "tanh": tanh}


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        return ACTIVATIONS[kind](x)
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None


def dropout(x: Tensor, rate: float, training: bool, seed=None) -> Tensor:
    """Inverted dropout; ``seed`` is an int or a ``numpy.random.Generator``."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0:
        return x
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return make_node(x.data * keep, (x,), lambda g: (g * keep,))


def crop(x: Tensor, start: int, stop: int) -> Tensor:
    """Slice ``[start:stop]`` along the last axis."""
    full = x.shape
    y = x.data[..., start:stop]

    def grad_fn(g):
        gx = np.zeros(full)
        gx[..., start:stop] = g
        return (gx,)

    return make_node(y.copy(), (x,), grad_fn)


def mse(pred: Tensor, target) -> Tensor:
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError("SHAPE_MISMATCH", f"mse: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    n = diff.size

    def grad_fn(g):
        d = (2.0 / n) * float(g) * diff
        return d, -d

    return make_node(np.array(np.mean(diff * diff)), (pred, target), grad_fn)
