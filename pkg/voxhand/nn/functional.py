# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""Differentiable ops on NCDHW tensors.

Each op computes its forward result with numpy and records a closure returning
the gradients of its inputs. Convolutions iterate over kernel offsets and
contract channels with `np.tensordot`; `conv3d(..., impl="naive")` runs a plain
loop kernel used to anchor the fast path in tests.
"""

import itertools
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from voxhand.errors import DegenerateBatch, ShapeMismatch
from voxhand.nn.tensor import Tensor, record

Triple = Tuple[int, int, int]
IntOrTriple = Union[int, Sequence[int]]


def as_triple(value: IntOrTriple, name: str) -> Triple:
    if isinstance(value, (int, np.integer)):
        triple = (int(value),) * 3
    else:
        triple = tuple(int(v) for v in value)
    if len(triple) != 3:
        raise ShapeMismatch(f"{name} must be an int or a triple, got {value}.")
    return triple


def _offsets(kernel: Triple) -> Iterator[Triple]:
    """Kernel offsets in row-major scan order."""
    return itertools.product(*(range(k) for k in kernel))


def _strided(offset: Triple, stride: Triple, out: Triple) -> Tuple[slice, ...]:
    """Spatial slices picking `out` samples `stride` apart from `offset`."""
    return (slice(None), slice(None)) + tuple(
        slice(o, o + s * (n - 1) + 1, s) for o, s, n in zip(offset, stride, out)
    )


def conv_output_size(size: int, kernel: int, stride: int = 1, padding: int = 0) -> int:
    """
    Args:
        size (int): Input length along one axis.
        kernel (int): Kernel length.
        stride (int): Stride.
        padding (int): Zero padding on each side.

    Returns:
        int: floor((size + 2 * padding - kernel) / stride) + 1
    """
    return (size + 2 * padding - kernel) // stride + 1


def conv_transpose_output_size(size: int, kernel: int, stride: int) -> int:
    return (size - 1) * stride + kernel


def _check_ndim(x: Tensor, ndim: int, op: str) -> None:
    if x.ndim != ndim:
        raise ShapeMismatch(f"{op} expects a {ndim}-d input, got shape {x.shape}.")


def conv3d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: IntOrTriple = 1,
    padding: IntOrTriple = 0,
    impl: str = "blocked",
) -> Tensor:
    """3D cross-correlation.

    Args:
        x (Tensor): Input of shape (N, C, D, H, W).
        weight (Tensor): Filters of shape (O, C, kd, kh, kw).
        bias (Optional[Tensor]): Bias of shape (O,).
        stride (IntOrTriple): Stride per spatial axis.
        padding (IntOrTriple): Zero padding per spatial axis.
        impl (str): `"blocked"` (tensordot per kernel offset) or `"naive"`
            (explicit loops, for testing). Both share the same backward.

    Returns:
        Tensor: Output of shape (N, O, D', H', W').

    Raises:
        ShapeMismatch: If channel counts disagree or an output axis is empty.
    """
    _check_ndim(x, 5, "conv3d")
    _check_ndim(weight, 5, "conv3d weight")
    stride = as_triple(stride, "stride")
    padding = as_triple(padding, "padding")
    kernel = weight.shape[2:]
    n, c = x.shape[:2]
    if weight.shape[1] != c:
        raise ShapeMismatch(
            f"conv3d input has {c} channels, weight expects {weight.shape[1]}."
        )
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeMismatch(
            f"conv3d bias shape {bias.shape} does not match {weight.shape[0]} filters."
        )
    out = tuple(
        conv_output_size(s, k, st, p)
        for s, k, st, p in zip(x.shape[2:], kernel, stride, padding)
    )
    if min(out) < 1:
        raise ShapeMismatch(
            f"conv3d of {x.shape} with kernel {kernel}, stride {stride}, padding "
            f"{padding} gives an empty output {out}."
        )

    pad_width = ((0, 0), (0, 0)) + tuple((p, p) for p in padding)
    xp = np.pad(x.data, pad_width) if any(padding) else x.data
    w = weight.data

    if impl == "blocked":
        acc = np.zeros((n,) + out + (w.shape[0],), dtype=x.dtype)
        for offset in _offsets(kernel):
            patch = xp[_strided(offset, stride, out)]
            w_k = w[(slice(None), slice(None)) + offset]
            acc += np.tensordot(patch, w_k, ([1], [1]))
        data = np.ascontiguousarray(np.moveaxis(acc, -1, 1))
    elif impl == "naive":
        data = _conv3d_naive(xp, w, stride, out)
    else:
        raise ValueError(f"Unknown conv3d impl {impl!r}.")
    if bias is not None:
        data += bias.data.reshape(1, -1, 1, 1, 1)

    def backward(grad: np.ndarray) -> Tuple[np.ndarray, ...]:
        grad_xp = np.zeros_like(xp)
        grad_w = np.zeros_like(w)
        for offset in _offsets(kernel):
            window = _strided(offset, stride, out)
            w_k = w[(slice(None), slice(None)) + offset]
            grad_w[(slice(None), slice(None)) + offset] = np.tensordot(
                grad, xp[window], ([0, 2, 3, 4], [0, 2, 3, 4])
            )
            grad_xp[window] += np.moveaxis(np.tensordot(grad, w_k, ([1], [0])), -1, 1)
        crop = (slice(None), slice(None)) + tuple(
            slice(p, p + s) for p, s in zip(padding, x.shape[2:])
        )
        grads = (grad_xp[crop], grad_w)
        if bias is None:
            return grads
        return grads + (grad.sum(axis=(0, 2, 3, 4)),)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return record(data, parents, backward, "conv3d")


def _conv3d_naive(
    xp: np.ndarray, w: np.ndarray, stride: Triple, out: Triple
) -> np.ndarray:
    n = xp.shape[0]
    o_channels = w.shape[0]
    kd, kh, kw = w.shape[2:]
    sd, sh, sw = stride
    data = np.zeros((n, o_channels) + out, dtype=xp.dtype)
    for b in range(n):
        for o in range(o_channels):
            for i, j, k in itertools.product(*(range(s) for s in out)):
                window = xp[b, :, i * sd :, j * sh :, k * sw :][:, :kd, :kh, :kw]
                data[b, o, i, j, k] = np.sum(window * w[o])
    return data


def conv_transpose3d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: IntOrTriple = 2,
) -> Tensor:
    """Transposed 3D convolution, the adjoint of a strided conv3d.

    Args:
        x (Tensor): Input of shape (N, C, D, H, W).
        weight (Tensor): Filters of shape (C, O, kd, kh, kw).
        bias (Optional[Tensor]): Bias of shape (O,).
        stride (IntOrTriple): Up-sampling stride.

    Returns:
        Tensor: Output of shape (N, O, (D - 1) * stride + kd, ...).

    Raises:
        ShapeMismatch: If channel counts disagree.
    """
    _check_ndim(x, 5, "conv_transpose3d")
    _check_ndim(weight, 5, "conv_transpose3d weight")
    stride = as_triple(stride, "stride")
    kernel = weight.shape[2:]
    n, c = x.shape[:2]
    if weight.shape[0] != c:
        raise ShapeMismatch(
            f"conv_transpose3d input has {c} channels, "
            f"weight expects {weight.shape[0]}."
        )
    o_channels = weight.shape[1]
    if bias is not None and bias.shape != (o_channels,):
        raise ShapeMismatch(
            f"conv_transpose3d bias shape {bias.shape} does not match "
            f"{o_channels} filters."
        )
    size_in = x.shape[2:]
    out = tuple(
        conv_transpose_output_size(s, k, st)
        for s, k, st in zip(size_in, kernel, stride)
    )
    w = weight.data

    data = np.zeros((n, o_channels) + out, dtype=x.dtype)
    for offset in _offsets(kernel):
        w_k = w[(slice(None), slice(None)) + offset]
        data[_strided(offset, stride, size_in)] += np.moveaxis(
            np.tensordot(x.data, w_k, ([1], [0])), -1, 1
        )
    if bias is not None:
        data += bias.data.reshape(1, -1, 1, 1, 1)

    def backward(grad: np.ndarray) -> Tuple[np.ndarray, ...]:
        grad_x = np.zeros_like(x.data)
        grad_w = np.zeros_like(w)
        for offset in _offsets(kernel):
            g_k = grad[_strided(offset, stride, size_in)]
            w_k = w[(slice(None), slice(None)) + offset]
            grad_x += np.moveaxis(np.tensordot(g_k, w_k, ([1], [1])), -1, 1)
            grad_w[(slice(None), slice(None)) + offset] = np.tensordot(
                x.data, g_k, ([0, 2, 3, 4], [0, 2, 3, 4])
            )
        grads = (grad_x, grad_w)
        if bias is None:
            return grads
        return grads + (grad.sum(axis=(0, 2, 3, 4)),)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return record(data, parents, backward, "conv_transpose3d")


def max_pool3d(
    x: Tensor, kernel: IntOrTriple = 2, stride: Optional[IntOrTriple] = None
) -> Tensor:
    """Max pooling; the gradient goes to the maximum of each window.

    Ties resolve to the first element in row-major scan order of the window.

    Args:
        x (Tensor): Input of shape (N, C, D, H, W).
        kernel (IntOrTriple): Window size.
        stride (Optional[IntOrTriple]): Stride, defaults to `kernel`.

    Returns:
        Tensor: Pooled output.

    Raises:
        ShapeMismatch: If a spatial axis is smaller than the window.
    """
    _check_ndim(x, 5, "max_pool3d")
    kernel = as_triple(kernel, "kernel")
    stride = kernel if stride is None else as_triple(stride, "stride")
    if any(s < k for s, k in zip(x.shape[2:], kernel)):
        raise ShapeMismatch(f"max_pool3d window {kernel} exceeds input {x.shape}.")
    out = tuple(
        conv_output_size(s, k, st) for s, k, st in zip(x.shape[2:], kernel, stride)
    )

    best = None
    argmax = None
    for index, offset in enumerate(_offsets(kernel)):
        view = x.data[_strided(offset, stride, out)]
        if best is None:
            best = view.copy()
            argmax = np.zeros(best.shape, dtype=np.int32)
            continue
        # Strict comparison keeps the earliest maximum.
        better = view > best
        best[better] = view[better]
        argmax[better] = index

    def backward(grad: np.ndarray) -> Tuple[np.ndarray]:
        grad_x = np.zeros_like(x.data)
        for index, offset in enumerate(_offsets(kernel)):
            grad_x[_strided(offset, stride, out)] += np.where(argmax == index, grad, 0)
        return (grad_x,)

    return record(best, (x,), backward, "max_pool3d")


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.9,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel batch normalization.

    In training mode the batch statistics normalize the input and update the
    running buffers in place as `running = momentum * running + (1 - momentum) *
    batch`. In eval mode the running buffers are used unchanged.

    Args:
        x (Tensor): Input of shape (N, C, ...).
        gamma (Tensor): Scale of shape (C,).
        beta (Tensor): Shift of shape (C,).
        running_mean (np.ndarray): Running mean of shape (C,), updated in place.
        running_var (np.ndarray): Running (biased) variance of shape (C,).
        training (bool): Whether to use and update batch statistics.
        momentum (float): Weight of the previous running value.
        eps (float): Added to the variance.

    Returns:
        Tensor: Normalized output.

    Raises:
        DegenerateBatch: On a batch of one sample in training mode.
        ShapeMismatch: If the parameters do not match the channel count.
    """
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeMismatch(
            f"batch_norm over {c} channels got gamma {gamma.shape}, beta {beta.shape}."
        )
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, c) + (1,) * (x.ndim - 2)

    if training:
        if x.shape[0] < 2:
            raise DegenerateBatch(
                "batch_norm in training mode needs at least 2 samples, got 1."
            )
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        mean = running_mean.astype(x.dtype)
        var = running_var.astype(x.dtype)

    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    x_hat = (x.data - mean.reshape(bshape)) * inv_std.reshape(bshape)
    data = x_hat * gamma.data.reshape(bshape) + beta.data.reshape(bshape)
    count = x.size // c

    def backward(grad: np.ndarray) -> Tuple[np.ndarray, ...]:
        grad_gamma = np.sum(grad * x_hat, axis=axes)
        grad_beta = np.sum(grad, axis=axes)
        grad_hat = grad * gamma.data.reshape(bshape)
        if training:
            grad_x = (
                inv_std.reshape(bshape)
                / count
                * (
                    count * grad_hat
                    - grad_hat.sum(axis=axes).reshape(bshape)
                    - x_hat * np.sum(grad_hat * x_hat, axis=axes).reshape(bshape)
                )
            )
        else:
            grad_x = grad_hat * inv_std.reshape(bshape)
        return grad_x, grad_gamma, grad_beta

    return record(data.astype(x.dtype), (x, gamma, beta), backward, "batch_norm")


def relu(x: Tensor) -> Tensor:
    data = np.maximum(x.data, 0)

    def backward(grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * (x.data > 0),)

    return record(data, (x,), backward, "relu")


def dropout(
    x: Tensor, rate: float, training: bool, rng: Optional[np.random.Generator] = None
) -> Tensor:
    """Inverted dropout.

    Args:
        x (Tensor): Input.
        rate (float): Drop probability in [0, 1).
        training (bool): Eval mode returns `x` itself.
        rng (Optional[np.random.Generator]): Mask source.

    Returns:
        Tensor: `x` with dropped elements zeroed and survivors scaled by
        1 / (1 - rate).
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"Dropout rate must be in [0, 1), got {rate}.")
    if not training or rate == 0.0:
        return x
    rng = rng or np.random.default_rng()
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1.0 - rate)

    def backward(grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * mask,)

    return record(x.data * mask, (x,), backward, "dropout")


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Affine map `x @ weight + bias`.

    Args:
        x (Tensor): Input of shape (N, in).
        weight (Tensor): Weight of shape (in, out).
        bias (Optional[Tensor]): Bias of shape (out,).

    Returns:
        Tensor: Output of shape (N, out).

    Raises:
        ShapeMismatch: If the inner dimensions disagree.
    """
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeMismatch(f"linear of {x.shape} with weight {weight.shape}.")
    data = x.data @ weight.data
    if bias is not None:
        data = data + bias.data

    def backward(grad: np.ndarray) -> Tuple[np.ndarray, ...]:
        grads = (grad @ weight.data.T, x.data.T @ grad)
        return grads if bias is None else grads + (grad.sum(axis=0),)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return record(data, parents, backward, "linear")


def _average_matrix(size: int, out: int, dtype: np.dtype) -> np.ndarray:
    """Rows average the bins [floor(i*size/out), ceil((i+1)*size/out))."""
    matrix = np.zeros((out, size), dtype=dtype)
    for i in range(out):
        start = (i * size) // out
        stop = -((-(i + 1) * size) // out)
        matrix[i, start:stop] = 1.0 / (stop - start)
    return matrix


def adaptive_avg_pool3d(x: Tensor, output_size: IntOrTriple) -> Tensor:
    """Averages each spatial axis into a fixed number of bins.

    Args:
        x (Tensor): Input of shape (N, C, D, H, W).
        output_size (IntOrTriple): Bins per spatial axis.

    Returns:
        Tensor: Output of shape (N, C) + output_size.
    """
    _check_ndim(x, 5, "adaptive_avg_pool3d")
    output_size = as_triple(output_size, "output_size")
    if any(o > s for o, s in zip(output_size, x.shape[2:])):
        raise ShapeMismatch(
            f"adaptive_avg_pool3d to {output_size} from a smaller input {x.shape}."
        )
    a, b, c = (
        _average_matrix(s, o, x.dtype) for s, o in zip(x.shape[2:], output_size)
    )
    data = np.einsum("ncdhw,id,jh,kw->ncijk", x.data, a, b, c, optimize=True)

    def backward(grad: np.ndarray) -> Tuple[np.ndarray]:
        return (np.einsum("ncijk,id,jh,kw->ncdhw", grad, a, b, c, optimize=True),)

    return record(data, (x,), backward, "adaptive_avg_pool3d")


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"add of {a.shape} and {b.shape}.")

    def backward(grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return grad, grad

    return record(a.data + b.data, (a, b), backward, "add")


def scale(x: Tensor, factor: float) -> Tensor:
    def backward(grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * x.dtype.type(factor),)

    return record(x.data * x.dtype.type(factor), (x,), backward, "scale")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    def backward(grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad.reshape(x.shape),)

    try:
        data = x.data.reshape(tuple(shape))
    except ValueError as e:
        raise ShapeMismatch(f"Cannot reshape {x.shape} to {tuple(shape)}.") from e
    return record(data, (x,), backward, "reshape")


def flatten(x: Tensor) -> Tensor:
    return reshape(x, (x.shape[0], -1))


def mse_joint_loss(pred: Tensor, truth: Union[Tensor, np.ndarray]) -> Tensor:
    """Squared joint distance averaged over joints, then over the batch.

    For a batch of B frames with F joints each the loss is
    sum((pred - truth) ** 2) / (B * F).

    Args:
        pred (Tensor): Predictions of shape (B, F * 3) or (B, F, 3), in mm.
        truth (Union[Tensor, np.ndarray]): Ground truth of the same size.

    Returns:
        Tensor: Scalar loss in mm^2.

    Raises:
        ShapeMismatch: If sizes differ or the last axis is not a multiple of 3.
    """
    target = truth.data if isinstance(truth, Tensor) else np.asarray(truth)
    if pred.size != target.size or pred.shape[0] != target.shape[0] or pred.size % 3:
        raise ShapeMismatch(f"mse_joint_loss of {pred.shape} against {target.shape}.")
    batch = pred.shape[0]
    joints = pred.size // (3 * batch)
    diff = pred.data - target.reshape(pred.shape).astype(pred.dtype)
    norm = pred.dtype.type(batch * joints)
    data = np.asarray(np.sum(diff * diff) / norm, dtype=pred.dtype)

    def backward(grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * 2.0 * diff / norm,)

    return record(data, (pred,), backward, "mse_joint_loss")
