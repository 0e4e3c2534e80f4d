# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""Reverse-mode differentiable tensors.

Every differentiable op records one tape entry on its output: the input tensors
and a closure mapping the output gradient to input gradients. `backward()`
replays the entries in reverse topological order and then drops them, so the
activations they captured are released after every training step.
"""

import contextlib
import threading
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from voxhand.errors import ShapeMismatch, TapeMissing

ArrayLike = Union[np.ndarray, float, Sequence[float]]
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_default_dtype = np.dtype(np.float32)


class _GradMode(threading.local):
    enabled = True


# Per thread: sample-preparation workers run the localizer under no_grad().
_grad_mode = _GradMode()


def get_default_dtype() -> np.dtype:
    """
    Returns:
        np.dtype: dtype of newly created tensors (float32 unless overridden).
    """
    return _default_dtype


def set_default_dtype(dtype: np.dtype) -> None:
    """Sets the dtype of newly created tensors.

    Args:
        dtype (np.dtype): `np.float32` for training and inference, `np.float64`
            for gradient checks.
    """
    global _default_dtype
    _default_dtype = np.dtype(dtype)


@contextlib.contextmanager
def default_dtype(dtype: np.dtype) -> Iterator[None]:
    """Temporarily switches the default dtype.

    Args:
        dtype (np.dtype): dtype used inside the block.
    """
    previous = get_default_dtype()
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


def is_grad_enabled() -> bool:
    return _grad_mode.enabled


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disables tape recording inside the block."""
    previous = _grad_mode.enabled
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


class Tensor:
    """An N-dimensional array taking part in reverse-mode differentiation.

    Args:
        data (ArrayLike): Values; converted to the default dtype unless
            `dtype` is given.
        requires_grad (bool): Whether gradients flow into this tensor.
        dtype (Optional[np.dtype]): Explicit dtype.
    """

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype: Optional[np.dtype] = None,
    ):
        self.data = np.ascontiguousarray(data, dtype=dtype or get_default_dtype())
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.op = ""
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    def __repr__(self) -> str:
        return (
            f"Tensor(shape={self.shape}, dtype={self.dtype}, "
            f"requires_grad={self.requires_grad}, op={self.op or 'leaf'!r})"
        )

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        """
        Returns:
            np.ndarray: The underlying array (not a copy).
        """
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        """
        Returns:
            Tensor: A leaf sharing this tensor's data, outside any tape.
        """
        return Tensor(self.data, dtype=self.data.dtype)

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """Adds `grad` to this tensor's gradient.

        Args:
            grad (np.ndarray): Gradient of the same shape as the tensor.

        Raises:
            ShapeMismatch: If `grad` does not match the tensor's shape.
        """
        if grad.shape != self.shape:
            raise ShapeMismatch(
                f"Gradient of shape {grad.shape} for a tensor of shape {self.shape}."
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.dtype, copy=True)
        else:
            self.grad += grad

    def backward(self, grad: Optional[ArrayLike] = None) -> None:
        """Back-propagates from this tensor through its recorded tape.

        Args:
            grad (Optional[ArrayLike]): Upstream gradient; defaults to ones,
                which is what a scalar loss needs.

        Raises:
            TapeMissing: If no forward pass was recorded for this tensor.
        """
        if self._backward is None and not self.requires_grad:
            raise TapeMissing(
                "backward() called on a tensor without a recorded forward pass; "
                "was it computed under no_grad() or already back-propagated?"
            )
        seed = np.ones_like(self.data) if grad is None else np.asarray(grad)
        seed = seed.astype(self.dtype, copy=False).reshape(self.shape)

        order = self._topological_order()
        grads = {id(self): seed}
        for node in order:
            node_grad = grads.pop(id(node), None)
            if node_grad is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.accumulate_grad(node_grad)
                continue
            for parent, parent_grad in zip(node._parents, node._backward(node_grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + parent_grad
                else:
                    grads[id(parent)] = parent_grad

        for node in order:
            node._release()

    def _release(self) -> None:
        if self._backward is not None:
            self.requires_grad = False
        self._backward = None
        self._parents = ()

    def _topological_order(self) -> List["Tensor"]:
        """Orders the graph so every node precedes its parents."""
        visited = set()
        post_order: List[Tensor] = []
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                post_order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return post_order[::-1]

    def __add__(self, other: "Tensor") -> "Tensor":
        from voxhand.nn.functional import add

        return add(self, other)

    def __mul__(self, other: float) -> "Tensor":
        from voxhand.nn.functional import scale

        return scale(self, float(other))

    __rmul__ = __mul__

    def reshape(self, *shape: int) -> "Tensor":
        from voxhand.nn.functional import reshape

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


class Parameter(Tensor):
    """A trainable tensor together with its Adam state.

    Args:
        data (ArrayLike): Initial values.
        role (str): One of `"weight"`, `"bias"`, `"gamma"`, `"beta"`; decides
            how `init_weights` fills it.
    """

    def __init__(self, data: ArrayLike, role: str = "weight"):
        super().__init__(data, requires_grad=True)
        self.role = role
        self.adam_m = np.zeros_like(self.data)
        self.adam_v = np.zeros_like(self.data)
        self.step_count = 0

    def __repr__(self) -> str:
        return f"Parameter(shape={self.shape}, role={self.role!r})"


def record(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward: BackwardFn,
    op: str,
) -> Tensor:
    """Wraps an op result in a Tensor and records its tape entry.

    The entry is only recorded when recording is enabled and some parent
    requires a gradient.

    Args:
        data (np.ndarray): Forward result.
        parents (Sequence[Tensor]): Inputs of the op, in the order `backward`
            returns their gradients.
        backward (BackwardFn): Maps the output gradient to input gradients.
        op (str): Name of the op, for debugging.

    Returns:
        Tensor: The output tensor.
    """
    out = Tensor(data, dtype=data.dtype)
    out.op = op
    if _grad_mode.enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out
