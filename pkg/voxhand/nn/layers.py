# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

from abc import ABC, abstractmethod
from collections import OrderedDict
from enum import Enum
from typing import Any, Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np
from pydantic.dataclasses import dataclass

import voxhand.nn.functional as F
from voxhand.errors import ShapeMismatch
from voxhand.nn.tensor import Parameter, Tensor, get_default_dtype, no_grad


class Module(ABC):
    """A differentiable building block holding parameters, buffers and children.

    Children, parameters and buffers are registered in insertion order, which
    fixes the order of `named_parameters()` and of checkpoint entries.
    """

    def __init__(self):
        self.training = True
        self._modules: Dict[str, "Module"] = OrderedDict()
        self._parameters: Dict[str, Parameter] = OrderedDict()
        self._buffers: Dict[str, np.ndarray] = OrderedDict()

    @abstractmethod
    def forward(self, x: Tensor) -> Tensor:
        """Computes the module output.

        Args:
            x (Tensor): Input tensor.

        Returns:
            Tensor: Output tensor.
        """

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def add_module(self, name: str, module: "Module") -> "Module":
        self._modules[name] = module
        return module

    def add_parameter(self, name: str, data: np.ndarray, role: str) -> Parameter:
        parameter = Parameter(data, role=role)
        self._parameters[name] = parameter
        return parameter

    def add_buffer(self, name: str, data: np.ndarray) -> np.ndarray:
        self._buffers[name] = data
        return data

    def children(self) -> List["Module"]:
        return list(self._modules.values())

    def modules(self) -> Iterator["Module"]:
        """Yields this module and all descendants, depth first."""
        yield self
        for child in self._modules.values():
            yield from child.modules()

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, parameter in self._parameters.items():
            yield prefix + name, parameter
        for name, child in self._modules.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, buffer in self._buffers.items():
            yield prefix + name, buffer
        for name, child in self._modules.items():
            yield from child.named_buffers(f"{prefix}{name}.")

    def train(self, mode: bool = True) -> "Module":
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for parameter in self.parameters():
            parameter.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        """
        Returns:
            Dict[str, np.ndarray]: Copies of all parameters and buffers by name.
        """
        state = OrderedDict(
            (name, p.data.copy()) for name, p in self.named_parameters()
        )
        state.update((name, b.copy()) for name, b in self.named_buffers())
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Copies values into parameters and buffers in place.

        Args:
            state (Dict[str, np.ndarray]): Values by name, as produced by
                `state_dict()`.

        Raises:
            ShapeMismatch: If names or shapes differ from this module's.
        """
        targets = OrderedDict((name, p.data) for name, p in self.named_parameters())
        targets.update(self.named_buffers())
        if set(targets) != set(state):
            missing = sorted(set(targets) - set(state))
            unexpected = sorted(set(state) - set(targets))
            raise ShapeMismatch(
                f"State does not match the module: missing {missing}, "
                f"unexpected {unexpected}."
            )
        for name, target in targets.items():
            value = np.asarray(state[name])
            if value.shape != target.shape:
                raise ShapeMismatch(
                    f"{name}: state shape {value.shape}, module shape {target.shape}."
                )
            target[...] = value


def _zeros(*shape: int) -> np.ndarray:
    return np.zeros(shape, dtype=get_default_dtype())


class Conv3d(Module):
    """3D convolution with bias."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: F.IntOrTriple = 3,
        stride: F.IntOrTriple = 1,
        padding: F.IntOrTriple = 0,
        impl: str = "blocked",
    ):
        super().__init__()
        self.kernel = F.as_triple(kernel, "kernel")
        self.stride = F.as_triple(stride, "stride")
        self.padding = F.as_triple(padding, "padding")
        self.impl = impl
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.weight = self.add_parameter(
            "weight", _zeros(out_channels, in_channels, *self.kernel), "weight"
        )
        self.bias = self.add_parameter("bias", _zeros(out_channels), "bias")

    def forward(self, x: Tensor) -> Tensor:
        return F.conv3d(x, self.weight, self.bias, self.stride, self.padding, self.impl)


class ChannelProjection(Module):
    """Pointwise channel mixing on a residual skip path.

    Not counted as a convolution layer; applies a (out, in) matrix to every
    voxel through a unit-kernel conv3d call.
    """

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.weight = self.add_parameter(
            "weight", _zeros(out_channels, in_channels, 1, 1, 1), "weight"
        )
        self.bias = self.add_parameter("bias", _zeros(out_channels), "bias")

    def forward(self, x: Tensor) -> Tensor:
        return F.conv3d(x, self.weight, self.bias)


class ConvTranspose3d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: F.IntOrTriple = 2,
        stride: F.IntOrTriple = 2,
    ):
        super().__init__()
        self.kernel = F.as_triple(kernel, "kernel")
        self.stride = F.as_triple(stride, "stride")
        self.weight = self.add_parameter(
            "weight", _zeros(in_channels, out_channels, *self.kernel), "weight"
        )
        self.bias = self.add_parameter("bias", _zeros(out_channels), "bias")

    def forward(self, x: Tensor) -> Tensor:
        return F.conv_transpose3d(x, self.weight, self.bias, self.stride)


class BatchNorm3d(Module):
    """Batch normalization with running statistics kept as buffers."""

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.gamma = self.add_parameter("gamma", np.ones(channels), "gamma")
        self.beta = self.add_parameter("beta", _zeros(channels), "beta")
        self.running_mean = self.add_buffer("running_mean", _zeros(channels))
        self.running_var = self.add_buffer(
            "running_var", np.ones(channels, dtype=get_default_dtype())
        )

    def forward(self, x: Tensor) -> Tensor:
        return F.batch_norm(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            self.training,
            self.momentum,
            self.eps,
        )


def recalibrate_batch_norm(model: Module, batches: Iterable[Tensor]) -> int:
    """Re-estimates every BatchNorm running statistic under the current weights.

    Only the BatchNorm layers run in training mode, without a tape. Batch k
    (from 0) is folded in with momentum k / (k + 1), so the buffers end up as
    the plain average of the per-batch statistics. Layer momenta are restored
    and the model is left in eval mode.

    Args:
        model (Module): Network to recalibrate.
        batches (Iterable[Tensor]): Input batches of at least 2 samples.

    Returns:
        int: Number of batches seen; 0 leaves the buffers unchanged.
    """
    norms = [m for m in model.modules() if isinstance(m, BatchNorm3d)]
    momenta = [norm.momentum for norm in norms]
    model.eval()
    seen = 0
    try:
        for norm in norms:
            norm.training = True
        with no_grad():
            for batch in batches:
                for norm in norms:
                    norm.momentum = seen / (seen + 1)
                model(batch)
                seen += 1
    finally:
        for norm, momentum in zip(norms, momenta):
            norm.momentum = momentum
        model.eval()
    return seen


class ReLU(Module):
    def forward(self, x: Tensor) -> Tensor:
        return F.relu(x)


class Dropout(Module):
    """Inverted dropout drawing its masks from a module-owned generator."""

    def __init__(self, rate: float = 0.5, seed: Optional[int] = None):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"Dropout rate must be in [0, 1), got {rate}.")
        self.rate = rate
        self.reseed(seed)

    def reseed(self, seed: Optional[int]) -> None:
        self.rng = np.random.default_rng(seed)

    def forward(self, x: Tensor) -> Tensor:
        return F.dropout(x, self.rate, self.training, self.rng)


class MaxPool3d(Module):
    def __init__(
        self, kernel: F.IntOrTriple = 2, stride: Optional[F.IntOrTriple] = None
    ):
        super().__init__()
        self.kernel = F.as_triple(kernel, "kernel")
        self.stride = self.kernel if stride is None else F.as_triple(stride, "stride")

    def forward(self, x: Tensor) -> Tensor:
        return F.max_pool3d(x, self.kernel, self.stride)


class AdaptiveAvgPool3d(Module):
    def __init__(self, output_size: F.IntOrTriple):
        super().__init__()
        self.output_size = F.as_triple(output_size, "output_size")

    def forward(self, x: Tensor) -> Tensor:
        return F.adaptive_avg_pool3d(x, self.output_size)


class Linear(Module):
    """Fully connected layer computing `x @ weight + bias`."""

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = self.add_parameter(
            "weight", _zeros(in_features, out_features), "weight"
        )
        self.bias = self.add_parameter("bias", _zeros(out_features), "bias")

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class Flatten(Module):
    def forward(self, x: Tensor) -> Tensor:
        return F.flatten(x)


class Scale(Module):
    """Multiplies by a constant, e.g. to map unit outputs to mm."""

    def __init__(self, factor: float):
        super().__init__()
        self.factor = factor

    def forward(self, x: Tensor) -> Tensor:
        return F.scale(x, self.factor)


class Sequential(Module):
    def __init__(self, *layers: Module):
        super().__init__()
        for index, layer in enumerate(layers):
            self.add_module(str(index), layer)

    def __len__(self) -> int:
        return len(self._modules)

    def __getitem__(self, index: int) -> Module:
        return self.children()[index]

    def forward(self, x: Tensor) -> Tensor:
        for layer in self._modules.values():
            x = layer(x)
        return x


class ResidualBlock(Module):
    """Adds a skip path to the output of `body`.

    The skip is the identity when channel counts match and a
    `ChannelProjection` otherwise.
    """

    def __init__(self, body: Sequential, in_channels: int, out_channels: int):
        super().__init__()
        self.body = self.add_module("body", body)
        self.projection: Optional[ChannelProjection] = None
        if in_channels != out_channels:
            self.projection = self.add_module(
                "projection", ChannelProjection(in_channels, out_channels)
            )

    def forward(self, x: Tensor) -> Tensor:
        skip = x if self.projection is None else self.projection(x)
        return F.add(self.body(x), skip)


class Mode(str, Enum):
    Train = "Train"
    Eval = "Eval"


class LayerKind(str, Enum):
    Conv3D = "Conv3D"
    MaxPool3D = "MaxPool3D"
    ConvTranspose3D = "ConvTranspose3D"
    BatchNorm = "BatchNorm"
    ReLU = "ReLU"
    Dropout = "Dropout"
    FullyConnected = "FullyConnected"
    AdaptiveAvgPool3D = "AdaptiveAvgPool3D"
    ResidualAdd = "ResidualAdd"
    Flatten = "Flatten"
    Scale = "Scale"


@dataclass(frozen=True)
class LayerSpec:
    """Declarative description of one layer.

    Args:
        kind (LayerKind): Layer type.
        in_channels (int): Input channels, or input features for
            `FullyConnected`.
        filters (int): Output channels, or output units for `FullyConnected`.
        kernel (Tuple[int, int, int]): Kernel or window size.
        stride (Tuple[int, int, int]): Stride.
        padding (Tuple[int, int, int]): Zero padding.
        rate (float): Dropout rate.
        momentum (float): BatchNorm running-statistics momentum.
        eps (float): BatchNorm variance epsilon.
        output_size (int): Bins per axis of `AdaptiveAvgPool3D`.
        factor (float): Multiplier of `Scale`.
        body (Tuple[Any, ...]): LayerSpecs wrapped by `ResidualAdd`.
    """

    kind: LayerKind
    in_channels: int = 0
    filters: int = 0
    kernel: Tuple[int, int, int] = (3, 3, 3)
    stride: Tuple[int, int, int] = (1, 1, 1)
    padding: Tuple[int, int, int] = (0, 0, 0)
    rate: float = 0.0
    momentum: float = 0.9
    eps: float = 1e-5
    output_size: int = 1
    factor: float = 1.0
    body: Tuple[Any, ...] = ()

    def __post_init__(self) -> None:
        self._validate_sizes()
        self._validate_rate()
        self._validate_body()

    def _validate_sizes(self) -> None:
        if min(self.kernel) < 1 or min(self.stride) < 1 or min(self.padding) < 0:
            raise ValueError(
                f"{self.kind.value}: kernel {self.kernel} and stride {self.stride} "
                f"must be positive, padding {self.padding} non-negative."
            )
        needs_filters = {
            LayerKind.Conv3D,
            LayerKind.ConvTranspose3D,
            LayerKind.BatchNorm,
            LayerKind.FullyConnected,
            LayerKind.ResidualAdd,
        }
        if self.kind in needs_filters and self.filters < 1:
            raise ValueError(
                f"{self.kind.value} needs filters >= 1, got {self.filters}."
            )
        if self.kind in needs_filters - {LayerKind.BatchNorm} and self.in_channels < 1:
            raise ValueError(
                f"{self.kind.value} needs in_channels >= 1, got {self.in_channels}."
            )
        if self.kind == LayerKind.AdaptiveAvgPool3D and self.output_size < 1:
            raise ValueError(
                f"Adaptive pool size must be >= 1, got {self.output_size}."
            )

    def _validate_rate(self) -> None:
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"Dropout rate must be in [0, 1), got {self.rate}.")

    def _validate_body(self) -> None:
        if any(not isinstance(spec, LayerSpec) for spec in self.body):
            raise ValueError("ResidualAdd body must contain LayerSpecs only.")
        if self.body and self.kind != LayerKind.ResidualAdd:
            raise ValueError(f"{self.kind.value} cannot have a body.")


def build_layer(spec: LayerSpec, seed: Optional[int] = None) -> Module:
    """Instantiates the module a spec describes.

    Args:
        spec (LayerSpec): Layer description.
        seed (Optional[int]): Seed of dropout masks.

    Returns:
        Module: Layer with zeroed parameters; see `voxhand.nn.initialize`.
    """
    kind = spec.kind
    if kind == LayerKind.Conv3D:
        return Conv3d(
            spec.in_channels, spec.filters, spec.kernel, spec.stride, spec.padding
        )
    if kind == LayerKind.ConvTranspose3D:
        return ConvTranspose3d(spec.in_channels, spec.filters, spec.kernel, spec.stride)
    if kind == LayerKind.MaxPool3D:
        return MaxPool3d(spec.kernel, spec.stride)
    if kind == LayerKind.BatchNorm:
        return BatchNorm3d(spec.filters, spec.momentum, spec.eps)
    if kind == LayerKind.ReLU:
        return ReLU()
    if kind == LayerKind.Dropout:
        return Dropout(spec.rate, seed)
    if kind == LayerKind.FullyConnected:
        return Linear(spec.in_channels, spec.filters)
    if kind == LayerKind.AdaptiveAvgPool3D:
        return AdaptiveAvgPool3d(spec.output_size)
    if kind == LayerKind.Flatten:
        return Flatten()
    if kind == LayerKind.Scale:
        return Scale(spec.factor)
    body = Sequential(*(build_layer(s, seed) for s in spec.body))
    return ResidualBlock(body, spec.in_channels, spec.filters)


def build_sequential(specs: List[LayerSpec], seed: Optional[int] = None) -> Sequential:
    """Builds specs in order; dropout layers get distinct seeds derived from `seed`."""
    layers = []
    for index, spec in enumerate(specs):
        layer_seed = None if seed is None else seed * 1000 + index
        layers.append(build_layer(spec, layer_seed))
    return Sequential(*layers)
