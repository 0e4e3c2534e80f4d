# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

from typing import Iterable, List, Optional, Union

import numpy as np

from voxhand.errors import MissingGradient
from voxhand.nn.layers import Module
from voxhand.nn.tensor import Parameter

DEFAULT_SIGMA = 0.005

Seed = Union[int, np.random.Generator, None]


def adam_step(
    params: Iterable[Parameter],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Applies one Adam update with bias correction to every parameter.

    Moments live on the parameters themselves (`adam_m`, `adam_v`,
    `step_count`), so parameters can be moved between optimizers.

    Args:
        params (Iterable[Parameter]): Parameters with populated gradients.
        lr (float): Learning rate.
        beta1 (float): Decay of the first moment.
        beta2 (float): Decay of the second moment.
        eps (float): Denominator offset.

    Raises:
        MissingGradient: If any parameter has no gradient; nothing is updated.
    """
    params = list(params)
    for index, p in enumerate(params):
        if p.grad is None:
            raise MissingGradient(
                f"Parameter {index} ({p.role}, shape {p.shape}) has no gradient; "
                f"run backward() before adam_step()."
            )

    for p in params:
        g = p.grad
        p.step_count += 1
        p.adam_m *= beta1
        p.adam_m += (1.0 - beta1) * g
        p.adam_v *= beta2
        p.adam_v += (1.0 - beta2) * (g * g)
        m_hat = p.adam_m / (1.0 - beta1**p.step_count)
        v_hat = p.adam_v / (1.0 - beta2**p.step_count)
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype)


class Adam:
    """Adam over a fixed list of parameters.

    Args:
        params (Iterable[Parameter]): Parameters to optimize.
        lr (float): Learning rate. (default: `3e-4`)
        beta1 (float): First moment decay.
        beta2 (float): Second moment decay.
        eps (float): Denominator offset.
    """

    def __init__(
        self,
        params: Iterable[Parameter],
        lr: float = 3e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if lr <= 0:
            raise ValueError(f"Learning rate must be positive, got {lr}.")
        self.params: List[Parameter] = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self) -> None:
        adam_step(self.params, self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def init_weights(
    param: Parameter, sigma: float = DEFAULT_SIGMA, rng_seed: Seed = None
) -> None:
    """Initializes one parameter in place according to its role.

    Weights are drawn from N(0, sigma^2), biases and BatchNorm shifts are zero,
    BatchNorm scales are one. Adam state is reset.

    Args:
        param (Parameter): Parameter to fill.
        sigma (float): Standard deviation of weights.
        rng_seed (Seed): Seed or generator of the weight draw.
    """
    if isinstance(rng_seed, np.random.Generator):
        rng = rng_seed
    else:
        rng = np.random.default_rng(rng_seed)
    if param.role == "weight":
        param.data[...] = rng.normal(0.0, sigma, size=param.shape)
    elif param.role == "gamma":
        param.data[...] = 1.0
    else:
        param.data[...] = 0.0
    param.adam_m[...] = 0.0
    param.adam_v[...] = 0.0
    param.step_count = 0
    param.grad = None


def initialize(
    model: Module, sigma: float = DEFAULT_SIGMA, seed: Optional[int] = 0
) -> Module:
    """Initializes all parameters of `model` from one seeded generator.

    Parameters are visited in `named_parameters()` order, so equal seeds give
    equal models.

    Args:
        model (Module): Model to initialize.
        sigma (float): Weight standard deviation.
        seed (Optional[int]): Generator seed.

    Returns:
        Module: `model`, for chaining.
    """
    rng = np.random.default_rng(seed)
    for _, param in model.named_parameters():
        init_weights(param, sigma, rng)
    return model
