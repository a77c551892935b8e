"""Adam with bias correction over a ParameterSet."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParameterSet


class MissingGradientError(RuntimeError):
    """A parameter arrived at the optimizer without a gradient (broken graph)."""


@dataclass
class AdamState:
    learning_rate: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def init_adam(params: ParameterSet, learning_rate: float = 5e-5, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    state = AdamState(learning_rate=learning_rate, beta1=beta1, beta2=beta2, epsilon=epsilon)
    for name, tensor in params.items():
        state.m[name] = np.zeros_like(tensor.data)
        state.v[name] = np.zeros_like(tensor.data)
    return state


def adam_step(params: ParameterSet, state: AdamState) -> None:
    """One bias-corrected Adam update; zeroes grads afterward."""
    for name, tensor in params.items():
        if tensor.grad is None:
            raise MissingGradientError(f"parameter {name} has no gradient")
        if tensor.grad.shape != tensor.data.shape:
            raise MissingGradientError(
                f"parameter {name}: gradient shape {tensor.grad.shape} != {tensor.data.shape}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for name, tensor in params.items():
        g = tensor.grad
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        tensor.data -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        tensor.grad = None
