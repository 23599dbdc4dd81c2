"""Bias-corrected Adam over named parameter groups"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional

import numpy as np

from ..lib.core.errors import DivergenceError


@dataclass
class AdamState:
    """Moments and step counter of one update group"""

    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    batch_index: int = 0,
) -> None:
    """
    Update ``params`` in place from ``grads``; only the named arrays move.

    Raises:
        DivergenceError: a gradient holds a non-finite value
    """
    for name in params:
        if not np.all(np.isfinite(grads[name])):
            raise DivergenceError(batch_index, f"non-finite gradient for '{name}'")

    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step

    for name, param in params.items():
        g = grads[name]
        if g.shape != param.shape:
            raise ValueError(f"gradient {g.shape} for parameter {param.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(param)
            state.v[name] = np.zeros_like(param)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        param -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)


def global_norm(grads: Iterable[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads))


def clip_by_global_norm(
    grads: Dict[str, np.ndarray], max_norm: Optional[float]
) -> float:
    """Rescale all gradients in place so their joint L2 norm is <= max_norm"""
    norm = global_norm(grads.values())
    if max_norm is not None and norm > max_norm:
        factor = max_norm / norm
        for g in grads.values():
            g *= factor
    return norm
