"""Adam with bias correction, operating in place on parameter tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingFault
from .tensor import Tensor


@dataclass
class AdamState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0


def adam_init(params: list[Tensor]) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p.data) for p in params],
        v=[np.zeros_like(p.data) for p in params],
        t=0,
    )


def adam_step(
    params: list[Tensor],
    grads: list["Tensor | None"],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update; a missing gradient (None) counts as zero.

    Raises :class:`TrainingFault` on any non-finite gradient entry.
    """
    if len(params) != len(grads):
        raise ValueError("params/grads length mismatch")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        gd = np.zeros_like(p.data) if g is None else g.data
        if gd.shape != p.data.shape:
            raise ValueError(f"gradient shape {gd.shape} != param shape {p.data.shape}")
        if not np.all(np.isfinite(gd)):
            raise TrainingFault(f"non-finite gradient for parameter {i}")
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * gd
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * gd * gd
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.data[...] = p.data - (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.data.dtype)
