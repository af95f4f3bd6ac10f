"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fedpose.nn import kernels
from fedpose.nn.params import ParameterSet

DEFAULT_LR = 2e-4
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    lr: float = DEFAULT_LR
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    eps: float = DEFAULT_EPS
    t: int = 0
    m: ParameterSet = field(default_factory=ParameterSet)
    v: ParameterSet = field(default_factory=ParameterSet)

    @classmethod
    def for_params(
        cls,
        params: ParameterSet,
        lr: float = DEFAULT_LR,
        beta1: float = DEFAULT_BETA1,
        beta2: float = DEFAULT_BETA2,
        eps: float = DEFAULT_EPS,
    ) -> "AdamState":
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        state.m = params.zeros_like()
        state.v = params.zeros_like()
        return state


def adam_step(params: ParameterSet, grads: ParameterSet, state: AdamState) -> None:
    """One bias-corrected update, in place on params and state."""
    params.require_congruent(grads, "adam_step(params vs grads)")
    if state.t == 0 and len(state.m) == 0:
        state.m = params.zeros_like()
        state.v = params.zeros_like()
    params.require_congruent(state.m, "adam_step(params vs moments)")
    state.t += 1
    for name, p in params.items():
        g = np.ascontiguousarray(grads[name], dtype=np.float64).reshape(-1)
        kernels.adam_update(
            p.reshape(-1), g, state.m[name].reshape(-1), state.v[name].reshape(-1),
            state.lr, state.beta1, state.beta2, state.eps, state.t,
        )
