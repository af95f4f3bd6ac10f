"""Minimal differentiable numerical core (float64 throughout)."""

from fedpose.nn.gradcheck import gradient_check, relative_error
from fedpose.nn.optim import AdamState, adam_step
from fedpose.nn.params import (
    GradientSet,
    ParameterSet,
    dump_params,
    from_portable,
    load_params,
    to_portable,
)

__all__ = [
    "AdamState",
    "GradientSet",
    "ParameterSet",
    "adam_step",
    "dump_params",
    "from_portable",
    "gradient_check",
    "load_params",
    "relative_error",
    "to_portable",
]
