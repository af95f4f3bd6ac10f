"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from fedpose.nn.params import ParameterSet

FD_STEP = 1e-5


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def gradient_check(loss_fn, params: ParameterSet, tolerance: float) -> dict:
    """Central differences against the analytic gradient of loss_fn.

    loss_fn(params) must return (loss, GradientSet) deterministically.
    Returns {"max_error": float, "per_param": {name: max rel err},
    "failures": [names over tolerance]}; intended for parameter sets of
    at most a few thousand scalars.
    """
    _, analytic = loss_fn(params)
    per_param: dict[str, float] = {}
    for name, arr in params.items():
        flat = arr.reshape(-1)
        grad_flat = np.asarray(analytic[name]).reshape(-1)
        worst = 0.0
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + FD_STEP
            plus, _ = loss_fn(params)
            flat[idx] = orig - FD_STEP
            minus, _ = loss_fn(params)
            flat[idx] = orig
            numeric = (plus - minus) / (2.0 * FD_STEP)
            worst = max(worst, relative_error(grad_flat[idx], numeric))
        per_param[name] = worst
    failures = [n for n, e in per_param.items() if e > tolerance]
    return {
        "max_error": max(per_param.values()) if per_param else 0.0,
        "per_param": per_param,
        "failures": failures,
    }
