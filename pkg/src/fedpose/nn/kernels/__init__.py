"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy reference
is the fallback. FEDPOSE_KERNELS=python|native forces a backend (forcing
`native` raises if the extension is missing, so CI can assert the build
actually happened).
"""

from __future__ import annotations

import os

from fedpose.errors import ConfigError

_requested = os.environ.get("FEDPOSE_KERNELS", "auto").strip().lower()

if _requested in ("auto", "", "native", "compiled"):
    try:
        from fedpose.nn.kernels import _native as _impl
    except ImportError:
        if _requested in ("native", "compiled"):
            raise ConfigError(
                "FEDPOSE_KERNELS=native requested but the compiled extension "
                "is not importable; reinstall with a C compiler available"
            ) from None
        from fedpose.nn.kernels import reference as _impl
elif _requested in ("python", "reference"):
    from fedpose.nn.kernels import reference as _impl
else:
    raise ConfigError(
        f"unknown FEDPOSE_KERNELS value {_requested!r}; use 'native' or 'python'"
    )

BACKEND = _impl.BACKEND_NAME

lstm_pointwise_forward = _impl.lstm_pointwise_forward
lstm_pointwise_backward = _impl.lstm_pointwise_backward
adam_update = _impl.adam_update
softmax_xent_forward = _impl.softmax_xent_forward

__all__ = [
    "BACKEND",
    "adam_update",
    "lstm_pointwise_backward",
    "lstm_pointwise_forward",
    "softmax_xent_forward",
]
