"""Deterministic federated-learning simulator for pose-based gesture recognition.

Pipeline: raw 17-keypoint frames -> 13-joint pose windows -> per-subject
clients -> {centralized | local | fedavg | fedensemble} training of an
LSTM or a Transformer encoder -> machine-readable reports.
"""

__version__ = "0.1.0"

from fedpose.errors import FedposeError

__all__ = ["FedposeError", "__version__"]
