"""Named, ordered parameter arrays and their portable serialization."""

from __future__ import annotations

import json

import numpy as np

from fedpose.errors import DimensionError, NumericalHealthError


class ParameterSet:
    """Ordered map name -> float64 ndarray.

    Iteration order is insertion order and is part of the contract: it
    fixes the floating-point summation order during aggregation.
    """

    def __init__(self, items=None):
        self._arrays: dict[str, np.ndarray] = {}
        if items is not None:
            pairs = items.items() if isinstance(items, (dict, ParameterSet)) else items
            for name, arr in pairs:
                self[name] = arr

    def __setitem__(self, name: str, arr) -> None:
        # contiguity matters: optimizer kernels update flat views in place
        a = np.ascontiguousarray(arr, dtype=np.float64)
        if name in self._arrays and self._arrays[name].shape != a.shape:
            raise DimensionError(
                f"parameter {name!r} changed shape "
                f"{self._arrays[name].shape} -> {a.shape}"
            )
        self._arrays[name] = a

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __iter__(self):
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def keys(self):
        return self._arrays.keys()

    def items(self):
        return self._arrays.items()

    def copy(self) -> "ParameterSet":
        return ParameterSet((name, arr.copy()) for name, arr in self.items())

    def zeros_like(self) -> "ParameterSet":
        return ParameterSet((name, np.zeros_like(arr)) for name, arr in self.items())

    def num_scalars(self) -> int:
        return sum(arr.size for arr in self._arrays.values())

    def assert_finite(self, context: str = "") -> None:
        for name, arr in self.items():
            if not np.all(np.isfinite(arr)):
                where = f" in {context}" if context else ""
                raise NumericalHealthError(f"non-finite values in {name!r}{where}")

    def congruent_with(self, other: "ParameterSet") -> bool:
        if list(self.keys()) != list(other.keys()):
            return False
        return all(self[k].shape == other[k].shape for k in self.keys())

    def require_congruent(self, other: "ParameterSet", context: str) -> None:
        if list(self.keys()) != list(other.keys()):
            mine, theirs = set(self.keys()), set(other.keys())
            diff = mine.symmetric_difference(theirs) or {"<ordering>"}
            raise DimensionError(f"{context}: key mismatch on {sorted(diff)}")
        for k in self.keys():
            if self[k].shape != other[k].shape:
                raise DimensionError(
                    f"{context}: parameter {k!r} has shape {self[k].shape} "
                    f"vs {other[k].shape}"
                )


# Gradients share the container; congruence with the owning ParameterSet
# is enforced at the points of use (optimizer, aggregation).
GradientSet = ParameterSet


def to_portable(params: ParameterSet) -> list:
    """Flat JSON-ready form: [name, shape, values as %.17e strings].

    17 significant digits round-trip every binary64 exactly.
    """
    return [
        [name, list(arr.shape), [f"{v:.17e}" for v in arr.reshape(-1)]]
        for name, arr in params.items()
    ]


def from_portable(entries) -> ParameterSet:
    params = ParameterSet()
    for name, shape, values in entries:
        arr = np.array([float(v) for v in values], dtype=np.float64)
        params[name] = arr.reshape([int(s) for s in shape])
    return params


def dump_params(params: ParameterSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_portable(params), fh)


def load_params(path) -> ParameterSet:
    with open(path, "r", encoding="utf-8") as fh:
        return from_portable(json.load(fh))
