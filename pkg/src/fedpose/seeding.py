"""Deterministic RNG derivation.

All randomness in the package flows through numpy Generators seeded via
SeedSequence keyed on (base_seed, *context), so every run is a pure
function of its config. String context parts are folded in via crc32 to
stay hash-randomization-free.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_int(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def derive_rng(base_seed: int, *context) -> np.random.Generator:
    """Generator keyed on the base seed plus any mix of int/str context."""
    entropy = [_as_int(base_seed)] + [_as_int(p) for p in context]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(base_seed: int, *context) -> int:
    """Integer sub-seed keyed the same way (for nested seeding schemes).

    The federated per-round scheme is derive_seed(base, client_index,
    round_index): documented here because the K=1 degeneration guarantee
    depends on reproducing it externally.
    """
    entropy = [_as_int(base_seed)] + [_as_int(p) for p in context]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
