"""Stratified train/val/test splits and FedEnsemble IID re-partitioning."""

from __future__ import annotations

import logging

from fedpose.errors import ConfigError, PartitionError
from fedpose.pose.types import ClientDataset, PartitionPlan, WindowSample
from fedpose.seeding import derive_rng

log = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.88, 0.06, 0.06)

# FedEnsemble partitions must mix subjects: each partition needs samples
# from at least this many distinct original clients.
MIN_SOURCE_SUBJECTS = 3
_MAX_PARTITION_ATTEMPTS = 100


def _split_counts(n: int, fractions) -> tuple[int, int, int]:
    """Per-class counts for one class of size n.

    Floor each fraction, then top val and test up to one sample each if
    they floored to zero (so early stopping and testing stay usable on
    small classes); leftovers go to the parts with the largest fractional
    remainders. Every part lands within one sample of its exact share,
    except that the top-up rule deliberately overrides proportionality
    for classes of one or two windows.
    """
    counts = [int(f * n) for f in fractions]
    r = n - sum(counts)
    for part in (1, 2):
        if r > 0 and counts[part] == 0 and fractions[part] > 0:
            counts[part] += 1
            r -= 1
    by_remainder = sorted(range(3), key=lambda i: fractions[i] * n - int(fractions[i] * n), reverse=True)
    for i in range(r):
        counts[by_remainder[i]] += 1
    return counts[0], counts[1], counts[2]


def stratified_split(
    windows: list[WindowSample],
    client_id: str,
    seed: int,
    fractions=DEFAULT_FRACTIONS,
) -> ClientDataset:
    """Per-class seeded shuffle, then proportional assignment.

    Deterministic for a fixed seed. Classes with no windows are skipped
    with a warning.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {fractions}")
    if not windows:
        raise ConfigError(f"client {client_id!r} has no windows to split")

    by_class: dict[int, list[WindowSample]] = {}
    for w in windows:
        by_class.setdefault(int(w.label), []).append(w)

    ds = ClientDataset(client_id=client_id)
    for cls in sorted(by_class):
        group = by_class[cls]
        rng = derive_rng(seed, client_id, "split", cls)
        order = rng.permutation(len(group))
        shuffled = [group[i] for i in order]
        t, v, s = _split_counts(len(group), fractions)
        ds.train.extend(shuffled[:t])
        ds.val.extend(shuffled[t : t + v])
        ds.test.extend(shuffled[t + v : t + v + s])
    missing = 8 - len(by_class)
    if missing:
        log.warning("client %s: %d gesture classes have no windows", client_id, missing)
    return ds


def build_fedensemble_partition(
    windows: list[WindowSample], num_partitions: int, seed: int
) -> PartitionPlan:
    """Seeded shuffle + round-robin into K partitions of near-equal size.

    Retries with seed+1, seed+2, ... until every partition draws on at
    least MIN_SOURCE_SUBJECTS distinct source clients; gives up after
    100 attempts.
    """
    if num_partitions < 2:
        raise ConfigError(f"need at least 2 partitions, got {num_partitions}")
    if len(windows) < num_partitions:
        raise ConfigError(
            f"cannot split {len(windows)} windows into {num_partitions} partitions"
        )

    for attempt in range(_MAX_PARTITION_ATTEMPTS):
        rng = derive_rng(seed + attempt, "fedensemble")
        order = rng.permutation(len(windows))
        assignments = {windows[idx].uid: i % num_partitions for i, idx in enumerate(order)}
        subjects: list[set[str]] = [set() for _ in range(num_partitions)]
        for w in windows:
            subjects[assignments[w.uid]].add(w.client_id)
        if all(len(s) >= MIN_SOURCE_SUBJECTS for s in subjects):
            return PartitionPlan(
                mode="fedensemble_iid",
                assignments=assignments,
                num_partitions=num_partitions,
            )
    raise PartitionError(
        f"could not build {num_partitions} partitions each mixing >= "
        f"{MIN_SOURCE_SUBJECTS} source subjects after "
        f"{_MAX_PARTITION_ATTEMPTS} shuffles"
    )


def partition_windows(
    windows: list[WindowSample], plan: PartitionPlan
) -> list[list[WindowSample]]:
    """Materialize the plan, preserving input order within each partition."""
    parts: list[list[WindowSample]] = [[] for _ in range(plan.num_partitions)]
    for w in windows:
        parts[plan.assignments[w.uid]].append(w)
    return parts
