"""Federated orchestration: FedAvg rounds and the four training paradigms.

The server half of the protocol never touches client windows. Clients are
driven through ``local_update`` and hand back weights plus scalar summaries
only, so the data boundary is enforced by the object graph rather than by
convention.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from fedpose.errors import AggregationError, ConfigError, NumericalHealthError
from fedpose.models import build_model, default_config
from fedpose.nn.params import ParameterSet
from fedpose.pose.splits import build_fedensemble_partition, partition_windows, stratified_split
from fedpose.pose.types import ClientDataset, WindowSample
from fedpose.seeding import derive_seed
from fedpose.training import TrainConfig, TrainResult, evaluate, train_local

CENTRAL_EPOCH_BUDGET = 500

# val share of each re-partition mirrors the 6% subject-level validation cut;
# re-partitions carry no test split because evaluation stays on subject tests
FEDENSEMBLE_FRACTIONS = (0.94, 0.06, 0.0)


@dataclass(frozen=True)
class FederationConfig:
    """Knobs for one federated run (both FedAvg and FedEnsemble)."""

    model_kind: str = "lstm"
    rounds: int = 20
    local_epochs: int = 25
    batch_size: int = 64
    lr: float = 2e-4
    seed: int = 0
    expected_clients: int | None = None
    parallel_clients: int = 1

    def __post_init__(self):
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if self.local_epochs < 1:
            raise ConfigError(f"local_epochs must be >= 1, got {self.local_epochs}")
        if self.parallel_clients < 1:
            raise ConfigError(
                f"parallel_clients must be >= 1, got {self.parallel_clients}"
            )

    @property
    def total_epoch_budget(self) -> int:
        return self.rounds * self.local_epochs


@dataclass(frozen=True)
class ClientUpdate:
    """What a client is allowed to reveal after one local phase."""

    client_index: int
    client_id: str
    weights: ParameterSet
    sample_count: int
    train_loss: float
    epochs_run: int


@dataclass
class AggregationInput:
    """Ordered (client_index, weights, sample_count) triples for one round.

    Entries are sorted by client index on construction so the weighted
    summation order is a function of the cohort, not of arrival order.
    """

    entries: list[tuple[int, ParameterSet, int]]

    def __post_init__(self):
        if not self.entries:
            raise AggregationError("aggregation needs at least one client update")
        self.entries = sorted(self.entries, key=lambda e: e[0])
        seen = set()
        for idx, weights, count in self.entries:
            if idx in seen:
                raise AggregationError(f"duplicate client index {idx} in aggregation")
            seen.add(idx)
            if count < 1:
                raise AggregationError(
                    f"client {idx} reported sample_count {count}; need >= 1"
                )
            weights.assert_finite(f"client {idx} update")

    @property
    def total_samples(self) -> int:
        return sum(count for _, _, count in self.entries)


def fedavg_aggregate(agg: AggregationInput) -> ParameterSet:
    """Sample-weighted average of client weights, summed in index order.

    A single entry comes back as an exact copy: 1.0 * x is bit-identical
    to x for finite doubles.
    """
    total = agg.total_samples
    first_idx, first_weights, _ = agg.entries[0]
    out: ParameterSet | None = None
    for idx, weights, count in agg.entries:
        try:
            first_weights.require_congruent(weights, "fedavg_aggregate")
        except Exception as exc:
            raise AggregationError(
                f"client {idx} weights do not match client {first_idx}: {exc}"
            ) from None
        coeff = count / total
        if out is None:
            out = ParameterSet((name, coeff * weights[name]) for name in weights)
        else:
            for name in weights:
                out[name] = out[name] + coeff * weights[name]
    assert out is not None
    return out


@dataclass(frozen=True)
class GlobalModelState:
    """Server-side model after ``round_index`` aggregations (0 = initial)."""

    round_index: int
    weights: ParameterSet


@dataclass(frozen=True)
class ClientRoundStat:
    client_index: int
    client_id: str
    train_loss: float
    sample_count: int
    epochs_run: int


@dataclass
class RoundRecord:
    """One aggregation round: per-client stats plus post-round global metrics."""

    round_index: int
    clients: list[ClientRoundStat]
    metrics: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "round": self.round_index,
            "clients": [
                {
                    "index": c.client_index,
                    "id": c.client_id,
                    "train_loss": c.train_loss,
                    "samples": c.sample_count,
                    "epochs": c.epochs_run,
                }
                for c in self.clients
            ],
            "metrics": dict(sorted(self.metrics.items())),
        }


class SupportsLocalUpdate(Protocol):
    client_index: int

    def local_update(self, weights: ParameterSet, round_index: int) -> ClientUpdate: ...


class LocalClient:
    """A participant that keeps its windows private.

    The only outward face is ``local_update``: weights in, ``ClientUpdate``
    out. Dataset attributes are name-mangled to make accidental server-side
    reads loud in review and in tracebacks.
    """

    def __init__(
        self,
        client_index: int,
        dataset: ClientDataset,
        model_kind: str,
        model_config,
        *,
        local_epochs: int,
        batch_size: int,
        lr: float,
        base_seed: int,
    ):
        if not dataset.train:
            raise ConfigError(f"client {dataset.client_id} has no training windows")
        self.client_index = client_index
        self.client_id = dataset.client_id
        self.sample_count = len(dataset.train)
        self.__train = list(dataset.train)
        self.__kind = model_kind
        self.__config = model_config
        self.__local_epochs = local_epochs
        self.__batch_size = batch_size
        self.__lr = lr
        self.__base_seed = base_seed

    def local_update(self, weights: ParameterSet, round_index: int) -> ClientUpdate:
        tc = TrainConfig(
            batch_size=self.__batch_size,
            lr=self.__lr,
            max_epochs=self.__local_epochs,
            patience=None,
            seed=derive_seed(self.__base_seed, self.client_index, round_index),
        )
        try:
            result = train_local(weights, self.__kind, self.__config, self.__train, [], tc)
        except NumericalHealthError as exc:
            raise NumericalHealthError(
                f"client {self.client_id} failed in round {round_index}: {exc}"
            ) from None
        return ClientUpdate(
            client_index=self.client_index,
            client_id=self.client_id,
            weights=result.final_params,
            sample_count=self.sample_count,
            train_loss=result.trace.epochs[-1].train_loss,
            epochs_run=len(result.trace.epochs),
        )


RoundMonitor = Callable[[int, ParameterSet], dict[str, float]]


def federated_rounds(
    initial: ParameterSet,
    clients: Sequence[SupportsLocalUpdate],
    cfg: FederationConfig,
    monitor: RoundMonitor | None = None,
) -> tuple[GlobalModelState, list[RoundRecord]]:
    """Run ``cfg.rounds`` FedAvg rounds from ``initial``.

    Every client trains every round (full participation); optimizer state
    never leaves a round because clients receive weights only. Aborts on the
    first client failure rather than aggregating a partial cohort.
    """
    if not clients:
        raise ConfigError("federated_rounds: no clients")
    if cfg.expected_clients is not None and len(clients) != cfg.expected_clients:
        raise ConfigError(
            f"expected {cfg.expected_clients} clients, got {len(clients)}"
        )

    state = GlobalModelState(round_index=0, weights=initial.copy())
    records: list[RoundRecord] = []
    for round_index in range(1, cfg.rounds + 1):
        weights, rnd = state.weights, round_index
        if cfg.parallel_clients > 1:
            with ThreadPoolExecutor(max_workers=cfg.parallel_clients) as pool:
                updates = list(pool.map(lambda c: c.local_update(weights, rnd), clients))
        else:
            updates = [c.local_update(weights, rnd) for c in clients]

        agg = AggregationInput([(u.client_index, u.weights, u.sample_count) for u in updates])
        new_weights = fedavg_aggregate(agg)
        state = GlobalModelState(round_index=round_index, weights=new_weights)

        by_index = sorted(updates, key=lambda u: u.client_index)
        record = RoundRecord(
            round_index=round_index,
            clients=[
                ClientRoundStat(
                    client_index=u.client_index,
                    client_id=u.client_id,
                    train_loss=u.train_loss,
                    sample_count=u.sample_count,
                    epochs_run=u.epochs_run,
                )
                for u in by_index
            ],
        )
        if monitor is not None:
            record.metrics = monitor(round_index, new_weights)
        records.append(record)
    return state, records


def _eval_monitor(
    model_kind: str, model_config, val: list[WindowSample], test: list[WindowSample]
) -> RoundMonitor | None:
    from fedpose.pose.types import stack_windows

    sets = []
    if val:
        sets.append(("val", stack_windows(val)))
    if test:
        sets.append(("test", stack_windows(test)))
    if not sets:
        return None

    def monitor(round_index: int, weights: ParameterSet) -> dict[str, float]:
        out: dict[str, float] = {}
        for tag, xy in sets:
            ev = evaluate(weights, model_kind, model_config, xy)
            out[f"{tag}_loss"] = ev.loss
            out[f"{tag}_accuracy"] = ev.accuracy
        return out

    return monitor


def run_federated(
    clients_data: Sequence[ClientDataset],
    cfg: FederationConfig,
    model_config=None,
    *,
    initial: ParameterSet | None = None,
    monitor_val: list[WindowSample] | None = None,
    monitor_test: list[WindowSample] | None = None,
) -> tuple[GlobalModelState, list[RoundRecord]]:
    """FedAvg over the given client datasets; returns the last-round model.

    No validation-based selection happens across rounds: the paradigm has no
    trusted central holdout during training, so the budget decides.
    """
    if model_config is None:
        model_config = default_config(cfg.model_kind)
    if initial is None:
        initial = build_model(
            cfg.model_kind, model_config, derive_seed(cfg.seed, "global-init")
        )
    clients = [
        LocalClient(
            index,
            ds,
            cfg.model_kind,
            model_config,
            local_epochs=cfg.local_epochs,
            batch_size=cfg.batch_size,
            lr=cfg.lr,
            base_seed=cfg.seed,
        )
        for index, ds in enumerate(clients_data)
    ]
    monitor = _eval_monitor(
        cfg.model_kind, model_config, monitor_val or [], monitor_test or []
    )
    return federated_rounds(initial, clients, cfg, monitor)


@dataclass
class BaselineResult:
    """One early-stopped training run (centralized, or one local client)."""

    client_id: str
    params: ParameterSet
    result: TrainResult


def run_centralized(
    train: list[WindowSample],
    val: list[WindowSample],
    model_kind: str,
    model_config=None,
    *,
    seed: int = 0,
    max_epochs: int = CENTRAL_EPOCH_BUDGET,
    patience: int | None = 15,
    batch_size: int = 64,
    lr: float = 2e-4,
) -> BaselineResult:
    """Pooled-data upper bound; returns the best-validation checkpoint."""
    if model_config is None:
        model_config = default_config(model_kind)
    initial = build_model(model_kind, model_config, derive_seed(seed, "global-init"))
    tc = TrainConfig(
        batch_size=batch_size,
        lr=lr,
        max_epochs=max_epochs,
        patience=patience,
        seed=derive_seed(seed, "centralized"),
    )
    result = train_local(initial, model_kind, model_config, train, val, tc)
    return BaselineResult(client_id="pooled", params=result.best_params, result=result)


def run_local_baseline(
    clients_data: Sequence[ClientDataset],
    model_kind: str,
    model_config=None,
    *,
    seed: int = 0,
    max_epochs: int = CENTRAL_EPOCH_BUDGET,
    patience: int | None = 15,
    batch_size: int = 64,
    lr: float = 2e-4,
) -> list[BaselineResult]:
    """One isolated model per client, trained only on that client's data.

    All clients start from the same initialization so the paradigm, not the
    draw, is the variable.
    """
    if not clients_data:
        raise ConfigError("run_local_baseline: no clients")
    if model_config is None:
        model_config = default_config(model_kind)
    initial = build_model(model_kind, model_config, derive_seed(seed, "global-init"))
    out = []
    for index, ds in enumerate(clients_data):
        tc = TrainConfig(
            batch_size=batch_size,
            lr=lr,
            max_epochs=max_epochs,
            patience=patience if ds.val else None,
            seed=derive_seed(seed, "local", index),
        )
        result = train_local(initial, model_kind, model_config, ds.train, ds.val, tc)
        out.append(
            BaselineResult(client_id=ds.client_id, params=result.best_params, result=result)
        )
    return out


def build_fedensemble_clients(
    pooled: list[WindowSample], num_partitions: int, seed: int
) -> list[ClientDataset]:
    """Re-partition pooled windows into IID pseudo-clients with a small val cut.

    K=1 skips the partitioner (whose subject-mixing guarantee needs K >= 2)
    and degenerates to a single pseudo-client over the full pool.
    """
    if num_partitions < 1:
        raise ConfigError(f"num_partitions must be >= 1, got {num_partitions}")
    if num_partitions == 1:
        groups = [list(pooled)]
    else:
        plan = build_fedensemble_partition(pooled, num_partitions, seed)
        groups = partition_windows(pooled, plan)
    clients = []
    for index, windows in enumerate(groups):
        ds = stratified_split(
            windows,
            f"part{index}",
            derive_seed(seed, "fedensemble-split", index),
            fractions=FEDENSEMBLE_FRACTIONS,
        )
        if ds.test:
            raise ConfigError("fedensemble partitions must not hold test windows")
        clients.append(ds)
    return clients


def run_fedensemble(
    pooled_train: list[WindowSample],
    cfg: FederationConfig,
    model_config=None,
    *,
    num_partitions: int | None = None,
    monitor_val: list[WindowSample] | None = None,
    monitor_test: list[WindowSample] | None = None,
) -> tuple[GlobalModelState, list[RoundRecord], list[ClientDataset]]:
    """FedAvg over IID re-partitions of the pooled training windows."""
    if num_partitions is None:
        num_partitions = cfg.expected_clients or 5
    if cfg.expected_clients is not None and cfg.expected_clients != num_partitions:
        raise ConfigError(
            f"expected_clients={cfg.expected_clients} but num_partitions={num_partitions}"
        )
    clients = build_fedensemble_clients(pooled_train, num_partitions, cfg.seed)
    state, records = run_federated(
        clients,
        cfg,
        model_config,
        monitor_val=monitor_val,
        monitor_test=monitor_test,
    )
    return state, records, clients
