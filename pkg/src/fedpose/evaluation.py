"""Reporting: global/per-class metrics, cross-client matrices, JSON/CSV export.

Reports are plain dicts with a schema tag so downstream tooling can detect
format drift. Export is deterministic: sorted keys, shortest round-trip
float text, and NaN rewritten to null before serialization. The only field
expected to differ between identical runs is ``wall_clock_seconds``.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from fedpose.errors import ContaminationError, EvaluationError
from fedpose.models import predict_batch
from fedpose.pose.types import GESTURE_NAMES, ClientDataset, WindowSample, stack_windows
from fedpose.training import EvalResult, evaluate

log = logging.getLogger(__name__)

REPORT_SCHEMA = "fedpose-report/1"

PARADIGMS = ("centralized", "local", "fedavg", "fedensemble")


def per_class_accuracy(confusion: np.ndarray) -> list[float | None]:
    """Diagonal over row sums; classes with no test samples come back None."""
    conf = np.asarray(confusion)
    out: list[float | None] = []
    for i, row in enumerate(conf):
        support = int(row.sum())
        out.append(None if support == 0 else float(row[i]) / support)
    return out


def eval_summary(params, kind, config, windows) -> dict:
    """One evaluation as a JSON-ready dict (loss, accuracy, per-class, confusion)."""
    ev: EvalResult = evaluate(params, kind, config, windows)
    confusion = ev.confusion
    return {
        "loss": ev.loss,
        "accuracy": ev.accuracy,
        "sample_count": int(confusion.sum()),
        "per_class_accuracy": per_class_accuracy(confusion),
        "support": [int(s) for s in confusion.sum(axis=1)],
        "confusion": [[int(v) for v in row] for row in confusion],
    }


def compile_global_test(clients: Sequence[ClientDataset]) -> list[WindowSample]:
    """Concatenated client test windows, in client order.

    Clients with empty test splits are skipped with a warning instead of
    failing the whole evaluation.
    """
    pooled: list[WindowSample] = []
    for ds in clients:
        if not ds.test:
            log.warning("client %s has an empty test split; skipping", ds.client_id)
            continue
        pooled.extend(ds.test)
    if not pooled:
        raise EvaluationError("no client contributed any test windows")
    return pooled


def cross_client_matrix(
    models: Sequence[tuple[str, object]],
    clients: Sequence[ClientDataset],
    kind: str,
    config,
) -> dict:
    """Accuracy of every local model on every client's test set.

    Rows are models (by owning client), columns are the K client test sets
    plus a final pooled-global column. Empty test sets yield null cells.
    """
    global_test = compile_global_test(clients)
    col_ids = [ds.client_id for ds in clients] + ["global"]
    col_sets = [ds.test for ds in clients] + [global_test]
    stacked = [stack_windows(ws) if ws else None for ws in col_sets]

    matrix: list[list[float | None]] = []
    for _, params in models:
        row: list[float | None] = []
        for xy in stacked:
            if xy is None:
                row.append(None)
            else:
                row.append(evaluate(params, kind, config, xy).accuracy)
        matrix.append(row)
    return {
        "row_ids": [mid for mid, _ in models],
        "col_ids": col_ids,
        "accuracy": matrix,
    }


def external_client_eval(
    params,
    kind,
    config,
    external: ClientDataset,
    training_client_ids: Sequence[str],
) -> dict:
    """Zero-shot evaluation on a held-out subject the run never trained on.

    Refuses to run if the external subject's id appears among the training
    clients (that would silently turn a generalization probe into a resub
    test). Every window the subject has is evaluated, not just a test split,
    and each prediction is kept with its confidence.
    """
    train_ids = set(training_client_ids)
    if external.client_id in train_ids:
        raise ContaminationError(
            f"external client {external.client_id!r} is also a training client"
        )
    windows = external.all_windows()
    if not windows:
        raise EvaluationError(f"external client {external.client_id!r} has no windows")
    for w in windows:
        if w.client_id in train_ids:
            raise ContaminationError(
                f"external window {w.uid!r} belongs to training client {w.client_id!r}"
            )

    x, y = stack_windows(windows)
    pred, conf = predict_batch(params, kind, config, x)
    confusion = np.zeros((len(GESTURE_NAMES), len(GESTURE_NAMES)), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    predictions = [
        {
            "uid": w.uid,
            "true": GESTURE_NAMES[int(t)],
            "predicted": GESTURE_NAMES[int(p)],
            "confidence": float(c),
        }
        for w, t, p, c in zip(windows, y, pred, conf)
    ]
    return {
        "client_id": external.client_id,
        "sample_count": len(windows),
        "accuracy": float(np.trace(confusion)) / len(windows),
        "per_class_accuracy": per_class_accuracy(confusion),
        "support": [int(s) for s in confusion.sum(axis=1)],
        "confusion": [[int(v) for v in row] for row in confusion],
        "predictions": predictions,
    }


def make_report(
    paradigm: str,
    model_kind: str,
    seed: int,
    config_echo: dict,
    global_eval: dict,
    *,
    per_client: list[dict] | None = None,
    cross_client: dict | None = None,
    external: dict | None = None,
    rounds: list[dict] | None = None,
    wall_clock_seconds: float = 0.0,
) -> dict:
    if paradigm not in PARADIGMS:
        raise EvaluationError(f"unknown paradigm {paradigm!r}; expected {PARADIGMS}")
    return {
        "schema": REPORT_SCHEMA,
        "paradigm": paradigm,
        "model_kind": model_kind,
        "seed": seed,
        "config": config_echo,
        "global_eval": global_eval,
        "per_client": per_client or [],
        "cross_client": cross_client,
        "external": external,
        "rounds": rounds or [],
        "wall_clock_seconds": wall_clock_seconds,
    }


def _sanitize(obj):
    """NaN/inf to None, numpy scalars to Python, recursively."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    return obj


def export_report(report: dict, path) -> None:
    """Write the report as stable JSON (sorted keys, newline-terminated)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_sanitize(report), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    if report.get("schema") != REPORT_SCHEMA:
        raise EvaluationError(
            f"unsupported report schema {report.get('schema')!r} in {path}"
        )
    return report


def confusion_to_csv(confusion, path) -> None:
    """8x8 counts with gesture names on both axes (rows true, cols predicted)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\predicted", *GESTURE_NAMES])
        for name, row in zip(GESTURE_NAMES, confusion):
            writer.writerow([name, *[int(v) for v in row]])


def cross_client_to_csv(cross: dict, path) -> None:
    """Cross-client accuracy grid; empty cells for missing test sets."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model\\eval", *cross["col_ids"]])
        for rid, row in zip(cross["row_ids"], cross["accuracy"]):
            writer.writerow([rid, *["" if v is None else repr(v) for v in row]])
