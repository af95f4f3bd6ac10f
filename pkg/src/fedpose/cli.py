"""Command-line entry point.

    fedpose synth    --out raw.jsonl --subjects 5 --frames 200
    fedpose prepare  --raw raw.jsonl --out windows.jsonl
    fedpose train    --config exp.ini
    fedpose eval     --checkpoint ckpt.json --data windows.jsonl --out eval.json
    fedpose matrix   --checkpoints a.json b.json --data windows.jsonl --out dir

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
health failure, 5 I/O error. Every command writes a manifest (config echo,
seed, sha256 of each artifact) so a run can be reproduced from its outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from fedpose.config import ExperimentConfig, load_config
from fedpose.errors import (
    AggregationError,
    ConfigError,
    ContaminationError,
    DataFormatError,
    DimensionError,
    EvaluationError,
    FedposeError,
    NumericalHealthError,
    PartitionError,
)
from fedpose.evaluation import (
    compile_global_test,
    confusion_to_csv,
    cross_client_matrix,
    cross_client_to_csv,
    eval_summary,
    export_report,
    external_client_eval,
    make_report,
    per_class_accuracy,
)
from fedpose.federation import (
    FederationConfig,
    run_centralized,
    run_federated,
    run_fedensemble,
    run_local_baseline,
)
from fedpose.models import load_checkpoint, save_checkpoint
from fedpose.pose.io import load_frames, load_windows, save_frames, save_windows
from fedpose.pose.preprocess import recording_to_windows
from fedpose.pose.splits import stratified_split
from fedpose.pose.types import ClientDataset, WindowSample
from fedpose.pose.synthetic import SyntheticSpec, synthesize_dataset
from fedpose.plots import render_plots

log = logging.getLogger("fedpose")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_IO = 5

MANIFEST_SCHEMA = "fedpose-manifest/1"
EVAL_SCHEMA = "fedpose-eval/1"


# ---------------------------------------------------------------------------
# manifest

def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(path: Path, command: str, config_echo: dict, seed: int, artifacts) -> None:
    entries = {}
    base = path.parent
    for art in artifacts:
        art = Path(art)
        try:
            rel = str(art.relative_to(base))
        except ValueError:
            rel = art.name
        entries[rel] = {"sha256": _sha256(art), "bytes": art.stat().st_size}
    payload = {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "config": config_echo,
        "seed": seed,
        "artifacts": entries,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _sibling_manifest(out_file: Path) -> Path:
    return out_file.with_name(out_file.stem + ".manifest.json")


# ---------------------------------------------------------------------------
# dataset assembly

def _frames_to_windows(frames, width: float, height: float) -> list[WindowSample]:
    by_recording: dict[tuple[str, str], list] = {}
    for f in frames:
        by_recording.setdefault((f.client_id, f.recording_id), []).append(f)
    windows: list[WindowSample] = []
    for key in sorted(by_recording):
        windows.extend(recording_to_windows(by_recording[key], width, height))
    return windows


def _config_windows(cfg: ExperimentConfig) -> list[WindowSample]:
    if cfg.data_source == "synthetic":
        frames = synthesize_dataset(cfg.synthetic, cfg.seed)
        return _frames_to_windows(
            frames, cfg.synthetic.image_width, cfg.synthetic.image_height
        )
    path = Path(cfg.data_source)
    if not path.is_file():
        raise ConfigError(f"data source not found: {path}")
    if cfg.data_format == "windows":
        return load_windows(path)
    frames = load_frames(path)
    return _frames_to_windows(
        frames, cfg.synthetic.image_width, cfg.synthetic.image_height
    )


def _group_by_client(windows) -> dict[str, list[WindowSample]]:
    groups: dict[str, list[WindowSample]] = {}
    for w in windows:
        groups.setdefault(w.client_id, []).append(w)
    return {cid: groups[cid] for cid in sorted(groups)}


def _build_clients(cfg: ExperimentConfig) -> tuple[list[ClientDataset], ClientDataset | None]:
    """Split every subject; optionally hold one out entirely for external eval."""
    groups = _group_by_client(_config_windows(cfg))
    external = None
    if cfg.external_client is not None:
        if cfg.external_client not in groups:
            raise ConfigError(
                f"external_client {cfg.external_client!r} not in data; "
                f"subjects present: {', '.join(groups)}"
            )
        held = groups.pop(cfg.external_client)
        external = ClientDataset(client_id=cfg.external_client, test=held)
    if not groups:
        raise ConfigError("no training subjects left after holding out external client")
    clients = [
        stratified_split(ws, cid, cfg.seed) for cid, ws in groups.items()
    ]
    return clients, external


# ---------------------------------------------------------------------------
# train

def _micro_pooled_eval(per_client_evals: list[dict]) -> dict:
    """Single summary for the local paradigm: own-test confusions pooled."""
    conf = np.zeros((8, 8), dtype=np.int64)
    loss_sum = 0.0
    n = 0
    for ev in per_client_evals:
        conf += np.asarray(ev["confusion"], dtype=np.int64)
        loss_sum += ev["loss"] * ev["sample_count"]
        n += ev["sample_count"]
    return {
        "loss": loss_sum / n,
        "accuracy": float(np.trace(conf)) / n,
        "sample_count": n,
        "per_class_accuracy": per_class_accuracy(conf),
        "support": [int(s) for s in conf.sum(axis=1)],
        "confusion": [[int(v) for v in row] for row in conf],
    }


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = Path(args.out)
    cfg.parallel_clients = args.parallel_clients

    t0 = time.perf_counter()
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    mc = cfg.model_config()
    kind = cfg.model_kind

    clients, external = _build_clients(cfg)
    global_test = compile_global_test(clients)
    pooled_val = [w for ds in clients for w in ds.val]
    pooled_train = [w for ds in clients for w in ds.train]
    training_ids = [ds.client_id for ds in clients]

    artifacts: list[Path] = []
    per_client: list[dict] = []
    cross = None
    rounds_json: list[dict] = []

    if cfg.paradigm == "centralized":
        base = run_centralized(
            pooled_train, pooled_val, kind, mc,
            seed=cfg.seed, max_epochs=cfg.max_epochs, patience=cfg.patience,
            batch_size=cfg.batch_size, lr=cfg.lr,
        )
        final = base.params
        base.result.trace.to_csv(out / "trace.csv")
        artifacts.append(out / "trace.csv")
        global_eval = eval_summary(final, kind, mc, global_test)
        per_client = [
            {"client": ds.client_id, "test": eval_summary(final, kind, mc, ds.test)}
            for ds in clients if ds.test
        ]
        save_checkpoint(
            out / "checkpoint.json", final, kind, mc, cfg.seed,
            {"paradigm": "centralized", "epochs": len(base.result.trace.epochs),
             "best_epoch": base.result.trace.best_epoch},
        )
        artifacts.append(out / "checkpoint.json")

    elif cfg.paradigm == "local":
        results = run_local_baseline(
            clients, kind, mc,
            seed=cfg.seed, max_epochs=cfg.max_epochs, patience=cfg.patience,
            batch_size=cfg.batch_size, lr=cfg.lr,
        )
        models = [(r.client_id, r.params) for r in results]
        cross = cross_client_matrix(models, clients, kind, mc)
        own_evals = []
        for r, ds in zip(results, clients):
            own = eval_summary(r.params, kind, mc, ds.test) if ds.test else None
            if own is not None:
                own_evals.append(own)
            per_client.append({
                "client": r.client_id,
                "own_test": own,
                "global_test": eval_summary(r.params, kind, mc, global_test),
                "epochs": len(r.result.trace.epochs),
                "best_epoch": r.result.trace.best_epoch,
            })
            ckpt = out / f"checkpoint_{r.client_id}.json"
            save_checkpoint(
                ckpt, r.params, kind, mc, cfg.seed,
                {"paradigm": "local", "client_id": r.client_id,
                 "epochs": len(r.result.trace.epochs)},
            )
            artifacts.append(ckpt)
        global_eval = _micro_pooled_eval(own_evals)
        cross_client_to_csv(cross, out / "cross_client.csv")
        artifacts.append(out / "cross_client.csv")

    elif cfg.paradigm in ("fedavg", "fedensemble"):
        fc = FederationConfig(
            model_kind=kind, rounds=cfg.rounds, local_epochs=cfg.local_epochs,
            batch_size=cfg.batch_size, lr=cfg.lr, seed=cfg.seed,
            expected_clients=cfg.clients, parallel_clients=cfg.parallel_clients,
        )
        if cfg.paradigm == "fedavg":
            state, records = run_federated(
                clients, fc, mc, monitor_val=pooled_val, monitor_test=global_test
            )
        else:
            state, records, _parts = run_fedensemble(
                pooled_train, fc, mc, num_partitions=cfg.clients,
                monitor_val=pooled_val, monitor_test=global_test,
            )
        final = state.weights
        rounds_json = [r.to_json_dict() for r in records]
        rounds_path = out / "rounds.jsonl"
        with open(rounds_path, "w", encoding="utf-8") as fh:
            for r in rounds_json:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
        artifacts.append(rounds_path)
        global_eval = eval_summary(final, kind, mc, global_test)
        per_client = [
            {"client": ds.client_id, "test": eval_summary(final, kind, mc, ds.test)}
            for ds in clients if ds.test
        ]
        save_checkpoint(
            out / "checkpoint.json", final, kind, mc, cfg.seed,
            {"paradigm": cfg.paradigm, "rounds": fc.rounds,
             "local_epochs": fc.local_epochs},
        )
        artifacts.append(out / "checkpoint.json")

    else:  # unreachable: config validates paradigm
        raise ConfigError(f"unknown paradigm {cfg.paradigm!r}")

    external_eval = None
    if external is not None:
        if cfg.paradigm == "local":
            log.warning(
                "external evaluation needs a single final model; the local "
                "paradigm trains one per client, skipping"
            )
        else:
            external_eval = external_client_eval(final, kind, mc, external, training_ids)

    report = make_report(
        cfg.paradigm, kind, cfg.seed, cfg.to_dict(), global_eval,
        per_client=per_client, cross_client=cross, external=external_eval,
        rounds=rounds_json, wall_clock_seconds=time.perf_counter() - t0,
    )
    export_report(report, out / "report.json")
    artifacts.append(out / "report.json")
    confusion_to_csv(global_eval["confusion"], out / "confusion.csv")
    artifacts.append(out / "confusion.csv")
    if not args.no_plots:
        artifacts.extend(render_plots(report, out / "plots"))

    _write_manifest(out / "manifest.json", "train", cfg.to_dict(), cfg.seed, artifacts)
    print(f"{cfg.paradigm}/{kind}: global accuracy {global_eval['accuracy']:.4f} "
          f"({global_eval['sample_count']} test windows) -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth / prepare

def _out_path(args) -> Path:
    """Unlike train, the data commands have no config to fall back on."""
    if args.out is None:
        raise ConfigError("this command writes files; pass --out <path>")
    return Path(args.out)


def cmd_synth(args) -> int:
    out = _out_path(args)
    spec = SyntheticSpec(
        subjects=args.subjects,
        recordings_per_subject=args.recordings,
        frames_per_recording=args.frames,
        image_width=args.width,
        image_height=args.height,
    )
    frames = synthesize_dataset(spec, args.seed or 0)
    save_frames(frames, out)
    config_echo = {
        "subjects": spec.subjects, "recordings": spec.recordings_per_subject,
        "frames": spec.frames_per_recording, "width": spec.image_width,
        "height": spec.image_height,
    }
    _write_manifest(_sibling_manifest(out), "synth", config_echo, args.seed or 0, [out])
    print(f"wrote {len(frames)} frames for {spec.subjects} subjects -> {out}")
    return EXIT_OK


def cmd_prepare(args) -> int:
    out = _out_path(args)
    frames = load_frames(args.raw)
    windows = _frames_to_windows(frames, args.width, args.height)
    save_windows(windows, out)
    config_echo = {"raw": str(args.raw), "width": args.width, "height": args.height}
    _write_manifest(_sibling_manifest(out), "prepare", config_echo, args.seed or 0, [out])
    print(f"wrote {len(windows)} windows from {len(frames)} frames -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval / matrix

def cmd_eval(args) -> int:
    out = _out_path(args)
    ckpt = load_checkpoint(args.checkpoint)
    if args.kind is not None and args.kind != ckpt["kind"]:
        raise ConfigError(
            f"checkpoint holds a {ckpt['kind']} model but --kind says {args.kind}"
        )
    windows = load_windows(args.data)
    client = args.client
    if client is not None:
        windows = [w for w in windows if w.client_id == client]
        if not windows:
            raise EvaluationError(f"no windows for client {client!r} in {args.data}")
    summary = eval_summary(ckpt["params"], ckpt["kind"], ckpt["config"], windows)
    payload = {
        "schema": EVAL_SCHEMA,
        "kind": ckpt["kind"],
        "checkpoint": str(args.checkpoint),
        "data": str(args.data),
        "client": client,
        "eval": summary,
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    _write_manifest(
        _sibling_manifest(out), "eval",
        {"checkpoint": str(args.checkpoint), "data": str(args.data), "client": client},
        args.seed or 0, [out],
    )
    print(f"accuracy {summary['accuracy']:.4f} on {summary['sample_count']} windows -> {out}")
    return EXIT_OK


def cmd_matrix(args) -> int:
    out = _out_path(args)
    seed = args.seed or 0
    loaded = [load_checkpoint(p) for p in args.checkpoints]
    kinds = {c["kind"] for c in loaded}
    if len(kinds) != 1:
        raise ConfigError(f"checkpoints mix model kinds: {sorted(kinds)}")
    kind = loaded[0]["kind"]
    mc = loaded[0]["config"]
    for c, p in zip(loaded, args.checkpoints):
        if c["config"] != mc:
            raise ConfigError(f"checkpoint {p} has a different model config")

    models = []
    for c, p in zip(loaded, args.checkpoints):
        mid = c["provenance"].get("client_id") or Path(p).stem
        models.append((mid, c["params"]))

    groups = _group_by_client(load_windows(args.data))
    clients = [stratified_split(ws, cid, seed) for cid, ws in groups.items()]
    cross = cross_client_matrix(models, clients, kind, mc)

    out.mkdir(parents=True, exist_ok=True)
    matrix_path = out / "cross_client.json"
    matrix_path.write_text(
        json.dumps(cross, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    cross_client_to_csv(cross, out / "cross_client.csv")
    _write_manifest(
        out / "manifest.json", "matrix",
        {"checkpoints": [str(p) for p in args.checkpoints], "data": str(args.data)},
        seed, [matrix_path, out / "cross_client.csv"],
    )
    print(f"{len(models)} models x {len(cross['col_ids'])} columns -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None, help="override the base seed")
    shared.add_argument("--out", default=None, help="override the output path")
    shared.add_argument(
        "--parallel-clients", type=int, default=1,
        help="thread pool size for client phases (results are identical)",
    )

    parser = argparse.ArgumentParser(
        prog="fedpose",
        description="Federated gesture-recognition experiments on pose windows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[shared], help="generate a synthetic raw keypoint file")
    p.add_argument("--subjects", type=int, default=5)
    p.add_argument("--recordings", type=int, default=1)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--width", type=float, default=640.0)
    p.add_argument("--height", type=float, default=480.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", parents=[shared], help="raw keypoints JSONL -> window JSONL")
    p.add_argument("--raw", required=True)
    p.add_argument("--width", type=float, default=640.0)
    p.add_argument("--height", type=float, default=480.0)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", parents=[shared], help="run one experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[shared], help="evaluate a checkpoint on a window file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=["lstm", "transformer"], default=None)
    p.add_argument("--client", default=None, help="restrict to one client id")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("matrix", parents=[shared], help="cross-client accuracy matrix")
    p.add_argument("--checkpoints", nargs="+", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_matrix)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    for name, default in (("out", None), ("seed", None), ("parallel_clients", 1)):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, DimensionError, PartitionError, ContaminationError,
            EvaluationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalHealthError, AggregationError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FedposeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
