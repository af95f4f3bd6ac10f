"""Optional matplotlib figures for a report. Rendering is best effort:
a plotting failure logs a warning and never sinks the run that produced
the numbers.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from fedpose.pose.types import GESTURE_NAMES

log = logging.getLogger(__name__)


def _save_class_bars(report: dict, path: Path) -> None:
    import matplotlib.pyplot as plt

    acc = report["global_eval"]["per_class_accuracy"]
    values = [0.0 if a is None else a for a in acc]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(range(len(GESTURE_NAMES)), values, color="#4878a8")
    ax.set_xticks(range(len(GESTURE_NAMES)))
    ax.set_xticklabels(GESTURE_NAMES, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.set_title(f"{report['paradigm']} / {report['model_kind']}: per-class accuracy")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _save_confusion_heatmap(report: dict, path: Path) -> None:
    import matplotlib.pyplot as plt

    conf = np.asarray(report["global_eval"]["confusion"], dtype=float)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(conf, cmap="Blues")
    ax.set_xticks(range(len(GESTURE_NAMES)))
    ax.set_yticks(range(len(GESTURE_NAMES)))
    ax.set_xticklabels(GESTURE_NAMES, rotation=45, ha="right")
    ax.set_yticklabels(GESTURE_NAMES)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    for i in range(conf.shape[0]):
        for j in range(conf.shape[1]):
            if conf[i, j]:
                ax.text(j, i, int(conf[i, j]), ha="center", va="center", fontsize=8)
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title("confusion (test windows)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _save_round_curves(report: dict, path: Path) -> None:
    import matplotlib.pyplot as plt

    rounds = report["rounds"]
    xs = [r["round"] for r in rounds]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for key, label in (("val_accuracy", "val"), ("test_accuracy", "test")):
        ys = [r["metrics"].get(key) for r in rounds]
        if any(y is not None for y in ys):
            ax.plot(xs, [float("nan") if y is None else y for y in ys], marker="o", label=label)
    mean_train = [
        sum(c["train_loss"] for c in r["clients"]) / len(r["clients"]) for r in rounds
    ]
    ax2 = ax.twinx()
    ax2.plot(xs, mean_train, color="gray", linestyle="--", label="mean client train loss")
    ax2.set_ylabel("train loss")
    ax.set_xlabel("round")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.05)
    ax.legend(loc="lower right")
    ax.set_title("aggregated model across rounds")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_plots(report: dict, out_dir) -> list[Path]:
    """Render whatever figures the report supports into out_dir.

    Returns the files written. Exceptions (headless quirks, missing
    matplotlib) are logged, not raised.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        import matplotlib

        matplotlib.use("Agg", force=True)
    except Exception as exc:
        log.warning("matplotlib unavailable, skipping plots: %s", exc)
        return []

    written: list[Path] = []
    jobs = [("class_accuracy.png", _save_class_bars), ("confusion.png", _save_confusion_heatmap)]
    if report.get("rounds"):
        jobs.append(("rounds.png", _save_round_curves))
    for name, fn in jobs:
        target = out_dir / name
        try:
            fn(report, target)
            written.append(target)
        except Exception as exc:
            log.warning("could not render %s: %s", name, exc)
    return written
