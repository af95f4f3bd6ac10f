"""Declarative experiment configuration.

Experiments are described by a small INI file:

    [experiment]
    paradigm = fedavg            ; centralized | local | fedavg | fedensemble
    model = lstm                 ; lstm | transformer
    seed = 0
    out = runs/fedavg-lstm

    [data]
    source = synthetic           ; "synthetic" or a JSONL path
    format = windows             ; for path sources: windows | raw
    subjects = 5                 ; synthetic knobs
    recordings = 1
    frames = 100
    width = 640
    height = 480
    external_client = c5         ; optional held-out subject for zero-shot eval

    [model_params]               ; optional field overrides, e.g. hidden = 16
    [federation]                 ; rounds, local_epochs, clients
    [training]                   ; batch_size, lr, max_epochs, patience

Unknown sections or keys fail loudly; a federated budget that breaks
rounds x local_epochs == max_epochs parity only warns, because scaled-down
desk runs intentionally shrink it.
"""

from __future__ import annotations

import configparser
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

from fedpose.errors import ConfigError
from fedpose.models import MODEL_KINDS, config_to_dict, default_config
from fedpose.pose.synthetic import SyntheticSpec

log = logging.getLogger(__name__)

PARADIGMS = ("centralized", "local", "fedavg", "fedensemble")

_SECTIONS = {
    "experiment": {"paradigm", "model", "seed", "out"},
    "data": {
        "source",
        "format",
        "subjects",
        "recordings",
        "frames",
        "width",
        "height",
        "base_segment_len",
        "noise_px",
        "low_confidence_rate",
        "external_client",
    },
    "model_params": None,  # validated against the model dataclass fields
    "federation": {"rounds", "local_epochs", "clients"},
    "training": {"batch_size", "lr", "max_epochs", "patience"},
}


@dataclass
class ExperimentConfig:
    """Everything one `train` run needs, with desk-friendly defaults."""

    paradigm: str = "centralized"
    model_kind: str = "lstm"
    seed: int = 0
    out_dir: Path = Path("runs/out")
    data_source: str = "synthetic"
    data_format: str = "windows"
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    external_client: str | None = None
    model_overrides: dict = field(default_factory=dict)
    rounds: int = 20
    local_epochs: int = 25
    clients: int = 5
    batch_size: int = 64
    lr: float = 2e-4
    max_epochs: int = 500
    patience: int | None = 15
    parallel_clients: int = 1

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.paradigm not in PARADIGMS:
            raise ConfigError(
                f"unknown paradigm {self.paradigm!r}; valid: {', '.join(PARADIGMS)}"
            )
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(
                f"unknown model {self.model_kind!r}; valid: {', '.join(MODEL_KINDS)}"
            )
        if self.data_format not in ("windows", "raw"):
            raise ConfigError(
                f"data format must be 'windows' or 'raw', got {self.data_format!r}"
            )
        self.model_config()  # surfaces bad overrides at load time
        if self.paradigm in ("fedavg", "fedensemble"):
            budget = self.rounds * self.local_epochs
            if budget != self.max_epochs:
                log.warning(
                    "budget parity broken: rounds x local_epochs = %d but "
                    "max_epochs = %d",
                    budget,
                    self.max_epochs,
                )

    def model_config(self):
        base = default_config(self.model_kind)
        if not self.model_overrides:
            return base
        valid = {f.name for f in dataclasses.fields(base)}
        unknown = set(self.model_overrides) - valid
        if unknown:
            raise ConfigError(
                f"unknown model_params for {self.model_kind}: "
                f"{', '.join(sorted(unknown))}; valid: {', '.join(sorted(valid))}"
            )
        return dataclasses.replace(base, **self.model_overrides)

    def to_dict(self) -> dict:
        return {
            "paradigm": self.paradigm,
            "model": self.model_kind,
            "model_params": config_to_dict(self.model_config()),
            "seed": self.seed,
            "out": str(self.out_dir),
            "data": {
                "source": self.data_source,
                "format": self.data_format,
                "synthetic": dataclasses.asdict(self.synthetic),
                "external_client": self.external_client,
            },
            "federation": {
                "rounds": self.rounds,
                "local_epochs": self.local_epochs,
                "clients": self.clients,
            },
            "training": {
                "batch_size": self.batch_size,
                "lr": self.lr,
                "max_epochs": self.max_epochs,
                "patience": self.patience,
            },
            "parallel_clients": self.parallel_clients,
        }


def _check_keys(parser: configparser.ConfigParser) -> None:
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(
                f"unknown config section [{section}]; valid: "
                f"{', '.join(sorted(_SECTIONS))}"
            )
        allowed = _SECTIONS[section]
        if allowed is None:
            continue
        unknown = set(parser[section]) - allowed
        if unknown:
            raise ConfigError(
                f"unknown keys in [{section}]: {', '.join(sorted(unknown))}; "
                f"valid: {', '.join(sorted(allowed))}"
            )


def _typed(section, key: str, cast, default):
    if key not in section:
        return default
    raw = section[key].strip()
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def _parse_patience(raw: str):
    if raw.strip().lower() in ("none", "off", ""):
        return None
    return int(raw)


def load_config(path) -> ExperimentConfig:
    """Parse and validate one INI experiment file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from None
    _check_keys(parser)

    exp = parser["experiment"] if parser.has_section("experiment") else {}
    data = parser["data"] if parser.has_section("data") else {}
    fed = parser["federation"] if parser.has_section("federation") else {}
    tr = parser["training"] if parser.has_section("training") else {}

    synthetic = SyntheticSpec(
        subjects=_typed(data, "subjects", int, 5),
        recordings_per_subject=_typed(data, "recordings", int, 1),
        frames_per_recording=_typed(data, "frames", int, 100),
        image_width=_typed(data, "width", float, 640.0),
        image_height=_typed(data, "height", float, 480.0),
        base_segment_len=_typed(data, "base_segment_len", int, 30),
        noise_px=_typed(data, "noise_px", float, 2.0),
        low_confidence_rate=_typed(data, "low_confidence_rate", float, 0.01),
    )
    overrides = {}
    if parser.has_section("model_params"):
        for key, raw in parser["model_params"].items():
            try:
                overrides[key] = int(raw)
            except ValueError:
                raise ConfigError(f"model_params.{key} must be an int, got {raw!r}") from None

    external = data.get("external_client", "").strip() if data else ""
    return ExperimentConfig(
        paradigm=_typed(exp, "paradigm", str, "centralized"),
        model_kind=_typed(exp, "model", str, "lstm"),
        seed=_typed(exp, "seed", int, 0),
        out_dir=Path(_typed(exp, "out", str, "runs/out")),
        data_source=_typed(data, "source", str, "synthetic"),
        data_format=_typed(data, "format", str, "windows"),
        synthetic=synthetic,
        external_client=external or None,
        model_overrides=overrides,
        rounds=_typed(fed, "rounds", int, 20),
        local_epochs=_typed(fed, "local_epochs", int, 25),
        clients=_typed(fed, "clients", int, 5),
        batch_size=_typed(tr, "batch_size", int, 64),
        lr=_typed(tr, "lr", float, 2e-4),
        max_epochs=_typed(tr, "max_epochs", int, 500),
        patience=_typed(tr, "patience", _parse_patience, 15),
    )
