"""Run configuration files and the run manifest.

Configs are flat INI files with one section per subsystem::

    [model]
    bottleneck = 32          ; or explicit layer_sizes = 784,128,32
    activation = sigmoid

    [objective]
    kind = RAE
    alpha = 0.2
    threshold = 0.0
    weight_decay = 0.0
    noise_scale = 0.0
    recon = squared_error

    [train]
    learning_rate = 0.1
    batch_size = 128
    max_epochs = 400
    epsilon = 0.0
    seed = 1234
    layerwise = false
    finetune_epochs = 0

    [data]
    dataset = fixture        ; mnist | cifar10 | fixture | synthetic | csv
    dir = ./data             ; overridden by $RELAE_DATA_DIR
    split = train            ; train | test (which archive half to load)
    subset = 0               ; 0 = all
    csv_path =               ; for dataset = csv
    synthetic_size = 2000    ; for dataset = synthetic

    [eval]
    folds = 10
    split = test             ; metric split for sweeps: train | test

    [output]
    dir = runs/out

Validation failures raise ConfigError whose message starts with the
offending ``section.key``.  A parsed config re-serialized through
``serialize_config`` parses back to the same settings.
"""

from __future__ import annotations

import configparser
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .data import (
    DataError,
    Dataset,
    cifar10_paths,
    fixture_paths,
    load_cifar10,
    load_csv,
    load_fixture,
    load_mnist,
    make_synthetic_digits,
    mnist_paths,
    sha256_file,
    subset,
)
from .objectives import ObjectiveSpec
from .trainer import TAG_DATA, TrainConfig
from .numeric import Rng

DATA_DIR_ENV = "RELAE_DATA_DIR"
DATASETS = ("mnist", "cifar10", "fixture", "synthetic", "csv")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass
class DataSettings:
    dataset: str = "fixture"
    dir: str = "./data"
    split: str = "train"
    subset: int = 0
    csv_path: str = ""
    synthetic_size: int = 2000
    seed: int = 0  # subsetting/synthesis seed, derived from train seed if 0


@dataclass
class EvalSettings:
    folds: int = 10
    split: str = "test"


@dataclass
class ModelSettings:
    layer_sizes: list[int] = field(default_factory=list)  # empty: derive from bottleneck
    bottleneck: int = 32
    activation: str = "sigmoid"


@dataclass
class RunSettings:
    model: ModelSettings = field(default_factory=ModelSettings)
    objective: ObjectiveSpec = field(default_factory=lambda: ObjectiveSpec("BAE"))
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataSettings = field(default_factory=DataSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)
    output_dir: str = "runs/out"


def _get(parser, section, key, default, cast, validate=None):
    qual = f"{section}.{key}"
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw == "":
        return default
    try:
        if cast is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                value = True
            elif low in ("0", "false", "no", "off"):
                value = False
            else:
                raise ValueError(f"not a boolean: {raw!r}")
        else:
            value = cast(raw)
    except ValueError as exc:
        raise ConfigError(qual, str(exc)) from exc
    if validate is not None:
        err = validate(value)
        if err:
            raise ConfigError(qual, err)
    return value


def _int_list(raw: str) -> list[int]:
    return [int(p) for p in raw.replace(" ", "").split(",") if p]


def parse_config(path) -> RunSettings:
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc

    known = {
        "model": {"layer_sizes", "bottleneck", "activation"},
        "objective": {"kind", "alpha", "threshold", "weight_decay", "noise_scale", "recon"},
        "train": {"learning_rate", "batch_size", "max_epochs", "epsilon", "seed",
                  "layerwise", "finetune_epochs"},
        "data": {"dataset", "dir", "split", "subset", "csv_path", "synthetic_size", "seed"},
        "eval": {"folds", "split"},
        "output": {"dir"},
    }
    for section in parser.sections():
        if section not in known:
            raise ConfigError(section, "unknown section")
        for key in parser.options(section):
            if key not in known[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")

    s = RunSettings()
    s.model = ModelSettings(
        layer_sizes=_get(parser, "model", "layer_sizes", [], _int_list,
                         lambda v: "needs at least two sizes" if v and len(v) < 2 else None),
        bottleneck=_get(parser, "model", "bottleneck", 32, int,
                        lambda v: "must be >= 1" if v < 1 else None),
        activation=_get(parser, "model", "activation", "sigmoid", str,
                        lambda v: None if v in ("sigmoid", "identity")
                        else f"unknown activation {v!r}"),
    )

    kind = _get(parser, "objective", "kind", "BAE", str)
    try:
        s.objective = ObjectiveSpec(
            kind=kind,
            alpha=_get(parser, "objective", "alpha", 0.5, float),
            threshold=_get(parser, "objective", "threshold", 0.0, float),
            weight_decay=_get(parser, "objective", "weight_decay", 0.0, float),
            noise_scale=_get(parser, "objective", "noise_scale", 0.0, float),
            recon=_get(parser, "objective", "recon", "squared_error", str),
        )
    except ValueError as exc:
        msg = str(exc)
        key = "kind"
        for candidate in ("alpha", "threshold", "weight_decay", "noise_scale", "recon"):
            if candidate in msg:
                key = candidate
                break
        raise ConfigError(f"objective.{key}", msg) from exc

    try:
        s.train = TrainConfig(
            learning_rate=_get(parser, "train", "learning_rate", 0.1, float),
            batch_size=_get(parser, "train", "batch_size", 128, int),
            max_epochs=_get(parser, "train", "max_epochs", 400, int),
            epsilon=_get(parser, "train", "epsilon", 0.0, float),
            seed=_get(parser, "train", "seed", 0, int),
            layerwise=_get(parser, "train", "layerwise", False, bool),
            finetune_epochs=_get(parser, "train", "finetune_epochs", 0, int),
        )
    except ValueError as exc:
        msg = str(exc)
        key = "learning_rate"
        for candidate in ("learning_rate", "batch_size", "max_epochs", "epsilon"):
            if candidate in msg:
                key = candidate
                break
        raise ConfigError(f"train.{key}", msg) from exc

    s.data = DataSettings(
        dataset=_get(parser, "data", "dataset", "fixture", str,
                     lambda v: None if v in DATASETS
                     else f"unknown dataset {v!r}; choose from {', '.join(DATASETS)}"),
        dir=_get(parser, "data", "dir", "./data", str),
        split=_get(parser, "data", "split", "train", str,
                   lambda v: None if v in ("train", "test") else "must be train or test"),
        subset=_get(parser, "data", "subset", 0, int,
                    lambda v: "must be >= 0" if v < 0 else None),
        csv_path=_get(parser, "data", "csv_path", "", str),
        synthetic_size=_get(parser, "data", "synthetic_size", 2000, int,
                            lambda v: "must be >= 1" if v < 1 else None),
        seed=_get(parser, "data", "seed", 0, int),
    )
    s.eval = EvalSettings(
        folds=_get(parser, "eval", "folds", 10, int,
                   lambda v: "must be >= 2" if v < 2 else None),
        split=_get(parser, "eval", "split", "test", str,
                   lambda v: None if v in ("train", "test") else "must be train or test"),
    )
    s.output_dir = _get(parser, "output", "dir", "runs/out", str)
    return s


def serialize_config(s: RunSettings) -> str:
    """Canonical INI text that parses back to the same settings."""
    lines = ["[model]"]
    if s.model.layer_sizes:
        lines.append("layer_sizes = " + ",".join(str(v) for v in s.model.layer_sizes))
    lines += [
        f"bottleneck = {s.model.bottleneck}",
        f"activation = {s.model.activation}",
        "",
        "[objective]",
        f"kind = {s.objective.kind}",
        f"alpha = {s.objective.alpha!r}",
        f"threshold = {s.objective.threshold!r}",
        f"weight_decay = {s.objective.weight_decay!r}",
        f"noise_scale = {s.objective.noise_scale!r}",
        f"recon = {s.objective.recon}",
        "",
        "[train]",
        f"learning_rate = {s.train.learning_rate!r}",
        f"batch_size = {s.train.batch_size}",
        f"max_epochs = {s.train.max_epochs}",
        f"epsilon = {s.train.epsilon!r}",
        f"seed = {s.train.seed}",
        f"layerwise = {str(s.train.layerwise).lower()}",
        f"finetune_epochs = {s.train.finetune_epochs}",
        "",
        "[data]",
        f"dataset = {s.data.dataset}",
        f"dir = {s.data.dir}",
        f"split = {s.data.split}",
        f"subset = {s.data.subset}",
        f"csv_path = {s.data.csv_path}",
        f"synthetic_size = {s.data.synthetic_size}",
        f"seed = {s.data.seed}",
        "",
        "[eval]",
        f"folds = {s.eval.folds}",
        f"split = {s.eval.split}",
        "",
        "[output]",
        f"dir = {s.output_dir}",
        "",
    ]
    return "\n".join(lines)


def resolve_data_dir(settings: RunSettings) -> Path:
    env = os.environ.get(DATA_DIR_ENV)
    return Path(env) if env else Path(settings.data.dir)


def load_dataset(settings: RunSettings) -> tuple[Dataset, dict[str, str]]:
    """Dataset selected by [data], plus sha256 checksums of files read."""
    d = settings.data
    data_dir = resolve_data_dir(settings)
    checksums: dict[str, str] = {}
    if d.dataset == "fixture":
        images, labels = fixture_paths()
        ds = load_fixture()
        checksums = {str(images): sha256_file(images), str(labels): sha256_file(labels)}
    elif d.dataset == "synthetic":
        ds = make_synthetic_digits(d.synthetic_size, seed=d.seed or 2000)
    elif d.dataset == "csv":
        if not d.csv_path:
            raise ConfigError("data.csv_path", "required when dataset = csv")
        ds = load_csv(d.csv_path)
        checksums = {d.csv_path: sha256_file(d.csv_path)}
    elif d.dataset == "mnist":
        paths = mnist_paths(data_dir)
        pair = ("train_images", "train_labels") if d.split == "train" else (
            "test_images", "test_labels")
        ds = load_mnist(paths[pair[0]], paths[pair[1]], name=f"mnist-{d.split}")
        checksums = {str(paths[k]): sha256_file(paths[k]) for k in pair}
    else:  # cifar10
        paths = cifar10_paths(data_dir, train=d.split == "train")
        ds = load_cifar10(paths, name=f"cifar10-{d.split}")
        checksums = {str(p): sha256_file(p) for p in paths}

    if d.subset:
        sub_seed = d.seed or Rng(settings.train.seed).child_seed(TAG_DATA)
        ds = subset(ds, d.subset, sub_seed)
    return ds, checksums


@dataclass
class RunManifest:
    """Everything needed to re-run a command bit-identically."""

    command: str
    config: dict
    seed: int
    dataset: dict
    outputs: list[str]
    code_version: str = __version__
    argv: list[str] = field(default_factory=lambda: list(sys.argv))
    written_at: str = ""

    @staticmethod
    def create(command: str, settings: RunSettings, checksums: dict[str, str],
               dataset_name: str, outputs: list[str]) -> "RunManifest":
        cfg = {
            "model": asdict(settings.model),
            "objective": asdict(settings.objective),
            "train": asdict(settings.train),
            "data": asdict(settings.data),
            "eval": asdict(settings.eval),
            "output": {"dir": settings.output_dir},
        }
        return RunManifest(
            command=command,
            config=cfg,
            seed=settings.train.seed,
            dataset={"name": dataset_name, "checksums": checksums},
            outputs=outputs,
            written_at=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        )

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)
            f.write("\n")
