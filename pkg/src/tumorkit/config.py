"""Pipeline configuration: defaults plus optional TOML overrides.

One file drives every command.  Example::

    seed = 7
    output_dir = "work"

    [dataset]
    manifest = "work/manifest.csv"
    train_fraction = 0.7
    stratify = true

    [[preprocess.steps]]
    type = "smooth"
    kernel = 7

    [[preprocess.steps]]
    type = "bilateral"
    radius = 4
    sigma_space = 3.0
    sigma_range = 0.3

    [segment]
    k = 3
    k_max = 6
    detect_threshold = 0.1

    [augment]
    shear_range = 0.2
    zoom_range = [0.8, 1.2]
    hflip_prob = 0.5

    [network]
    input = [64, 64, 1]

    [train]
    epochs = 50
    batch_size = 16
    train_on = "masked"

Omitted keys keep their defaults; ``[network]`` without ``layers`` uses the
built-in residual classifier.  Every random stream derives from the single
top-level seed.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .augment import AugmentConfig
from .dataset import SplitSpec
from .errors import ConfigError
from .imgproc import DEFAULT_PREPROCESS_STEPS
from .nn.network import RESNET_MINI_LAYERS
from .nn.optim import AdamConfig
from .pipeline import TRAIN_ON_CHOICES
from .segment import KMeansConfig


@dataclass
class PipelineConfig:
    seed: int = 0
    output_dir: str = "out"
    manifest: str | None = None
    train_fraction: float = 0.7
    stratify: bool = True
    preprocess_steps: list = field(default_factory=lambda: [dict(s) for s in DEFAULT_PREPROCESS_STEPS])
    kmeans_k: int = 3
    kmeans_restarts: int = 10
    kmeans_max_iters: int = 100
    kmeans_tol: float = 1e-6
    elbow_k_max: int = 6
    elbow_scope: str = "pooled"          # or "per-image"
    elbow_max_points: int = 65536
    detect_threshold: float = 0.1
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    network_input: tuple = (64, 64, 1)
    network_layers: list = field(default_factory=lambda: [dict(s) for s in RESNET_MINI_LAYERS])
    epochs: int = 50
    batch_size: int = 16
    train_on: str = "masked"
    adam: AdamConfig = field(default_factory=AdamConfig)

    def manifest_path(self) -> Path:
        if self.manifest is not None:
            return Path(self.manifest)
        return Path(self.output_dir) / "manifest.csv"

    def split_spec(self) -> SplitSpec:
        return SplitSpec(
            train_fraction=self.train_fraction, seed=self.seed, stratify_by_label=self.stratify
        )

    def kmeans_config(self) -> KMeansConfig:
        return KMeansConfig(
            k=self.kmeans_k,
            restarts=self.kmeans_restarts,
            max_iters=self.kmeans_max_iters,
            tol=self.kmeans_tol,
            seed=self.seed,
        )

    def validate(self) -> None:
        if self.elbow_scope not in ("pooled", "per-image"):
            raise ConfigError(f"elbow_scope must be 'pooled' or 'per-image', got {self.elbow_scope!r}")
        if self.train_on not in TRAIN_ON_CHOICES:
            raise ConfigError(f"train_on must be one of {TRAIN_ON_CHOICES}, got {self.train_on!r}")
        if not 0.0 <= self.detect_threshold <= 1.0:
            raise ConfigError(f"detect_threshold must lie in [0, 1], got {self.detect_threshold}")
        if len(self.network_input) != 3:
            raise ConfigError(f"network input must be (height, width, channels), got {self.network_input}")
        head = self.network_layers[-1] if self.network_layers else {}
        if not (
            head.get("type") == "dense"
            and int(head.get("units", 0)) == 1
            and head.get("activation") == "sigmoid"
        ):
            raise ConfigError("network must end with a dense(1, sigmoid) head")
        self.split_spec()
        self.kmeans_config()


def _take(table: dict, section: str, allowed: set) -> dict:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
    return table


def _from_tables(data: dict) -> PipelineConfig:
    cfg = PipelineConfig()
    top = _take(
        data, "top level",
        {"seed", "output_dir", "dataset", "preprocess", "segment", "augment", "network", "train"},
    )
    if "seed" in top:
        cfg.seed = int(top["seed"])
    if "output_dir" in top:
        cfg.output_dir = str(top["output_dir"])

    ds = _take(top.get("dataset", {}), "dataset", {"manifest", "train_fraction", "stratify"})
    cfg.manifest = ds.get("manifest", cfg.manifest)
    cfg.train_fraction = float(ds.get("train_fraction", cfg.train_fraction))
    cfg.stratify = bool(ds.get("stratify", cfg.stratify))

    pre = _take(top.get("preprocess", {}), "preprocess", {"steps"})
    if "steps" in pre:
        cfg.preprocess_steps = [dict(step) for step in pre["steps"]]

    seg = _take(
        top.get("segment", {}), "segment",
        {"k", "restarts", "max_iters", "tol", "k_max", "detect_threshold",
         "elbow_scope", "elbow_max_points"},
    )
    cfg.kmeans_k = int(seg.get("k", cfg.kmeans_k))
    cfg.kmeans_restarts = int(seg.get("restarts", cfg.kmeans_restarts))
    cfg.kmeans_max_iters = int(seg.get("max_iters", cfg.kmeans_max_iters))
    cfg.kmeans_tol = float(seg.get("tol", cfg.kmeans_tol))
    cfg.elbow_k_max = int(seg.get("k_max", cfg.elbow_k_max))
    cfg.elbow_scope = seg.get("elbow_scope", cfg.elbow_scope)
    cfg.elbow_max_points = int(seg.get("elbow_max_points", cfg.elbow_max_points))
    cfg.detect_threshold = float(seg.get("detect_threshold", cfg.detect_threshold))

    aug = _take(
        top.get("augment", {}), "augment",
        {"rescale", "shear_range", "zoom_range", "hflip_prob"},
    )
    cfg.augment = AugmentConfig(
        rescale=float(aug.get("rescale", 1.0)),
        shear_range=float(aug.get("shear_range", 0.2)),
        zoom_range=tuple(aug.get("zoom_range", (0.8, 1.2))),
        hflip_prob=float(aug.get("hflip_prob", 0.5)),
        seed=cfg.seed,
    )

    net = _take(top.get("network", {}), "network", {"input", "layers"})
    if "input" in net:
        cfg.network_input = tuple(int(v) for v in net["input"])
    if "layers" in net:
        cfg.network_layers = [dict(step) for step in net["layers"]]

    tr = _take(
        top.get("train", {}), "train",
        {"epochs", "batch_size", "train_on", "learning_rate", "beta1", "beta2", "epsilon"},
    )
    cfg.epochs = int(tr.get("epochs", cfg.epochs))
    cfg.batch_size = int(tr.get("batch_size", cfg.batch_size))
    cfg.train_on = tr.get("train_on", cfg.train_on)
    cfg.adam = AdamConfig(
        learning_rate=float(tr.get("learning_rate", 1e-3)),
        beta1=float(tr.get("beta1", 0.9)),
        beta2=float(tr.get("beta2", 0.999)),
        epsilon=float(tr.get("epsilon", 1e-8)),
    )
    return cfg


def load_config(path=None, seed=None, out_dir=None) -> PipelineConfig:
    """Build a config from an optional TOML file plus CLI overrides."""
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        cfg = _from_tables(data)
    else:
        cfg = PipelineConfig()
    if seed is not None:
        cfg.seed = int(seed)
        cfg.augment = AugmentConfig(
            rescale=cfg.augment.rescale,
            shear_range=cfg.augment.shear_range,
            zoom_range=cfg.augment.zoom_range,
            hflip_prob=cfg.augment.hflip_prob,
            seed=cfg.seed,
        )
    if out_dir is not None:
        cfg.output_dir = str(out_dir)
    cfg.validate()
    return cfg
