"""Pipeline configuration: one JSON document, schema-checked on load.

Unknown keys are rejected by name (typo safety) at every nesting level.
Paths given on the command line override the corresponding config fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .orb import DEFAULT_PATTERN_SEED, OrbParams


@dataclass(frozen=True)
class PipelineConfig:
    dataset: Path | None = None
    workdir: Path | None = None
    pattern: Path | None = None
    resize: tuple[int, int] = (512, 512)  # (width, height)
    orb: OrbParams = field(default_factory=OrbParams)
    k: int = 5
    kmeans_seed: int = 0
    kmeans_max_iter: int = 100
    kmeans_tol: float = 0.0
    depth_min: int = 1
    depth_max: int = 20
    split_seed: int = 0
    pattern_seed: int = DEFAULT_PATTERN_SEED
    workers: int = 1

    def __post_init__(self):
        w, h = self.resize
        if w < self.orb.patch_size or h < self.orb.patch_size:
            raise ConfigError(
                f"resize {w}x{h} is smaller than patch_size {self.orb.patch_size}"
            )
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.kmeans_max_iter < 1:
            raise ConfigError(f"kmeans.max_iter must be >= 1, got {self.kmeans_max_iter}")
        if self.kmeans_tol < 0:
            raise ConfigError(f"kmeans.tol must be >= 0, got {self.kmeans_tol}")
        if not 1 <= self.depth_min <= self.depth_max:
            raise ConfigError(
                f"tree depth range must satisfy 1 <= min <= max, "
                f"got {self.depth_min}..{self.depth_max}"
            )
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @property
    def depth_range(self) -> range:
        return range(self.depth_min, self.depth_max + 1)

    def with_overrides(self, dataset=None, workdir=None) -> "PipelineConfig":
        cfg = self
        if dataset is not None:
            cfg = replace(cfg, dataset=Path(dataset))
        if workdir is not None:
            cfg = replace(cfg, workdir=Path(workdir))
        return cfg

    def to_doc(self) -> dict:
        """JSON-ready snapshot, embedded verbatim in the run manifest."""
        return {
            "dataset": None if self.dataset is None else str(self.dataset),
            "workdir": None if self.workdir is None else str(self.workdir),
            "pattern": None if self.pattern is None else str(self.pattern),
            "resize": list(self.resize),
            "orb": {
                "n_features": self.orb.n_features,
                "fast_threshold": self.orb.fast_threshold,
                "n_levels": self.orb.n_levels,
                "scale_factor": self.orb.scale_factor,
                "patch_size": self.orb.patch_size,
                "n_tests": self.orb.n_tests,
            },
            "k": self.k,
            "kmeans": {"seed": self.kmeans_seed, "max_iter": self.kmeans_max_iter,
                       "tol": self.kmeans_tol},
            "tree": {"depth_min": self.depth_min, "depth_max": self.depth_max,
                     "split_seed": self.split_seed},
            "pattern_seed": self.pattern_seed,
            "workers": self.workers,
        }


def _require(doc: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in {where}")


def _expect(value, types, where: str):
    if isinstance(value, bool) or not isinstance(value, types):
        names = "/".join(t.__name__ for t in (types if isinstance(types, tuple) else (types,)))
        raise ConfigError(f"{where} must be {names}, got {value!r}")
    return value


def parse_config(doc: dict, base_dir: Path | None = None) -> PipelineConfig:
    """Build a PipelineConfig from a parsed JSON document.

    Relative paths resolve against base_dir (the config file's directory).
    """
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be an object, got {type(doc).__name__}")
    _require(doc, {"dataset", "workdir", "pattern", "resize", "orb", "k",
                   "kmeans", "tree", "pattern_seed", "workers"}, "config")

    def path_of(key: str) -> Path | None:
        raw = doc.get(key)
        if raw is None:
            return None
        p = Path(_expect(raw, str, f"config.{key}"))
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return p

    kwargs: dict = {
        "dataset": path_of("dataset"),
        "workdir": path_of("workdir"),
        "pattern": path_of("pattern"),
    }
    if "resize" in doc:
        raw = _expect(doc["resize"], list, "config.resize")
        if len(raw) != 2:
            raise ConfigError(f"config.resize must be [width, height], got {raw!r}")
        kwargs["resize"] = (_expect(raw[0], int, "config.resize[0]"),
                            _expect(raw[1], int, "config.resize[1]"))
    if "orb" in doc:
        sub = _expect(doc["orb"], dict, "config.orb")
        _require(sub, {"n_features", "fast_threshold", "n_levels", "scale_factor",
                       "patch_size", "n_tests"}, "config.orb")
        orb_kwargs = {}
        for key in ("n_features", "fast_threshold", "n_levels", "patch_size", "n_tests"):
            if key in sub:
                orb_kwargs[key] = _expect(sub[key], int, f"config.orb.{key}")
        if "scale_factor" in sub:
            orb_kwargs["scale_factor"] = float(
                _expect(sub["scale_factor"], (int, float), "config.orb.scale_factor")
            )
        try:
            kwargs["orb"] = OrbParams(**orb_kwargs)
        except ValueError as exc:
            raise ConfigError(f"config.orb: {exc}") from None
    if "k" in doc:
        kwargs["k"] = _expect(doc["k"], int, "config.k")
    if "kmeans" in doc:
        sub = _expect(doc["kmeans"], dict, "config.kmeans")
        _require(sub, {"seed", "max_iter", "tol"}, "config.kmeans")
        if "seed" in sub:
            kwargs["kmeans_seed"] = _expect(sub["seed"], int, "config.kmeans.seed")
        if "max_iter" in sub:
            kwargs["kmeans_max_iter"] = _expect(sub["max_iter"], int,
                                                "config.kmeans.max_iter")
        if "tol" in sub:
            kwargs["kmeans_tol"] = float(
                _expect(sub["tol"], (int, float), "config.kmeans.tol")
            )
    if "tree" in doc:
        sub = _expect(doc["tree"], dict, "config.tree")
        _require(sub, {"depth_min", "depth_max", "split_seed"}, "config.tree")
        if "depth_min" in sub:
            kwargs["depth_min"] = _expect(sub["depth_min"], int, "config.tree.depth_min")
        if "depth_max" in sub:
            kwargs["depth_max"] = _expect(sub["depth_max"], int, "config.tree.depth_max")
        if "split_seed" in sub:
            kwargs["split_seed"] = _expect(sub["split_seed"], int,
                                           "config.tree.split_seed")
    if "pattern_seed" in doc:
        kwargs["pattern_seed"] = _expect(doc["pattern_seed"], int, "config.pattern_seed")
    if "workers" in doc:
        kwargs["workers"] = _expect(doc["workers"], int, "config.workers")
    return PipelineConfig(**kwargs)


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return parse_config(doc, base_dir=path.parent)
