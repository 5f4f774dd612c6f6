"""Flat `key = value` experiment configuration with strict known keys.

Sections are key prefixes (model.*, optim.*, ...).  Unknown keys are
rejected by name, and formatting a parsed config reproduces an equal
config (the resolved.cfg written next to every run round-trips).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .model import ModelConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"


@dataclass(frozen=True)
class DataConfig:
    manifest: str = ""


@dataclass(frozen=True)
class PreprocessConfig:
    preset: str = "none"  # none | wavelet_crop | wavelet_bilinear
    haar_levels: int = 3
    equalize: str = "none"  # none | global | clahe
    normalize: bool = True

    def __post_init__(self):
        if self.preset not in ("none", "wavelet_crop", "wavelet_bilinear"):
            raise ConfigError(f"unknown preprocess preset {self.preset!r}")
        if self.equalize not in ("none", "global", "clahe"):
            raise ConfigError(f"unknown equalize mode {self.equalize!r}")


@dataclass(frozen=True)
class AugmentConfig:
    preset: str = "appendix"  # main_text | appendix | none


@dataclass(frozen=True)
class LossConfig:
    kind: str = "bce"  # bce | balanced
    w_f: float = 1.0
    w_m: float = 1.0
    clamp_eps: float = 1e-7


@dataclass(frozen=True)
class OptimConfig:
    lr0: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 1e-3
    nesterov: bool = True
    gamma: float = 0.99


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    max_epochs: int = 300
    min_epochs: int = 3
    patience: int = 25
    monitor: str = "val_auc"  # val_auc | val_acc
    seed: int = 0
    belief_bins: int = 20

    def __post_init__(self):
        if self.monitor not in ("val_auc", "val_acc"):
            raise ConfigError(f"monitor must be val_auc or val_acc, got {self.monitor!r}")
        if self.min_epochs < 1 or self.patience < 1:
            raise ConfigError("min_epochs and patience must be >= 1")


@dataclass(frozen=True)
class BootstrapSection:
    B: int = 1000
    alpha: float = 0.05
    seed: int = 0
    mu_ref: float = 0.5


@dataclass(frozen=True)
class EnsembleConfig:
    ell: int = 10
    L: int = 20


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunConfig = field(default_factory=RunConfig)
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    bootstrap: BootstrapSection = field(default_factory=BootstrapSection)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)


_SECTIONS = {
    "run": RunConfig,
    "data": DataConfig,
    "model": ModelConfig,
    "preprocess": PreprocessConfig,
    "augment": AugmentConfig,
    "loss": LossConfig,
    "optim": OptimConfig,
    "train": TrainConfig,
    "bootstrap": BootstrapSection,
    "ensemble": EnsembleConfig,
}


def _known_keys():
    out = {}
    for section, cls in _SECTIONS.items():
        for f in fields(cls):
            out[f"{section}.{f.name}"] = (section, f.name, f.type)
    return out


_KEYS = _known_keys()


def _parse_value(raw: str, annotation: str, key: str):
    raw = raw.strip()
    if annotation == "bool":
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if annotation == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if annotation == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    return raw


def parse_config(text: str) -> ExperimentConfig:
    values: dict[str, dict] = {section: {} for section in _SECTIONS}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        section, name, annotation = _KEYS[key]
        values[section][name] = _parse_value(raw, annotation, key)
    try:
        sections = {section: cls(**values[section]) for section, cls in _SECTIONS.items()}
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(**sections)


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for section, cls in _SECTIONS.items():
        sub = getattr(cfg, section)
        for f in fields(cls):
            value = getattr(sub, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{section}.{f.name} = {value}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text)
    manifest = cfg.data.manifest
    if manifest and not Path(manifest).is_absolute():
        cfg = replace(cfg, data=DataConfig(manifest=str((path.parent / manifest).resolve())))
    return cfg
