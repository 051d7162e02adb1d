"""Training configuration: dataclass plus a fail-closed INI-style file format.

Config files use sections and key/value pairs::

    [data]
    dataset = runs/synth
    classes = 3

    [model]
    arch = cascade

    [train]
    max_epochs = 50

    [mfa]
    enabled = true

Unknown sections or keys are errors, as are missing required keys
(``data.dataset`` and ``data.classes``).
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .mfa import POLICIES
from .network import ARCH_MODES

# section -> key -> (field name, parser)
_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_bool(s: str) -> bool:
    try:
        return _BOOL[s.strip().lower()]
    except KeyError:
        raise ValueError(f"expected a boolean, got {s!r}") from None


def _parse_weights(s: str) -> tuple[float, float, float, float]:
    parts = [float(p) for p in s.replace(",", " ").split()]
    if len(parts) != 4:
        raise ValueError(f"expected 4 final weights, got {s!r}")
    return tuple(parts)  # type: ignore[return-value]


@dataclass
class TrainConfig:
    dataset: str
    classes: int
    image_size: int = 256
    fcb_image_size: int = 224
    arch: str = "cascade"
    adaptive_mfa: bool = True
    channel_div: int = 1
    se_reduction: int = 8
    attention_heads: int = 4
    head_kernel_size: int = 1
    final_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    max_epochs: int = 300
    max_iterations: int = 0  # 0 = no cap
    batch_size: int = 16
    base_lr: float = 1e-3
    weight_decay: float = 1e-4
    seed: int = 0
    val_fraction: float = 0.0
    dice_weight: float = 0.0  # 0 = use 1/classes
    mfa_policy: str = "inverse_loss"
    mfa_rho: float = 0.1
    mfa_tau: float = 1.0
    mfa_set_reduction: str = "sum"
    mfa_init_weight: float = 0.25
    out_dir: str = "runs/run"

    def validate(self) -> "TrainConfig":
        if self.classes < 2:
            raise ValueError("classes must be >= 2")
        if self.arch not in ARCH_MODES:
            raise ValueError(f"arch must be one of {ARCH_MODES}")
        if self.image_size % 16 or self.fcb_image_size % 16:
            raise ValueError("image_size and fcb_image_size must be divisible by 16")
        for name in ("max_epochs", "batch_size", "channel_div", "se_reduction",
                     "attention_heads", "head_kernel_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("base_lr", "mfa_rho", "mfa_tau", "mfa_init_weight"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0 or self.dice_weight < 0 or self.max_iterations < 0:
            raise ValueError("weight_decay, dice_weight and max_iterations must be >= 0")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.mfa_policy not in POLICIES:
            raise ValueError(f"mfa_policy must be one of {POLICIES}")
        if self.mfa_set_reduction not in ("sum", "mean"):
            raise ValueError("mfa_set_reduction must be 'sum' or 'mean'")
        if self.mfa_rho > 1.0:
            raise ValueError("mfa_rho must be <= 1")
        return self

    def fingerprint(self) -> str:
        text = "\n".join(f"{f.name}={getattr(self, f.name)!r}" for f in fields(self))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "data": {
        "dataset": ("dataset", str),
        "classes": ("classes", int),
        "image_size": ("image_size", int),
        "fcb_image_size": ("fcb_image_size", int),
    },
    "model": {
        "arch": ("arch", str),
        "channel_div": ("channel_div", int),
        "se_reduction": ("se_reduction", int),
        "attention_heads": ("attention_heads", int),
        "head_kernel_size": ("head_kernel_size", int),
        "final_weights": ("final_weights", _parse_weights),
    },
    "train": {
        "max_epochs": ("max_epochs", int),
        "max_iterations": ("max_iterations", int),
        "batch_size": ("batch_size", int),
        "base_lr": ("base_lr", float),
        "weight_decay": ("weight_decay", float),
        "seed": ("seed", int),
        "val_fraction": ("val_fraction", float),
        "dice_weight": ("dice_weight", float),
        "out_dir": ("out_dir", str),
    },
    "mfa": {
        "enabled": ("adaptive_mfa", _parse_bool),
        "policy": ("mfa_policy", str),
        "rho": ("mfa_rho", float),
        "tau": ("mfa_tau", float),
        "set_reduction": ("mfa_set_reduction", str),
        "init_weight": ("mfa_init_weight", float),
    },
}

_FIELD_TO_SECTION = {
    entry[0]: (section, key)
    for section, keys in _SCHEMA.items()
    for key, entry in keys.items()
}


def parse_config(path: str | Path) -> TrainConfig:
    """Parse and validate a config file; unknown keys are errors."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file {path} not found")
    values: dict[str, object] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ValueError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ValueError(f"unknown config key {section}.{key}")
            name, parse = _SCHEMA[section][key]
            try:
                values[name] = parse(raw)
            except ValueError as exc:
                raise ValueError(f"bad value for {section}.{key}: {exc}") from exc
    for required in ("dataset", "classes"):
        if required not in values:
            section, key = _FIELD_TO_SECTION[required]
            raise ValueError(f"missing required config key {section}.{key}")
    return TrainConfig(**values).validate()


def write_config(cfg: TrainConfig, path: str | Path) -> None:
    """Write a config file that parses back to ``cfg``."""
    parser = configparser.ConfigParser()
    for section, keys in _SCHEMA.items():
        parser[section] = {}
        for key, (name, _) in keys.items():
            value = getattr(cfg, name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            parser[section][key] = str(value)
    with open(path, "w") as f:
        parser.write(f)
