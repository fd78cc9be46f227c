"""Run configuration (published hyperparameters plus run and ablation switches)."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

CONFIG_VERSION = 1
POOL_TYPES = ("hierarchical", "global")
AGGREGATIONS = ("cat", "mean")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # lift
    lift_heads: int = 1
    lift_activation: str = "relu"
    lift_dropout: float = 0.0
    lift_symmetric: bool = False
    # cell attention layers
    hidden: list[int] = field(default_factory=lambda: [32, 32])
    heads: list[int] = field(default_factory=lambda: [1, 1])
    attention_aggregation: str = "cat"
    attention_activation: str = "lrelu"
    activation: str = "elu"
    negative_slope: float = 0.1
    self_eps: float = 0.0
    batch_norm: bool = True
    # pooling / readout
    pool_ratio: float = 1.0
    pool_type: str = "hierarchical"
    pool_activation: str = "tanh"
    pool_scaling: bool = True
    # head and optimisation
    mlp_hidden: int = 8
    dropout: float = 0.1
    batch_size: int = 64
    lr: float = 3e-3
    weight_decay: float = 0.01
    epochs: int = 150
    # run
    max_ring_size: int = 6
    seed: int = 0
    precision: str = "float64"
    # ablations
    no_lift: bool = False
    no_lower: bool = False
    no_upper: bool = False
    no_attention: bool = False
    no_pooling: bool = False

    def __post_init__(self):
        self.hidden = [int(x) for x in self.hidden]
        self.heads = [int(x) for x in self.heads]
        self.validate()

    # ------------------------------------------------------------------
    @property
    def num_layers(self) -> int:
        return len(self.hidden)

    @property
    def dtype(self):
        return np.float32 if self.precision == "float32" else np.float64

    def layer_output_widths(self) -> list[int]:
        if self.attention_aggregation == "cat":
            return [f * h for f, h in zip(self.hidden, self.heads)]
        return list(self.hidden)

    @property
    def lower_frozen(self) -> bool:
        return self.no_lower or self.no_attention

    @property
    def upper_frozen(self) -> bool:
        return self.no_upper or self.no_attention

    @property
    def hierarchical(self) -> bool:
        return self.pool_type == "hierarchical" and not self.no_pooling

    def validate(self) -> None:
        if len(self.hidden) != len(self.heads) or not self.hidden:
            raise ConfigError(f"hidden {self.hidden} and heads {self.heads} must be non-empty and of equal length")
        if any(x < 1 for x in self.hidden + self.heads) or self.lift_heads < 1:
            raise ConfigError("widths and head counts must be >= 1")
        if not 0.0 < self.pool_ratio <= 1.0:
            raise ConfigError(f"pool_ratio must lie in (0, 1], got {self.pool_ratio}")
        if self.pool_type not in POOL_TYPES:
            raise ConfigError(f"pool_type must be one of {POOL_TYPES}, got {self.pool_type!r}")
        if self.attention_aggregation not in AGGREGATIONS:
            raise ConfigError(f"attention_aggregation must be one of {AGGREGATIONS}")
        if self.precision not in ("float32", "float64"):
            raise ConfigError(f"precision must be float32 or float64, got {self.precision!r}")
        if self.max_ring_size < 3:
            raise ConfigError("max_ring_size must be >= 3")
        if self.no_attention and (self.no_lower or self.no_upper):
            raise ConfigError("no_attention already removes both attentions; do not combine it with no_lower/no_upper")
        if self.hierarchical:
            widths = self.layer_output_widths()
            if len(set(widths)) != 1:
                raise ConfigError(f"hierarchical readout sums layer embeddings and needs equal widths, got {widths}")

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["config_version"] = CONFIG_VERSION
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d.pop("config_version", None)
        d.pop("name", None)
        d.pop("description", None)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**d)

    def replace(self, **changes) -> "RunConfig":
        d = self.to_dict()
        d.update(changes)
        return RunConfig.from_dict(d)


BUILTIN_CONFIGS = ("mutag", "ptc", "proteins", "nci1", "nci109", "synthetic")


def load_config(name_or_path: str | Path) -> RunConfig:
    """Load a JSON config from a path or by builtin name (``mutag``, ``ptc``, ...)."""
    p = Path(name_or_path)
    if p.suffix == ".json" and p.exists():
        text = p.read_text()
    else:
        key = p.stem.lower()
        if key not in BUILTIN_CONFIGS:
            raise ConfigError(f"no config file {name_or_path} and no builtin named {key!r}")
        text = resources.files("cellattn.configs").joinpath(f"{key}.json").read_text()
    return RunConfig.from_dict(json.loads(text))
