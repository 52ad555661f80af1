"""Flat JSON run configuration shared by every CLI command."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields

from .data.sampler import SampleMix
from .embedding import Task
from .model import ModelConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


def _default_mix() -> dict:
    return {t.name: w for t, w in SampleMix().weights.items()}


@dataclass
class RunConfig:
    # one seed drives model init, data generation and batch sampling
    seed: int = 0
    # model
    patch_size: int = 16
    dim: int = 64
    depth: int = 2
    heads: int = 4
    mlp_ratio: float = 4.0
    template_size: int = 32
    search_size: int = 64
    token_type_mode: str = "soft"
    fusion_mode: str = "concat"
    init_mode: str = "half_copy"
    tokenizer_mode: str = "joint"
    pooling_mode: str = "mean_pool"
    head_hidden: int = 64
    task_hidden: int = 32
    # inference
    window_mode: str = "multiply"
    window_weight: float = 1.0
    update_interval: int = 25
    confidence_threshold: float = 0.7
    # training
    steps: int = 2000
    batch: int = 16
    lr_encoder: float = 1e-5
    lr_other: float = 1e-4
    lr_scale: float = 30.0
    weight_decay: float = 1e-4
    lr_drop_at: float = 0.8
    lr_drop: float = 0.1
    lambda_giou: float = 2.0
    lambda_l1: float = 5.0
    task_loss: bool = True
    focal_alpha: float = 2.0
    focal_beta: float = 4.0
    max_gap: int = 20
    center_jitter: float = 0.6
    scale_jitter: float = 0.15
    mix: dict = field(default_factory=_default_mix)
    drop_aux: bool = False
    # data generation
    num_sequences: int = 200
    length: int = 60
    tasks: list = field(default_factory=lambda: [t.name for t in Task])
    regime: str = "normal"
    frame_size: int = 128
    # evaluation
    eval_sequences: int = 20
    eval_samples: int = 500

    def model_config(self) -> ModelConfig:
        names = {f.name for f in fields(ModelConfig)}
        return ModelConfig(**{k: v for k, v in asdict(self).items() if k in names})

    def train_config(self) -> TrainConfig:
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in asdict(self).items() if k in names})

    def tracker_kwargs(self) -> dict:
        return {
            "update_interval": self.update_interval,
            "confidence_threshold": self.confidence_threshold,
            "window_mode": self.window_mode,
            "window_weight": self.window_weight,
        }

    def task_list(self) -> list[Task]:
        return [Task[t] for t in self.tasks]

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> "RunConfig":
        try:
            self.model_config()
            self.train_config().sample_mix()
            self.task_list()
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        return self


def _field_type(f) -> type:
    return type(f.default_factory()) if callable(f.default_factory) else type(f.default)


FIELD_TYPES = {f.name: _field_type(f) for f in fields(RunConfig)}

# short names accepted on the command line and in ablation axes
ALIASES = {
    "token_type": "token_type_mode",
    "fusion": "fusion_mode",
    "init": "init_mode",
    "tokenizer": "tokenizer_mode",
    "pooling": "pooling_mode",
}


def canonical_key(key: str) -> str:
    key = key.replace("-", "_")
    return ALIASES.get(key, key)


def coerce(key: str, value, where: str = ""):
    """Check ``value`` against the type of the field's default."""
    if key not in FIELD_TYPES:
        raise ConfigError(f"{where}unknown config key {key!r}")
    want = FIELD_TYPES[key]
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if want is bool and not isinstance(value, bool):
        raise ConfigError(f"{where}key {key!r} expects true/false, got {value!r}")
    if want is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"{where}key {key!r} expects an integer, got {value!r}")
    if not isinstance(value, want):
        raise ConfigError(f"{where}key {key!r} expects {want.__name__}, got {value!r}")
    return value


def _key_line(text: str, key: str) -> int:
    needle = f'"{key}"'
    for n, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return n
    return 0


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse a flat JSON object into checked ``{key: value}`` pairs."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    out = {}
    for key, value in raw.items():
        where = f"{source}:{_key_line(text, key)}: "
        out[canonical_key(key)] = coerce(canonical_key(key), value, where)
    return out


def load_config(path: str | os.PathLike | None, overrides: dict | None = None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        values.update(parse_config(text, str(path)))
    values.update(overrides or {})
    return RunConfig(**values).validate()


def parse_value(text: str):
    """Command-line values are JSON when they parse as JSON, else plain strings."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(tokens: list[str]) -> dict:
    """``--key value`` pairs (or ``--key=value``); later ones win."""
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        if "=" in tok:
            key, text = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"missing value for {tok}")
            key, text = tok[2:], tokens[i + 1]
            i += 2
        key = canonical_key(key)
        out[key] = coerce(key, parse_value(text), "command line: ")
    return out
