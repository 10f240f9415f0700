"""Experiment configuration and the ``key = value`` config file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping, get_type_hints


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    """Model, optimization and decoding settings.

    Defaults are desk scale; :meth:`full_scale` gives the full-size model.
    """

    d_model: int = 64
    d_input: int = 32
    d_state: int = 16
    expand: int = 2
    conv_width: int = 4
    layers_enc: int = 4
    layers_dec: int = 4
    n_heads: int = 8
    ffn_mult: int = 4
    num_future: int = 8
    long_len: int = 48
    short_len: int = 24
    num_verbs: int = 12
    num_nouns: int = 24
    batch_size: int = 32
    lr: float = 2e-3
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 20
    max_steps: int = 0
    cosine_decay: bool = True
    grad_clip: float = 1.0
    seed: int = 0
    loss_verb: bool = True
    loss_noun: bool = True
    loss_action: bool = False
    loss_aux_short_term: bool = False
    decode_mode: str = "sample"
    num_candidates: int = 5
    use_interaction: bool = True
    learnable_content_queries: bool = False
    query_self_attention: bool = True
    memory_pos_encoding: bool = False
    scan_method: str = "sequential"
    dtype: str = "float64"

    def __post_init__(self):
        if not (self.loss_verb or self.loss_noun):
            raise ConfigError("at least one of loss_verb / loss_noun must be enabled")
        if self.decode_mode not in ("sample", "argmax"):
            raise ConfigError(f"decode_mode must be 'sample' or 'argmax', got {self.decode_mode!r}")
        if self.short_len < 1 or self.long_len < 0 or self.num_future < 1:
            raise ConfigError("need short_len >= 1, long_len >= 0, num_future >= 1")
        if self.scan_method not in ("sequential", "parallel"):
            raise ConfigError(f"unknown scan_method {self.scan_method!r}")

    @classmethod
    def full_scale(cls, **overrides) -> TrainConfig:
        """Hidden size 1024, 4+4 layers, 64 s / 30 s memories, 20 future actions, batch 128, lr 1e-4."""
        base = dict(
            d_model=1024, d_input=2048, num_future=20, long_len=120, short_len=56,
            batch_size=128, lr=1e-4,
        )
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes) -> TrainConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass
class DataConfig:
    """Synthetic world and dataset generation settings."""

    num_verbs: int = 12
    num_nouns: int = 24
    sparsity: float = 0.2
    d_input: int = 32
    noise_std: float = 1.0
    successors: int = 2
    leak: float = 0.05
    two_stream: bool = False
    train_clips: int = 500
    val_clips: int = 100
    cuts_per_clip: int = 1
    long_len: int = 48
    short_len: int = 24
    num_future: int = 8
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _coerce(value: str, kind) -> Any:
    if kind is bool:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    return kind(value)


def parse_config_text(text: str) -> dict[str, str]:
    """``key = value`` per line; ``#`` starts a comment."""
    out = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def build(cls, values: Mapping[str, Any], strict: bool = False):
    """Instantiate ``cls`` from string or typed values, ignoring unknown keys unless ``strict``."""
    hints = get_type_hints(cls)
    names = {f.name for f in fields(cls)}
    unknown = set(values) - names
    if strict and unknown:
        raise ConfigError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    kwargs = {}
    for key, value in values.items():
        if key in names:
            kwargs[key] = _coerce(value, hints[key]) if isinstance(value, str) else value
    return cls(**kwargs)


def load_config(path: str | Path | None, overrides: Mapping[str, Any] | None = None) -> tuple[TrainConfig, DataConfig]:
    """Read both configs from one file; every key must belong to at least one of them."""
    values: dict[str, Any] = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    values.update(overrides or {})
    known = {f.name for f in fields(TrainConfig)} | {f.name for f in fields(DataConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    return build(TrainConfig, values), build(DataConfig, values)


def write_config(path: str | Path, config) -> None:
    lines = [f"{k} = {v}" for k, v in config.to_dict().items()]
    Path(path).write_text("\n".join(lines) + "\n")
