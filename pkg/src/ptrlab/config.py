"""Flat ``key = value`` configuration files.

One setting per line, ``#`` or ``;`` starts a comment. Keys are shared by
the annotation pipeline and the training harness; each consumer picks
the keys it knows and the rest are validated against the full key set.
"""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path
from typing import Dict, Optional

from .prosody import AnalysisConfig
from .toyenv import TrainingConfig


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


_ANALYSIS_KEYS = {f.name: f.type for f in dataclasses.fields(AnalysisConfig)}
_TRAINING_KEYS = {
    "seed": int,
    "steps": int,
    "batch_queries": int,
    "noise_eps": float,
    "emotions": "emotions",
    "group_size": int,
    "kl_coefficient": float,
    "learning_rate": float,
    "std_floor": float,
    "alpha_f": float,
    "alpha_o": float,
    "alpha_t": float,
    "w1": float,
    "w2": float,
    "w3": float,
    "w4": float,
    "gate_window": int,
    "gate_threshold": float,
    "progressive": bool,
    "trust_enabled": bool,
    "adversarial": bool,
}
KNOWN_KEYS = set(_ANALYSIS_KEYS) | set(_TRAINING_KEYS)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_config_text(text: str) -> Dict[str, str]:
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",)
    )
    parser.optionxform = str
    try:
        parser.read_string("[settings]\n" + text)
    except configparser.Error as exc:
        raise ConfigError("syntax", str(exc).splitlines()[0]) from None
    raw = dict(parser["settings"])
    for key in raw:
        if key not in KNOWN_KEYS:
            raise ConfigError(key, "unknown configuration key")
    return raw


def load_config(path) -> Dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text)


def _convert(key: str, kind, value: str):
    value = value.strip()
    try:
        if kind in (int, "int"):
            return int(value)
        if kind in (float, "float"):
            return float(value)
        if kind in (bool, "bool"):
            low = value.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(value)
        if kind == "emotions":
            from .toyenv import DEFAULT_EMOTIONS, PROTOTYPES_9

            if value.isdigit():
                n = int(value)
                if n == 4:
                    return DEFAULT_EMOTIONS
                if n == 9:
                    return tuple(PROTOTYPES_9)
                raise ValueError("emotion count must be 4 or 9")
            return tuple(v.strip() for v in value.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(key, f"invalid value {value!r} ({exc})") from None
    raise ConfigError(key, f"unsupported type {kind}")


def analysis_config(raw: Optional[Dict[str, str]] = None) -> AnalysisConfig:
    raw = raw or {}
    kwargs = {k: _convert(k, _ANALYSIS_KEYS[k], v) for k, v in raw.items() if k in _ANALYSIS_KEYS}
    try:
        return AnalysisConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError("analysis", str(exc)) from None


def training_config(raw: Optional[Dict[str, str]] = None, **overrides) -> TrainingConfig:
    raw = raw or {}
    kwargs = {k: _convert(k, _TRAINING_KEYS[k], v) for k, v in raw.items() if k in _TRAINING_KEYS}
    weights = [kwargs.pop(f"w{j}", None) for j in range(1, 5)]
    if any(w is not None for w in weights):
        if any(w is None for w in weights):
            raise ConfigError("w1..w4", "all four reasoning weights must be given together")
        kwargs["reasoning_weights"] = tuple(weights)
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return TrainingConfig(**kwargs)
    except ValueError as exc:
        key, _, message = str(exc).partition(":")
        raise ConfigError(key, message.strip()) from None
