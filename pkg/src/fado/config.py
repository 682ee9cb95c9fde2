"""Run configuration: flat dotted keys (train.learning_rate, dcr.alpha, ...).

Values come from, in increasing precedence: dataclass defaults, a YAML or
JSON config file, FADO_* environment variables (paths only) and --set
KEY=VALUE flags.
"""
import dataclasses
import json
import os
import typing
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .dcr import FlowConfig
from .encoders import EncoderConfig
from .generator import DecodingConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class CorpusConfig:
    max_history_tokens: int = 256
    vocab_size: int = 8000
    split_ratios: str = "0.8,0.1,0.1"
    missing_strategy: str = "reject"
    conversation_mode: str = "centered"
    fail_fast: bool = False

    def ratios(self):
        try:
            vals = tuple(float(x) for x in self.split_ratios.split(","))
        except ValueError:
            raise ConfigError(f"corpus.split_ratios must be three comma-separated numbers") from None
        return vals


@dataclass
class ModelOptions:
    mlp_layers: int = 1
    dictionary_mode: str = "description"


@dataclass
class Ablations:
    """Component switches matching the ablation study rows."""
    no_strategy_history: bool = False
    no_emotion: bool = False
    no_tl_feedback: bool = False
    no_cl_feedback: bool = False
    no_s2c: bool = False
    no_c2s: bool = False
    no_dictionary: bool = False


@dataclass
class Paths:
    corpus: Optional[str] = None
    schema: Optional[str] = None
    splits: Optional[str] = None
    dictionary: Optional[str] = None
    checkpoint: Optional[str] = None
    predictions: Optional[str] = None
    input: Optional[str] = None
    output_dir: str = "runs/out"


PATH_ENV = {
    "corpus": "FADO_CORPUS",
    "schema": "FADO_SCHEMA",
    "splits": "FADO_SPLITS",
    "dictionary": "FADO_DICTIONARY",
    "checkpoint": "FADO_CHECKPOINT",
    "predictions": "FADO_PREDICTIONS",
    "output_dir": "FADO_OUTPUT_DIR",
}

ALIASES = {
    "train.lr": "train.learning_rate",
    "dcr.alpha": "train.alpha",
    "dcr.beta": "train.beta",
    "feedback.mu": "train.mu",
    "feedback.conversation_mode": "corpus.conversation_mode",
    "dfs.mlp_layers": "model.mlp_layers",
}


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decode: DecodingConfig = field(default_factory=DecodingConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    model: ModelOptions = field(default_factory=ModelOptions)
    ablation: Ablations = field(default_factory=Ablations)
    paths: Paths = field(default_factory=Paths)

    def flat(self):
        return flatten(asdict(self))

    def flow(self):
        a = self.ablation
        return FlowConfig(alpha=0.0 if a.no_s2c else self.train.alpha, beta=0.0 if a.no_c2s else self.train.beta)

    def dictionary_mode(self):
        return "token" if self.ablation.no_dictionary else self.model.dictionary_mode


def flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(value, tp, key):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None or (isinstance(value, str) and value.lower() in ("none", "null", "")):
            return None
        return _coerce(value, args[0], key)
    try:
        if tp is bool:
            if isinstance(value, bool):
                return value
            s = str(value).lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if tp is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(float(value)) if isinstance(value, str) and "e" in value.lower() else int(value)
        if tp is float:
            return float(value)
        if tp is str:
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot interpret {value!r} as {tp.__name__}") from None
    return value


def _field_types(cls):
    return {f.name: f.type if not isinstance(f.type, str) else eval(f.type, vars(typing)) for f in dataclasses.fields(cls)}


def build_config(values):
    """Build a validated RunConfig from a flat {dotted.key: value} mapping."""
    sections = {f.name: f.default_factory for f in dataclasses.fields(RunConfig)}
    raw = {name: {} for name in sections}
    for key, value in values.items():
        key = ALIASES.get(key, key)
        if "." not in key:
            raise ConfigError(f"config key {key!r} needs a namespace (e.g. train.{key})")
        section, name = key.split(".", 1)
        if section not in sections:
            raise ConfigError(f"unknown config namespace {section!r}")
        cls = type(sections[section]())
        types = _field_types(cls)
        if name not in types:
            raise ConfigError(f"unknown config key {key!r}")
        raw[section][name] = _coerce(value, types[name], key)
    try:
        parts = {name: type(factory())(**raw[name]) for name, factory in sections.items()}
        cfg = RunConfig(**parts)
        cfg.flow()
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    if cfg.corpus.missing_strategy not in ("reject", "others"):
        raise ConfigError("corpus.missing_strategy must be 'reject' or 'others'")
    if cfg.corpus.conversation_mode not in ("centered", "sum"):
        raise ConfigError("corpus.conversation_mode must be 'centered' or 'sum'")
    if cfg.model.dictionary_mode not in ("description", "token"):
        raise ConfigError("model.dictionary_mode must be 'description' or 'token'")
    ratios = cfg.corpus.ratios()
    if len(ratios) != 3 or abs(sum(ratios) - 1) > 1e-9 or min(ratios) < 0:
        raise ConfigError("corpus.split_ratios must be three non-negative numbers summing to 1")
    return cfg


def read_config_file(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return flatten(data)


def load_config(path=None, overrides=(), env=None):
    """Merge file values, path env vars and KEY=VALUE overrides."""
    env = os.environ if env is None else env
    values = read_config_file(path) if path else {}
    for name, var in PATH_ENV.items():
        if env.get(var):
            values[f"paths.{name}"] = env[var]
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        k, v = item.split("=", 1)
        values[k.strip()] = yaml.safe_load(v) if v.strip() else v
    return build_config(values)
