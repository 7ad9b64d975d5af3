"""Run configuration: an INI-style file with sections, plus ``section.key=value`` overrides."""
from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

from .corpus import DEFAULT_MAX_CONTEXT_TURNS, SplitSpec
from .decode import DecodeConfig
from .feedback.judges import JudgeConfig
from .losses import Hyperparams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusSettings:
    source: str = "synthetic"  # "synthetic" | "file"
    path: Optional[str] = None
    n_conversations: int = 200
    max_context_turns: int = DEFAULT_MAX_CONTEXT_TURNS
    max_vocab: int = 200


@dataclass(frozen=True)
class ModelSettings:
    embedding_dim: int = 64
    layer_count: int = 2
    head_count: int = 4
    max_sequence_len: int = 64
    feedforward_dim: int = 128


@dataclass(frozen=True)
class TrainSettings:
    lr: float = 3e-4
    epochs: int = 30
    batch_size: int = 16


@dataclass(frozen=True)
class RefineSettings:
    batch_size: int = 1
    rounds: int = 1


@dataclass(frozen=True)
class EvalSettings:
    embeddings: Optional[str] = None
    ten_responses: bool = False
    resamples: int = 1000


@dataclass(frozen=True)
class CoherenceSettings:
    n_base_pairs: int = 400


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    workdir: str = "run"
    corpus: CorpusSettings = CorpusSettings()
    split: SplitSpec = SplitSpec()
    model: ModelSettings = ModelSettings()
    train: TrainSettings = TrainSettings()
    hyperparams: Hyperparams = Hyperparams()
    refine: RefineSettings = RefineSettings()
    decode: DecodeConfig = DecodeConfig()
    judge: JudgeConfig = JudgeConfig()
    eval: EvalSettings = EvalSettings()
    coherence: CoherenceSettings = CoherenceSettings()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split"]["ratios"] = list(d["split"]["ratios"])
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def path(self, name: str) -> str:
        return os.path.join(self.workdir, ARTIFACTS[name])


ARTIFACTS = {
    "corpus": "corpus.jsonl",
    "tokenizer": "tokenizer.json",
    "base": "base.ckpt",
    "candidates": "candidates.jsonl",
    "cache": "feedback_cache.jsonl",
    "feedback": "feedback.jsonl",
    "refined": "refined.ckpt",
    "refine_report": "refine_report.json",
    "loss_log": "loss_log.jsonl",
    "eval_report": "eval_report.json",
    "eval_table": "eval_report.txt",
    "coherence": "coherence.jsonl",
    "lock": ".lock",
}

# config section -> RunConfig attribute
SECTIONS = {
    "corpus": "corpus", "split": "split", "model": "model", "train": "train",
    "hyperparams": "hyperparams", "refine": "refine", "decode": "decode",
    "judge": "judge", "eval": "eval", "coherence": "coherence",
}


def _field_name(cls, key: str) -> str:
    """Config keys are case-insensitive (the INI reader lowercases them)."""
    names = {f.name.lower(): f.name for f in fields(cls)}
    if key.lower() not in names:
        raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
    return names[key.lower()]


def _coerce(cls, name: str, raw: str):
    f = {x.name: x for x in fields(cls)}[name]
    default = getattr(cls(), name)
    t = str(f.type)
    try:
        if name == "ratios":
            return tuple(float(x) for x in raw.split(","))
        if raw.lower() in ("none", "") and ("Optional" in t or default is None):
            return None
        if isinstance(default, bool) or "bool" in t:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int) or t == "int":
            return int(raw)
        if isinstance(default, float) or t == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {cls.__name__}.{name}") from None


def load_config(path: Optional[str] = None, overrides: Sequence[str] = (), seed: Optional[int] = None) -> RunConfig:
    """Read ``path`` (if given) then apply ``section.key=value`` overrides; flags win."""
    values: dict[str, dict[str, str]] = {}
    top: dict[str, str] = {}
    if path is not None:
        if not os.path.exists(path):
            raise FileNotFoundError(path)
        cp = configparser.ConfigParser()
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as e:
            raise ConfigError(f"cannot parse {path}: {e}") from None
        for sec in cp.sections():
            if sec == "run":
                top.update(cp[sec])
            elif sec in SECTIONS:
                values.setdefault(sec, {}).update(cp[sec])
            else:
                raise ConfigError(f"unknown section [{sec}]")
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {ov!r}")
        key, val = ov.split("=", 1)
        sec, name = key.split(".", 1)
        if sec == "run":
            top[name] = val
        elif sec in SECTIONS:
            values.setdefault(sec, {})[name] = val
        else:
            raise ConfigError(f"unknown section {sec!r}")
    base = RunConfig()
    kwargs = {}
    for k, v in top.items():
        if k == "seed":
            kwargs["seed"] = _coerce(RunConfig, "seed", v)
        elif k == "workdir":
            kwargs["workdir"] = v
        else:
            raise ConfigError(f"unknown key {k!r} in [run]")
    if seed is not None:
        kwargs["seed"] = seed
    run_seed = kwargs.get("seed", base.seed)
    for sec, attr in SECTIONS.items():
        cls = type(getattr(base, attr))
        given = {}
        for k, v in values.get(sec, {}).items():
            k = _field_name(cls, k)
            given[k] = _coerce(cls, k, v)
        # sub-configs that carry their own seed follow the run seed unless set explicitly
        if "seed" in {f.name for f in fields(cls)} and "seed" not in given:
            given["seed"] = run_seed
        try:
            kwargs[attr] = cls(**{**asdict(getattr(base, attr)), **given}) if given else getattr(base, attr)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"[{sec}] {e}") from None
    return RunConfig(**kwargs)
