"""Declarative configuration for models and training runs.

A run is fully described by a ``TrainConfig`` (optimization knobs plus a
nested ``ModelConfig``).  Configs load from a single JSON file with two
optional sections, ``{"train": {...}, "model": {...}}``, and accept
``section.field=value`` command-line overrides.
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace

ABLATION_PARTS = ("SO", "ADFA", "CVIF")
FOCUS_NORMS = ("l1", "l2", "maxmin")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (maps to CLI exit code 2)."""


@dataclass
class ModelConfig:
    d_word: int = 64
    d_h: int = 128
    d_v: int = 32
    k: int = 8                    # objects per scene
    max_len: int = 12             # question length cap, tokens
    gamma: float = 0.7            # sharpening threshold
    focus_norm: str = "l1"        # renormalization inside the focus update
    renormalize_att: bool = False  # rescale attention before visual pooling
    project_fused: bool = True    # learned projection before guesser dot products
    category_emb: int = 32
    use_so: bool = True           # binary sharpening of question attention
    use_adfa: bool = True         # answer-driven focusing attention
    use_cvif: bool = True         # difference/overall visual fusion

    def validate(self):
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in (0,1), got {self.gamma}")
        if self.focus_norm not in FOCUS_NORMS:
            raise ConfigError(f"focus_norm must be one of {FOCUS_NORMS}, got {self.focus_norm!r}")
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")
        for name in ("d_word", "d_h", "d_v", "max_len", "category_emb"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        return self


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 5
    lr_decay: float = 0.9         # multiplicative, per epoch
    max_rounds: int = 8           # T, QA rounds per game
    ablation: tuple = ()          # subset of ABLATION_PARTS to remove
    seed: int = 0
    rl_episodes: int = 2000
    rl_batch: int = 32            # episodes per policy-gradient update
    clip_norm: float = 5.0
    baseline_decay: float = 0.9   # running-mean reward baseline
    model: ModelConfig = field(default_factory=ModelConfig)

    def validate(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError(f"lr_decay must lie in (0,1], got {self.lr_decay}")
        if self.batch_size < 1 or self.epochs < 0 or self.max_rounds < 1:
            raise ConfigError("batch_size/epochs/max_rounds out of range")
        if self.rl_batch < 1 or self.rl_episodes < 0:
            raise ConfigError("rl_batch/rl_episodes out of range")
        if not 0.0 <= self.baseline_decay < 1.0:
            raise ConfigError(f"baseline_decay must lie in [0,1), got {self.baseline_decay}")
        unknown = set(self.ablation) - set(ABLATION_PARTS)
        if unknown:
            raise ConfigError(f"unknown ablation parts {sorted(unknown)}; "
                              f"valid: {ABLATION_PARTS}")
        self.model.validate()
        return self

    def ablated_model(self):
        """ModelConfig with the configured ablation applied."""
        return apply_ablation(self.model, self.ablation)


def apply_ablation(model_cfg, parts):
    parts = set(parts)
    unknown = parts - set(ABLATION_PARTS)
    if unknown:
        raise ConfigError(f"unknown ablation parts {sorted(unknown)}")
    return replace(model_cfg,
                   use_so=model_cfg.use_so and "SO" not in parts,
                   use_adfa=model_cfg.use_adfa and "ADFA" not in parts,
                   use_cvif=model_cfg.use_cvif and "CVIF" not in parts)


def _coerce(current, raw):
    """Parse a string override according to the current field value's type."""
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        return tuple(p for p in raw.split(",") if p)
    return raw


def _build(section, data):
    known = {f.name for f in fields(section)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    try:
        return replace(section, **{k: tuple(v) if isinstance(v, list) else v
                                   for k, v in data.items()})
    except TypeError as err:
        raise ConfigError(str(err)) from err


def load_config(path=None, overrides=()):
    """TrainConfig from an optional JSON file plus 'a.b=c' overrides."""
    cfg = TrainConfig()
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"config {path} is not valid JSON: {err}") from err
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        extra = set(data) - {"train", "model"}
        if extra:
            raise ConfigError(f"unknown config sections {sorted(extra)}")
        cfg = _build(cfg, data.get("train", {}))
        cfg = replace(cfg, model=_build(cfg.model, data.get("model", {})))
    cfg = apply_overrides(cfg, overrides)
    return cfg.validate()


def apply_overrides(cfg, overrides):
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.field=value")
        key, raw = item.split("=", 1)
        parts = key.split(".")
        if len(parts) == 1:
            parts = ["train", parts[0]]
        if len(parts) != 2 or parts[0] not in ("train", "model"):
            raise ConfigError(f"override key {key!r} must be train.<field> or model.<field>")
        section, name = parts
        target = cfg if section == "train" else cfg.model
        if not hasattr(target, name) or name == "model":
            raise ConfigError(f"unknown config field {key!r}")
        value = _coerce(getattr(target, name), raw)
        if section == "train":
            cfg = replace(cfg, **{name: value})
        else:
            cfg = replace(cfg, model=replace(cfg.model, **{name: value}))
    return cfg


def config_to_json(cfg):
    data = asdict(cfg)
    model = data.pop("model")
    data["ablation"] = list(data["ablation"])
    return {"train": data, "model": model}
