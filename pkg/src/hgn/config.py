"""Flat `key = value` run configuration.

Files are UTF-8 text, one assignment per line, # starts a comment (whole line
or trailing after whitespace).  Window sizes are comma lists, e.g.
`gang.windows = 3,5,7`.  parse(write(cfg)) == cfg round-trips exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError
from .fusion import FUSION_MODES
from .gang import CELL_KINDS
from .hero import POSITION_MODES


@dataclass
class RunConfig:
    hero_variant: str = "trainable"
    hero_d_model: int = 64
    hero_n_layers: int = 2
    hero_n_heads: int = 4
    hero_d_ff: int = 128
    hero_max_len: int = 512
    hero_position_mode: str = "sinusoidal"
    hero_frozen_train: str = ""
    hero_frozen_dev: str = ""
    hero_frozen_test: str = ""
    gang_enabled: bool = True
    gang_windows: tuple[int, ...] = (3, 5, 7)
    gang_cell: str = "lstm"
    fusion_mode: str = "dot"
    fusion_scale_scores: bool = False
    fusion_mlp_tanh: bool = False
    train_lr: float = 1e-3
    train_batch_size: int = 32
    train_epochs: int = 20
    train_seed: int = 0
    train_on_dev: bool = False
    train_clip_norm: float = 5.0
    train_dropout: float = 0.0
    train_weight_decay: float = 0.0
    train_lr_decay: str = "none"
    data_train: str = ""
    data_dev: str = ""
    data_test: str = ""
    data_min_count: int = 1
    out_dir: str = "run"

    def validate(self) -> None:
        if self.hero_variant not in ("trainable", "frozen"):
            raise ConfigError(f"hero.variant must be trainable or frozen, got {self.hero_variant!r}")
        if self.hero_d_model < 2 or self.hero_d_model % 2 != 0:
            raise ConfigError(f"hero.d_model must be even and >= 2, got {self.hero_d_model}")
        if self.hero_n_layers < 0:
            raise ConfigError(f"hero.n_layers must be >= 0, got {self.hero_n_layers}")
        if self.hero_n_heads < 1 or self.hero_d_model % self.hero_n_heads != 0:
            raise ConfigError("hero.n_heads must divide hero.d_model")
        if self.hero_position_mode not in POSITION_MODES:
            raise ConfigError(f"hero.position_mode must be one of {POSITION_MODES}")
        if self.gang_enabled:
            if not self.gang_windows:
                raise ConfigError("gang.windows must not be empty when the gang is enabled")
            if any(w < 1 or w % 2 == 0 for w in self.gang_windows):
                raise ConfigError(f"gang.windows must be odd, got {self.gang_windows}")
            if list(self.gang_windows) != sorted(set(self.gang_windows)):
                raise ConfigError(f"gang.windows must be strictly increasing, got {self.gang_windows}")
            if self.gang_cell not in CELL_KINDS:
                raise ConfigError(f"gang.cell must be one of {CELL_KINDS}")
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(f"fusion.mode must be one of {FUSION_MODES}")
        if self.train_lr <= 0:
            raise ConfigError(f"train.lr must be > 0, got {self.train_lr}")
        if self.train_batch_size < 1:
            raise ConfigError(f"train.batch_size must be >= 1, got {self.train_batch_size}")
        if self.train_epochs < 1:
            raise ConfigError(f"train.epochs must be >= 1, got {self.train_epochs}")
        if not 0.0 <= self.train_dropout < 1.0:
            raise ConfigError(f"train.dropout must be in [0, 1), got {self.train_dropout}")
        if self.train_weight_decay < 0.0:
            raise ConfigError(f"train.weight_decay must be >= 0, got {self.train_weight_decay}")
        if self.train_lr_decay not in ("none", "linear"):
            raise ConfigError(f"train.lr_decay must be none or linear, got {self.train_lr_decay!r}")
        if self.hero_max_len < 1:
            raise ConfigError(f"hero.max_len must be >= 1, got {self.hero_max_len}")
        if self.data_min_count < 1:
            raise ConfigError(f"data.min_count must be >= 1, got {self.data_min_count}")


def _key_of(field_name: str) -> str:
    head, _, rest = field_name.partition("_")
    return f"{head}.{rest}" if rest else head


_FIELDS = {_key_of(f.name): f for f in fields(RunConfig)}


def _parse_value(key: str, raw: str, ftype: str):
    raw = raw.strip()
    if ftype == "int":
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc
    if ftype == "float":
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc
    if ftype == "bool":
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected true/false, got {raw!r}")
    if ftype.startswith("tuple"):
        if not raw:
            return ()
        try:
            return tuple(int(part.strip()) for part in raw.split(","))
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a comma list of integers, got {raw!r}") from exc
    return raw


def _strip_comment(line: str) -> str:
    if line.lstrip().startswith("#"):
        return ""
    for i, ch in enumerate(line):
        if ch == "#" and i > 0 and line[i - 1] in (" ", "\t"):
            return line[:i]
    return line


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        f = _FIELDS[key]
        ftype = "tuple" if f.name == "gang_windows" else f.type
        setattr(cfg, f.name, _parse_value(key, value, ftype))
    cfg.validate()
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def write_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config(write_config(c)) == c."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{_key_of(f.name)} = {text}")
    return "\n".join(lines) + "\n"


def config_to_dict(cfg: RunConfig) -> dict:
    """Flat key -> value mapping (tuples as lists) for JSON payloads."""
    out = {}
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        out[_key_of(f.name)] = list(value) if isinstance(value, tuple) else value
    return out


def config_from_dict(payload: dict) -> RunConfig:
    """Inverse of config_to_dict; unknown keys are an error."""
    cfg = RunConfig()
    for key, value in payload.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        f = _FIELDS[key]
        if f.name == "gang_windows":
            value = tuple(int(v) for v in value)
        setattr(cfg, f.name, value)
    cfg.validate()
    return cfg
