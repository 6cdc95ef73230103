"""Run configuration as a sectioned key=value (INI) file.

Example::

    [data]
    root = data/train

    [model]
    input_size = 64
    stage_channels = 16, 32, 64, 128

    [train]
    epochs = 240
    batch_size = 3
    lr = 2e-05
"""

import configparser
from dataclasses import asdict, dataclass, field, fields

from .losses import LossWeights
from .model import ModelConfig


@dataclass
class TrainConfig:
    epochs: int = 240
    batch_size: int = 3
    lr: float = 2e-5
    seed: int = 0
    hflip: bool = True
    crop: bool = True
    rotate: bool = True
    lr_segments: int = 3  # equal epoch segments; lr drops tenfold at each boundary

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")


@dataclass
class DataConfig:
    root: str = ""
    val_root: str = ""


@dataclass
class Config:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    train: TrainConfig = field(default_factory=TrainConfig)


SECTIONS = {"data": DataConfig, "model": ModelConfig, "loss": LossWeights, "train": TrainConfig}


def _format(value):
    if isinstance(value, (tuple, list)):
        return ", ".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(raw, default):
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
            raise ValueError(f"not a boolean: {raw!r}")
        return low in ("true", "1", "yes", "on")
    if isinstance(default, tuple):
        return tuple(int(v) for v in raw.replace(",", " ").split())
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def from_text(text):
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(text)
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ValueError(f"unknown config sections {unknown}; expected {sorted(SECTIONS)}")
    parts = {}
    for name, cls in SECTIONS.items():
        defaults = cls()
        known = {f.name for f in fields(cls)}
        values = {}
        if parser.has_section(name):
            for key, raw in parser.items(name):
                if key not in known:
                    raise ValueError(f"[{name}] has no key {key!r}; valid keys: {sorted(known)}")
                values[key] = _parse(raw, getattr(defaults, key))
        parts[name] = cls(**values)
    return Config(**parts)


def load(path):
    with open(path) as fh:
        return from_text(fh.read())


def to_text(cfg):
    parser = configparser.ConfigParser(interpolation=None)
    for name in SECTIONS:
        section = getattr(cfg, name)
        parser[name] = {k: _format(v) for k, v in asdict(section).items()}
    lines = []
    for name in SECTIONS:
        lines.append(f"[{name}]")
        lines += [f"{k} = {v}" for k, v in parser[name].items()]
        lines.append("")
    return "\n".join(lines)


def dump(cfg, path):
    with open(path, "w") as fh:
        fh.write(to_text(cfg))
