"""Plain-text ``key = value`` run configuration.

One pair per line; ``#`` starts a comment. Keys are the field names of
:class:`~dimenet.model.ModelConfig`, :class:`~dimenet.basis.BasisConfig`
(``c`` may also be written ``cutoff``), :class:`~dimenet.train.TrainConfig`
and a few data options. Unset keys keep their defaults.
"""

from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .basis import BasisConfig
from .exceptions import ConfigError, ContractError
from .model import ModelConfig
from .train import TrainConfig


@dataclass(frozen=True)
class DataConfig:
    targets: tuple = ("energy",)
    unit_scale: float = 1.0
    val_fraction: float = 0.1
    atomref: Optional[str] = None  # "fit" or None


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)


_ALIASES = {"cutoff": "c"}


def _field_types(cls):
    return {f.name: f.type for f in fields(cls)}


_SECTIONS = {
    "basis": {k: t for k, t in _field_types(BasisConfig).items()},
    "model": {k: t for k, t in _field_types(ModelConfig).items() if k != "basis"},
    "train": _field_types(TrainConfig),
    "data": _field_types(DataConfig),
}


def known_keys():
    return sorted({k for sec in _SECTIONS.values() for k in sec} | set(_ALIASES))


def _convert(key, raw, typ):
    name = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    try:
        if name == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if name == "int":
            return int(raw.replace("_", ""))
        if name == "float":
            return float(raw)
        if name == "tuple":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if raw.lower() in ("none", ""):
            return None
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r} (expected {name})") from None


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines into a dict of section -> {field: value}."""
    out = {sec: {} for sec in _SECTIONS}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        name = _ALIASES.get(key, key)
        for sec, types in _SECTIONS.items():
            if name in types:
                if name in out[sec]:
                    raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
                out[sec][name] = _convert(key, raw, types[name])
                break
        else:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
    return out


def build_run_config(values):
    try:
        basis = BasisConfig(**values["basis"])
        model = ModelConfig(basis=basis, **values["model"])
        train = TrainConfig(**values["train"])
        data = DataConfig(**values["data"])
    except ContractError as exc:
        raise ConfigError(str(exc)) from None
    if len(data.targets) != model.num_targets:
        model = replace(model, num_targets=len(data.targets))
    return RunConfig(model, train, data)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return build_run_config(parse_config_text(fh.read(), str(path)))


def format_config(run):
    """Render a :class:`RunConfig` back to ``key = value`` text."""
    lines = []
    for sec, obj in (("basis", run.model.basis), ("model", run.model),
                     ("train", run.train), ("data", run.data)):
        lines.append(f"# {sec}")
        for name in _SECTIONS[sec]:
            v = getattr(obj, name)
            if isinstance(v, tuple):
                v = ",".join(v)
            lines.append(f"{name} = {v}")
    return "\n".join(lines) + "\n"
