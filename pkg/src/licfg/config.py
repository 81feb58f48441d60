"""Sectioned ``key = value`` experiment configuration files.

Grammar::

    # comment                 (also ; comments, blank lines ignored)
    [section]                 one of: train, penalty, data, nsize, output
    key = value

Keys may also appear before any section header; they are then looked up in
every section. Unknown keys are rejected. Short hyper-parameter symbols are accepted as
aliases (``B``, ``U``, ``N``, ``M``, ``eta``, ``epsilon_prime``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .cfg import PENALTY_KINDS, PenaltyKind, TrainConfig
from .data import MIXTURES

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NSizeOptions:
    epsilon_hat: float = 0.1
    n_z1: int = 64
    n_probes: int = 4096
    alpha: float = 0.3
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class OutputOptions:
    dir: str = "out"
    timing: bool = False
    n_samples: int = 2000
    sample_seed: int = 12345


@dataclass(frozen=True)
class ConfigFile:
    train: TrainConfig = field(default_factory=TrainConfig)
    dataset: str = "ring"
    nsize: NSizeOptions = field(default_factory=NSizeOptions)
    output: OutputOptions = field(default_factory=OutputOptions)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(" ", "").split(",") if t)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _opt_float(text: str):
    return None if text.lower() in ("none", "") else float(text)


# key -> (section, target field, parser, expected-type word)
_SCHEMA: dict[str, tuple[str, str, object, str]] = {}


def _register(section: str, name: str, parser, kind: str, *aliases: str):
    for key in (name, *aliases):
        _SCHEMA[key] = (section, name, parser, kind)


for _name, _parser, _kind, *_aliases in [
    ("batch_size", int, "integer", "B"),
    ("disc_updates", int, "integer", "U"),
    ("n_gen", int, "integer", "N"),
    ("m_steps", int, "integer", "M"),
    ("eta_m", float, "number"),
    ("delta", float, "number"),
    ("lr", float, "number", "eta"),
    ("g_lr", _opt_float, "number"),
    ("beta1", float, "number"),
    ("beta2", float, "number"),
    ("d_z", int, "integer"),
    ("g_hidden", _ints, "integer list"),
    ("d_hidden", _ints, "integer list"),
    ("g_activation", str, "string"),
    ("d_activation", str, "string"),
    ("epochs", int, "integer"),
    ("seed", int, "integer"),
    ("regression_steps", int, "integer"),
    ("snapshot_interval", int, "integer"),
    ("divergence_threshold", float, "number"),
]:
    _register("train", _name, _parser, _kind, *_aliases)
_register("penalty", "kind", str, "string", "penalty")
_register("penalty", "gamma", float, "number")
_register("penalty", "eps_norm", float, "number", "epsilon_prime")
_register("data", "dataset", str, "string")
for _name, _parser, _kind in [
    ("epsilon_hat", float, "number"),
    ("n_z1", int, "integer"),
    ("n_probes", int, "integer"),
    ("alpha", float, "number"),
    ("seeds", _ints, "integer list"),
]:
    _register("nsize", _name, _parser, _kind)
for _name, _parser, _kind in [
    ("dir", str, "string"),
    ("timing", _bool, "boolean"),
    ("n_samples", int, "integer"),
    ("sample_seed", int, "integer"),
]:
    _register("output", _name, _parser, _kind)

SECTIONS = ("train", "penalty", "data", "nsize", "output")


def parse_config_text(text: str, source: str = "<config>") -> ConfigFile:
    values: dict[str, dict[str, object]] = {s: {} for s in SECTIONS}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{source}: malformed section header at line {lineno}")
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ConfigError(f"{source}: unknown section [{section}] at line {lineno}")
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: expected 'key = value' at line {lineno}")
        key, value = (s.strip() for s in line.split("=", 1))
        spec = _SCHEMA.get(key)
        if spec is None or (section is not None and spec[0] != section):
            where = f"[{section}]" if section else "config"
            raise ConfigError(f"{source}: unknown key {key!r} in {where} at line {lineno}")
        sec, name, parser, kind = spec
        try:
            values[sec][name] = parser(value)
        except ValueError:
            raise ConfigError(f"{source}: expected {kind} at line {lineno} for {key!r}, got {value!r}") from None

    pen = values["penalty"]
    if "kind" in pen and pen["kind"] not in PENALTY_KINDS:
        raise ConfigError(f"{source}: penalty kind must be one of {PENALTY_KINDS}, got {pen['kind']!r}")
    dataset = values["data"].get("dataset", "ring")
    if dataset not in MIXTURES:
        raise ConfigError(f"{source}: unknown dataset {dataset!r}")
    try:
        train = TrainConfig(**values["train"], penalty=PenaltyKind(**pen))
        cfg = ConfigFile(
            train=train,
            dataset=dataset,
            nsize=NSizeOptions(**values["nsize"]),
            output=OutputOptions(**values["output"]),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    log.info("resolved config from %s: %s", source, cfg)
    return cfg


def parse_config(path) -> ConfigFile:
    """Read and validate a config file; every field has a default."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(p.read_text(), str(path))


def override(cfg: ConfigFile, seed: int | None = None, out: str | None = None) -> ConfigFile:
    if seed is not None:
        cfg = replace(cfg, train=replace(cfg.train, seed=seed))
    if out is not None:
        cfg = replace(cfg, output=replace(cfg.output, dir=out))
    return cfg


def render_config(cfg: ConfigFile) -> str:
    """Serialize back to the file grammar (round-trips through parse_config_text)."""
    lines = ["[train]"]
    for f in fields(TrainConfig):
        if f.name == "penalty":
            continue
        v = getattr(cfg.train, f.name)
        if isinstance(v, tuple):
            v = ",".join(map(str, v))
        lines.append(f"{f.name} = {v}")
    p = cfg.train.penalty
    lines += ["", "[penalty]", f"kind = {p.kind}", f"gamma = {p.gamma!r}", f"eps_norm = {p.eps_norm!r}"]
    lines += ["", "[data]", f"dataset = {cfg.dataset}", "", "[nsize]"]
    for f in fields(NSizeOptions):
        v = getattr(cfg.nsize, f.name)
        lines.append(f"{f.name} = {','.join(map(str, v)) if isinstance(v, tuple) else v}")
    lines += ["", "[output]"]
    for f in fields(OutputOptions):
        lines.append(f"{f.name} = {getattr(cfg.output, f.name)}")
    return "\n".join(lines) + "\n"
