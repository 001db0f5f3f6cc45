"""Run configuration files (INI syntax) for ``tlps train``.

Sections: [env] vehicle parameters, [spec] path of the TLTL spec file
(relative paths resolve against the config file), [train] search settings,
[output] directory and dump flags. Unknown sections or keys are errors.
"""
from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass
from typing import Tuple

from .env import Rect, VehicleConfig
from .search import ConfigError, TrainConfig


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs"
    wall_clock: bool = True
    dump_trajectories: bool = False


@dataclass(frozen=True)
class RunConfig:
    env: VehicleConfig
    spec_path: str
    train: TrainConfig
    output: OutputConfig
    source: str = ""


def _floats(text: str) -> Tuple[float, ...]:
    parts = text.replace(",", " ").split()
    return tuple(float(p) for p in parts)


def _goals(text: str) -> Tuple[Rect, ...]:
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            v = _floats(chunk)
            if len(v) != 4:
                raise ValueError(f"goal needs 4 numbers (x_lo x_hi y_lo y_hi), got {len(v)}")
            out.append(Rect(*v))
    return tuple(out)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _converter(field: dataclasses.Field, section: str):
    if section == "env" and field.name == "goals":
        return _goals
    if section == "env" and field.name == "obstacle_center":
        return _floats
    t = str(field.type)
    if "Tuple" in t:
        return _floats
    if t == "bool":
        return _bool
    if t == "int":
        return int
    if t == "float":
        return float
    return str


def _section_kwargs(cp, section: str, cls) -> dict:
    if not cp.has_section(section):
        return {}
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kw = {}
    for key, raw in cp.items(section):
        if key not in fields:
            raise ConfigError(f"[{section}] unknown key '{key}'")
        try:
            kw[key] = _converter(fields[key], section)(raw)
        except ValueError as e:
            raise ConfigError(f"[{section}] {key}: {e}") from None
    return kw


def _build(cls, section: str, kw: dict):
    try:
        return cls(**kw)
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(f"[{section}] {e}") from None


_SECTIONS = ("env", "spec", "train", "output")


def load_config(path) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str  # keys are case-sensitive (N, T, L)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {' '.join(str(e).split())}") from None
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")

    if not cp.has_option("spec", "file"):
        raise ConfigError("[spec] file is required")
    extra = [k for k in cp.options("spec") if k != "file"]
    if extra:
        raise ConfigError(f"[spec] unknown key '{extra[0]}'")
    spec_path = cp.get("spec", "file")
    if not os.path.isabs(spec_path):
        spec_path = os.path.join(os.path.dirname(os.path.abspath(path)), spec_path)

    train_kw = _section_kwargs(cp, "train", TrainConfig)
    env_kw = _section_kwargs(cp, "env", VehicleConfig)
    if "horizon" in env_kw:
        raise ConfigError("[env] horizon is taken from [train] T")
    train = _build(TrainConfig, "train", train_kw)
    env = _build(VehicleConfig, "env", dict(env_kw, horizon=train.T))
    output = _build(OutputConfig, "output", _section_kwargs(cp, "output", OutputConfig))
    return RunConfig(env, spec_path, train, output, source=os.path.abspath(path))


def with_overrides(cfg: RunConfig, seed=None, beta=None, out=None, dump=None) -> RunConfig:
    train = cfg.train
    if seed is not None:
        train = dataclasses.replace(train, seed=seed)
    if beta is not None:
        train = dataclasses.replace(train, beta=beta)
    output = cfg.output
    if out is not None:
        output = dataclasses.replace(output, directory=out)
    if dump:
        output = dataclasses.replace(output, dump_trajectories=True)
    return dataclasses.replace(cfg, train=train, output=output)
