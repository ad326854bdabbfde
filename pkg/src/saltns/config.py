"""INI run configuration validated against the shipped schema."""
from __future__ import annotations

import configparser
import json
import secrets
from dataclasses import dataclass, fields
from importlib import resources
from typing import Dict, Optional, Tuple

from .sde import ConfigError, SdeConfig

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def load_schema() -> dict:
    with resources.files("saltns.data").joinpath("config_schema.json").open() as fh:
        return json.load(fh)


@dataclass
class RunConfig:
    sde: SdeConfig
    members: int
    workers: int
    seed_generated: bool
    echo: Dict[str, Dict[str, str]]

    def to_ini(self) -> str:
        """Canonical INI text that reproduces this run (seed included)."""
        lines = []
        for section, items in self.echo.items():
            lines.append(f"[{section}]")
            lines += [f"{k} = {v}" for k, v in items.items()]
            lines.append("")
        return "\n".join(lines)


def _parse_value(section: str, key: str, raw: str, spec: dict):
    name = f"{section}.{key}"
    kind = spec["type"]
    raw = raw.strip()
    try:
        if kind == "int":
            val = int(raw)
        elif kind == "float":
            val = float(raw)
        elif kind == "bool":
            low = raw.lower()
            if low not in _TRUE | _FALSE:
                raise ValueError
            val = low in _TRUE
        elif kind == "choice":
            if raw not in spec["choices"]:
                raise ConfigError(name, f"expected one of {', '.join(spec['choices'])}; got {raw!r}")
            val = raw
        elif kind == "floats":
            val = tuple(float(x) for x in raw.split(",") if x.strip())
        elif kind == "pairs":
            items = [x for x in raw.split(",") if x.strip()]
            val = tuple((int(i.split(":")[0]), float(i.split(":")[1])) for i in items)
        else:
            raise ConfigError(name, f"schema type {kind!r} unsupported")
    except ConfigError:
        raise
    except (ValueError, IndexError):
        expect = {"int": "an integer", "float": "a number", "bool": "true or false",
                  "floats": "comma-separated numbers", "pairs": "index:coefficient items"}[kind]
        raise ConfigError(name, f"expected {expect}; got {raw!r}") from None
    if "min" in spec and val is not None and kind == "int" and val < spec["min"]:
        raise ConfigError(name, f"must be at least {spec['min']}; got {val}")
    if "max" in spec and kind == "int" and val > spec["max"]:
        raise ConfigError(name, f"must be at most {spec['max']}; got {val}")
    return val


def _canonical(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    if isinstance(val, tuple):
        if val and isinstance(val[0], tuple):
            return ", ".join(f"{i}:{c!r}" for i, c in val)
        return ", ".join(repr(float(x)) for x in val)
    return str(val)


def parse_config(text: str, seed: Optional[int] = None) -> RunConfig:
    """Parse INI text; errors name the offending ``section.key``."""
    schema = load_schema()["sections"]
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", f"malformed INI: {exc}") from None
    for section in cp.sections():
        if section not in schema:
            raise ConfigError(section, f"unknown section; accepted: {', '.join(schema)}")
        for key in cp[section]:
            if key not in schema[section]:
                raise ConfigError(f"{section}.{key}",
                                  f"unknown key; accepted: {', '.join(schema[section])}")
    values, echo = {}, {}
    sde_names = {f.name for f in fields(SdeConfig)}
    for section, keys in schema.items():
        echo[section] = {}
        for key, spec in keys.items():
            if cp.has_option(section, key):
                val = _parse_value(section, key, cp[section][key], spec)
            else:
                default = spec["default"]
                val = _parse_value(section, key, _canonical(default) if not isinstance(default, str) else default,
                                   spec) if default is not None else None
            values[(section, key)] = val
    seed_generated = False
    master = values[("run", "seed")] if seed is None else seed
    if master is None:
        master = secrets.randbits(63)
        seed_generated = True
    kwargs = {}
    for (section, key), val in values.items():
        field = schema[section][key].get("field", key)
        if section == "run":
            continue
        if field in sde_names:
            kwargs[field] = val
    kwargs["seed"] = int(master)
    try:
        sde = SdeConfig(**kwargs)
    except ConfigError as exc:
        section = next((s for s, ks in schema.items() for k, spec in ks.items()
                        if spec.get("field", k) == exc.key), None)
        if section is not None:
            key = next(k for k, spec in schema[section].items() if spec.get("field", k) == exc.key)
            raise ConfigError(f"{section}.{key}", str(exc).split(": ", 1)[-1]) from None
        raise
    for (section, key), val in values.items():
        if val is not None:
            echo[section][key] = _canonical(val)
    echo["run"]["seed"] = str(master)
    return RunConfig(sde, int(values[("run", "members")]), int(values[("run", "workers")]), seed_generated, echo)


def load_config(path: str, seed: Optional[int] = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, seed)


def shipped_config(name: str = "minimal_torus.ini") -> str:
    return resources.files("saltns.data").joinpath(name).read_text()
