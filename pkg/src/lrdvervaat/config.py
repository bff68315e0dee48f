"""Flat INI-style experiment configuration.

Sections mirror the package modules; every key is optional and command-line
flags override file values. Example::

    [lrd_model]
    beta = 0.7
    slowly_varying = constant        ; or log_power
    slowly_varying_value = 1.0
    truncation_factor = 16           ; M = factor * largest n (ignored if truncation_m is set)
    innovations = standard_normal
    variance = 1.0

    [montecarlo]
    n_list = 4096, 16384, 65536
    R = 200
    master_seed = 12345
    ks_alpha = 0.01
    trend_factor = 1.5
    location_fraction = 0.8
    C_delta = 1.0
    locations = 0.2, 0.35, 0.5, 0.65, 0.8

    [marginals]
    family = gaussian
    mu = 0.1
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

SCHEMA = {
    "lrd_model": {
        "beta": float, "slowly_varying": str, "slowly_varying_value": float, "truncation_m": int,
        "truncation_factor": int, "innovations": str, "variance": float, "n": int, "seed": int,
        "tail_eps": float,
    },
    "montecarlo": {
        "theorem": str, "n_list": "intlist", "R": int, "master_seed": int, "ks_alpha": float,
        "trend_factor": float, "location_fraction": float, "bounded_factor": float,
        "sign_flip_factor": float, "C_delta": float, "locations": "floatlist",
        "thm14_prefactor": float, "threads": int,
    },
    "marginals": {"family": str, "mu": float, "sigma": float, "alpha": float, "delta": float,
                  "levels": int, "condition": str},
    "asymptotics": {"n": int, "C_delta": float},
}


class ConfigError(ValueError):
    """Bad config file or value; the message names the section, field and line where known."""


@dataclass(frozen=True)
class Setting:
    value: object
    source: str


def _convert(kind, raw: str, where: str):
    try:
        if kind == "intlist":
            return tuple(int(float(v)) for v in raw.replace(";", ",").split(",") if v.strip())
        if kind == "floatlist":
            return tuple(float(v) for v in raw.replace(";", ",").split(",") if v.strip())
        if kind is int:
            return int(float(raw))
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} ({exc})") from None


def _line_of(path: str, section: str, key: str) -> int | None:
    current = None
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            s = line.strip()
            if s.startswith("[") and s.endswith("]"):
                current = s[1:-1].strip()
            elif current == section and "=" in s and s.split("=", 1)[0].strip().lower() == key.lower():
                return no
    return None


def load_config(path: str) -> dict:
    """Parse ``path`` into ``{section: {key: value}}`` with typed values."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out: dict = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        fields = {k.lower(): (k, t) for k, t in SCHEMA[section].items()}
        for key, raw in parser.items(section):
            if key.lower() not in fields:
                line = _line_of(path, section, key)
                raise ConfigError(f"{path}:{line}: unknown field {section}.{key}")
            name, kind = fields[key.lower()]
            line = _line_of(path, section, key)
            out.setdefault(section, {})[name] = _convert(kind, raw, f"{path}:{line}: field {section}.{name}")
    return out


def merged(file_values: dict, section: str, key: str, flag_value, default=None):
    """Flag beats file beats default."""
    if flag_value is not None:
        return flag_value
    return file_values.get(section, {}).get(key, default)
