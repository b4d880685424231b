"""Flat ``key = value`` configuration text.

One entry per line, ``#`` starts a comment, keys may carry a dotted section
prefix (``model.a``, ``estimator.grid_size``, ...).  Values stay strings until
a consumer converts them.
"""
from __future__ import annotations

from .errors import ConfigError


def parse_kv(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def dump_kv(mapping):
    return "".join(f"{k} = {v}\n" for k, v in mapping.items())


def section(mapping, name):
    """Entries under ``name.`` with the prefix stripped."""
    prefix = name + "."
    return {k[len(prefix):]: v for k, v in mapping.items() if k.startswith(prefix)}


def parse_list(value, convert=float):
    return [convert(v) for v in value.replace(";", ",").split(",") if v.strip()]
