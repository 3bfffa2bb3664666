"""Flat key=value run configuration with environment overrides.

Config files hold one KEY=VALUE pair per line; blank lines and lines
starting with # are ignored. Any key can be overridden by an environment
variable named HGNIDS_<KEY> (upper-cased).
"""

from __future__ import annotations

import os

ENV_PREFIX = "HGNIDS_"


def load_config(path=None, env: dict[str, str] | None = None) -> dict[str, str]:
    values: dict[str, str] = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected KEY=VALUE, got {line!r}")
                key, _, value = line.partition("=")
                values[key.strip().lower()] = value.strip()
    source = os.environ if env is None else env
    for name, value in source.items():
        if name.startswith(ENV_PREFIX):
            values[name[len(ENV_PREFIX):].lower()] = value
    return values


def config_int(cfg: dict[str, str], key: str, default: int) -> int:
    return int(cfg[key]) if key in cfg else default


def config_float(cfg: dict[str, str], key: str, default: float) -> float:
    return float(cfg[key]) if key in cfg else default


def config_bool(cfg: dict[str, str], key: str, default: bool) -> bool:
    if key not in cfg:
        return default
    return cfg[key].strip().lower() in ("1", "true", "yes", "on")
