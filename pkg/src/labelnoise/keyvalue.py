"""Flat ``key = value`` documents with dotted keys.

This is the single human-readable format used for run configs, noise model
files and dataset metadata sidecars::

    # comment
    seed = 7
    generator.n_features = 10
    noise.class.0.t00 = 0.9

Keys are unique; values are kept as strings and converted by the reader.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping


class ConfigError(ValueError):
    """Invalid, missing or unknown configuration key."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def parse(text: str, source: str = "<string>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'", key)
        out[key] = value
    return out


def load(path: str | Path) -> dict[str, str]:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), source=str(path))


def dumps(values: Mapping[str, object]) -> str:
    """Serialize with keys sorted so output is byte-stable."""
    lines = [f"{key} = {format_value(values[key])}" for key in sorted(values)]
    return "\n".join(lines) + "\n"


def dump(values: Mapping[str, object], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(values))


def format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def check_known(values: Mapping[str, str], allowed: Iterable[str], prefixes: Iterable[str] = ()) -> None:
    """Reject keys that are neither listed in ``allowed`` nor under a ``prefixes`` entry."""
    allowed = set(allowed)
    prefixes = tuple(prefixes)
    for key in values:
        if key not in allowed and not key.startswith(prefixes):
            raise ConfigError(f"unknown config key '{key}'", key)


def require(values: Mapping[str, str], key: str) -> str:
    try:
        return values[key]
    except KeyError:
        raise ConfigError(f"missing required config key '{key}'", key) from None


def get_int(values: Mapping[str, str], key: str, default: int | None = None) -> int:
    if key not in values:
        if default is None:
            return int(require(values, key))
        return default
    try:
        return int(values[key])
    except ValueError:
        raise ConfigError(f"config key '{key}' must be an integer, got {values[key]!r}", key) from None


def get_float(values: Mapping[str, str], key: str, default: float | None = None) -> float:
    if key not in values:
        if default is None:
            require(values, key)
        return float(default)
    try:
        return float(values[key])
    except ValueError:
        raise ConfigError(f"config key '{key}' must be a number, got {values[key]!r}", key) from None


def get_str(values: Mapping[str, str], key: str, default: str | None = None,
            choices: Iterable[str] | None = None) -> str:
    value = values.get(key, default)
    if value is None:
        value = require(values, key)
    if choices is not None and value not in set(choices):
        raise ConfigError(f"config key '{key}' must be one of {sorted(choices)}, got {value!r}", key)
    return value


def get_float_list(values: Mapping[str, str], key: str, default: list[float] | None = None) -> list[float]:
    if key not in values:
        if default is None:
            require(values, key)
        return list(default)
    try:
        return [float(v) for v in values[key].split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"config key '{key}' must be a comma-separated list of numbers", key) from None


def get_int_list(values: Mapping[str, str], key: str, default: list[int] | None = None) -> list[int]:
    if key not in values:
        if default is None:
            require(values, key)
        return list(default)
    try:
        return [int(v) for v in values[key].split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"config key '{key}' must be a comma-separated list of integers", key) from None
