"""Line-based ``key = value`` configuration files."""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

__all__ = ["ConfigError", "parse_config", "read_config", "resolve_train_config", "echo_config"]


class ConfigError(ValueError):
    """Malformed configuration; the message names the file and line when known."""


def parse_config(text: str, allowed=None, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped.

    Keys outside ``allowed`` (when given) and duplicated keys are rejected
    with the offending line number.
    """
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key or not val:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if allowed is not None and key not in allowed:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = val
    return out


def read_config(path, allowed=None) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    return parse_config(text, allowed, source=str(path))


def resolve_train_config(path=None, overrides: dict | None = None):
    """TrainConfig from an optional file plus flag overrides (overrides win)."""
    from .training import TrainConfig

    allowed = {f.name for f in fields(TrainConfig)}
    raw = read_config(path, allowed) if path is not None else {}
    for key, val in (overrides or {}).items():
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r}")
        raw[key] = str(val)
    try:
        return TrainConfig.from_strings(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def echo_config(cfg) -> str:
    """Canonical listing: one ``key = value`` line per field, keys sorted."""
    items = cfg if isinstance(cfg, dict) else {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    return "\n".join(f"{k} = {items[k]}" for k in sorted(items))
