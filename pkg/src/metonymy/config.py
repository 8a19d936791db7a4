"""Run configuration: dataclass defaults, a plain key=value file format, and
flag overrides. Precedence is flags > file > defaults."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised for unreadable files, unknown keys, or bad values."""


@dataclass
class RunConfig:
    backend: str = "live"  # live | scripted | replay
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    script_path: str | None = None
    cache_dir: str | None = None
    prompt_dir: str | None = None
    concurrency: int = 1
    votes: int | None = None  # None resolves per strategy: 1, or 9 for -sc aliases
    strategy: str = "cot2s"
    with_context: bool = False
    seed: int = 0
    timeout: float = 120.0
    max_attempts: int = 5
    backoff_start: float = 1.0
    max_in_flight: int = 8
    categorize_temperature: float = 0.4
    cot_temperature: float = 0.6
    top_p: float = 0.9
    cot_max_tokens: int = 1024
    categorize_max_tokens: int = 64
    augment_temperature: float = 0.6
    augment_max_tokens: int = 64
    augment_k: int = 3


_INT_KEYS = {
    "concurrency",
    "votes",
    "seed",
    "max_attempts",
    "max_in_flight",
    "cot_max_tokens",
    "categorize_max_tokens",
    "augment_max_tokens",
    "augment_k",
}
_FLOAT_KEYS = {
    "timeout",
    "backoff_start",
    "categorize_temperature",
    "cot_temperature",
    "top_p",
    "augment_temperature",
}
_BOOL_KEYS = {"with_context"}
_ALL_KEYS = {f.name for f in fields(RunConfig)}


def _coerce(key: str, raw: str) -> Any:
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"bad boolean for {key}: {raw!r}")
    if raw.lower() in ("none", "null", ""):
        return None
    return raw


def parse_config_file(path: str | Path) -> dict[str, Any]:
    """KEY = value lines; '#' comments and blank lines ignored."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    out: dict[str, Any] = {}
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{line_no}: expected KEY = value")
        key = key.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"{path}:{line_no}: unknown config key {key!r}")
        value = value.split("#", 1)[0].strip().strip("\"'")
        out[key] = _coerce(key, value)
    return out


def load_config(path: str | Path | None, overrides: dict[str, Any]) -> RunConfig:
    """Defaults, then file values, then explicitly provided flag overrides."""
    cfg = RunConfig()
    if path is not None:
        cfg = replace(cfg, **parse_config_file(path))
    given = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(given) - _ALL_KEYS
    if unknown:
        raise ConfigError(f"unknown config override(s): {', '.join(sorted(unknown))}")
    return replace(cfg, **given)
