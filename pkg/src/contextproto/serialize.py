"""Small helpers for strict dict <-> dataclass conversion."""

from __future__ import annotations

import dataclasses
from typing import Any

from .errors import ConfigError


def dataclass_from_dict(cls, data: dict, path: str = "") -> Any:
    """Build a dataclass from a dict, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path or cls.__name__}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {path or cls.__name__}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{path or cls.__name__}: {exc}") from None
