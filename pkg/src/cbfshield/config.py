"""Loading helpers shared by the chain, scene and scenario file readers.

All configuration files are YAML documents. Errors carry the dotted field
path of the offending entry, e.g. ``limits.lower[2]``.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """A configuration document failed to parse or validate."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


def data_path(*parts: str) -> Path:
    """Path of a file shipped in the package ``data`` directory."""
    return Path(str(resources.files("cbfshield").joinpath("/".join(("data",) + parts))))


def read_document(source: str | Path | dict) -> tuple[dict, Path | None]:
    """Parse ``source`` into a mapping.

    ``source`` may be a path, a YAML string, or an already-parsed mapping.
    Returns the mapping and the directory relative paths resolve against.
    """
    if isinstance(source, dict):
        return source, None
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and source.endswith((".yaml", ".yml"))):
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError("", f"cannot read {path}: {exc}") from exc
        base = path.parent
    else:
        text, base = str(source), None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"parse failure: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("", "parse failure: top level must be a mapping")
    return doc, base


def require(doc: dict, key: str, path: str) -> Any:
    if key not in doc:
        raise ConfigError(_join(path, key), "missing required field")
    return doc[key]


def as_float(value: Any, path: str) -> float:
    # PyYAML reads "1e-3" (no dot) as a string, so coerce explicitly.
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {value!r}") from None
    if not np.isfinite(out):
        raise ConfigError(path, "value must be finite")
    return out


def as_vector(value: Any, n: int | None, path: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(path, f"expected a list, got {type(value).__name__}")
    if n is not None and len(value) != n:
        raise ConfigError(path, f"expected {n} entries, got {len(value)}")
    return np.array([as_float(v, f"{path}[{i}]") for i, v in enumerate(value)])


def resolve(ref: str | Path, base: Path | None) -> Path:
    """Resolve a file reference; ``pkg:`` prefixes point into package data."""
    ref = str(ref)
    if ref.startswith("pkg:"):
        return data_path(*ref[4:].split("/"))
    p = Path(ref)
    if not p.is_absolute() and base is not None:
        p = base / p
    return p


def dump_document(doc: dict) -> str:
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key
