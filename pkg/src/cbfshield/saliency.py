"""Summary statistics for externally produced spatial attention maps.

A map is an (H, W) grid of nonnegative weights with at least one
positive entry; a mask is an (H, W) boolean grid.

Map files are either binary (magic ``SMAP``, little-endian uint32 width
and height, then width*height float32 values row-major) or CSV with one
image row per line.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SMAP"
_HEADER = struct.Struct("<4sII")


class SaliencyError(ValueError):
    pass


class InvalidMapError(SaliencyError):
    """Negative, non-finite or all-zero weights, or a malformed grid."""


class DimensionMismatchError(SaliencyError):
    pass


class ZeroVarianceError(SaliencyError):
    pass


def _grid(values, name: str) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise InvalidMapError(f"{name} must be a non-empty 2-D grid, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMapError(f"{name} has non-finite entries")
    return a


def spatial_map(values, name: str = "map") -> np.ndarray:
    """Validate a saliency map: nonnegative, finite, not all zero."""
    a = _grid(values, name)
    if np.any(a < 0.0):
        raise InvalidMapError(f"{name} has negative weights")
    if not np.any(a > 0.0):
        raise InvalidMapError(f"{name} is all zero")
    return a


def _same_shape(a: np.ndarray, b: np.ndarray, what: str):
    if a.shape != b.shape:
        raise DimensionMismatchError(f"{what}: shapes {a.shape} and {b.shape} differ")


def normalized_entropy(weights) -> float:
    """Shannon entropy of the normalized map divided by ln(H*W); 0 for a single pixel."""
    w = spatial_map(weights)
    if w.size == 1:
        return 0.0
    p = w.ravel() / w.sum()
    p = p[p > 0.0]
    e = float(-(p * np.log(p)).sum() / np.log(w.size))
    return min(max(e, 0.0), 1.0)


def pearson_alignment(weights, reference) -> float:
    """Sample Pearson correlation between a map and a reference grid over all pixels."""
    x = spatial_map(weights)
    y = spatial_map(reference, "reference")
    _same_shape(x, y, "pearson_alignment")
    dx = x.ravel() - x.mean()
    dy = y.ravel() - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVarianceError("pearson_alignment needs both inputs to vary")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return min(max(r, -1.0), 1.0)


def attention_mass(weights, mask) -> float:
    """Fraction of the map's total weight inside the mask."""
    w = spatial_map(weights)
    m = np.asarray(mask)
    if m.dtype != bool:
        m = _grid(m, "mask") != 0.0
    _same_shape(w, m, "attention_mass")
    inside, outside = float(w[m].sum()), float(w[~m].sum())
    # inside + outside >= inside in floating point, so the ratio stays within [0, 1]
    return inside / (inside + outside)


# -- files -------------------------------------------------------------------

def write_map(path: str | Path, values) -> None:
    a = _grid(values, "map").astype("<f4")
    h, w = a.shape
    Path(path).write_bytes(_HEADER.pack(MAGIC, w, h) + a.tobytes())


def read_map(path: str | Path) -> np.ndarray:
    """Read a binary map file, or a CSV file when the name ends in ``.csv``."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_map_csv(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise InvalidMapError(f"{path}: truncated header")
    magic, w, h = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise InvalidMapError(f"{path}: bad magic {magic!r}")
    body = blob[_HEADER.size:]
    if len(body) != 4 * w * h:
        raise InvalidMapError(f"{path}: expected {w}x{h} float32 values, found {len(body)} bytes")
    return np.frombuffer(body, dtype="<f4").reshape(h, w).astype(float)


def read_map_csv(path: str | Path) -> np.ndarray:
    a = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    return _grid(a, str(path))
