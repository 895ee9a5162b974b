"""Pseudo-color image formatting for non-RGB camera streams.

Depth maps are clipped to a fixed range, normalized to [0, 1] and mapped
through the 256-entry Turbo lookup table with linear interpolation. A
disabled modality is replaced by an all-zero image of the same size.
Thermal frames are already pseudo-colored by the camera and only get
cropped and resized here.

Images are (H, W, 3) uint8 arrays; depth maps are (H, W) float arrays in
meters. Depth entries that are negative or non-finite are treated as
sensor dropouts and rendered as far (t = 1).
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image

from .config import data_path

TURBO_ENTRIES = 256
DEFAULT_MAX_RANGE = 5.0


@lru_cache(maxsize=1)
def load_turbo_table() -> np.ndarray:
    """The (256, 3) Turbo table, components in [0, 1]."""
    table = np.loadtxt(data_path("turbo_256.csv"), delimiter=",", comments="#")
    if table.shape != (TURBO_ENTRIES, 3):
        raise ValueError(f"turbo table has shape {table.shape}, expected ({TURBO_ENTRIES}, 3)")
    table.flags.writeable = False
    return table


def turbo_lut(t) -> np.ndarray:
    """Interpolated Turbo color(s) at t in [0, 1]; returns floats in [0, 1], shape t.shape + (3,)."""
    table = load_turbo_table()
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any((t < 0.0) | (t > 1.0)):
        raise ValueError("t must lie in [0, 1]")
    x = t * (TURBO_ENTRIES - 1)
    i0 = np.minimum(np.floor(x).astype(np.intp), TURBO_ENTRIES - 2)
    frac = (x - i0)[..., None]
    return table[i0] * (1.0 - frac) + table[i0 + 1] * frac


def to_bytes(colors: np.ndarray) -> np.ndarray:
    """Quantize [0, 1] colors to 8 bits, rounding half up."""
    return np.floor(np.asarray(colors) * 255.0 + 0.5).astype(np.uint8)


def _check_dims(width: int, height: int) -> tuple[int, int]:
    if int(width) != width or int(height) != height or width <= 0 or height <= 0:
        raise ValueError(f"image dimensions must be positive integers, got {width}x{height}")
    return int(width), int(height)


def depth_to_turbo(depth, max_range: float = DEFAULT_MAX_RANGE) -> np.ndarray:
    """Turbo pseudo-color image (H, W, 3) uint8 of a depth map in meters."""
    if not max_range > 0 or not np.isfinite(max_range):
        raise ValueError("max_range must be a positive finite number")
    d = np.asarray(depth, dtype=float)
    if d.ndim != 2:
        raise ValueError(f"depth map must be 2-D, got shape {d.shape}")
    _check_dims(d.shape[1], d.shape[0])
    invalid = ~np.isfinite(d) | (d < 0.0)
    t = np.where(invalid, 1.0, np.clip(np.where(invalid, 0.0, d) / max_range, 0.0, 1.0))
    return to_bytes(turbo_lut(t))


def zero_mask_image(width: int, height: int) -> np.ndarray:
    """All-zero (height, width, 3) image standing in for a disabled modality."""
    w, h = _check_dims(width, height)
    return np.zeros((h, w, 3), dtype=np.uint8)


def crop_resize(image, crop: tuple[int, int, int, int] | None = None, size: tuple[int, int] = (224, 224)) -> np.ndarray:
    """Crop ``(x, y, width, height)`` out of an RGB frame and resize it to ``size`` (width, height).

    The frame's colors are kept as delivered; resizing is bilinear.
    """
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("expected an (H, W, 3) uint8 image")
    if crop is not None:
        x, y, w, h = (int(v) for v in crop)
        if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > img.shape[1] or y + h > img.shape[0]:
            raise ValueError(f"crop {crop} does not fit a {img.shape[1]}x{img.shape[0]} frame")
        img = img[y:y + h, x:x + w]
    _check_dims(*size)
    if (img.shape[1], img.shape[0]) == tuple(size):
        return np.ascontiguousarray(img)
    return np.asarray(Image.fromarray(np.ascontiguousarray(img), "RGB").resize(tuple(size), Image.BILINEAR))


# -- raw buffers: row-major, little-endian float32 depth and packed RGB bytes --

def read_depth_raw(path: str | Path, width: int, height: int) -> np.ndarray:
    w, h = _check_dims(width, height)
    data = np.fromfile(path, dtype="<f4")
    if data.size != w * h:
        raise ValueError(f"{path}: expected {w * h} float32 values, found {data.size}")
    return data.reshape(h, w).astype(float)


def write_depth_raw(path: str | Path, depth) -> None:
    np.asarray(depth, dtype="<f4").tofile(path)


def read_rgb_raw(path: str | Path, width: int, height: int) -> np.ndarray:
    w, h = _check_dims(width, height)
    data = np.fromfile(path, dtype=np.uint8)
    if data.size != w * h * 3:
        raise ValueError(f"{path}: expected {w * h * 3} bytes, found {data.size}")
    return data.reshape(h, w, 3)


def write_rgb_raw(path: str | Path, image) -> None:
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("expected an (H, W, 3) uint8 image")
    img.tofile(path)
