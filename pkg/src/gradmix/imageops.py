"""Raster primitives shared by the mixer, inpainting and pipeline.

A pixel set is an ``(n, 2)`` integer array of ``(row, col)`` coordinates,
unique and sorted lexicographically.  Helpers convert to and from boolean
masks when a dense view is cheaper.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

__all__ = [
    "as_pixel_set",
    "to_mask",
    "from_mask",
    "bounding_box",
    "round_half_away",
    "dilate",
    "min_distance_field",
    "centroid",
    "centroid_offset",
    "translate_footprint",
    "mean_color",
    "shift_color",
]

_SQUARE = np.ones((3, 3), dtype=bool)


def as_pixel_set(coords) -> np.ndarray:
    """Normalize an iterable of (row, col) pairs into a canonical pixel set."""
    arr = np.asarray(coords, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    return np.unique(arr, axis=0)


def to_mask(pixels: np.ndarray, shape: tuple[int, int], origin=(0, 0)) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    if len(pixels):
        mask[pixels[:, 0] - origin[0], pixels[:, 1] - origin[1]] = True
    return mask


def from_mask(mask: np.ndarray, origin=(0, 0)) -> np.ndarray:
    rows, cols = np.nonzero(mask)
    out = np.stack([rows + origin[0], cols + origin[1]], axis=1).astype(np.int64)
    return out.reshape(-1, 2)


def bounding_box(pixels: np.ndarray) -> tuple[int, int, int, int]:
    """Inclusive ``(top, left, bottom, right)`` box of a non-empty pixel set."""
    if len(pixels) == 0:
        raise ValueError("bounding box of empty pixel set")
    top, left = pixels.min(axis=0)
    bottom, right = pixels.max(axis=0)
    return int(top), int(left), int(bottom), int(right)


def round_half_away(x):
    """Round half away from zero (0.5 -> 1, -0.5 -> -1)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _in_frame(pixels: np.ndarray, frame: tuple[int, int]) -> bool:
    if len(pixels) == 0:
        return True
    return bool(
        pixels[:, 0].min() >= 0
        and pixels[:, 1].min() >= 0
        and pixels[:, 0].max() < frame[0]
        and pixels[:, 1].max() < frame[1]
    )


def dilate(pixels: np.ndarray, iterations: int, frame: tuple[int, int]) -> np.ndarray:
    """All pixels within Chebyshev distance ``iterations`` of ``pixels``, clipped to ``frame``.

    One iteration is a binary dilation with a 3x3 square kernel.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if len(pixels) == 0 or iterations == 0:
        return pixels.copy()
    top, left, bottom, right = bounding_box(pixels)
    top = max(top - iterations, 0)
    left = max(left - iterations, 0)
    bottom = min(bottom + iterations, frame[0] - 1)
    right = min(right + iterations, frame[1] - 1)
    local = to_mask(pixels, (bottom - top + 1, right - left + 1), (top, left))
    grown = ndimage.binary_dilation(local, structure=_SQUARE, iterations=iterations)
    return from_mask(grown, (top, left))


def min_distance_field(shape: tuple[int, int], source: np.ndarray, origin=(0, 0)) -> np.ndarray:
    """Exact Euclidean distance from every pixel of a patch to the nearest source pixel.

    ``shape`` and ``origin`` describe the patch in frame coordinates; ``source``
    is given in frame coordinates and must lie inside the patch.
    """
    if len(source) == 0:
        raise ValueError("distance to empty set")
    local = source - np.asarray(origin, dtype=np.int64)
    if (local < 0).any() or (local[:, 0] >= shape[0]).any() or (local[:, 1] >= shape[1]).any():
        raise ValueError("source pixels outside the patch")
    mask = to_mask(local, shape)
    return ndimage.distance_transform_edt(~mask)


def centroid(pixels: np.ndarray) -> tuple[float, float]:
    if len(pixels) == 0:
        raise ValueError("centroid of empty pixel set")
    r, c = pixels.mean(axis=0, dtype=np.float64)
    return float(r), float(c)


def centroid_offset(source: tuple[float, float], target: tuple[float, float]) -> tuple[int, int]:
    """Integer shift moving ``source`` onto ``target``, rounded half away from zero per axis."""
    dr, dc = round_half_away([target[0] - source[0], target[1] - source[1]])
    return int(dr), int(dc)


def translate_footprint(pixels: np.ndarray, drow: int, dcol: int, frame: tuple[int, int]):
    """Shift a pixel set; returns ``None`` if any shifted pixel leaves ``frame``."""
    moved = pixels + np.array([drow, dcol], dtype=np.int64)
    if not _in_frame(moved, frame):
        return None
    return moved


def mean_color(image: np.ndarray, region: np.ndarray) -> tuple[float, float, float]:
    if len(region) == 0:
        raise ValueError("mean color of empty region")
    values = image[region[:, 0], region[:, 1]].astype(np.float64)
    r, g, b = values.mean(axis=0)
    return float(r), float(g), float(b)


def shift_color(image: np.ndarray, region: np.ndarray, delta) -> np.ndarray:
    """Add ``delta`` to each channel of ``region``, rounding half away from zero and clamping."""
    out = image.copy()
    if len(region) == 0:
        return out
    delta = np.asarray(delta, dtype=np.float64)
    if not delta.any():
        return out
    rows, cols = region[:, 0], region[:, 1]
    shifted = round_half_away(image[rows, cols].astype(np.float64) + delta)
    out[rows, cols] = np.clip(shifted, 0, 255).astype(np.uint8)
    return out
