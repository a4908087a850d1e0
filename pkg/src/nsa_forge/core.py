"""Shared image containers, the deterministic RNG stream and elementary image ops.

Images are ``numpy`` arrays of shape ``(H, W, C)`` with ``float64`` samples in
``[0, 1]``; masks are boolean arrays of shape ``(H, W)``.  Single-channel maps
(labels, predictions) are ``(H, W)`` float arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


def as_image(data) -> np.ndarray:
    """Coerce ``data`` to an ``(H, W, C)`` float64 image clipped to [0, 1]."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected an HxW, HxWx1 or HxWx3 image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must have at least one pixel")
    return np.clip(arr, 0.0, 1.0)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in fractional image coordinates.

    ``center_x``/``center_y`` are in [0, 1] and the sizes are fractions of the
    image width/height.  :meth:`to_pixels` is the single rasterization rule
    used everywhere in the package.
    """

    center_x: float
    center_y: float
    width_frac: float
    height_frac: float

    def pixel_size(self, width: int, height: int) -> tuple[int, int]:
        w = min(width, max(1, round_half_up(self.width_frac * width)))
        h = min(height, max(1, round_half_up(self.height_frac * height)))
        return w, h

    def to_pixels(self, width: int, height: int) -> tuple[int, int, int, int]:
        """Return ``(x0, y0, w, h)``; the box is clamped to lie inside the image."""
        w, h = self.pixel_size(width, height)
        x0 = round_half_up(self.center_x * width - w / 2)
        y0 = round_half_up(self.center_y * height - h / 2)
        x0 = min(max(x0, 0), width - w)
        y0 = min(max(y0, 0), height - h)
        return x0, y0, w, h

    def slices(self, width: int, height: int) -> tuple[slice, slice]:
        x0, y0, w, h = self.to_pixels(width, height)
        return slice(y0, y0 + h), slice(x0, x0 + w)

    def to_dict(self) -> dict:
        return {
            "center_x": self.center_x,
            "center_y": self.center_y,
            "width_frac": self.width_frac,
            "height_frac": self.height_frac,
        }

    @classmethod
    def from_pixels(cls, x0: int, y0: int, w: int, h: int, width: int, height: int) -> "Rect":
        return cls((x0 + w / 2) / width, (y0 + h / 2) / height, w / width, h / height)


class RngStream:
    """Single-owner random stream backed by the counter-based Philox generator.

    The Philox key is derived from ``seed`` with :class:`numpy.random.SeedSequence`,
    so a stream depends only on its seed and on the sequence of draw calls.
    ``counter`` counts draw calls, which makes divergence between two runs easy
    to spot in a manifest.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.counter = 0
        self._gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed)))

    @staticmethod
    def derive_seed(base_seed: int, *indices: int) -> int:
        """Hash ``(base_seed, *indices)`` into a 64-bit seed."""
        seq = np.random.SeedSequence(int(base_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(i) for i in indices))
        return int(seq.generate_state(1, dtype=np.uint64)[0])

    @classmethod
    def derived(cls, base_seed: int, *indices: int) -> "RngStream":
        return cls(cls.derive_seed(base_seed, *indices))

    def _tick(self):
        self.counter += 1
        return self._gen

    def random(self, size=None):
        return self._tick().random(size)

    def uniform(self, low: float, high: float, size=None):
        return self._tick().uniform(low, high, size)

    def normal(self, mean: float, std: float, size=None):
        return self._tick().normal(mean, std, size)

    def gamma(self, shape: float, scale: float, size=None):
        return self._tick().gamma(shape, scale, size)

    def integers(self, low: int, high: int, size=None):
        return self._tick().integers(low, high, size)

    def coins(self, n: int) -> np.ndarray:
        """``n`` independent fair coin flips as a boolean array."""
        return self._tick().random(n) < 0.5

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, counter={self.counter})"


def brightness(image: np.ndarray) -> np.ndarray:
    """Per-pixel channel mean."""
    return np.asarray(image, dtype=np.float64).reshape(image.shape[0], image.shape[1], -1).mean(axis=2)


def background_mask(image: np.ndarray, background_brightness: float, threshold: float) -> np.ndarray:
    """Pixels whose 8-bit brightness lies within ``threshold`` of the background."""
    return np.abs(255.0 * brightness(image) - background_brightness) < threshold


def object_mask(image: np.ndarray, background_brightness: float, threshold: float) -> np.ndarray:
    """Foreground mask: pixels at least ``threshold`` away from the background brightness.

    Both constants are 8-bit intensities (0-255).  The result is the exact
    complement of :func:`background_mask`.
    """
    for name, value in (("background_brightness", background_brightness), ("threshold", threshold)):
        if not 0 <= value <= 255:
            raise ValueError(f"{name} must be in [0, 255], got {value}")
    return ~background_mask(image, background_brightness, threshold)


def median_filter(values: np.ndarray, window: int) -> np.ndarray:
    """Median of each ``window x window`` neighbourhood, edges replicated."""
    if int(window) != window or window < 1 or window % 2 == 0:
        raise ValueError(f"median window must be a positive odd integer, got {window}")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"median_filter expects a single-channel map, got shape {values.shape}")
    if window == 1:
        return values.copy()
    return ndimage.median_filter(values, size=int(window), mode="nearest")


def _bilinear_axis(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centres (align_corners=False)
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def resize_bilinear(image: np.ndarray, new_width: int, new_height: int) -> np.ndarray:
    """Bilinear resize with half-pixel sample centres; accepts ``(H, W)`` or ``(H, W, C)``."""
    if new_width < 1 or new_height < 1:
        raise ValueError(f"target size must be positive, got {new_width}x{new_height}")
    arr = np.asarray(image, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    h, w = arr.shape[:2]
    if (h, w) == (new_height, new_width):
        out = arr.copy()
    else:
        y0, y1, fy = _bilinear_axis(h, new_height)
        x0, x1, fx = _bilinear_axis(w, new_width)
        fy = fy[:, None, None]
        fx = fx[None, :, None]
        top = arr[y0][:, x0] * (1 - fx) + arr[y0][:, x1] * fx
        bottom = arr[y1][:, x0] * (1 - fx) + arr[y1][:, x1] * fx
        out = top * (1 - fy) + bottom * fy
        out = np.clip(out, arr.min(), arr.max())
    out = np.clip(out, 0.0, 1.0)
    return out[:, :, 0] if squeeze else out


def resize_nearest(mask: np.ndarray, new_width: int, new_height: int) -> np.ndarray:
    """Nearest-neighbour resize (half-pixel centres) for masks and label maps."""
    if new_width < 1 or new_height < 1:
        raise ValueError(f"target size must be positive, got {new_width}x{new_height}")
    h, w = mask.shape[:2]
    rows = np.minimum(((np.arange(new_height) + 0.5) * h / new_height).astype(np.intp), h - 1)
    cols = np.minimum(((np.arange(new_width) + 0.5) * w / new_width).astype(np.intp), w - 1)
    return mask[rows][:, cols]
