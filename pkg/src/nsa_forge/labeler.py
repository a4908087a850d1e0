"""Pixel labels for blended samples and the baseline (non-NSA) blends."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RngStream, as_image, median_filter, resize_bilinear
from .poisson import DEFAULT_TOLERANCE, clone_region, seamless_clone
from .sampler import PatchPlacement

CHANGE_EPSILON = 0.5 / 255
DEFAULT_FILTER_WINDOW = 5
ALPHA_RANGE = (0.05, 0.95)

KINDS = ("binary", "continuous", "logistic", "interpolation")


@dataclass
class LabelMap:
    """Single-channel label.  ``continuous`` values are 8-bit intensity
    differences (0-255); every other kind lies in [0, 1]."""

    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown label kind {self.kind!r}")

    @property
    def bounded(self) -> bool:
        return self.kind != "continuous"


def _pair(blended, original) -> tuple[np.ndarray, np.ndarray]:
    a = as_image(blended)
    b = as_image(original)
    if a.shape != b.shape:
        raise ValueError(f"blended shape {a.shape} does not match original shape {b.shape}")
    return a, b


def raw_binary(blended, original) -> np.ndarray:
    a, b = _pair(blended, original)
    return (np.abs(a - b) > CHANGE_EPSILON).any(axis=2).astype(np.float64)


def raw_continuous(blended, original) -> np.ndarray:
    a, b = _pair(blended, original)
    return np.abs(a - b).mean(axis=2) * 255.0


def raw_logistic(blended, original, y0: float, k: float) -> np.ndarray:
    if k <= 0:
        raise ValueError("logistic steepness k must be positive")
    gate = raw_binary(blended, original)
    cont = raw_continuous(blended, original)
    return gate / (1.0 + np.exp(-k * (cont - y0)))


def label_binary(blended, original, filter_window: int = DEFAULT_FILTER_WINDOW) -> LabelMap:
    return LabelMap(median_filter(raw_binary(blended, original), filter_window), "binary")


def label_continuous(blended, original, filter_window: int = DEFAULT_FILTER_WINDOW) -> LabelMap:
    return LabelMap(median_filter(raw_continuous(blended, original), filter_window), "continuous")


def label_logistic(blended, original, y0: float, k: float, filter_window: int = DEFAULT_FILTER_WINDOW) -> LabelMap:
    return LabelMap(median_filter(raw_logistic(blended, original, y0, k), filter_window), "logistic")


def _draw_alpha(alpha, rng):
    if alpha is None:
        if rng is None:
            raise ValueError("either alpha or rng must be given")
        alpha = float(rng.uniform(*ALPHA_RANGE))
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return alpha


def _same_shape(img_s, img_d):
    s = as_image(img_s)
    d = as_image(img_d)
    if s.shape != d.shape:
        raise ValueError(f"source shape {s.shape} does not match destination shape {d.shape}")
    return s, d


def blend_fpi(
    img_s, img_d, placement: PatchPlacement, alpha: float | None = None, rng: RngStream | None = None
) -> tuple[np.ndarray, LabelMap]:
    """Linear interpolation inside the destination box; the label is the factor itself."""
    s, d = _same_shape(img_s, img_d)
    alpha = _draw_alpha(alpha, rng)
    h, w = d.shape[:2]
    ys, xs = placement.dst_rect.slices(w, h)
    sys_, sxs = placement.src_rect.slices(w, h)
    out = d.copy()
    patch = resize_bilinear(s[sys_, sxs], xs.stop - xs.start, ys.stop - ys.start)
    out[ys, xs] = (1 - alpha) * d[ys, xs] + alpha * patch
    label = np.zeros((h, w))
    label[ys, xs] = alpha
    return np.clip(out, 0.0, 1.0), LabelMap(label, "interpolation")


def blend_cutpaste(img_s, img_d, placement: PatchPlacement) -> tuple[np.ndarray, LabelMap]:
    """Copy the (resized) source patch over the destination box; label 1 on the box."""
    s, d = _same_shape(img_s, img_d)
    h, w = d.shape[:2]
    ys, xs = placement.dst_rect.slices(w, h)
    sys_, sxs = placement.src_rect.slices(w, h)
    out = d.copy()
    out[ys, xs] = resize_bilinear(s[sys_, sxs], xs.stop - xs.start, ys.stop - ys.start)
    label = np.zeros((h, w))
    label[ys, xs] = 1.0
    return out, LabelMap(label, "binary")


def blend_pii(
    img_s,
    img_d,
    placement: PatchPlacement,
    alpha: float | None = None,
    rng: RngStream | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> tuple[np.ndarray, LabelMap]:
    """Seamlessly clone the alpha-interpolated patch (mixed gradients); label alpha on the region."""
    s, d = _same_shape(img_s, img_d)
    alpha = _draw_alpha(alpha, rng)
    h, w = d.shape[:2]
    ys, xs = placement.dst_rect.slices(w, h)
    sys_, sxs = placement.src_rect.slices(w, h)
    box_h, box_w = ys.stop - ys.start, xs.stop - xs.start
    patch = resize_bilinear(s[sys_, sxs], box_w, box_h)
    mixed = (1 - alpha) * d[ys, xs] + alpha * patch
    out = seamless_clone(
        s, d, placement.src_rect, placement.dst_rect, "mixed", placement.shape_mask, tolerance, patch=mixed
    )
    label = np.zeros((h, w))
    label[ys, xs][clone_region(box_h, box_w, placement.shape_mask)] = alpha
    return out, LabelMap(label, "interpolation")
