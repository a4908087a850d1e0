"""Constrained patch placement.

All size symbols are fractions of the image dimensions; pixels only appear
when a :class:`~nsa_forge.core.Rect` is rasterized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ClassConfig
from .core import Rect, RngStream, object_mask, resize_nearest

GAMMA_SHAPE = 2.0
GAMMA_SCALE = 0.1
SIZE_OFFSET = 0.06
SCALE_STD = 0.25
RETRY_BUDGET = 200
ELLIPSE_COUNT = 5

CUTPASTE_AREA = (0.02, 0.15)
CUTPASTE_ASPECT = ((0.3, 1.0), (1.0, 3.3))
FPI_SIZE = (0.1, 0.4)
FPI_CORE = 0.8


class PlacementError(RuntimeError):
    """The retry budget ran out before a constraint was satisfied."""

    def __init__(self, constraint: str, tries: int):
        self.constraint = constraint
        self.tries = tries
        super().__init__(f"no placement satisfied the {constraint} constraint after {tries} tries")


@dataclass
class PatchPlacement:
    src_rect: Rect
    dst_rect: Rect
    scale: float = 1.0
    shape_mask: np.ndarray | None = None
    rejection_counts: tuple[int, int] = (1, 1)

    def to_dict(self) -> dict:
        return {
            "src_rect": self.src_rect.to_dict(),
            "dst_rect": self.dst_rect.to_dict(),
            "scale": self.scale,
            "shape": "rect" if self.shape_mask is None else "ellipse_union",
            "rejection_counts": list(self.rejection_counts),
        }


def _object_count(mask: np.ndarray, x0: int, y0: int, w: int, h: int) -> int:
    # a few candidates per placement; slicing beats building a summed-area table
    return int(np.count_nonzero(mask[y0:y0 + h, x0:x0 + w]))


def _clamp(value: float, lo: float, hi: float) -> float:
    return min(max(value, lo), hi)


def sample_patch_size(cfg: ClassConfig, rng: RngStream) -> tuple[float, float]:
    """``(w_frac, h_frac)`` with each side ``clamp(0.06 + Gamma(2, 0.1), min, max)``."""
    r_w = rng.gamma(GAMMA_SHAPE, GAMMA_SCALE)
    r_h = rng.gamma(GAMMA_SHAPE, GAMMA_SCALE)
    return (
        _clamp(SIZE_OFFSET + r_w, cfg.w_min, cfg.w_max),
        _clamp(SIZE_OFFSET + r_h, cfg.h_min, cfg.h_max),
    )


def config_object_mask(image: np.ndarray, cfg: ClassConfig) -> np.ndarray | None:
    if not cfg.constrained:
        return None
    return object_mask(image, cfg.background_b, cfg.t_brightness)


def _source_rect_with_tries(img, mask, cfg: ClassConfig, rng: RngStream) -> tuple[Rect, int]:
    height, width = img.shape[:2]
    w_frac, h_frac = sample_patch_size(cfg, rng)
    check = cfg.constrained and cfg.t_object is not None
    if check and mask is None:
        raise ValueError("object constraint enabled but no object mask given")
    for tries in range(1, RETRY_BUDGET + 1):
        cx = rng.uniform(cfg.w_min / 2, 1 - cfg.w_min / 2)
        cy = rng.uniform(cfg.h_min / 2, 1 - cfg.h_min / 2)
        rect = Rect(cx, cy, w_frac, h_frac)
        if not check:
            return rect, tries
        x0, y0, w, h = rect.to_pixels(width, height)
        if _object_count(mask, x0, y0, w, h) / (w * h) > cfg.t_object:
            return rect, tries
    raise PlacementError("source t_object", RETRY_BUDGET)


def sample_source_rect(img: np.ndarray, mask: np.ndarray | None, cfg: ClassConfig, rng: RngStream) -> Rect:
    """Source patch whose object fraction exceeds ``t_object`` (first candidate if unconstrained)."""
    return _source_rect_with_tries(img, mask, cfg, rng)[0]


def sample_scale(w_frac: float, h_frac: float, cfg: ClassConfig, rng: RngStream) -> float:
    """Resize factor keeping the scaled patch inside the size bounds and ``[s_min, s_max]``."""
    r_s = rng.normal(1.0, SCALE_STD)
    lo = max(cfg.w_min / w_frac, cfg.h_min / h_frac)
    hi = min(cfg.w_max / w_frac, cfg.h_max / h_frac)
    s = max(lo, min(r_s, hi))
    return _clamp(s, cfg.s_min, cfg.s_max)


def resized_source_mask(src_mask: np.ndarray, src_rect: Rect, dst_w: int, dst_h: int) -> np.ndarray:
    """Object mask of the source patch after resizing to ``dst_w x dst_h`` pixels."""
    ys, xs = src_rect.slices(src_mask.shape[1], src_mask.shape[0])
    return resize_nearest(src_mask[ys, xs], dst_w, dst_h)


def sample_destination(
    img_d: np.ndarray,
    mask_d: np.ndarray | None,
    src_rect: Rect,
    src_patch_mask: np.ndarray | None,
    cfg: ClassConfig,
    rng: RngStream,
    source_tries: int = 1,
) -> PatchPlacement:
    """Scale the source patch and place it in the destination image.

    ``src_patch_mask`` is the object mask of the source patch at source
    resolution; it is resized with the patch before the overlap check.
    """
    height, width = img_d.shape[:2]
    scale = sample_scale(src_rect.width_frac, src_rect.height_frac, cfg, rng)
    # the scale already keeps the product inside the bounds; clamping only absorbs round-off
    w_frac = _clamp(scale * src_rect.width_frac, cfg.w_min, cfg.w_max)
    h_frac = _clamp(scale * src_rect.height_frac, cfg.h_min, cfg.h_max)
    probe = Rect(0.5, 0.5, w_frac, h_frac)
    w_px, h_px = probe.pixel_size(width, height)
    w_half, h_half = w_px / width / 2, h_px / height / 2
    mx, my = 1 / width, 1 / height

    check = cfg.constrained
    if check:
        if mask_d is None or src_patch_mask is None:
            raise ValueError("object constraints enabled but masks are missing")
        m_ps = resize_nearest(src_patch_mask, w_px, h_px)
        m_ps_count = int(m_ps.sum())
    shape = None
    if cfg.shape_mode == "ellipse_union":
        shape = ellipse_union_mask(w_px, h_px, ELLIPSE_COUNT, rng)

    for tries in range(1, RETRY_BUDGET + 1):
        lo_x, hi_x = w_half + mx, 1 - w_half - mx
        lo_y, hi_y = h_half + my, 1 - h_half - my
        cx = rng.uniform(lo_x, hi_x) if lo_x < hi_x else 0.5
        cy = rng.uniform(lo_y, hi_y) if lo_y < hi_y else 0.5
        rect = Rect(cx, cy, w_frac, h_frac)
        placement = PatchPlacement(src_rect, rect, scale, shape, (source_tries, tries))
        if not check:
            return placement
        x0, y0, w, h = rect.to_pixels(width, height)
        if _object_count(mask_d, x0, y0, w, h) / (w * h) <= cfg.t_object:
            continue
        if m_ps_count == 0:
            continue
        overlap = int(np.count_nonzero(mask_d[y0:y0 + h, x0:x0 + w] & m_ps))
        if overlap / m_ps_count > cfg.t_overlap:
            return placement
    raise PlacementError("destination t_object/t_overlap", RETRY_BUDGET)


def sample_placement(img_s, img_d, cfg: ClassConfig, rng: RngStream, mask_s=None, mask_d=None) -> PatchPlacement:
    """One source patch plus its destination, per ``cfg.selection_mode``."""
    if cfg.selection_mode == "cutpaste_style":
        placement = sample_cutpaste_style(img_d, rng)
    elif cfg.selection_mode == "fpi_style":
        placement = sample_fpi_style(img_d, rng)
    else:
        if cfg.constrained:
            mask_s = config_object_mask(img_s, cfg) if mask_s is None else mask_s
            mask_d = config_object_mask(img_d, cfg) if mask_d is None else mask_d
        src_rect, tries = _source_rect_with_tries(img_s, mask_s, cfg, rng)
        patch_mask = None
        if mask_s is not None:
            ys, xs = src_rect.slices(img_s.shape[1], img_s.shape[0])
            patch_mask = mask_s[ys, xs]
        return sample_destination(img_d, mask_d, src_rect, patch_mask, cfg, rng, source_tries=tries)
    if cfg.shape_mode == "ellipse_union":
        w, h = placement.dst_rect.pixel_size(img_d.shape[1], img_d.shape[0])
        placement.shape_mask = ellipse_union_mask(w, h, ELLIPSE_COUNT, rng)
    return placement


def sample_patch_count(n_max: int, rng: RngStream) -> int:
    """``1 + number of heads`` among ``n_max - 1`` fair coins."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if n_max == 1:
        return 1
    return 1 + int(np.count_nonzero(rng.coins(n_max - 1)))


def sample_placements(img_s, img_d, cfg: ClassConfig, rng: RngStream) -> list[PatchPlacement]:
    """Mandatory first placement plus coin-flipped extras; failed extras are skipped."""
    mask_s = config_object_mask(img_s, cfg)
    mask_d = config_object_mask(img_d, cfg)
    count = sample_patch_count(cfg.n_max, rng)
    placements = [sample_placement(img_s, img_d, cfg, rng, mask_s, mask_d)]
    for _ in range(count - 1):
        try:
            placements.append(sample_placement(img_s, img_d, cfg, rng, mask_s, mask_d))
        except PlacementError:
            pass
    return placements


def _sample_aspect(rng: RngStream) -> float:
    (a0, a1), (b0, b1) = CUTPASTE_ASPECT
    u = rng.uniform(0.0, (a1 - a0) + (b1 - b0))
    return a0 + u if u < a1 - a0 else b0 + (u - (a1 - a0))


def sample_cutpaste_style(img: np.ndarray, rng: RngStream) -> PatchPlacement:
    """Area ratio ~ U(0.02, 0.15), aspect ~ U((0.3, 1) u (1, 3.3)), two independent in-image locations."""
    height, width = img.shape[:2]
    if height < 16 or width < 16:
        raise ValueError("cutpaste-style sampling needs an image of at least 16x16 pixels")
    area = rng.uniform(*CUTPASTE_AREA)
    aspect = _sample_aspect(rng)
    # aspect = patch height / patch width, in pixels
    w_px = math.sqrt(area * width * height / aspect)
    h_px = aspect * w_px
    w_frac = min(w_px / width, 1.0)
    h_frac = min(h_px / height, 1.0)
    rects = []
    for _ in range(2):
        cx = rng.uniform(w_frac / 2, 1 - w_frac / 2)
        cy = rng.uniform(h_frac / 2, 1 - h_frac / 2)
        rects.append(Rect(cx, cy, w_frac, h_frac))
    return PatchPlacement(rects[0], rects[1], 1.0, None, (1, 1))


def sample_fpi_style(img: np.ndarray, rng: RngStream) -> PatchPlacement:
    """Square patch with side ~ U(0.1, 0.4) of the shorter side, centre in the core 80 %.

    The patch is truncated by the image boundary; source and destination
    share the location.
    """
    height, width = img.shape[:2]
    side = rng.uniform(*FPI_SIZE) * min(width, height)
    margin = (1 - FPI_CORE) / 2
    cx = rng.uniform(margin, 1 - margin)
    cy = rng.uniform(margin, 1 - margin)
    x0 = max(0.0, cx * width - side / 2)
    x1 = min(float(width), cx * width + side / 2)
    y0 = max(0.0, cy * height - side / 2)
    y1 = min(float(height), cy * height + side / 2)
    rect = Rect((x0 + x1) / 2 / width, (y0 + y1) / 2 / height, (x1 - x0) / width, (y1 - y0) / height)
    return PatchPlacement(rect, rect, 1.0, None, (1, 1))


def ellipse_union_mask(width: int, height: int, count: int, rng: RngStream) -> np.ndarray:
    """Union of ``count`` axis-aligned ellipses inside a ``width x height`` box.

    Centres are uniform in the box and semi-axes uniform in 10-50 % of the box
    dimensions; redrawn until at least one pixel is set.
    """
    if width < 3 or height < 3:
        raise ValueError("ellipse masks need a box of at least 3x3 pixels")
    yy, xx = np.mgrid[0:height, 0:width] + 0.5
    while True:
        mask = np.zeros((height, width), dtype=bool)
        cx = rng.uniform(0, width, count)
        cy = rng.uniform(0, height, count)
        ax = rng.uniform(0.1 * width, 0.5 * width, count)
        ay = rng.uniform(0.1 * height, 0.5 * height, count)
        for i in range(count):
            mask |= ((xx - cx[i]) / ax[i]) ** 2 + ((yy - cy[i]) / ay[i]) ** 2 <= 1.0
        if mask.any():
            return mask


def apply_ablation(cfg: ClassConfig, ablation: str | None) -> ClassConfig:
    """Config variant for ablation ``A`` (no constraints), ``B`` (single patch),
    ``C`` (cutpaste-style selection) or ``D`` (ellipse-union shapes)."""
    if ablation is None:
        return cfg
    ablation = ablation.upper()
    if ablation == "A":
        return cfg.without_constraints()
    if ablation == "B":
        return cfg.replace(n_max=1)
    if ablation == "C":
        return cfg.without_constraints().replace(n_max=1, selection_mode="cutpaste_style")
    if ablation == "D":
        return cfg.replace(shape_mode="ellipse_union")
    raise ValueError(f"unknown ablation {ablation!r}; expected one of A, B, C, D")
