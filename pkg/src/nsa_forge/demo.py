"""Side-by-side comparison of the four blending tasks on one image pair."""

from __future__ import annotations

import numpy as np

from .config import ClassConfig
from .core import RngStream, as_image
from .labeler import blend_cutpaste, blend_fpi, blend_pii, label_logistic
from .poisson import clone_region, seamless_clone
from .sampler import PatchPlacement, sample_placement

DEMO_ALPHA = 0.5


def boundary_jump(image: np.ndarray, region: np.ndarray) -> float:
    """Mean absolute intensity step across the edge of ``region``.

    Averages ``|x_p - x_q|`` (channel mean) over 4-neighbour pairs with ``p``
    inside and ``q`` outside the region.
    """
    img = as_image(image)
    steps = []
    for axis in (0, 1):
        a = np.swapaxes(region, 0, axis)
        x = np.swapaxes(img, 0, axis)
        cross = a[1:] != a[:-1]
        diff = np.abs(x[1:] - x[:-1]).mean(axis=2)
        steps.append(diff[cross])
    steps = np.concatenate(steps)
    return float(steps.mean()) if steps.size else 0.0


def _box_mask(shape, rect, interior=False):
    h, w = shape[:2]
    ys, xs = rect.slices(w, h)
    mask = np.zeros((h, w), dtype=bool)
    if interior:
        mask[ys, xs] = clone_region(ys.stop - ys.start, xs.stop - xs.start)
    else:
        mask[ys, xs] = True
    return mask


def run_variants(img_s, img_d, cfg: ClassConfig, placement: PatchPlacement) -> dict:
    """All four tasks for one placement.

    CutPaste copies from the destination image itself (same source box
    coordinates); FPI and PII interpolate at the destination location.
    """
    img_s = as_image(img_s)
    img_d = as_image(img_d)
    same = PatchPlacement(placement.dst_rect, placement.dst_rect)
    cut_img, cut_lab = blend_cutpaste(img_d, img_d, placement)
    fpi_img, fpi_lab = blend_fpi(img_s, img_d, same, alpha=DEMO_ALPHA)
    pii_img, pii_lab = blend_pii(img_s, img_d, same, alpha=DEMO_ALPHA)
    nsa_img = seamless_clone(img_s, img_d, placement.src_rect, placement.dst_rect, cfg.gradient_mode)
    nsa_lab = label_logistic(nsa_img, img_d, cfg.logistic_y0, cfg.logistic_k)
    box = _box_mask(img_d.shape, placement.dst_rect)
    omega = _box_mask(img_d.shape, placement.dst_rect, interior=True)
    return {
        "CutPaste": (cut_img, cut_lab.values, boundary_jump(cut_img, box), box),
        "FPI": (fpi_img, fpi_lab.values, boundary_jump(fpi_img, box), box),
        "PII": (pii_img, pii_lab.values, boundary_jump(pii_img, omega), box),
        "NSA": (nsa_img, nsa_lab.values, boundary_jump(nsa_img, omega), box),
    }


def demo(img_s, img_d, cfg: ClassConfig, seed: int = 0, trials: int = 8):
    """Run every task on ``trials`` placements.

    Returns ``(variants, stats)``: the first trial's images and labels keyed by
    task name, and per-task mean edge jumps plus exterior-identity flags over
    all trials.
    """
    img_s = as_image(img_s)
    img_d = as_image(img_d)
    single = cfg.replace(n_max=1)
    jumps = {k: [] for k in ("CutPaste", "FPI", "PII", "NSA")}
    exterior = {k: True for k in jumps}
    first = None
    for t in range(trials):
        rng = RngStream.derived(seed, t)
        placement = sample_placement(img_s, img_d, single, rng)
        out = run_variants(img_s, img_d, single, placement)
        for name, (image, _, jump, box) in out.items():
            jumps[name].append(jump)
            exterior[name] &= bool(np.array_equal(image[~box], img_d[~box]))
        if first is None:
            first = {name: (v[0], v[1]) for name, v in out.items()}
    stats = {
        "trials": trials,
        "boundary_jump": {k: float(np.mean(v)) for k, v in jumps.items()},
        "exterior_identical": exterior,
    }
    nsa = stats["boundary_jump"]["NSA"]
    stats["cutpaste_to_nsa_jump_ratio"] = stats["boundary_jump"]["CutPaste"] / nsa if nsa > 0 else float("inf")
    return first, stats
