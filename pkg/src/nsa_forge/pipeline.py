"""Dataset generation and evaluation.

Each sample ``i`` draws all of its randomness from a stream derived from
``(base_seed, i, attempt)``, so the output tree does not depend on how many
worker processes produced it.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .config import ClassConfig
from .core import RngStream, as_image, resize_bilinear, resize_nearest
from .io import (
    DataError,
    list_images,
    read_image,
    read_map,
    read_mask,
    write_image,
    write_label,
)
from .labeler import (
    DEFAULT_FILTER_WINDOW,
    LabelMap,
    blend_cutpaste,
    blend_fpi,
    blend_pii,
    label_binary,
    label_continuous,
    label_logistic,
)
from .metrics import ScoredSample, ScoreReport, score_report
from .poisson import SolverError, seamless_clone
from .sampler import (
    ELLIPSE_COUNT,
    PatchPlacement,
    PlacementError,
    _source_rect_with_tries,
    apply_ablation,
    config_object_mask,
    ellipse_union_mask,
    sample_cutpaste_style,
    sample_fpi_style,
    sample_patch_count,
    sample_placements,
)

log = logging.getLogger(__name__)

MODES = ("nsa-binary", "nsa-continuous", "nsa-logistic", "cutpaste", "fpi", "pii")
MAX_ATTEMPTS = 6  # first try plus five retries with fresh streams
WORKERS_ENV = "NSA_FORGE_WORKERS"


@dataclass(frozen=True)
class PreprocessSpec:
    resize_to: int
    rotate_max: float
    center_crop: int
    random_crop: int
    mode: str

    def __post_init__(self):
        if not 1 <= self.random_crop <= self.center_crop <= self.resize_to:
            raise ValueError(
                f"crop sizes must satisfy 1 <= random_crop <= center_crop <= resize_to, "
                f"got {self.random_crop}, {self.center_crop}, {self.resize_to}"
            )

    @classmethod
    def for_mode(cls, mode: str, rotate_max: float = 0.0) -> "PreprocessSpec | None":
        """Training recipe for ``object``, ``texture`` or ``cxr`` images; ``None`` for ``none``."""
        if mode == "object":
            return cls(256, rotate_max, 230, 224, mode)
        if mode == "cxr":
            return cls(256, rotate_max, 230, 224, mode)
        if mode == "texture":
            return cls(264, 0.0, 264, 256, mode)
        if mode == "none":
            return None
        raise ValueError(f"unknown preprocessing mode {mode!r}")


def _rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    out = ndimage.rotate(image, degrees, axes=(1, 0), reshape=False, order=1, mode="nearest")
    return np.clip(out, 0.0, 1.0)


def preprocess(image: np.ndarray, spec: PreprocessSpec | None, rng: RngStream) -> np.ndarray:
    """Resize, rotate by U(-rotate_max, rotate_max), centre crop, then random crop."""
    img = as_image(image)
    if spec is None:
        return img
    img = resize_bilinear(img, spec.resize_to, spec.resize_to)
    if spec.rotate_max > 0:
        img = _rotate(img, float(rng.uniform(-spec.rotate_max, spec.rotate_max)))
    h, w = img.shape[:2]
    c = spec.center_crop
    if c > h or c > w:
        raise ValueError(f"centre crop {c} is larger than the {w}x{h} image")
    top, left = (h - c) // 2, (w - c) // 2
    img = img[top:top + c, left:left + c]
    r = spec.random_crop
    y0 = int(rng.integers(0, c - r + 1))
    x0 = int(rng.integers(0, c - r + 1))
    return img[y0:y0 + r, x0:x0 + r].copy()


@dataclass
class BlendResult:
    image: np.ndarray
    labels: dict[str, LabelMap]
    placements: list[PatchPlacement]
    alphas: list[float] = field(default_factory=list)

    @property
    def primary_label_kind(self) -> str:
        return next(iter(self.labels))


def _same_location(img_s, cfg: ClassConfig, rng: RngStream, mask_s) -> PatchPlacement:
    if cfg.selection_mode == "cutpaste_style":
        p = sample_cutpaste_style(img_s, rng)
        p.dst_rect = p.src_rect
    elif cfg.selection_mode == "fpi_style":
        p = sample_fpi_style(img_s, rng)
    else:
        rect, tries = _source_rect_with_tries(img_s, mask_s, cfg, rng)
        p = PatchPlacement(rect, rect, 1.0, None, (tries, 1))
    if cfg.shape_mode == "ellipse_union":
        w, h = p.dst_rect.pixel_size(img_s.shape[1], img_s.shape[0])
        p.shape_mask = ellipse_union_mask(w, h, ELLIPSE_COUNT, rng)
    return p


def _same_location_placements(img_s, cfg: ClassConfig, rng: RngStream) -> list[PatchPlacement]:
    mask_s = config_object_mask(img_s, cfg)
    count = sample_patch_count(cfg.n_max, rng)
    out = [_same_location(img_s, cfg, rng, mask_s)]
    for _ in range(count - 1):
        try:
            out.append(_same_location(img_s, cfg, rng, mask_s))
        except PlacementError:
            pass
    return out


def shape_support(shape: tuple[int, int], placements: list[PatchPlacement]) -> np.ndarray:
    """Union of the placed patch shapes (full rectangles when unshaped)."""
    h, w = shape
    support = np.zeros((h, w), dtype=bool)
    for p in placements:
        ys, xs = p.dst_rect.slices(w, h)
        support[ys, xs] |= True if p.shape_mask is None else p.shape_mask
    return support


def _nsa_labels(
    blended, original, cfg: ClassConfig, mode: str, window: int, placements: list[PatchPlacement]
) -> dict[str, LabelMap]:
    labels = {
        "binary": label_binary(blended, original, window),
        "continuous": label_continuous(blended, original, window),
        "logistic": label_logistic(blended, original, cfg.logistic_y0, cfg.logistic_k, window),
    }
    if cfg.shape_mode == "ellipse_union":
        # the median filter fills concave notches between ellipses; keep labels on the shapes
        support = shape_support(original.shape[:2], placements)
        labels = {k: LabelMap(v.values * support, v.kind) for k, v in labels.items()}
    primary = mode.split("-", 1)[1]
    return {primary: labels[primary], **{k: v for k, v in labels.items() if k != primary}}


def blend_pair(
    img_s: np.ndarray,
    img_d: np.ndarray,
    cfg: ClassConfig,
    mode: str,
    rng: RngStream,
    filter_window: int = DEFAULT_FILTER_WINDOW,
) -> BlendResult:
    """Create one synthetic sample; ``img_s`` is ignored for ``cutpaste``."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    img_s = as_image(img_s)
    img_d = as_image(img_d)
    if img_s.shape != img_d.shape:
        raise ValueError(f"source shape {img_s.shape} does not match destination shape {img_d.shape}")

    if mode.startswith("nsa"):
        placements = sample_placements(img_s, img_d, cfg, rng)
        out = img_d
        for p in placements:
            out = seamless_clone(img_s, out, p.src_rect, p.dst_rect, cfg.gradient_mode, p.shape_mask)
        return BlendResult(out, _nsa_labels(out, img_d, cfg, mode, filter_window, placements), placements)

    if mode == "cutpaste":
        same = cfg.replace(s_min=1.0, s_max=1.0, shape_mode="rect")
        placements = sample_placements(img_d, img_d, same, rng)
        out = img_d
        label = np.zeros(img_d.shape[:2])
        for p in placements:
            out, lab = blend_cutpaste(img_d, out, p)
            label = np.maximum(label, lab.values)
        return BlendResult(out, {"binary": LabelMap(label, "binary")}, placements)

    shaped = cfg if mode == "pii" else cfg.replace(shape_mode="rect")
    placements = _same_location_placements(img_s, shaped, rng)
    out = img_d
    label = np.zeros(img_d.shape[:2])
    alphas = []
    for p in placements:
        if mode == "fpi":
            out, lab = blend_fpi(img_s, out, p, rng=rng)
        else:
            out, lab = blend_pii(img_s, out, p, rng=rng)
        alphas.append(float(lab.values.max()))
        label = np.where(lab.values > 0, lab.values, label)
    return BlendResult(out, {"interpolation": LabelMap(label, "interpolation")}, placements, alphas)


@dataclass(frozen=True)
class DatasetSpec:
    input_dir: Path
    class_config: ClassConfig
    preprocessing: PreprocessSpec | None
    count: int
    base_seed: int
    output_dir: Path
    mode: str = "nsa-logistic"
    ablation: str | None = None
    filter_window: int = DEFAULT_FILTER_WINDOW

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _pick_pair(n_images: int, mode: str, rng: RngStream) -> tuple[int, int]:
    dst = int(rng.integers(0, n_images))
    if mode == "cutpaste":
        return dst, dst
    if n_images < 2:
        raise DataError("cross-image modes need at least two input images")
    src = int(rng.integers(0, n_images - 1))
    if src >= dst:
        src += 1
    return src, dst


def _synthesize_one(job) -> dict:
    index, paths, spec = job
    cfg = apply_ablation(spec.class_config, spec.ablation)
    reasons = []
    for attempt in range(MAX_ATTEMPTS):
        seed = RngStream.derive_seed(spec.base_seed, index, attempt)
        rng = RngStream(seed)
        src_i, dst_i = _pick_pair(len(paths), spec.mode, rng)
        img_s = preprocess(read_image(paths[src_i]), spec.preprocessing, rng)
        img_d = preprocess(read_image(paths[dst_i]), spec.preprocessing, rng)
        if img_s.shape != img_d.shape:
            raise DataError(
                f"{paths[src_i].name} and {paths[dst_i].name} differ in shape after preprocessing; "
                "use a preprocessing mode or inputs of equal size"
            )
        try:
            result = blend_pair(img_s, img_d, cfg, spec.mode, rng, spec.filter_window)
        except (PlacementError, SolverError) as exc:
            reasons.append(f"attempt {attempt}: {exc}")
            continue
        stem = f"{index:06d}"
        files = {"image": f"{stem}.png"}
        write_image(spec.output_dir / files["image"], result.image)
        for kind, label in result.labels.items():
            files[kind] = f"{stem}_{kind}.png"
            write_label(spec.output_dir / files[kind], label)
        record = {
            "id": index,
            "status": "ok",
            "seed": seed,
            "attempt": attempt,
            "mode": spec.mode,
            "ablation": spec.ablation,
            "source": paths[src_i].name,
            "destination": paths[dst_i].name,
            "label": result.primary_label_kind,
            "files": files,
            "placements": [p.to_dict() for p in result.placements],
            "rng_draws": rng.counter,
        }
        if result.alphas:
            record["alphas"] = result.alphas
        return record
    return {
        "id": index,
        "status": "skipped",
        "mode": spec.mode,
        "ablation": spec.ablation,
        "reasons": reasons,
    }


def synthesize(spec: DatasetSpec, workers: int | None = None) -> list[dict]:
    """Generate ``spec.count`` samples into ``spec.output_dir`` and write ``manifest.jsonl``.

    Returns the manifest records in sample order.
    """
    paths = list_images(spec.input_dir)
    if not paths:
        raise DataError(f"no PNG images in {spec.input_dir}")
    spec.output_dir.mkdir(parents=True, exist_ok=True)
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = [(i, paths, spec) for i in range(spec.count)]
    if workers == 1:
        records = [_synthesize_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_synthesize_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    with open(spec.output_dir / "manifest.jsonl", "w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    skipped = sum(r["status"] == "skipped" for r in records)
    if skipped:
        log.warning("%d of %d samples skipped after %d attempts", skipped, len(records), MAX_ATTEMPTS)
    return records


def load_scored_samples(pred_dir, truth_dir, resample_256: bool = False) -> list[ScoredSample]:
    """Pair prediction maps with truth masks by file stem."""
    preds = {p.stem: p for p in list_images(pred_dir)}
    truths = {p.stem: p for p in list_images(truth_dir)}
    missing_truth = sorted(set(preds) - set(truths))
    missing_pred = sorted(set(truths) - set(preds))
    if missing_truth or missing_pred:
        parts = []
        if missing_truth:
            parts.append(f"predictions without masks: {', '.join(missing_truth)}")
        if missing_pred:
            parts.append(f"masks without predictions: {', '.join(missing_pred)}")
        raise DataError("unmatched stems; " + "; ".join(parts))
    if not preds:
        raise DataError(f"no PNG predictions in {pred_dir}")
    samples = []
    for stem in sorted(preds):
        pred = read_map(preds[stem])
        mask = read_mask(truths[stem])
        if resample_256:
            pred = resize_bilinear(pred, 256, 256)
            mask = resize_nearest(mask, 256, 256)
        if pred.shape != mask.shape:
            raise DataError(f"{stem}: prediction {pred.shape} and mask {mask.shape} differ in size")
        samples.append(ScoredSample(pred, mask))
    return samples


def evaluate(
    pred_dir, truth_dir, fpr_limit: float = 0.3, resample_256: bool = False, connectivity: int = 8
) -> ScoreReport:
    samples = load_scored_samples(pred_dir, truth_dir, resample_256)
    return score_report(samples, fpr_limit, connectivity)
