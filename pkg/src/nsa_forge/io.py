"""PNG reading and writing.

Label encodings (16-bit grayscale):

* bounded labels (binary, logistic, interpolation): ``round(value * 65535)``
* continuous labels (0-255 intensity units): ``round(value * 256)``, saturating
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .core import as_image
from .labeler import LabelMap

BOUNDED_SCALE = 65535.0
CONTINUOUS_SCALE = 256.0


class DataError(ValueError):
    """Input data is missing, unreadable or inconsistent."""


def read_image(path) -> np.ndarray:
    """8- or 16-bit PNG (gray, gray+alpha, RGB or RGBA) as an ``(H, W, C)`` image in [0, 1]."""
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I;16", "I;16B", "I"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
                return as_image(arr)
            if im.mode in ("L", "P", "1"):
                im = im.convert("L")
            elif im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    return as_image(arr)


def to_uint8(image: np.ndarray) -> np.ndarray:
    img = as_image(image)
    out = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    return out[:, :, 0] if out.shape[2] == 1 else out


def write_image(path, image: np.ndarray) -> None:
    Image.fromarray(to_uint8(image)).save(path, format="PNG")


def encode_label(label: LabelMap) -> np.ndarray:
    scale = CONTINUOUS_SCALE if label.kind == "continuous" else BOUNDED_SCALE
    values = np.clip(np.floor(label.values * scale + 0.5), 0, 65535)
    return values.astype(np.uint16)


def decode_label(values: np.ndarray, kind: str) -> LabelMap:
    scale = CONTINUOUS_SCALE if kind == "continuous" else BOUNDED_SCALE
    return LabelMap(np.asarray(values, dtype=np.float64) / scale, kind)


def write_uint16(path, values: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(values, dtype=np.uint16)).save(path, format="PNG")


def read_uint16(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if arr.ndim != 2:
        raise DataError(f"{path}: expected a single-channel PNG")
    return arr.astype(np.uint16)


def write_label(path, label: LabelMap) -> None:
    write_uint16(path, encode_label(label))


def read_label(path, kind: str) -> LabelMap:
    return decode_label(read_uint16(path), kind)


def read_map(path) -> np.ndarray:
    """Single-channel score map in [0, 1]; 16-bit files are divided by 65535, 8-bit by 255."""
    try:
        with Image.open(path) as im:
            mode = im.mode
            arr = np.asarray(im)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if arr.ndim == 3:
        arr = arr[:, :, :3].mean(axis=2) if mode != "LA" else arr[:, :, 0]
    if mode in ("I;16", "I;16B", "I"):
        return arr.astype(np.float64) / 65535.0
    return arr.astype(np.float64) / 255.0


def read_mask(path) -> np.ndarray:
    """Binary mask: any nonzero pixel is anomalous."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if arr.ndim == 3:
        arr = arr.max(axis=2)
    return arr > 0


def list_images(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() == ".png" and p.is_file())
