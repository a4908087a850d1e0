"""Detection and localization scores for anomaly maps.

Conventions: a pixel or image is predicted positive when its score is
``>= t``; ties between a positive and a negative count one half in AUROC;
connected components are 8-connected unless asked otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.stats import rankdata

BCE_EPSILON = 1e-7


class UndefinedMetricError(ValueError):
    """The metric is undefined for the given input (e.g. a single class)."""


@dataclass
class ScoredSample:
    prediction: np.ndarray
    truth_mask: np.ndarray

    def __post_init__(self):
        self.prediction = np.asarray(self.prediction, dtype=np.float64)
        self.truth_mask = np.asarray(self.truth_mask, dtype=bool)
        if self.prediction.shape != self.truth_mask.shape:
            raise ValueError(
                f"prediction shape {self.prediction.shape} does not match mask shape {self.truth_mask.shape}"
            )

    @property
    def anomalous(self) -> bool:
        return bool(self.truth_mask.any())


@dataclass
class ScoreReport:
    image_auroc: float
    pixel_auroc: float
    au_pro: float
    fpr_limit: float
    roc_points: list = field(default_factory=list)
    pro_points: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "image_auroc": self.image_auroc,
            "pixel_auroc": self.pixel_auroc,
            "au_pro": self.au_pro,
            "fpr_limit": self.fpr_limit,
            "roc_points": self.roc_points,
            "pro_points": self.pro_points,
        }


def image_score(prediction) -> float:
    """Mean pixel score."""
    arr = np.asarray(prediction, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot score an empty map")
    return float(arr.mean())


def _split(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=bool).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise UndefinedMetricError("AUROC needs at least one positive and one negative")
    return scores, labels


def auroc(scores, labels) -> float:
    """Mann-Whitney estimate of P(score_pos > score_neg) + 0.5 P(tie)."""
    scores, labels = _split(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    ranks = rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(fpr, tpr, thresholds)`` at every distinct score, starting from (0, 0)."""
    scores, labels = _split(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    lab = labels[order]
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tps = np.cumsum(lab)[last]
    fps = (last + 1) - tps
    fpr = np.r_[0.0, fps / (labels.size - labels.sum())]
    tpr = np.r_[0.0, tps / labels.sum()]
    return fpr, tpr, np.r_[np.inf, s[last]]


def pixel_auroc(samples: list[ScoredSample]) -> float:
    scores = np.concatenate([s.prediction.ravel() for s in samples])
    labels = np.concatenate([s.truth_mask.ravel() for s in samples])
    return auroc(scores, labels)


def image_auroc(samples: list[ScoredSample]) -> float:
    return auroc([image_score(s.prediction) for s in samples], [s.anomalous for s in samples])


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 8:
        return np.ones((3, 3), dtype=bool)
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def pro_curve(samples: list[ScoredSample], connectivity: int = 8) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(fpr, pro, thresholds)`` at every distinct prediction value, starting from (0, 0).

    Each anomalous pixel carries weight ``1 / (M |C|)`` for its component
    ``C``, so the PRO at a threshold is a cumulative sum over pixels sorted by
    decreasing score.
    """
    structure = _structure(connectivity)
    weights = []
    component_sizes = []
    for s in samples:
        labels, n = ndimage.label(s.truth_mask, structure=structure)
        sizes = np.bincount(labels.ravel(), minlength=n + 1)
        component_sizes.append(sizes[1:])
        w = np.zeros(labels.shape)
        inside = labels > 0
        w[inside] = 1.0 / sizes[labels[inside]]
        weights.append(w.ravel())
    m = sum(len(c) for c in component_sizes)
    if m == 0:
        raise UndefinedMetricError("PRO needs at least one anomalous region")
    scores = np.concatenate([s.prediction.ravel() for s in samples])
    normal = ~np.concatenate([s.truth_mask.ravel() for s in samples])
    n_normal = int(normal.sum())
    if n_normal == 0:
        raise UndefinedMetricError("PRO needs at least one normal pixel")
    weight = np.concatenate(weights) / m

    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    fp = np.cumsum(normal[order])[last]
    pro = np.cumsum(weight[order])[last]
    fpr = np.r_[0.0, fp / n_normal]
    pro = np.r_[0.0, np.minimum(pro, 1.0)]
    return fpr, pro, np.r_[np.inf, s[last]]


def integrate_limited(x: np.ndarray, y: np.ndarray, limit: float) -> float:
    """Trapezoid area under ``y(x)`` for ``x`` in [0, limit], interpolating at the limit.

    ``x`` must be non-decreasing and start at 0.
    """
    keep = x <= limit
    xs = list(x[keep])
    ys = list(y[keep])
    if xs[-1] < limit:
        nxt = int(np.argmax(~keep)) if (~keep).any() else None
        if nxt is not None:
            x0, y0, x1, y1 = x[nxt - 1], y[nxt - 1], x[nxt], y[nxt]
            xs.append(limit)
            ys.append(y0 + (y1 - y0) * (limit - x0) / (x1 - x0))
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    return float(np.sum((xs[1:] - xs[:-1]) * (ys[1:] + ys[:-1]) / 2.0))


def au_pro(samples: list[ScoredSample], fpr_limit: float = 0.3, connectivity: int = 8) -> float:
    """Area under the PRO curve up to ``fpr_limit``, divided by ``fpr_limit``."""
    if not 0 < fpr_limit <= 1:
        raise ValueError("fpr_limit must be in (0, 1]")
    fpr, pro, _ = pro_curve(samples, connectivity)
    return integrate_limited(fpr, pro, fpr_limit) / fpr_limit


def _match(prediction, label) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(prediction, dtype=np.float64)
    y = np.asarray(getattr(label, "values", label), dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"prediction shape {p.shape} does not match label shape {y.shape}")
    return p, y


def bce_loss(prediction, label) -> float:
    """Mean binary cross-entropy; predictions are clipped to [1e-7, 1 - 1e-7]."""
    p, y = _match(prediction, label)
    p = np.clip(p, BCE_EPSILON, 1 - BCE_EPSILON)
    return float(np.mean(-y * np.log(p) - (1 - y) * np.log1p(-p)))


def mse_loss(prediction, label) -> float:
    p, y = _match(prediction, label)
    return float(np.mean((y - p) ** 2))


def _thin(x: np.ndarray, y: np.ndarray, max_points: int) -> list[list[float]]:
    if x.size > max_points:
        idx = np.unique(np.linspace(0, x.size - 1, max_points).round().astype(int))
        x, y = x[idx], y[idx]
    return [[float(a), float(b)] for a, b in zip(x, y)]


def score_report(
    samples: list[ScoredSample], fpr_limit: float = 0.3, connectivity: int = 8, max_points: int = 512
) -> ScoreReport:
    fpr, tpr, _ = roc_curve(
        np.concatenate([s.prediction.ravel() for s in samples]),
        np.concatenate([s.truth_mask.ravel() for s in samples]),
    )
    pfpr, pro, _ = pro_curve(samples, connectivity)
    return ScoreReport(
        image_auroc=image_auroc(samples),
        pixel_auroc=pixel_auroc(samples),
        au_pro=integrate_limited(pfpr, pro, fpr_limit) / fpr_limit,
        fpr_limit=fpr_limit,
        roc_points=_thin(fpr, tpr, max_points),
        pro_points=_thin(pfpr, pro, max_points),
    )
