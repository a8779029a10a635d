"""Segmentation scoring: per-image IoU and detection rate at IoU thresholds.

A ground-truth-positive image counts as a true positive at threshold ``tau``
when its IoU is at least ``tau``, otherwise as a false negative, and
``DR = TP / (TP + FN)``. Images whose ground truth is empty are excluded from
the rate and reported separately.

Also provides a model-free baseline segmenter (background color model plus
Mahalanobis thresholding). It exists to validate the pipeline end to end and
is not a substitute for a trained Unet or FPN.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import EvaluationError
from .render import load_mask

DEFAULT_TAUS = (0.5, 0.6)


def as_binary(mask, name: str = "mask") -> np.ndarray:
    """Boolean foreground of a {0, 255}, {0, 1} or bool mask."""
    m = np.asarray(mask)
    if m.dtype == bool:
        return m
    if m.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {m.shape}")
    values = np.unique(m)
    if not (np.all(np.isin(values, (0, 255))) or np.all(np.isin(values, (0, 1)))):
        raise ValueError(f"{name} is not binary: values {values[:5].tolist()}...")
    return m != 0


def iou(prediction, truth) -> float:
    """Foreground intersection over union; two empty masks score 1.0."""
    p = as_binary(prediction, "prediction")
    t = as_binary(truth, "truth")
    if p.shape != t.shape:
        raise ValueError(f"mask shapes differ: {p.shape} vs {t.shape}")
    union = np.count_nonzero(p | t)
    if union == 0:
        return 1.0
    return np.count_nonzero(p & t) / union


@dataclass
class EvalPair:
    prediction: np.ndarray
    truth: np.ndarray
    id: str = ""

    def __post_init__(self):
        p = np.asarray(self.prediction)
        t = np.asarray(self.truth)
        if p.shape[:2] != t.shape[:2]:
            raise ValueError(f"pair {self.id!r}: prediction {p.shape} and truth {t.shape} differ")

    @property
    def truth_empty(self) -> bool:
        return not as_binary(self.truth, "truth").any()

    def iou(self) -> float:
        return iou(self.prediction, self.truth)


@dataclass
class RateEntry:
    tau: float
    tp: int
    fn: int
    excluded: int
    dr: float

    def to_dict(self) -> dict:
        return {"tau": self.tau, "tp": self.tp, "fn": self.fn, "excluded": self.excluded, "dr": self.dr}


def _rate(ious: list[float], empty: list[bool], tau: float) -> RateEntry:
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    tp = sum(1 for v, e in zip(ious, empty) if not e and v >= tau)
    fn = sum(1 for v, e in zip(ious, empty) if not e and v < tau)
    excluded = sum(empty)
    if tp + fn == 0:
        raise EvaluationError("no positive ground truth: every pair has an empty truth mask")
    return RateEntry(tau, tp, fn, excluded, tp / (tp + fn))


def detection_rate(pairs, tau: float) -> RateEntry:
    """Detection rate over ``pairs`` (EvalPair objects) at threshold ``tau``."""
    pairs = list(pairs)
    return _rate([p.iou() for p in pairs], [p.truth_empty for p in pairs], tau)


@dataclass
class MetricsReport:
    ids: list[str]
    ious: list[float]
    entries: list[RateEntry]
    method: str = ""
    data_size: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def pair_count(self) -> int:
        return len(self.ious)

    def dr(self, tau: float) -> float:
        for e in self.entries:
            if e.tau == tau:
                return e.dr
        raise KeyError(tau)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "data_size": self.data_size,
            "pair_count": self.pair_count,
            "pairs": [{"id": i, "iou": v} for i, v in zip(self.ids, self.ious)],
            "thresholds": [e.to_dict() for e in self.entries],
            **self.extra,
        }

    def table(self) -> str:
        """Plain-text table with one DR column per threshold."""
        heads = ["Method"] + [f"DR_{round(e.tau * 100):d}" for e in self.entries] + ["Data size"]
        row = [self.method or "-"] + [f"{e.dr:.3f}" for e in self.entries] + [self.data_size or str(self.pair_count)]
        widths = [max(len(a), len(b)) for a, b in zip(heads, row)]
        fmt = "  ".join("{:<%d}" % w for w in widths)
        rule = "  ".join("-" * w for w in widths)
        return "\n".join(line.rstrip() for line in (fmt.format(*heads), rule, fmt.format(*row))) + "\n"


def evaluate(pairs, taus=DEFAULT_TAUS, method: str = "", data_size: str = "") -> MetricsReport:
    pairs = list(pairs)
    ious = [p.iou() for p in pairs]
    empty = [p.truth_empty for p in pairs]
    entries = [_rate(ious, empty, float(t)) for t in sorted(set(taus))]
    return MetricsReport([p.id for p in pairs], ious, entries, method, data_size)


def check_report(report: MetricsReport) -> None:
    """Raise AssertionError if stored counts and rates disagree."""
    prev = None
    for e in report.entries:
        assert e.dr == e.tp / (e.tp + e.fn)
        assert e.tp + e.fn + e.excluded == report.pair_count
        if prev is not None and e.tau >= prev.tau:
            assert e.dr <= prev.dr
        prev = e


def load_pairs(path) -> list[EvalPair]:
    """Read a JSONL pair list: ``{"prediction": ..., "truth": ..., "id": ...}``
    per line; relative paths are resolved against the list's directory."""
    path = Path(path)
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                pred_p = path.parent / rec["prediction"]
                truth_p = path.parent / rec["truth"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise EvaluationError(f"{path}:{lineno}: bad pair record ({exc})") from None
            for p in (pred_p, truth_p):
                if not p.exists():
                    raise FileNotFoundError(f"{path}:{lineno}: missing file {p}")
            pairs.append(EvalPair(load_mask(pred_p), load_mask(truth_p), str(rec.get("id", lineno))))
    return pairs


# ---------------------------------------------------------------------------
# Baseline segmenter
# ---------------------------------------------------------------------------

_EIGHT = np.ones((3, 3), dtype=bool)


def _background_model(pixels: np.ndarray, iterations: int = 4, keep: float = 0.8):
    """Trimmed mean/covariance: refit on the pixels closest to the model."""
    mean = np.median(pixels, axis=0)
    centered = pixels - mean
    cov = centered.T @ centered / max(len(pixels) - 1, 1)
    for _ in range(iterations):
        d2 = _mahalanobis_sq(pixels, mean, cov)
        cut = np.quantile(d2, keep)
        inliers = pixels[d2 <= cut]
        mean = inliers.mean(axis=0)
        centered = inliers - mean
        cov = centered.T @ centered / max(len(inliers) - 1, 1)
    return mean, cov


def _mahalanobis_sq(pixels, mean, cov):
    reg = cov + np.eye(cov.shape[0]) * 1e-6
    inv = np.linalg.inv(reg)
    c = pixels - mean
    return np.einsum("ij,jk,ik->i", c, inv, c)


def baseline_segment(image, sensitivity: float = 4.0) -> np.ndarray:
    """Largest anomalous blob against a robust per-image background model.

    Pixels whose Mahalanobis distance (in normalized RGB) from the background
    exceeds ``sensitivity`` are foreground candidates; a 3x3 opening then
    closing cleans them and the largest 8-connected component is kept (ties
    go to the component whose first pixel comes first in raster order).
    Returns a {0, 255} uint8 mask.
    """
    if not sensitivity > 0:
        raise ValueError("sensitivity must be > 0")
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {img.shape}")
    h, w = img.shape[:2]
    px = img.reshape(-1, 3).astype(np.float64) / 255.0
    mean, cov = _background_model(px)
    d2 = _mahalanobis_sq(px, mean, cov).reshape(h, w)
    fg = d2 > sensitivity * sensitivity
    fg = ndimage.binary_opening(fg, structure=_EIGHT)
    fg = ndimage.binary_closing(fg, structure=_EIGHT)
    labels, n = ndimage.label(fg, structure=_EIGHT)
    out = np.zeros((h, w), dtype=np.uint8)
    if n == 0:
        return out
    sizes = np.bincount(labels.ravel())[1:]
    # labels are assigned in raster order, so argmax picks the earliest on ties
    best = int(np.argmax(sizes)) + 1
    out[labels == best] = 255
    return out
