"""IoU-based segmentation scoring and relative object-size classes."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .events import GroundTruthMask
from .oms import OmsFrame

POLICIES = ("skip", "count_as_one")
SMALL_OBJECT_FRACTION = 0.20


def _grid(x) -> np.ndarray:
    if isinstance(x, OmsFrame):
        return x.upsample()
    if isinstance(x, GroundTruthMask):
        return x.grid
    return np.asarray(x)


def iou(pred, gt, policy: str = "skip") -> float:
    """|pred & gt| / |pred | gt|.

    When both masks are empty the ratio is undefined: ``skip`` returns NaN
    (dropped by :func:`mean_iou`), ``count_as_one`` returns 1.0.
    """
    if policy not in POLICIES:
        raise ValidationError(f"policy must be one of {POLICIES}, got {policy!r}")
    a = np.asarray(pred, dtype=bool)
    b = np.asarray(gt, dtype=bool)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: prediction {a.shape} vs ground truth {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return math.nan if policy == "skip" else 1.0
    return np.count_nonzero(a & b) / union


@dataclass
class IouReport:
    per_frame: list[float]
    empty_frame_policy: str = "skip"
    skipped: int = 0
    size_classes: list[str] = field(default_factory=list)

    @property
    def frames_evaluated(self) -> int:
        return len(self.per_frame)

    @property
    def defined(self) -> bool:
        return bool(self.per_frame)

    @property
    def mean_iou(self) -> float:
        return float(np.mean(self.per_frame)) if self.per_frame else math.nan

    def class_mean(self, size_class: str) -> float:
        vals = [v for v, c in zip(self.per_frame, self.size_classes) if c == size_class]
        return float(np.mean(vals)) if vals else math.nan

    def to_dict(self) -> dict:
        return {
            "per_frame": self.per_frame,
            "mean_iou": self.mean_iou if self.defined else None,
            "mean_defined": self.defined,
            "frames_evaluated": self.frames_evaluated,
            "frames_skipped": self.skipped,
            "empty_frame_policy": self.empty_frame_policy,
            "size_classes": self.size_classes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def mean_iou(pairs: Iterable[tuple], policy: str = "skip") -> IouReport:
    """Score (prediction, ground truth) pairs; strided OMS frames are upsampled first."""
    per_frame: list[float] = []
    classes: list[str] = []
    skipped = 0
    for pred, gt in pairs:
        value = iou(_grid(pred), _grid(gt), policy)
        if math.isnan(value):
            skipped += 1
            continue
        per_frame.append(value)
        classes.append(object_size_class(gt))
    return IouReport(per_frame, policy, skipped, classes)


def object_size_class(gt) -> str:
    grid = np.asarray(_grid(gt), dtype=bool)
    if grid.size == 0:
        return "small"
    return "small" if np.count_nonzero(grid) / grid.size < SMALL_OBJECT_FRACTION else "large"


def majority_size_class(masks: Sequence) -> str:
    """Most common per-frame class; ties resolve to ``small``."""
    counts = Counter(object_size_class(m) for m in masks)
    return "large" if counts["large"] > counts["small"] else "small"


def format_table(headers: Sequence[str], rows: Sequence[Sequence], title: str | None = None) -> str:
    """Plain-text table with right-aligned columns."""
    cells = [[str(h) for h in headers]] + [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    rule = "  ".join("-" * w for w in widths)
    lines = [title] if title else []
    lines.append("  ".join(h.rjust(w) for h, w in zip(cells[0], widths)))
    lines.append(rule)
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells[1:]]
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return "n/a" if math.isnan(v) else f"{v:.2f}"
    return str(v)
