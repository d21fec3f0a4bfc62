"""Ground-truth 2D vote maps from instance label masks.

Every pixel of a mask segment votes for the segment centroid. Segments that
touch the image border are dropped, since their centroid is biased by clipping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import round_half_away
from .errors import ValidationError


@dataclass
class LabelMask:
    labels: np.ndarray  # (H, W) int, 0 = background
    level: int = 0

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 2:
            raise ValidationError("label mask must be 2-D")
        if self.labels.size and self.labels.min() < 0:
            raise ValidationError("labels must be non-negative")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def segments(self) -> np.ndarray:
        ids = np.unique(self.labels)
        return ids[ids > 0]


@dataclass
class VoteMap2D:
    """Per-pixel target votes in screen coordinates (pixel centers at +0.5); NaN outside P."""

    votes: np.ndarray  # (H, W, 2)
    supervised: np.ndarray  # (H, W) bool, the pixel set P
    centroids: dict  # segment id -> integer centroid (c_x, c_y)

    @property
    def count(self) -> int:
        return int(self.supervised.sum())


def segment_centroid(mask: LabelMask, segment_id: int) -> tuple[int, int]:
    """Rounded mean pixel index (x, y) of a segment; halves round away from zero."""
    ys, xs = np.nonzero(mask.labels == segment_id)
    if len(xs) == 0:
        raise ValidationError(f"segment {segment_id} is empty")
    cx = round_half_away(xs.sum() / len(xs))
    cy = round_half_away(ys.sum() / len(ys))
    return int(cx), int(cy)


def build_vote_map(mask: LabelMask, border_margin: int = 1) -> VoteMap2D:
    """Assign each pixel of every interior segment its segment's centroid.

    A segment is dropped when any of its pixels lies within ``border_margin``
    pixels of the image edge.
    """
    labels = mask.labels
    h, w = labels.shape
    votes = np.full((h, w, 2), np.nan)
    supervised = np.zeros((h, w), dtype=bool)
    centroids = {}
    if border_margin > 0:
        rim = np.zeros((h, w), dtype=bool)
        rim[:border_margin] = True
        rim[-border_margin:] = True
        rim[:, :border_margin] = True
        rim[:, -border_margin:] = True
        clipped = set(np.unique(labels[rim]).tolist())
    else:
        clipped = set()
    for seg in mask.segments():
        seg = int(seg)
        if seg in clipped:
            continue
        sel = labels == seg
        cx, cy = segment_centroid(mask, seg)
        centroids[seg] = (cx, cy)
        votes[sel] = (cx + 0.5, cy + 0.5)
        supervised |= sel
    return VoteMap2D(votes=votes, supervised=supervised, centroids=centroids)


def label_mask_from_scene(scene, view, labels: np.ndarray | None = None, level: int = 0) -> LabelMask:
    """Render a ground-truth label mask (label k -> k + 1) from per-Gaussian labels.

    A pixel gets a label only when every member of its vote member set carries
    that same non-negative label; mixed pixels along silhouettes stay 0.
    """
    from .raster import rasterize

    if labels is None:
        labels = scene.labels
    labels = np.asarray(labels, dtype=np.int64)
    members = rasterize(scene, view).members
    counts = members.counts()
    out = np.zeros(len(counts), dtype=np.int64)
    has = np.flatnonzero(counts > 0)
    if len(has):
        lab = labels[members.ids]
        starts = members.offsets[:-1][has]
        lo = np.minimum.reduceat(lab, starts)
        hi = np.maximum.reduceat(lab, starts)
        pure = (lo == hi) & (lo >= 0)
        out[has[pure]] = lo[pure] + 1
    return LabelMask(out.reshape(view.height, view.width), level=level)
