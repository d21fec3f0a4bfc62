"""Segmentation and voting metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._util import to_jsonable
from .camera import world_to_camera_points
from .errors import ValidationError


def iou(pred_mask, gt_mask) -> float:
    """Intersection over union of two boolean masks; 1.0 when both are empty."""
    a = np.asarray(pred_mask, dtype=bool)
    b = np.asarray(gt_mask, dtype=bool)
    if a.shape != b.shape:
        raise ValidationError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def m_acc(ious, threshold: float = 0.25) -> float:
    """Fraction of queries whose IoU is strictly above ``threshold``."""
    ious = np.asarray(ious, dtype=np.float64)
    if ious.size == 0:
        raise ValidationError("m_acc of an empty query list")
    return float(np.mean(ious > threshold))


def _pairs(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum(x * (x - 1.0) / 2.0))


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index from the contingency table."""
    a = np.asarray(labels_a).reshape(-1)
    b = np.asarray(labels_b).reshape(-1)
    if a.shape != b.shape:
        raise ValidationError("label arrays differ in length")
    n = a.size
    if n < 2:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    index = _pairs(table)
    sa = _pairs(table.sum(axis=1))
    sb = _pairs(table.sum(axis=0))
    expected = sa * sb / _pairs([n])
    maximum = 0.5 * (sa + sb)
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))


@dataclass
class VoteErrorReport:
    mean_error: dict  # instance -> mean ||V3d_i - c*||
    within_fraction: dict  # instance -> fraction with error <= tol * radius
    overall_within: float  # pooled over all instance Gaussians
    depth_spread: float | None = None  # mean over (view, instance) of member vote depth std
    tolerance: float = 0.1
    per_view_spread: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return to_jsonable(
            {
                "mean_error": {str(k): v for k, v in self.mean_error.items()},
                "within_fraction": {str(k): v for k, v in self.within_fraction.items()},
                "overall_within": self.overall_within,
                "depth_spread": self.depth_spread,
                "tolerance": self.tolerance,
                "per_view_spread": self.per_view_spread,
            }
        )


def depth_spread(scene, rig, labels, level: int = 0) -> tuple[float, list]:
    """Standard deviation of vote depths per (view, instance), averaged.

    For each view, an instance's sample is the set of its Gaussians that sit in
    any member set of that view. Returns (mean spread, per-view means).
    """
    from .raster import rasterize

    labels = np.asarray(labels)
    votes = scene.votes(level)
    per_view = []
    values = []
    for view in rig:
        ids = np.unique(rasterize(scene, view).members.ids)
        z = world_to_camera_points(view, votes[ids])[:, 2]
        lab = labels[ids]
        spreads = [float(np.std(z[lab == k])) for k in np.unique(lab[lab >= 0]) if np.count_nonzero(lab == k) > 1]
        values.extend(spreads)
        per_view.append(float(np.mean(spreads)) if spreads else float("nan"))
    return (float(np.mean(values)) if values else float("nan")), per_view


def vote_error(scene, centroids: dict, radii: dict | None = None, labels=None, level: int = 0, tolerance: float = 0.1, rig=None) -> VoteErrorReport:
    """Per-instance distance of trained votes to known centroids.

    ``centroids`` maps instance label to its 3D center (the generator's, or an
    instance table's vote centroids); ``labels`` gives each Gaussian's instance
    (default: the scene's ground-truth labels). With a rig, the depth spread is
    also reported.
    """
    labels = scene.labels if labels is None else np.asarray(labels)
    votes = scene.votes(level)
    mean_err, within = {}, {}
    hits = total = 0
    for k, c in sorted(centroids.items()):
        sel = labels == k
        if not sel.any():
            continue
        d = np.linalg.norm(votes[sel] - np.asarray(c, dtype=np.float64), axis=1)
        mean_err[int(k)] = float(d.mean())
        if radii is not None:
            ok = d <= tolerance * radii[k]
            within[int(k)] = float(ok.mean())
            hits += int(ok.sum())
            total += int(sel.sum())
    spread, per_view = (None, [])
    if rig is not None:
        spread, per_view = depth_spread(scene, rig, labels, level)
    return VoteErrorReport(mean_err, within, hits / total if total else float("nan"), spread, tolerance, per_view)


def write_metrics(path: str | Path, metrics: dict) -> None:
    """Metrics JSON with sorted keys so identical runs give identical bytes."""
    Path(path).write_text(json.dumps(to_jsonable(metrics), indent=2, sort_keys=True) + "\n")
