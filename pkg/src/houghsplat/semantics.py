"""Instance features from rendered ID maps, vector queries and pixel picking.

The feature source stands in for a vision-language encoder. The synthetic
source assigns each ground-truth mask label a fixed random unit vector, which
makes retrieval exactly checkable; external features come as per-view float
planes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import InstanceTable
from .errors import FormatError, ValidationError
from .io import read_plane
from .raster import render


class SyntheticFeatures:
    """Label-indexed unit vectors drawn from a seeded generator; label 0 (background) maps to zero."""

    def __init__(self, masks, dim: int = 16, seed: int = 0):
        if dim < 1:
            raise ValidationError("feature dimension must be >= 1")
        self.masks = list(masks)
        self.dim = dim
        self.seed = seed

    def vector(self, label: int) -> np.ndarray:
        if label <= 0:
            return np.zeros(self.dim)
        v = np.random.default_rng([self.seed, int(label)]).normal(size=self.dim)
        return v / np.linalg.norm(v)

    def __len__(self):
        return len(self.masks)

    def view_features(self, k: int) -> np.ndarray:
        labels = self.masks[k].labels
        table = np.stack([self.vector(lab) for lab in range(int(labels.max()) + 1)])
        return table[labels]


class PlaneFeatures:
    """Per-view (H, W, D) feature planes, in memory or as plane files."""

    def __init__(self, planes):
        self.planes = list(planes)
        if not self.planes:
            raise ValidationError("no feature planes given")
        first = self._get(0)
        self.dim = first.shape[2]

    def _get(self, k):
        p = self.planes[k]
        return read_plane(p) if isinstance(p, (str, Path)) else np.asarray(p, dtype=np.float64)

    def __len__(self):
        return len(self.planes)

    def view_features(self, k: int) -> np.ndarray:
        f = self._get(k)
        if f.ndim != 3 or f.shape[2] != self.dim:
            raise FormatError(f"feature plane {k} has shape {f.shape}, expected (H, W, {self.dim})")
        return f


@dataclass
class FeatureBank:
    dim: int
    features: dict = field(default_factory=dict)  # instance id -> unit vector
    missing: list = field(default_factory=list)  # instances seen in no view
    pixel_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": "houghsplat-features",
            "version": 1,
            "dim": self.dim,
            "features": {str(k): [float(x) for x in v] for k, v in sorted(self.features.items())},
            "missing": [int(k) for k in self.missing],
            "pixel_counts": {str(k): int(v) for k, v in sorted(self.pixel_counts.items())},
        }

    @classmethod
    def from_dict(cls, d: dict, file: str | None = None) -> "FeatureBank":
        if d.get("format") != "houghsplat-features" or d.get("version") != 1:
            raise FormatError("not a version-1 feature bank", file=file)
        feats = {int(k): np.asarray(v, dtype=np.float64) for k, v in d["features"].items()}
        for k, v in feats.items():
            if v.shape != (d["dim"],):
                raise FormatError(f"feature {k} has dimension {v.shape}, expected {d['dim']}", file=file)
        counts = {int(k): int(v) for k, v in d.get("pixel_counts", {}).items()}
        return cls(int(d["dim"]), feats, [int(k) for k in d.get("missing", [])], counts)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureBank":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", offset=exc.pos, file=str(path)) from None
        return cls.from_dict(data, file=str(path))


def instance_id_map(scene, table: InstanceTable, view) -> np.ndarray:
    """(H, W) instance id of the frontmost voting member, -1 where none."""
    labels = table.gaussian_labels(scene.n)
    labels[labels < 0] = -1
    return render(scene, view, mode="instance_ids", id_labels=labels).instance_ids


def associate_features(scene, table: InstanceTable, rig, source) -> FeatureBank:
    """Pool the feature source over each instance's rendered pixels in every view.

    Per-view means are combined with pixel-count weights (so the result is the
    mean over all of the instance's pixels) and then L2-normalized. The table's
    entries receive their features too.
    """
    if len(source) != len(rig):
        raise ValidationError(f"feature source has {len(source)} views, rig has {len(rig)}")
    ids = table.ids()
    sums = {k: np.zeros(source.dim) for k in ids}
    counts = {k: 0 for k in ids}
    for v, view in enumerate(rig):
        idmap = instance_id_map(scene, table, view)
        feats = source.view_features(v)
        if feats.shape[:2] != idmap.shape:
            raise ValidationError(f"feature plane {v} is {feats.shape[:2]}, view is {idmap.shape}")
        for k in ids:
            sel = idmap == k
            n = int(sel.sum())
            if n:
                sums[k] += feats[sel].sum(axis=0)
                counts[k] += n
    bank = FeatureBank(dim=source.dim)
    for k in ids:
        norm = np.linalg.norm(sums[k])
        if counts[k] == 0 or norm == 0:
            bank.missing.append(k)
            continue
        bank.features[k] = sums[k] / norm
        bank.pixel_counts[k] = counts[k]
        table.instances[k].feature = bank.features[k]
    return bank


@dataclass
class QueryResult:
    ranking: list  # (instance id, cosine score), descending
    selected: list  # selected instance ids
    gaussian_ids: np.ndarray
    masks: list  # per-view (H, W) bool


def rank(bank: FeatureBank, query_vector) -> list:
    q = np.asarray(query_vector, dtype=np.float64).reshape(-1)
    if q.shape != (bank.dim,):
        raise ValidationError(f"query has dimension {q.size}, bank has {bank.dim}")
    norm = np.linalg.norm(q)
    if norm == 0:
        raise ValidationError("query vector is zero")
    if not bank.features:
        raise ValidationError("feature bank is empty")
    q = q / norm
    scores = [(k, float(np.clip(v @ q, -1.0, 1.0))) for k, v in bank.features.items()]
    scores.sort(key=lambda t: (-t[1], t[0]))
    return scores


def selection_masks(scene, gaussian_ids, rig) -> list:
    """Render only the given Gaussians; a pixel is selected when it has any voting member."""
    gaussian_ids = np.asarray(gaussian_ids, dtype=np.int64)
    if len(gaussian_ids) == 0:
        return [np.zeros((v.height, v.width), dtype=bool) for v in rig]
    sub = scene.subset(gaussian_ids)
    return [(render(sub, view, mode="color").members.counts() > 0).reshape(view.height, view.width) for view in rig]


def query(bank: FeatureBank, query_vector, scene, table: InstanceTable, rig, threshold: float | None = None) -> QueryResult:
    """Rank instances by cosine similarity; select the top one, or all scoring above ``threshold``."""
    ranking = rank(bank, query_vector)
    if threshold is None:
        selected = [ranking[0][0]]
    else:
        selected = [k for k, s in ranking if s > threshold]
    ids = np.sort(np.concatenate([np.asarray(table.instances[k].gaussian_ids, dtype=np.int64) for k in selected])) if selected else np.zeros(0, dtype=np.int64)
    return QueryResult(ranking, selected, ids, selection_masks(scene, ids, rig))


def pick(scene, table: InstanceTable, rig, view_index: int, pixel) -> int:
    """Instance id under pixel (u, v) of a view, from the frontmost voting member; -1 if none."""
    if not 0 <= view_index < len(rig):
        raise ValidationError(f"view index {view_index} out of range")
    view = rig[view_index]
    u, v = (int(pixel[0]), int(pixel[1]))
    if not (0 <= u < view.width and 0 <= v < view.height):
        raise ValidationError(f"pixel ({u}, {v}) outside the {view.width}x{view.height} image")
    return int(instance_id_map(scene, table, view)[v, u])
