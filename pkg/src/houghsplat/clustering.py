"""Instance recovery from trained votes: background filtering, DBSCAN, instance table.

Labels are canonical: clusters are numbered in order of their lowest member
index, and a border point reachable from several clusters joins the cluster of
its lowest-index core neighbor. The result therefore does not depend on
traversal order.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ._util import strict_kwargs
from .errors import ConfigError, FormatError, ValidationError

NOISE = -1
BACKGROUND = -2


@dataclass
class ClusterParams:
    eps: float | None = None  # world units; default 5% of the scene diagonal
    min_pts: int = 8  # neighbors within eps, the point itself included
    background_eps: float | None = None  # offset norm threshold; default 1e-6 * scene diagonal
    level: int = 0
    version: int = 1

    def __post_init__(self):
        if self.version != 1:
            raise ConfigError(f"unsupported cluster params version {self.version}", field="version")
        if self.eps is not None and not self.eps > 0:
            raise ConfigError("eps must be positive", field="eps")
        if self.min_pts < 1:
            raise ConfigError("min_pts must be >= 1", field="min_pts")
        if self.background_eps is not None and self.background_eps < 0:
            raise ConfigError("background_eps must be non-negative", field="background_eps")

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterParams":
        return cls(**strict_kwargs(cls, d, "cluster_params"))

    def resolved(self, scene) -> "ClusterParams":
        """Copy with scene-relative defaults filled in."""
        diag = scene.diagonal
        return ClusterParams(
            eps=self.eps if self.eps is not None else 0.05 * diag,
            min_pts=self.min_pts,
            background_eps=self.background_eps if self.background_eps is not None else 1e-6 * diag,
            level=self.level,
        )


def filter_background(scene, background_eps: float, level: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Split Gaussian ids into (foreground, background) by offset norm."""
    norms = np.linalg.norm(scene.offsets[level], axis=1)
    bg = norms <= background_eps
    return np.flatnonzero(~bg), np.flatnonzero(bg)


# ---------------------------------------------------------------------------
# DBSCAN


def _canonical_labels(n: int, core: np.ndarray, comp: np.ndarray, border_of: np.ndarray) -> np.ndarray:
    """Number clusters by lowest member index; ``comp`` holds component ids for core points."""
    raw = np.full(n, -1, dtype=np.int64)
    raw[core] = comp[core]
    has = border_of >= 0
    raw[has] = comp[border_of[has]]
    labels = np.full(n, NOISE, dtype=np.int64)
    remap: dict = {}
    for i in range(n):
        c = raw[i]
        if c < 0:
            continue
        if c not in remap:
            remap[c] = len(remap)
        labels[i] = remap[c]
    return labels


def _grid_pairs(votes: np.ndarray, eps: float):
    """All (i, j) index pairs with ||v_i - v_j|| <= eps, i != j, via a uniform grid of cell size eps."""
    cells = np.floor(votes / eps).astype(np.int64)
    order = np.lexsort((cells[:, 2], cells[:, 1], cells[:, 0]))
    sorted_cells = cells[order]
    change = np.any(np.diff(sorted_cells, axis=0) != 0, axis=1)
    starts = np.concatenate([[0], np.flatnonzero(change) + 1])
    stops = np.concatenate([starts[1:], [len(order)]])
    index = {tuple(sorted_cells[s]): (s, e) for s, e in zip(starts, stops)}
    shifts = [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)]
    eps2 = eps * eps
    rows, cols = [], []
    for key, (s, e) in index.items():
        a = order[s:e]
        for dx, dy, dz in shifts:
            other = index.get((key[0] + dx, key[1] + dy, key[2] + dz))
            if other is None:
                continue
            b = order[other[0] : other[1]]
            d2 = np.sum((votes[a][:, None, :] - votes[b][None, :, :]) ** 2, axis=2)
            ii, jj = np.nonzero(d2 <= eps2)
            keep = a[ii] != b[jj]
            rows.append(a[ii][keep])
            cols.append(b[jj][keep])
    if not rows:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(rows), np.concatenate(cols)


def cluster_votes(votes, eps: float, min_pts: int) -> np.ndarray:
    """Grid-accelerated DBSCAN. Returns per-point labels, -1 for noise."""
    votes = np.asarray(votes, dtype=np.float64).reshape(-1, 3)
    n = len(votes)
    if not np.all(np.isfinite(votes)):
        raise ValidationError("votes must be finite")
    if not eps > 0 or min_pts < 1:
        raise ValidationError("eps must be positive and min_pts >= 1")
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    rows, cols = _grid_pairs(votes, eps)
    degree = np.bincount(rows, minlength=n) + 1  # the point counts itself
    core = degree >= min_pts
    cc = core[rows] & core[cols]
    graph = coo_matrix((np.ones(int(cc.sum())), (rows[cc], cols[cc])), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    # border points: lowest-index core neighbor
    border_of = np.full(n, -1, dtype=np.int64)
    bsel = ~core[rows] & core[cols]
    if bsel.any():
        br, bc = rows[bsel], cols[bsel]
        best = np.full(n, n, dtype=np.int64)
        np.minimum.at(best, br, bc)
        has = best < n
        border_of[has] = best[has]
    return _canonical_labels(n, core, comp, border_of)


def cluster_votes_bruteforce(votes, eps: float, min_pts: int) -> np.ndarray:
    """Exhaustive O(n^2) DBSCAN with the same canonical labeling; the reference for ``cluster_votes``."""
    votes = np.asarray(votes, dtype=np.float64).reshape(-1, 3)
    n = len(votes)
    neighbors = []
    for i in range(n):
        d = np.sqrt(np.sum((votes - votes[i]) ** 2, axis=1))
        neighbors.append([j for j in range(n) if d[j] <= eps])
    core = np.array([len(nb) >= min_pts for nb in neighbors], dtype=bool)
    comp = np.full(n, -1, dtype=np.int64)
    next_id = 0
    for seed in range(n):
        if not core[seed] or comp[seed] >= 0:
            continue
        comp[seed] = next_id
        queue = deque([seed])
        while queue:
            i = queue.popleft()
            for j in neighbors[i]:
                if core[j] and comp[j] < 0:
                    comp[j] = next_id
                    queue.append(j)
        next_id += 1
    border_of = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if core[i]:
            continue
        cores = [j for j in neighbors[i] if core[j]]
        if cores:
            border_of[i] = min(cores)
    return _canonical_labels(n, core, comp, border_of)


# ---------------------------------------------------------------------------
# instance table


@dataclass
class InstanceEntry:
    gaussian_ids: list
    vote_centroid: np.ndarray
    feature: np.ndarray | None = None


@dataclass
class InstanceTable:
    instances: dict = field(default_factory=dict)  # instance id -> InstanceEntry
    noise: list = field(default_factory=list)
    background: list = field(default_factory=list)
    level: int = 0

    def __post_init__(self):
        seen: set = set()
        for group in [e.gaussian_ids for e in self.instances.values()] + [self.noise, self.background]:
            dup = seen.intersection(group)
            if dup or len(set(group)) != len(group):
                raise ValidationError(f"Gaussian id(s) listed twice in instance table: {sorted(dup)[:5]}")
            seen.update(group)

    def ids(self) -> list:
        return sorted(self.instances)

    def gaussian_labels(self, n: int) -> np.ndarray:
        """Per-Gaussian cluster id; NOISE and BACKGROUND for the rest."""
        out = np.full(n, NOISE, dtype=np.int64)
        out[np.asarray(self.background, dtype=np.int64)] = BACKGROUND
        for k, entry in self.instances.items():
            out[np.asarray(entry.gaussian_ids, dtype=np.int64)] = k
        return out

    def to_dict(self) -> dict:
        return {
            "format": "houghsplat-instances",
            "version": 1,
            "level": self.level,
            "instances": [
                {
                    "id": int(k),
                    "gaussian_ids": [int(i) for i in e.gaussian_ids],
                    "vote_centroid": [float(v) for v in e.vote_centroid],
                    "feature": None if e.feature is None else [float(v) for v in e.feature],
                }
                for k, e in sorted(self.instances.items())
            ],
            "noise": [int(i) for i in self.noise],
            "background": [int(i) for i in self.background],
        }

    @classmethod
    def from_dict(cls, d: dict, file: str | None = None) -> "InstanceTable":
        if d.get("format") != "houghsplat-instances":
            raise FormatError("not an instance table", file=file)
        if d.get("version") != 1:
            raise FormatError(f"unsupported instance table version {d.get('version')}", file=file)
        instances = {}
        for e in d["instances"]:
            feat = e.get("feature")
            instances[int(e["id"])] = InstanceEntry(
                gaussian_ids=[int(i) for i in e["gaussian_ids"]],
                vote_centroid=np.asarray(e["vote_centroid"], dtype=np.float64),
                feature=None if feat is None else np.asarray(feat, dtype=np.float64),
            )
        return cls(instances, [int(i) for i in d["noise"]], [int(i) for i in d["background"]], int(d.get("level", 0)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "InstanceTable":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", offset=exc.pos, file=str(path)) from None
        return cls.from_dict(data, file=str(path))


def build_instance_table(scene, labels, foreground, background=(), level: int = 0) -> InstanceTable:
    """Group foreground Gaussians by cluster label; ``labels`` aligns with ``foreground``."""
    labels = np.asarray(labels, dtype=np.int64)
    foreground = np.asarray(foreground, dtype=np.int64)
    if len(labels) != len(foreground):
        raise ValidationError(f"{len(labels)} labels for {len(foreground)} foreground Gaussians")
    votes = scene.votes(level)
    instances = {}
    for k in np.unique(labels[labels >= 0]):
        ids = foreground[labels == k]
        instances[int(k)] = InstanceEntry(gaussian_ids=ids.tolist(), vote_centroid=votes[ids].mean(axis=0))
    noise = foreground[labels < 0].tolist()
    return InstanceTable(instances, noise, [int(i) for i in background], level)


def cluster_scene(scene, params: ClusterParams | None = None) -> InstanceTable:
    """Background filter, DBSCAN on the remaining votes, and the instance table."""
    p = (params or ClusterParams()).resolved(scene)
    fg, bg = filter_background(scene, p.background_eps, p.level)
    labels = cluster_votes(scene.votes(p.level)[fg], p.eps, p.min_pts)
    return build_instance_table(scene, labels, fg, bg, p.level)


def remove_instance(scene, table: InstanceTable, instance_id: int):
    """Delete one instance's Gaussians; returns (scene, table) with ids renumbered."""
    if instance_id not in table.instances:
        raise ValidationError(f"no instance {instance_id}")
    drop = np.zeros(scene.n, dtype=bool)
    drop[table.instances[instance_id].gaussian_ids] = True
    keep = np.flatnonzero(~drop)
    new_index = np.full(scene.n, -1, dtype=np.int64)
    new_index[keep] = np.arange(len(keep))
    instances = {
        k: InstanceEntry(new_index[e.gaussian_ids].tolist(), e.vote_centroid.copy(), None if e.feature is None else e.feature.copy())
        for k, e in table.instances.items()
        if k != instance_id
    }
    table2 = InstanceTable(instances, new_index[table.noise].tolist(), new_index[table.background].tolist(), table.level)
    return scene.subset(keep), table2
