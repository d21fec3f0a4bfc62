"""Gaussian scenes: domain types, a synthetic generator with known instances, and PLY I/O.

A scene is stored as a structure of arrays; ``Scene.gaussian(i)`` gives a
per-primitive view. The list order is the identity of each Gaussian.

Quaternions are stored as (w, x, y, z).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._util import strict_kwargs
from .errors import ConfigError, FormatError, ValidationError, VersionError

SCENE_FORMAT = "houghsplat-scene"
SCENE_VERSION = 1

_PALETTE = np.array(
    [
        [0.90, 0.30, 0.25],
        [0.25, 0.60, 0.90],
        [0.35, 0.80, 0.35],
        [0.95, 0.80, 0.20],
        [0.70, 0.40, 0.85],
        [0.20, 0.80, 0.80],
        [0.95, 0.55, 0.15],
        [0.60, 0.60, 0.60],
    ]
)


@dataclass
class GaussianPrimitive:
    position: np.ndarray
    scale: np.ndarray
    rotation: np.ndarray
    opacity: float
    color: np.ndarray
    offsets: np.ndarray
    instance_label: int | None = None

    @property
    def vote(self) -> np.ndarray:
        return self.position + self.offsets[0]


@dataclass(eq=False)
class Scene:
    positions: np.ndarray
    scales: np.ndarray
    rotations: np.ndarray
    opacities: np.ndarray
    colors: np.ndarray
    offsets: np.ndarray  # (levels, N, 3)
    labels: np.ndarray  # ground-truth instance label, -1 when absent
    bounds: np.ndarray  # (2, 3) min / max corner
    cluster_ids: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.positions)
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(n, 3)
        self.scales = np.asarray(self.scales, dtype=np.float64).reshape(n, 3)
        self.rotations = np.asarray(self.rotations, dtype=np.float64).reshape(n, 4)
        self.opacities = np.asarray(self.opacities, dtype=np.float64).reshape(n)
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(n, 3)
        self.offsets = np.asarray(self.offsets, dtype=np.float64)
        if self.offsets.ndim != 3 or self.offsets.shape[1:] != (n, 3) or self.offsets.shape[0] < 1:
            raise ValidationError(f"offsets must have shape (levels, {n}, 3), got {self.offsets.shape}")
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(n)
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(2, 3)
        if self.cluster_ids is not None:
            self.cluster_ids = np.asarray(self.cluster_ids, dtype=np.int64).reshape(n)

    @property
    def n(self) -> int:
        return len(self.positions)

    def __len__(self) -> int:
        return self.n

    @property
    def levels(self) -> int:
        return self.offsets.shape[0]

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.bounds[1] - self.bounds[0]))

    def votes(self, level: int = 0) -> np.ndarray:
        return self.positions + self.offsets[level]

    def instance_centroids(self) -> dict:
        """Generator ground-truth centroids by instance label (empty for non-synthetic scenes)."""
        return {int(k): np.asarray(v, dtype=np.float64) for k, v in self.meta.get("centroids", {}).items()}

    def instance_radii(self) -> dict:
        return {int(k): float(v) for k, v in self.meta.get("radii", {}).items()}

    def gaussian(self, i: int) -> GaussianPrimitive:
        label = int(self.labels[i])
        return GaussianPrimitive(
            position=self.positions[i].copy(),
            scale=self.scales[i].copy(),
            rotation=self.rotations[i].copy(),
            opacity=float(self.opacities[i]),
            color=self.colors[i].copy(),
            offsets=self.offsets[:, i].copy(),
            instance_label=None if label < 0 else label,
        )

    @classmethod
    def from_gaussians(cls, gaussians, bounds=None, levels: int | None = None, meta=None) -> "Scene":
        gaussians = list(gaussians)
        if levels is None:
            levels = len(gaussians[0].offsets) if gaussians else 1
        n = len(gaussians)

        def stack(attr, shape):
            if not gaussians:
                return np.zeros((0,) + shape)
            return np.array([np.asarray(getattr(g, attr), dtype=np.float64).reshape(shape) for g in gaussians])

        positions = stack("position", (3,))
        offsets = np.zeros((levels, n, 3))
        for i, g in enumerate(gaussians):
            offsets[:, i] = np.asarray(g.offsets, dtype=np.float64).reshape(levels, 3)
        if bounds is None:
            bounds = _padded_bounds(positions, pad=1e-9)
        return cls(
            positions=positions,
            scales=stack("scale", (3,)),
            rotations=stack("rotation", (4,)),
            opacities=np.array([g.opacity for g in gaussians], dtype=np.float64),
            colors=stack("color", (3,)),
            offsets=offsets,
            labels=np.array([-1 if g.instance_label is None else g.instance_label for g in gaussians], dtype=np.int64),
            bounds=bounds,
            meta=dict(meta or {}),
        )

    def copy(self) -> "Scene":
        return Scene(
            positions=self.positions.copy(),
            scales=self.scales.copy(),
            rotations=self.rotations.copy(),
            opacities=self.opacities.copy(),
            colors=self.colors.copy(),
            offsets=self.offsets.copy(),
            labels=self.labels.copy(),
            bounds=self.bounds.copy(),
            cluster_ids=None if self.cluster_ids is None else self.cluster_ids.copy(),
            meta=json.loads(json.dumps(self.meta)),
        )

    def subset(self, ids) -> "Scene":
        """Scene restricted to ``ids`` (in the given order); bounds and meta are kept."""
        ids = np.asarray(ids, dtype=np.int64)
        return Scene(
            positions=self.positions[ids],
            scales=self.scales[ids],
            rotations=self.rotations[ids],
            opacities=self.opacities[ids],
            colors=self.colors[ids],
            offsets=self.offsets[:, ids],
            labels=self.labels[ids],
            bounds=self.bounds.copy(),
            cluster_ids=None if self.cluster_ids is None else self.cluster_ids[ids],
            meta=json.loads(json.dumps(self.meta)),
        )

    def equals(self, other: "Scene", atol: float = 0.0) -> bool:
        if not isinstance(other, Scene) or self.n != other.n or self.levels != other.levels:
            return False
        pairs = [
            (self.positions, other.positions),
            (self.scales, other.scales),
            (self.rotations, other.rotations),
            (self.opacities, other.opacities),
            (self.colors, other.colors),
            (self.offsets, other.offsets),
            (self.bounds, other.bounds),
        ]
        for a, b in pairs:
            if atol == 0.0:
                if not np.array_equal(a, b):
                    return False
            elif not np.allclose(a, b, rtol=0.0, atol=atol):
                return False
        if not np.array_equal(self.labels, other.labels):
            return False
        if (self.cluster_ids is None) != (other.cluster_ids is None):
            return False
        if self.cluster_ids is not None and not np.array_equal(self.cluster_ids, other.cluster_ids):
            return False
        return self.meta == other.meta

    def validate(self) -> None:
        """Raise ``ValidationError`` when a primitive invariant is broken."""
        if np.any(self.scales <= 0):
            raise ValidationError("scale components must be > 0")
        if np.any((self.opacities < 0) | (self.opacities > 1)):
            raise ValidationError("opacity must lie in [0, 1]")
        if self.n and np.max(np.abs(np.linalg.norm(self.rotations, axis=1) - 1.0)) > 1e-6:
            raise ValidationError("rotation quaternions must have unit norm")
        lo, hi = self.bounds
        if np.any(self.positions < lo) or np.any(self.positions > hi):
            raise ValidationError("Gaussian position outside scene bounds")


def _padded_bounds(points: np.ndarray, pad: float) -> np.ndarray:
    if len(points) == 0:
        return np.array([[-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]])
    return np.stack([points.min(axis=0) - pad, points.max(axis=0) + pad])


# ---------------------------------------------------------------------------
# synthetic scenes


@dataclass
class InstanceSpec:
    center: tuple = (0.0, 0.0, 0.0)
    shape: str = "sphere"  # sphere | box | ellipsoid
    radius: float = 1.0
    axes: tuple | None = None  # semi-axes (ellipsoid) or half-extents (box); default radius on every axis
    count: int = 300
    color: tuple | None = None
    opacity: float = 0.9

    def semi_axes(self) -> np.ndarray:
        if self.axes is None:
            return np.full(3, float(self.radius))
        return np.asarray(self.axes, dtype=np.float64)

    def shell_radius(self) -> float:
        if self.shape == "sphere":
            return float(self.radius)
        return float(np.prod(self.semi_axes()) ** (1.0 / 3.0))


@dataclass
class BackgroundSpec:
    count: int = 0
    placement: str = "floor"  # floor: disc in the y = center[1] plane; box: uniform in a cube
    center: tuple = (0.0, -4.0, 0.0)
    extent: float = 1.5
    scale: float = 0.12
    opacity: float = 0.9
    color: tuple = (0.45, 0.42, 0.38)


@dataclass
class SyntheticSceneSpec:
    instances: list = field(default_factory=list)
    background: BackgroundSpec = field(default_factory=BackgroundSpec)
    levels: int = 1
    jitter: float = 0.0  # radial jitter as a fraction of the shell radius
    seed: int = 0
    cameras: dict | None = None  # RigSpec fields; used by the gen command
    version: int = 1

    def rig_spec(self):
        from .camera import RigSpec

        return RigSpec.from_dict(self.cameras or {})

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSceneSpec":
        kw = strict_kwargs(cls, data, "scene_spec")
        if kw.get("version", 1) != 1:
            raise ConfigError(f"unsupported scene spec version {kw['version']}", field="scene_spec.version")
        instances = []
        for k, inst in enumerate(kw.get("instances", [])):
            ikw = strict_kwargs(InstanceSpec, inst, f"scene_spec.instances[{k}]")
            for key in ("center", "axes", "color"):
                if ikw.get(key) is not None:
                    ikw[key] = tuple(float(v) for v in ikw[key])
            instances.append(InstanceSpec(**ikw))
        kw["instances"] = instances
        if "background" in kw:
            bkw = strict_kwargs(BackgroundSpec, kw["background"], "scene_spec.background")
            for key in ("center", "color"):
                if key in bkw:
                    bkw[key] = tuple(float(v) for v in bkw[key])
            kw["background"] = BackgroundSpec(**bkw)
        spec = cls(**kw)
        spec.validate()
        if spec.cameras is not None:
            spec.rig_spec()
        return spec

    def validate(self) -> None:
        if not self.instances and self.background.count <= 0:
            raise ValidationError("scene spec has no instances and no background")
        if self.levels < 1:
            raise ValidationError("levels must be >= 1", field="levels")
        if not 0.0 <= self.jitter < 1.0:
            raise ValidationError("jitter must lie in [0, 1)", field="jitter")
        for k, inst in enumerate(self.instances):
            where = f"instances[{k}]"
            if inst.shape not in ("sphere", "box", "ellipsoid"):
                raise ValidationError(f"{where}: unknown shape {inst.shape!r}", field=f"{where}.shape")
            if inst.count <= 0:
                raise ValidationError(f"{where}: count must be positive", field=f"{where}.count")
            if inst.radius <= 0 or np.any(inst.semi_axes() <= 0):
                raise ValidationError(f"{where}: radius/axes must be positive", field=f"{where}.radius")
            if not 0.0 < inst.opacity <= 1.0:
                raise ValidationError(f"{where}: opacity must lie in (0, 1]", field=f"{where}.opacity")
        bg = self.background
        if bg.count < 0:
            raise ValidationError("background count must be >= 0", field="background.count")
        if bg.count and (bg.extent <= 0 or bg.scale <= 0):
            raise ValidationError("background extent/scale must be positive", field="background.extent")
        if bg.placement not in ("floor", "box"):
            raise ValidationError(f"unknown background placement {bg.placement!r}", field="background.placement")


def _sample_shell(rng: np.random.Generator, inst: InstanceSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Area-uniform points on the shell, plus their outward unit normals."""
    a = inst.semi_axes()
    if inst.shape == "sphere":
        d = rng.standard_normal((n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return d * inst.radius, d
    if inst.shape == "ellipsoid":
        # rejection on the sphere->ellipsoid area element
        bound = max(a[1] * a[2], a[0] * a[2], a[0] * a[1])
        out = []
        while sum(len(o) for o in out) < n:
            d = rng.standard_normal((2 * n, 3))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            w = np.sqrt((a[1] * a[2] * d[:, 0]) ** 2 + (a[0] * a[2] * d[:, 1]) ** 2 + (a[0] * a[1] * d[:, 2]) ** 2)
            keep = rng.random(2 * n) * bound < w
            out.append(d[keep])
        d = np.concatenate(out)[:n]
        p = d * a
        normal = p / a**2
        normal /= np.linalg.norm(normal, axis=1, keepdims=True)
        return p, normal
    # box: choose a face in proportion to its area, then a uniform point on it
    areas = np.array([a[1] * a[2], a[1] * a[2], a[0] * a[2], a[0] * a[2], a[0] * a[1], a[0] * a[1]])
    faces = rng.choice(6, size=n, p=areas / areas.sum())
    p = (rng.random((n, 3)) * 2.0 - 1.0) * a
    axis = faces // 2
    sign = np.where(faces % 2 == 0, 1.0, -1.0)
    p[np.arange(n), axis] = sign * a[axis]
    normal = np.zeros((n, 3))
    normal[np.arange(n), axis] = sign
    return p, normal


def generate_synthetic_scene(spec: SyntheticSceneSpec) -> Scene:
    """Sample Gaussians on instance shells (labels 0..K-1) plus unlabeled background.

    Offsets start at exactly zero. Deterministic for a fixed ``spec.seed``.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    blocks = []
    meta_centroids, meta_radii, meta_shapes = {}, {}, {}
    for k, inst in enumerate(spec.instances):
        pts, normals = _sample_shell(rng, inst, inst.count)
        r = inst.shell_radius()
        if spec.jitter > 0:
            pts = pts + normals * (rng.uniform(-1.0, 1.0, (inst.count, 1)) * spec.jitter * r)
        center = np.asarray(inst.center, dtype=np.float64)
        color = _PALETTE[k % len(_PALETTE)] if inst.color is None else np.asarray(inst.color, dtype=np.float64)
        scale = r / np.sqrt(inst.count)
        blocks.append(
            dict(
                positions=pts + center,
                scales=np.full((inst.count, 3), scale),
                opacities=np.full(inst.count, inst.opacity),
                colors=np.tile(color, (inst.count, 1)),
                labels=np.full(inst.count, k, dtype=np.int64),
            )
        )
        meta_centroids[str(k)] = center.tolist()
        meta_radii[str(k)] = r
        meta_shapes[str(k)] = inst.shape
    bg = spec.background
    if bg.count > 0:
        c = np.asarray(bg.center, dtype=np.float64)
        if bg.placement == "floor":
            rad = bg.extent * np.sqrt(rng.random(bg.count))
            ang = rng.random(bg.count) * 2.0 * np.pi
            pts = np.stack([rad * np.cos(ang), np.zeros(bg.count), rad * np.sin(ang)], axis=1) + c
        else:
            pts = (rng.random((bg.count, 3)) * 2.0 - 1.0) * bg.extent + c
        blocks.append(
            dict(
                positions=pts,
                scales=np.full((bg.count, 3), bg.scale),
                opacities=np.full(bg.count, bg.opacity),
                colors=np.tile(np.asarray(bg.color, dtype=np.float64), (bg.count, 1)),
                labels=np.full(bg.count, -1, dtype=np.int64),
            )
        )
    positions = np.concatenate([b["positions"] for b in blocks])
    n = len(positions)
    rotations = np.zeros((n, 4))
    rotations[:, 0] = 1.0
    extent = positions.max(axis=0) - positions.min(axis=0)
    bounds = _padded_bounds(positions, pad=0.05 * float(np.max(extent)) + 1e-6)
    scene = Scene(
        positions=positions,
        scales=np.concatenate([b["scales"] for b in blocks]),
        rotations=rotations,
        opacities=np.concatenate([b["opacities"] for b in blocks]),
        colors=np.concatenate([b["colors"] for b in blocks]),
        offsets=np.zeros((spec.levels, n, 3)),
        labels=np.concatenate([b["labels"] for b in blocks]),
        bounds=bounds,
        meta={
            "centroids": meta_centroids,
            "radii": meta_radii,
            "shapes": meta_shapes,
            "background_count": int(bg.count),
            "seed": int(spec.seed),
        },
    )
    scene.validate()
    return scene


def part_labels(scene: Scene, level: int) -> np.ndarray:
    """Ground-truth labels at hierarchy ``level``.

    Level 0 is the instance label. Level l > 0 splits every instance into 2**l
    parts by the sign of (position - centroid) along the first l axes (x, y, z).
    """
    if level == 0:
        return scene.labels.copy()
    if level > 3:
        raise ValidationError("synthetic part labels support levels up to 3")
    out = np.full(scene.n, -1, dtype=np.int64)
    centroids = scene.meta.get("centroids", {})
    for key, c in centroids.items():
        k = int(key)
        sel = scene.labels == k
        rel = scene.positions[sel] - np.asarray(c)
        code = np.zeros(int(sel.sum()), dtype=np.int64)
        for axis in range(level):
            code = code * 2 + (rel[:, axis] >= 0)
        out[sel] = k * (2**level) + code
    return out


# ---------------------------------------------------------------------------
# serialization: JSON manifest + binary little-endian PLY payload


def _ply_dtype(levels: int, with_clusters: bool) -> np.dtype:
    names = ["x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3", "opacity", "red", "green", "blue"]
    for level in range(levels):
        names += [f"offset_l{level}_x", f"offset_l{level}_y", f"offset_l{level}_z"]
    fields = [(name, "<f8") for name in names] + [("instance_id", "<i4")]
    if with_clusters:
        fields.append(("cluster_id", "<i4"))
    return np.dtype(fields)


_PLY_TYPES = {"double": "<f8", "float64": "<f8", "float": "<f4", "float32": "<f4", "int": "<i4", "int32": "<i4"}
_PLY_NAMES = {"<f8": "double", "<f4": "float", "<i4": "int"}


def write_ply(path: str | Path, scene: Scene) -> None:
    dtype = _ply_dtype(scene.levels, scene.cluster_ids is not None)
    data = np.zeros(scene.n, dtype=dtype)
    for j, axis in enumerate("xyz"):
        data[axis] = scene.positions[:, j]
    for j in range(3):
        data[f"scale_{j}"] = scene.scales[:, j]
    for j in range(4):
        data[f"rot_{j}"] = scene.rotations[:, j]
    data["opacity"] = scene.opacities
    for j, ch in enumerate(("red", "green", "blue")):
        data[ch] = scene.colors[:, j]
    for level in range(scene.levels):
        for j, axis in enumerate("xyz"):
            data[f"offset_l{level}_{axis}"] = scene.offsets[level, :, j]
    data["instance_id"] = scene.labels
    if scene.cluster_ids is not None:
        data["cluster_id"] = scene.cluster_ids
    header = ["ply", "format binary_little_endian 1.0", "comment houghsplat scene", f"element vertex {scene.n}"]
    for name in dtype.names:
        header.append(f"property {_PLY_NAMES[dtype[name].str]} {name}")
    header.append("end_header")
    Path(path).write_bytes(("\n".join(header) + "\n").encode("ascii") + data.tobytes())


def read_ply(path: str | Path) -> np.ndarray:
    """Read a binary little-endian PLY vertex table into a structured array."""
    path = Path(path)
    raw = path.read_bytes()
    pos = 0
    count = None
    fields = []
    first = True
    while True:
        end = raw.find(b"\n", pos)
        if end < 0:
            raise FormatError("PLY header not terminated", offset=pos, file=str(path))
        try:
            line = raw[pos:end].decode("ascii").strip()
        except UnicodeDecodeError:
            raise FormatError("non-ASCII bytes in PLY header", offset=pos, file=str(path)) from None
        parts = line.split()
        if first:
            if line != "ply":
                raise FormatError("missing 'ply' magic", offset=pos, file=str(path))
            first = False
        elif not parts or parts[0] == "comment":
            pass
        elif parts[0] == "format":
            if parts[1:] != ["binary_little_endian", "1.0"]:
                raise FormatError(f"unsupported PLY format {' '.join(parts[1:])!r}", offset=pos, file=str(path))
        elif parts[0] == "element":
            if len(parts) != 3 or parts[1] != "vertex" or count is not None:
                raise FormatError(f"unexpected element line {line!r}", offset=pos, file=str(path))
            try:
                count = int(parts[2])
            except ValueError:
                raise FormatError(f"bad vertex count {parts[2]!r}", offset=pos, file=str(path)) from None
        elif parts[0] == "property":
            if len(parts) != 3 or parts[1] not in _PLY_TYPES:
                raise FormatError(f"unsupported property line {line!r}", offset=pos, file=str(path))
            fields.append((parts[2], _PLY_TYPES[parts[1]]))
        elif parts[0] == "end_header":
            pos = end + 1
            break
        else:
            raise FormatError(f"unexpected header line {line!r}", offset=pos, file=str(path))
        pos = end + 1
    if count is None:
        raise FormatError("PLY header has no vertex element", offset=pos, file=str(path))
    dtype = np.dtype(fields)
    need = count * dtype.itemsize
    have = len(raw) - pos
    if have < need:
        raise FormatError(
            f"truncated PLY body: expected {need} bytes of vertex data, found {have}", offset=len(raw), file=str(path)
        )
    if have > need:
        raise FormatError(f"{have - need} trailing bytes after vertex data", offset=pos + need, file=str(path))
    return np.frombuffer(raw, dtype=dtype, count=count, offset=pos).copy()


def _manifest_paths(path: str | Path) -> tuple[Path, Path]:
    path = Path(path)
    if path.suffix == ".ply":
        return path.with_suffix(".json"), path
    return path, path.with_suffix(".ply")


def save_scene(scene: Scene, path: str | Path) -> None:
    """Write ``<stem>.json`` (manifest) and ``<stem>.ply`` (payload)."""
    manifest_path, ply_path = _manifest_paths(path)
    manifest = {
        "format": SCENE_FORMAT,
        "version": SCENE_VERSION,
        "levels": scene.levels,
        "count": scene.n,
        "bounds": scene.bounds.tolist(),
        "ply": ply_path.name,
        "meta": scene.meta,
    }
    write_ply(ply_path, scene)
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_scene(path: str | Path) -> Scene:
    manifest_path, _ = _manifest_paths(path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSON: {exc.msg}", offset=exc.pos, file=str(manifest_path)) from None
    if not isinstance(manifest, dict) or manifest.get("format") != SCENE_FORMAT:
        raise FormatError("not a houghsplat scene manifest", offset=0, file=str(manifest_path))
    if manifest.get("version") != SCENE_VERSION:
        raise VersionError(
            f"scene version {manifest.get('version')!r} is not supported (expected {SCENE_VERSION})",
            file=str(manifest_path),
        )
    for key in ("levels", "count", "bounds", "ply"):
        if key not in manifest:
            raise FormatError(f"manifest missing field {key!r}", file=str(manifest_path))
    ply_path = manifest_path.parent / manifest["ply"]
    data = read_ply(ply_path)
    levels = int(manifest["levels"])
    if len(data) != manifest["count"]:
        raise FormatError(f"manifest count {manifest['count']} != PLY vertex count {len(data)}", file=str(ply_path))
    expected = _ply_dtype(levels, "cluster_id" in data.dtype.names)
    if data.dtype.names != expected.names:
        raise FormatError(f"PLY properties {data.dtype.names} do not match a {levels}-level scene", file=str(ply_path))

    def cols(*names):
        if not names:
            return np.zeros((len(data), 0))
        return np.stack([data[name].astype(np.float64) for name in names], axis=1) if len(data) else np.zeros((0, len(names)))

    offsets = np.zeros((levels, len(data), 3))
    for level in range(levels):
        offsets[level] = cols(f"offset_l{level}_x", f"offset_l{level}_y", f"offset_l{level}_z")
    return Scene(
        positions=cols("x", "y", "z"),
        scales=cols("scale_0", "scale_1", "scale_2"),
        rotations=cols("rot_0", "rot_1", "rot_2", "rot_3"),
        opacities=data["opacity"].astype(np.float64),
        colors=cols("red", "green", "blue"),
        offsets=offsets,
        labels=data["instance_id"].astype(np.int64),
        bounds=np.asarray(manifest["bounds"], dtype=np.float64),
        cluster_ids=data["cluster_id"].astype(np.int64) if "cluster_id" in data.dtype.names else None,
        meta=manifest.get("meta", {}),
    )
