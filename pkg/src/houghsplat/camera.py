"""Pinhole cameras, the world-to-screen transform and EWA splat covariances.

Camera frame follows the OpenCV convention: x right, y down, z forward.
Pixel (i, j) covers [i, i+1) x [j, j+1); its center is (i + 0.5, j + 0.5).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BehindCameraError, FormatError, ValidationError

NEAR = 0.01
COV_FLOOR = 0.3  # px^2 added to the diagonal of every splatted covariance


@dataclass(frozen=True, eq=False)
class CameraView:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    world_to_camera: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        w2c = np.asarray(self.world_to_camera, dtype=np.float64).reshape(4, 4)
        object.__setattr__(self, "world_to_camera", w2c)
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("fx and fy must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("image size must be positive")
        R = w2c[:3, :3]
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-6 or abs(np.linalg.det(R) - 1.0) > 1e-6:
            raise ValidationError("world_to_camera rotation block is not a proper rotation")
        if not np.allclose(w2c[3], [0.0, 0.0, 0.0, 1.0]):
            raise ValidationError("world_to_camera last row must be (0, 0, 0, 1)")

    @property
    def rotation(self) -> np.ndarray:
        return self.world_to_camera[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_to_camera[:3, 3]

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    @property
    def intrinsics(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def screen_matrix(self) -> np.ndarray:
        """4x4 world-to-screen matrix; (u, v) follow by dividing rows 0, 1 by row 2."""
        K = np.eye(4)
        K[:3, :3] = self.intrinsics
        return K @ self.world_to_camera

    def to_dict(self) -> dict:
        return {
            "width": int(self.width),
            "height": int(self.height),
            "fx": float(self.fx),
            "fy": float(self.fy),
            "cx": float(self.cx),
            "cy": float(self.cy),
            "world_to_camera": [float(v) for v in self.world_to_camera.reshape(-1)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraView":
        keys = {"width", "height", "fx", "fy", "cx", "cy", "world_to_camera"}
        missing = keys - set(d)
        if missing:
            raise FormatError(f"camera entry missing {sorted(missing)}")
        if len(d["world_to_camera"]) != 16:
            raise FormatError("world_to_camera must hold 16 floats")
        return cls(
            width=int(d["width"]),
            height=int(d["height"]),
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            world_to_camera=np.asarray(d["world_to_camera"], dtype=np.float64).reshape(4, 4),
        )


@dataclass
class CameraRig:
    views: list

    def __post_init__(self):
        self.views = list(self.views)
        if not self.views:
            raise ValidationError("a camera rig needs at least one view")

    def __len__(self):
        return len(self.views)

    def __iter__(self):
        return iter(self.views)

    def __getitem__(self, i):
        return self.views[i]

    def without(self, index: int) -> "CameraRig":
        return CameraRig([v for k, v in enumerate(self.views) if k != index])


def save_cameras(rig: CameraRig, path: str | Path) -> None:
    Path(path).write_text(json.dumps([v.to_dict() for v in rig], indent=2) + "\n")


def load_cameras(path: str | Path) -> CameraRig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"camera file is not valid JSON: {exc.msg}", offset=exc.pos, file=str(path)) from None
    if not isinstance(data, list):
        raise FormatError("camera file must hold a JSON array", file=str(path))
    views = []
    for k, entry in enumerate(data):
        try:
            views.append(CameraView.from_dict(entry))
        except (FormatError, ValidationError) as exc:
            raise FormatError(f"camera {k}: {exc}", file=str(path)) from None
    return CameraRig(views)


# ---------------------------------------------------------------------------
# projection


def world_to_camera_points(view: CameraView, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    return points @ view.rotation.T + view.translation


def project_points(view: CameraView, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection. Returns ((N, 2) pixel coords, (N,) camera depth); no culling."""
    pc = world_to_camera_points(view, np.atleast_2d(points))
    z = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = view.fx * pc[:, 0] / z + view.cx
        v = view.fy * pc[:, 1] / z + view.cy
    return np.stack([u, v], axis=1), z


def world_to_screen(view: CameraView, point) -> tuple[float, float, float]:
    """Project one world point to (u, v, z) with z the camera-frame depth."""
    point = np.asarray(point, dtype=np.float64).reshape(3)
    x, y, z = view.rotation @ point + view.translation
    if z <= NEAR:
        raise BehindCameraError(f"point at camera depth {z:.6g} is not beyond the near plane {NEAR}")
    return float(view.fx * x / z + view.cx), float(view.fy * y / z + view.cy), float(z)


def world_to_screen_h(view: CameraView, point) -> tuple[float, float, float]:
    """Same as ``world_to_screen`` through the single 4x4 matrix and a perspective divide."""
    h = view.screen_matrix @ np.append(np.asarray(point, dtype=np.float64), 1.0)
    if h[2] <= NEAR:
        raise BehindCameraError(f"point at camera depth {h[2]:.6g} is not beyond the near plane {NEAR}")
    return float(h[0] / h[2]), float(h[1] / h[2]), float(h[2])


def unproject(view: CameraView, u: float, v: float, z: float) -> np.ndarray:
    x = (u - view.cx) * z / view.fx
    y = (v - view.cy) * z / view.fy
    return view.rotation.T @ (np.array([x, y, z]) - view.translation)


def screen_jacobian(view: CameraView, points: np.ndarray) -> np.ndarray:
    """(N, 2, 3) Jacobian of (u, v) with respect to the world-space point."""
    pc = world_to_camera_points(view, np.atleast_2d(points))
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    J = np.zeros((len(pc), 2, 3))
    J[:, 0, 0] = view.fx / z
    J[:, 0, 2] = -view.fx * x / z**2
    J[:, 1, 1] = view.fy / z
    J[:, 1, 2] = -view.fy * y / z**2
    return J @ view.rotation


# ---------------------------------------------------------------------------
# covariances


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """(N, 4) quaternions (w, x, y, z), normalized on the fly, to (N, 3, 3) rotations."""
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q.T
    R = np.empty((len(q), 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def covariance_3d(scales: np.ndarray, rotations: np.ndarray) -> np.ndarray:
    R = quat_to_rotmat(rotations)
    S2 = np.atleast_2d(scales) ** 2
    return np.einsum("nij,nj,nkj->nik", R, S2, R)


def splat_covariances(view: CameraView, positions, scales, rotations) -> np.ndarray:
    """(N, 2, 2) screen covariances J W Sigma3 W^T J^T + floor * I."""
    pc = world_to_camera_points(view, np.atleast_2d(positions))
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    J = np.zeros((len(pc), 2, 3))
    J[:, 0, 0] = view.fx / z
    J[:, 0, 2] = -view.fx * x / z**2
    J[:, 1, 1] = view.fy / z
    J[:, 1, 2] = -view.fy * y / z**2
    T = J @ view.rotation
    cov = T @ covariance_3d(scales, rotations) @ np.transpose(T, (0, 2, 1))
    cov[:, 0, 0] += COV_FLOOR
    cov[:, 1, 1] += COV_FLOOR
    # exact symmetry keeps the conic symmetric too
    off = 0.5 * (cov[:, 0, 1] + cov[:, 1, 0])
    cov[:, 0, 1] = off
    cov[:, 1, 0] = off
    return cov


def splat_covariance(view: CameraView, gaussian) -> np.ndarray:
    """Screen covariance of one ``GaussianPrimitive``."""
    world_to_screen(view, gaussian.position)  # raises when behind the near plane
    return splat_covariances(view, gaussian.position[None], gaussian.scale[None], gaussian.rotation[None])[0]


# ---------------------------------------------------------------------------
# rigs


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """world_to_camera for a camera at ``eye`` looking at ``target`` (image y points away from ``up``)."""
    eye = np.asarray(eye, dtype=np.float64)
    f = np.asarray(target, dtype=np.float64) - eye
    f /= np.linalg.norm(f)
    r = np.cross(f, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(r) < 1e-9:
        raise ValidationError("look_at: view direction parallel to up vector")
    r /= np.linalg.norm(r)
    d = np.cross(f, r)
    R = np.stack([r, d, f])
    M = np.eye(4)
    M[:3, :3] = R
    M[:3, 3] = -R @ eye
    return M


def _intrinsics(width: int, height: int, fov_deg: float) -> dict:
    f = 0.5 * width / np.tan(np.radians(fov_deg) / 2.0)
    return dict(width=width, height=height, fx=f, fy=f, cx=width / 2.0, cy=height / 2.0)


def ring_rig(
    count: int,
    radius: float,
    target=(0.0, 0.0, 0.0),
    elevations=(0.0,),
    width: int = 96,
    height: int = 96,
    fov_deg: float = 60.0,
    azimuth0: float = 0.0,
) -> CameraRig:
    """``count`` cameras evenly spaced in azimuth around ``target``; elevations (degrees) cycle."""
    target = np.asarray(target, dtype=np.float64)
    views = []
    for k in range(count):
        az = np.radians(azimuth0 + 360.0 * k / count)
        el = np.radians(elevations[k % len(elevations)])
        eye = target + radius * np.array([np.cos(el) * np.cos(az), np.sin(el), np.cos(el) * np.sin(az)])
        views.append(CameraView(world_to_camera=look_at(eye, target), **_intrinsics(width, height, fov_deg)))
    return CameraRig(views)


def arc_rig(
    count: int,
    arc_deg: float,
    radius: float,
    target=(0.0, 0.0, 0.0),
    facing_azimuth: float = 90.0,
    elevation: float = 0.0,
    width: int = 96,
    height: int = 96,
    fov_deg: float = 60.0,
) -> CameraRig:
    """Forward-facing arc: ``count`` cameras spread over ``arc_deg`` of azimuth centered on ``facing_azimuth``."""
    if count == 1:
        azimuths = [facing_azimuth]
    else:
        azimuths = np.linspace(facing_azimuth - arc_deg / 2.0, facing_azimuth + arc_deg / 2.0, count)
    target = np.asarray(target, dtype=np.float64)
    el = np.radians(elevation)
    views = []
    for a in azimuths:
        az = np.radians(a)
        eye = target + radius * np.array([np.cos(el) * np.cos(az), np.sin(el), np.cos(el) * np.sin(az)])
        views.append(CameraView(world_to_camera=look_at(eye, target), **_intrinsics(width, height, fov_deg)))
    return CameraRig(views)


@dataclass
class RigSpec:
    """Declarative camera rig: a full ring around the target or a forward-facing arc."""

    kind: str = "ring"  # ring | arc
    count: int = 20
    radius: float = 14.0
    target: tuple = (0.0, 0.0, 0.0)
    width: int = 128
    height: int = 128
    fov_deg: float = 50.0
    elevations: tuple = (35.0, -35.0)  # ring only; cycled over the views
    azimuth0: float = 0.0  # ring only
    arc_deg: float = 120.0  # arc only
    facing_azimuth: float = 90.0  # arc only
    elevation: float = 0.0  # arc only

    def __post_init__(self):
        self.target = tuple(float(v) for v in self.target)
        self.elevations = tuple(float(v) for v in self.elevations)
        if self.kind not in ("ring", "arc"):
            raise ValidationError(f"unknown rig kind {self.kind!r}", field="cameras.kind")
        if self.count < 1:
            raise ValidationError("rig needs at least one camera", field="cameras.count")
        if self.radius <= 0 or not 0 < self.fov_deg < 180:
            raise ValidationError("rig radius must be positive and fov in (0, 180)", field="cameras.radius")
        if self.width < 1 or self.height < 1:
            raise ValidationError("image size must be positive", field="cameras.width")
        if not self.elevations:
            raise ValidationError("ring needs at least one elevation", field="cameras.elevations")

    @classmethod
    def from_dict(cls, data: dict) -> "RigSpec":
        from ._util import strict_kwargs

        return cls(**strict_kwargs(cls, data, "cameras"))

    def build(self) -> CameraRig:
        if self.kind == "ring":
            return ring_rig(
                self.count, self.radius, self.target, self.elevations, self.width, self.height, self.fov_deg, self.azimuth0
            )
        return arc_rig(
            self.count, self.arc_deg, self.radius, self.target, self.facing_azimuth, self.elevation,
            self.width, self.height, self.fov_deg,
        )
