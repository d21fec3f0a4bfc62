import numpy as np
import pytest

from houghsplat.camera import CameraView, ring_rig
from houghsplat.scene import GaussianPrimitive, Scene


def make_scene(positions, scale=0.3, opacity=0.8, colors=None, offsets=None, labels=None):
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    n = len(positions)
    scales = np.broadcast_to(np.asarray(scale, dtype=np.float64), (n, 3)) if np.ndim(scale) == 0 else np.reshape(scale, (n, 3))
    colors = np.full((n, 3), 0.5) if colors is None else colors
    offsets = np.zeros((1, n, 3)) if offsets is None else np.asarray(offsets, dtype=np.float64).reshape(-1, n, 3)
    rotations = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    lo = positions.min(axis=0) - 1.0
    hi = positions.max(axis=0) + 1.0
    return Scene(
        positions=positions,
        scales=np.array(scales),
        rotations=rotations,
        opacities=np.broadcast_to(opacity, (n,)).copy(),
        colors=colors,
        offsets=offsets,
        labels=np.full(n, -1) if labels is None else labels,
        bounds=np.stack([lo, hi]),
    )


def random_scene(rng, n, spread=0.6, offset_sigma=0.3):
    """Small random scene near the origin with random rotations and anisotropic scales."""
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    gs = [
        GaussianPrimitive(
            position=rng.normal(0.0, spread, 3),
            scale=rng.uniform(0.2, 0.6, 3),
            rotation=q[i],
            opacity=rng.uniform(0.3, 0.95),
            color=rng.random(3),
            offsets=rng.normal(0.0, offset_sigma, (1, 3)),
        )
        for i in range(n)
    ]
    return Scene.from_gaussians(gs)


def axis_view(width=32, height=32, f=32.0, z_offset=0.0):
    """Camera at the origin looking down +z (OpenCV frame); optionally pushed back by z_offset."""
    m = np.eye(4)
    m[2, 3] = z_offset
    return CameraView(width=width, height=height, fx=f, fy=f, cx=width / 2.0, cy=height / 2.0, world_to_camera=m)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_rig():
    return ring_rig(2, 4.0, width=32, height=32, fov_deg=60)


_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion's outcome; printed as a PASS/FAIL line at the end of the run."""

    def record(number, ok, detail):
        _CRITERIA[number] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
