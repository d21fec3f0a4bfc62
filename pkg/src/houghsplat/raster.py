"""Tile-based forward splatting of colors, vote member sets and instance IDs.

Each pixel is composited front to back over the depth-sorted Gaussians whose
3-sigma screen rectangle covers it. A Gaussian contributes to a pixel when the
pixel center lies inside its 3-sigma ellipse and its alpha exceeds ``ALPHA_CUT``.

Vote member set of a pixel: contributors whose incoming transmittance is still
above ``tau_front``. Members are averaged in 3D (``uniform``) and the average is
projected; ``alpha`` blends every contributor with its alpha*T weight instead,
and ``project_first`` averages the members' individual projections (diagnostic).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .camera import NEAR, CameraView, project_points, splat_covariances, world_to_camera_points
from .errors import ValidationError

ALPHA_CUT = 1.0 / 255.0
TAU_FRONT = 0.5
T_STOP = 1e-4
TILE = 16
SIGMA_EXTENT = 3.0

BLEND_MODES = ("uniform", "alpha", "project_first")
RENDER_MODES = ("color", "votes", "instance_ids", "all")


@dataclass
class Projection:
    """Screen-space data for the Gaussians visible in one view, in front-to-back order."""

    order: np.ndarray  # Gaussian IDs, sorted by (camera depth, ID)
    means: np.ndarray  # (M, 2) pixel coordinates
    conics: np.ndarray  # (M, 3) inverse covariance entries (a, b, c)
    depths: np.ndarray  # (M,) camera depth of the centers
    opacities: np.ndarray
    colors: np.ndarray
    rects: np.ndarray  # (M, 4) pixel ranges x0, x1, y0, y1 (half open)


def project_scene(scene, view: CameraView) -> Projection:
    """Cull, splat and depth-sort the scene for ``view``."""
    uv, z = project_points(view, scene.positions)
    keep = np.flatnonzero(z > NEAR)
    cov = splat_covariances(view, scene.positions[keep], scene.scales[keep], scene.rotations[keep])
    det = cov[:, 0, 0] * cov[:, 1, 1] - cov[:, 0, 1] ** 2
    conics = np.stack([cov[:, 1, 1] / det, -cov[:, 0, 1] / det, cov[:, 0, 0] / det], axis=1)
    ex = SIGMA_EXTENT * np.sqrt(cov[:, 0, 0])
    ey = SIGMA_EXTENT * np.sqrt(cov[:, 1, 1])
    u, v = uv[keep, 0], uv[keep, 1]
    # pixel centers i + 0.5 inside [u - ex, u + ex]; small slack so rounding never drops a covered pixel
    slack = 1e-6
    x0 = np.clip(np.ceil(u - ex - 0.5 - slack), 0, view.width).astype(np.int64)
    x1 = np.clip(np.floor(u + ex - 0.5 + slack) + 1, 0, view.width).astype(np.int64)
    y0 = np.clip(np.ceil(v - ey - 0.5 - slack), 0, view.height).astype(np.int64)
    y1 = np.clip(np.floor(v + ey - 0.5 + slack) + 1, 0, view.height).astype(np.int64)
    on_screen = (x1 > x0) & (y1 > y0) & (scene.opacities[keep] > ALPHA_CUT)
    sel = np.flatnonzero(on_screen)
    ids = keep[sel]
    order = np.lexsort((ids, z[ids]))
    sel = sel[order]
    ids = ids[order]
    return Projection(
        order=ids.astype(np.int64),
        means=np.ascontiguousarray(uv[ids]),
        conics=np.ascontiguousarray(conics[sel]),
        depths=np.ascontiguousarray(z[ids]),
        opacities=np.ascontiguousarray(scene.opacities[ids]),
        colors=np.ascontiguousarray(scene.colors[ids]),
        rects=np.ascontiguousarray(np.stack([x0[sel], x1[sel], y0[sel], y1[sel]], axis=1)),
    )


@numba.njit(cache=True)
def _bin_tiles(rects, ntx, nty, tile):
    counts = np.zeros(ntx * nty + 1, dtype=np.int64)
    for g in range(rects.shape[0]):
        tx0 = rects[g, 0] // tile
        tx1 = (rects[g, 1] - 1) // tile
        ty0 = rects[g, 2] // tile
        ty1 = (rects[g, 3] - 1) // tile
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                counts[ty * ntx + tx + 1] += 1
    offsets = np.cumsum(counts)
    fill = offsets[:-1].copy()
    lists = np.empty(offsets[-1], dtype=np.int64)
    for g in range(rects.shape[0]):
        tx0 = rects[g, 0] // tile
        tx1 = (rects[g, 1] - 1) // tile
        ty0 = rects[g, 2] // tile
        ty1 = (rects[g, 3] - 1) // tile
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                t = ty * ntx + tx
                lists[fill[t]] = g
                fill[t] += 1
    return offsets, lists


@numba.njit(cache=True, inline="always")
def _alpha_at(px, py, mx, my, ca, cb, cc, o):
    dx = px - mx
    dy = py - my
    m2 = ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy
    if m2 > 9.0 or m2 < 0.0:
        return 0.0
    return o * np.exp(-0.5 * m2)


@numba.njit(cache=True)
def _composite(width, height, tile, tile_offsets, tile_lists, means, conics, opacities, colors, tau, alpha_cut, t_stop):
    """First pass: color, final transmittance and per-pixel member counts."""
    color = np.zeros((height, width, 3))
    t_final = np.ones((height, width))
    n_members = np.zeros((height, width), dtype=np.int64)
    ntx = (width + tile - 1) // tile
    nty = (height + tile - 1) // tile
    for ty in range(nty):
        for tx in range(ntx):
            t = ty * ntx + tx
            start = tile_offsets[t]
            stop = tile_offsets[t + 1]
            for py in range(ty * tile, min((ty + 1) * tile, height)):
                for px in range(tx * tile, min((tx + 1) * tile, width)):
                    T = 1.0
                    r = 0.0
                    g_ = 0.0
                    b = 0.0
                    cnt = 0
                    for k in range(start, stop):
                        j = tile_lists[k]
                        a = _alpha_at(px + 0.5, py + 0.5, means[j, 0], means[j, 1], conics[j, 0], conics[j, 1], conics[j, 2], opacities[j])
                        if a <= alpha_cut:
                            continue
                        w = a * T
                        r += colors[j, 0] * w
                        g_ += colors[j, 1] * w
                        b += colors[j, 2] * w
                        if T > tau:
                            cnt += 1
                        T = T * (1.0 - a)
                        if T < t_stop:
                            break
                    color[py, px, 0] = r
                    color[py, px, 1] = g_
                    color[py, px, 2] = b
                    t_final[py, px] = T
                    n_members[py, px] = cnt
    return color, t_final, n_members


@numba.njit(cache=True)
def _fill_members(width, height, tile, tile_offsets, tile_lists, means, conics, opacities, tau, alpha_cut, t_stop, offsets):
    """Second pass: member indices (into the sorted projection) and their alpha*T weights."""
    ids = np.empty(offsets[-1], dtype=np.int64)
    weights = np.empty(offsets[-1])
    ntx = (width + tile - 1) // tile
    nty = (height + tile - 1) // tile
    for ty in range(nty):
        for tx in range(ntx):
            t = ty * ntx + tx
            start = tile_offsets[t]
            stop = tile_offsets[t + 1]
            for py in range(ty * tile, min((ty + 1) * tile, height)):
                for px in range(tx * tile, min((tx + 1) * tile, width)):
                    p = py * width + px
                    pos = offsets[p]
                    end = offsets[p + 1]
                    if pos == end:
                        continue
                    T = 1.0
                    for k in range(start, stop):
                        if T <= tau or pos == end:
                            break
                        j = tile_lists[k]
                        a = _alpha_at(px + 0.5, py + 0.5, means[j, 0], means[j, 1], conics[j, 0], conics[j, 1], conics[j, 2], opacities[j])
                        if a <= alpha_cut:
                            continue
                        ids[pos] = j
                        weights[pos] = a * T
                        pos += 1
                        T = T * (1.0 - a)
                        if T < t_stop:
                            break
    return ids, weights


@dataclass
class MemberTable:
    """Ragged per-pixel member lists in row-major pixel order (CSR layout)."""

    offsets: np.ndarray  # (H*W + 1,)
    ids: np.ndarray  # Gaussian IDs, front to back within each pixel
    weights: np.ndarray  # alpha_i * T_i

    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def pixel(self, p: int) -> slice:
        return slice(self.offsets[p], self.offsets[p + 1])

    def pixel_index(self) -> np.ndarray:
        """Pixel index of every entry."""
        return np.repeat(np.arange(len(self.offsets) - 1), self.counts())


@dataclass
class Raster:
    """Everything a backward pass needs from the forward composite of one view."""

    view: CameraView
    proj: Projection
    tile_offsets: np.ndarray
    tile_lists: np.ndarray
    color: np.ndarray
    transmittance: np.ndarray
    members: MemberTable
    tau_front: float


def rasterize(scene, view: CameraView, tau_front: float = TAU_FRONT) -> Raster:
    """Composite colors and collect member sets; independent of the offsets."""
    proj = project_scene(scene, view)
    ntx = (view.width + TILE - 1) // TILE
    nty = (view.height + TILE - 1) // TILE
    tile_offsets, tile_lists = _bin_tiles(proj.rects, ntx, nty, TILE)
    color, t_final, n_members = _composite(
        view.width, view.height, TILE, tile_offsets, tile_lists,
        proj.means, proj.conics, proj.opacities, proj.colors, tau_front, ALPHA_CUT, T_STOP,
    )
    offsets = np.zeros(view.width * view.height + 1, dtype=np.int64)
    np.cumsum(n_members.reshape(-1), out=offsets[1:])
    local, weights = _fill_members(
        view.width, view.height, TILE, tile_offsets, tile_lists,
        proj.means, proj.conics, proj.opacities, tau_front, ALPHA_CUT, T_STOP, offsets,
    )
    members = MemberTable(offsets=offsets, ids=proj.order[local], weights=weights)
    return Raster(view, proj, tile_offsets, tile_lists, color, t_final, members, tau_front)


# ---------------------------------------------------------------------------
# vote blending


@numba.njit(cache=True)
def _blend(offsets, ids, weights, values, uniform):
    n_pix = offsets.shape[0] - 1
    dim = values.shape[1]
    out = np.full((n_pix, dim), np.nan)
    for p in range(n_pix):
        s = offsets[p]
        e = offsets[p + 1]
        if s == e:
            continue
        for d in range(dim):
            acc = 0.0
            for k in range(s, e):
                if uniform:
                    acc += values[ids[k], d]
                else:
                    acc += weights[k] * values[ids[k], d]
            out[p, d] = acc / (e - s) if uniform else acc
    return out


def blend_votes(members: MemberTable, votes3d: np.ndarray, view: CameraView, blend_mode: str):
    """Per-pixel (vote3d, vote2d), each flattened to (H*W, k); NaN where no members."""
    if blend_mode not in BLEND_MODES:
        raise ValidationError(f"unknown blend mode {blend_mode!r}")
    votes3d = np.ascontiguousarray(votes3d, dtype=np.float64)
    uniform = blend_mode != "alpha"
    v3 = _blend(members.offsets, members.ids, members.weights, votes3d, uniform)
    if blend_mode == "project_first":
        uv, z = project_points(view, votes3d)
        uv[z <= NEAR] = np.nan
        v2 = _blend(members.offsets, members.ids, members.weights, np.ascontiguousarray(uv), True)
        return v3, v2
    uv, z = project_points(view, np.nan_to_num(v3))
    uv[~(z > NEAR) | np.isnan(v3[:, 0])] = np.nan
    return v3, uv


def member_vote_depths(members: MemberTable, votes3d: np.ndarray, view: CameraView) -> np.ndarray:
    """Camera depth of each member's own 3D vote, aligned with ``members.ids``."""
    z = world_to_camera_points(view, votes3d)[:, 2]
    return z[members.ids]


# ---------------------------------------------------------------------------
# public render


@dataclass
class PixelBlend:
    color: np.ndarray
    members: list
    weights: np.ndarray
    vote3d: np.ndarray
    vote2d: np.ndarray
    depths: np.ndarray
    alpha_accum: float


@dataclass
class RenderOutput:
    color: np.ndarray  # (H, W, 3)
    alpha: np.ndarray  # (H, W) accumulated alpha, 1 - final transmittance
    vote3d: np.ndarray | None  # (H, W, 3), NaN where the member set is empty
    vote2d: np.ndarray | None  # (H, W, 2)
    instance_ids: np.ndarray | None  # (H, W), -1 = none
    members: MemberTable
    depths: np.ndarray | None  # camera depth of each member's vote, aligned with members.ids
    blend_mode: str
    level: int
    raster: Raster

    @property
    def height(self) -> int:
        return self.color.shape[0]

    @property
    def width(self) -> int:
        return self.color.shape[1]

    def pixel(self, x: int, y: int) -> PixelBlend:
        p = y * self.width + x
        sl = self.members.pixel(p)
        return PixelBlend(
            color=self.color[y, x].copy(),
            members=[int(i) for i in self.members.ids[sl]],
            weights=self.members.weights[sl].copy(),
            vote3d=None if self.vote3d is None else self.vote3d[y, x].copy(),
            vote2d=None if self.vote2d is None else self.vote2d[y, x].copy(),
            depths=None if self.depths is None else self.depths[sl].copy(),
            alpha_accum=float(self.alpha[y, x]),
        )


def frontmost_labels(members: MemberTable, labels: np.ndarray, shape) -> np.ndarray:
    counts = members.counts()
    out = np.full(len(counts), -1, dtype=np.int64)
    has = counts > 0
    out[has] = labels[members.ids[members.offsets[:-1][has]]]
    return out.reshape(shape)


def render(
    scene,
    view: CameraView,
    mode: str = "all",
    blend_mode: str = "uniform",
    level: int = 0,
    tau_front: float = TAU_FRONT,
    id_labels: np.ndarray | None = None,
) -> RenderOutput:
    """Render one view.

    ``alpha`` blending uses every contributor (tau_front is ignored). Instance IDs
    come from ``id_labels`` (per Gaussian) or else ``scene.cluster_ids``.
    """
    if mode not in RENDER_MODES:
        raise ValidationError(f"unknown render mode {mode!r}")
    if blend_mode not in BLEND_MODES:
        raise ValidationError(f"unknown blend mode {blend_mode!r}")
    if scene.n == 0:
        raise ValidationError("cannot render an empty scene")
    if not 0 <= level < scene.levels:
        raise ValidationError(f"level {level} out of range for a {scene.levels}-level scene")
    if blend_mode == "alpha":
        tau_front = 0.0
    ras = rasterize(scene, view, tau_front)
    h, w = view.height, view.width
    vote3d = vote2d = depths = ids = None
    if mode in ("votes", "all"):
        votes = scene.votes(level)
        v3, v2 = blend_votes(ras.members, votes, view, blend_mode)
        vote3d = v3.reshape(h, w, 3)
        vote2d = v2.reshape(h, w, 2)
        depths = member_vote_depths(ras.members, votes, view)
    if mode in ("instance_ids", "all"):
        labels = scene.cluster_ids if id_labels is None else np.asarray(id_labels, dtype=np.int64)
        if labels is None:
            if mode == "instance_ids":
                raise ValidationError("instance_ids requested but the scene has no cluster IDs")
        else:
            ids = frontmost_labels(ras.members, labels, (h, w))
    return RenderOutput(
        color=ras.color,
        alpha=1.0 - ras.transmittance,
        vote3d=vote3d,
        vote2d=vote2d,
        instance_ids=ids,
        members=ras.members,
        depths=depths,
        blend_mode=blend_mode,
        level=level,
        raster=ras,
    )


# ---------------------------------------------------------------------------
# brute-force reference (no tiles, exhaustive loop); used to check the tiled path


def render_reference(scene, view: CameraView, tau_front: float = TAU_FRONT, level: int = 0):
    """Slow per-pixel renderer. Returns (color, member lists, uniform vote3d)."""
    uv, z = project_points(view, scene.positions)
    idx = [i for i in range(scene.n) if z[i] > NEAR and scene.opacities[i] > ALPHA_CUT]
    idx.sort(key=lambda i: (z[i], i))
    cov = splat_covariances(view, scene.positions, scene.scales, scene.rotations) if scene.n else np.zeros((0, 2, 2))
    votes = scene.votes(level)
    color = np.zeros((view.height, view.width, 3))
    member_lists = []
    vote3d = np.full((view.height, view.width, 3), np.nan)
    inv = {i: np.linalg.inv(cov[i]) for i in idx}
    for py in range(view.height):
        for px in range(view.width):
            T = 1.0
            c = np.zeros(3)
            mem = []
            for i in idx:
                d = np.array([px + 0.5 - uv[i, 0], py + 0.5 - uv[i, 1]])
                m2 = float(d @ inv[i] @ d)
                if m2 > 9.0:
                    continue
                a = scene.opacities[i] * np.exp(-0.5 * m2)
                if a <= ALPHA_CUT:
                    continue
                c += scene.colors[i] * a * T
                if T > tau_front:
                    mem.append(i)
                T *= 1.0 - a
                if T < T_STOP:
                    break
            color[py, px] = c
            member_lists.append(mem)
            if mem:
                vote3d[py, px] = votes[mem].mean(axis=0)
    return color, member_lists, vote3d
