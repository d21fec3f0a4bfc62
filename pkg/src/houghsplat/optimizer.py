"""Gradient descent on the composite loss with analytic gradients.

By default only the offsets of the trained level move: the vote and depth terms
reach nothing else, and positions stay frozen. Member sets are held fixed
through a step's backward pass. Gaussians that never sit in a supervised
pixel's member set receive an exactly zero gradient and so keep a zero offset.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from ._util import strict_kwargs
from .camera import CameraRig, CameraView, screen_jacobian
from .errors import ConfigError, TrainingError, ValidationError
from .losses import LossLog, LossReport, LossWeights, color_loss_and_grad, depth_distortion_csr, rvd_total, vote_residuals
from .raster import ALPHA_CUT, BLEND_MODES, T_STOP, TAU_FRONT, Raster, blend_votes, member_vote_depths, rasterize
from .scene import Scene, save_scene
from .votemaps import VoteMap2D, build_vote_map

log = logging.getLogger(__name__)

TRAINABLE = ("offsets", "color", "opacity", "position")


@dataclass
class TrainConfig:
    steps: int = 2000
    optimizer: str = "adam"  # adam | sgd
    lr_offset: float | None = None  # default 1e-3 * scene diagonal
    lr_offset_final: float | None = None  # exponential decay target; default lr_offset / 10
    lr_color: float = 0.01
    lr_opacity: float = 0.05
    lr_position: float | None = None  # default lr_offset
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    views_per_step: int = 4
    level: int = 0
    weights: LossWeights | None = None  # default LossWeights.defaults_for(image, scene)
    seed: int = 0
    trainable: tuple = ("offsets",)
    blend_mode: str = "uniform"  # uniform | alpha | project_first
    tau_front: float = TAU_FRONT  # 0 puts every contributor into the member set
    use_depth_loss: bool = True
    depth_variant: str = "unweighted"
    normalize_depth: bool = True
    border_margin: int = 1
    checkpoint_every: int = 0
    version: int = 1

    def __post_init__(self):
        self.trainable = tuple(self.trainable)
        if isinstance(self.weights, dict):
            self.weights = LossWeights.from_dict(self.weights)
        self.validate()

    def validate(self) -> None:
        if self.version != 1:
            raise ConfigError(f"unsupported train config version {self.version}", field="version")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1", field="steps")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}", field="optimizer")
        bad = [t for t in self.trainable if t not in TRAINABLE]
        if bad:
            raise ConfigError(f"unknown trainable parameter(s) {bad}", field="trainable")
        if self.blend_mode not in BLEND_MODES:
            raise ConfigError(f"unknown blend mode {self.blend_mode!r}", field="blend_mode")
        if self.depth_variant not in ("weighted", "unweighted"):
            raise ConfigError(f"unknown depth variant {self.depth_variant!r}", field="depth_variant")
        if self.views_per_step < 1:
            raise ConfigError("views_per_step must be >= 1", field="views_per_step")
        for name in ("lr_offset", "lr_offset_final", "lr_position"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ConfigError(f"{name} must be positive", field=name)
        if "color" in self.trainable and self.lr_color <= 0:
            raise ConfigError("lr_color must be positive", field="lr_color")
        if "opacity" in self.trainable and self.lr_opacity <= 0:
            raise ConfigError("lr_opacity must be positive", field="lr_opacity")
        if not 0.0 <= self.tau_front < 1.0:
            raise ConfigError("tau_front must lie in [0, 1)", field="tau_front")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        kw = strict_kwargs(cls, d, "train_config")
        if "trainable" in kw:
            kw["trainable"] = tuple(kw["trainable"])
        return cls(**kw)


@dataclass
class GradientBuffer:
    offsets: np.ndarray
    color: np.ndarray | None = None
    opacity: np.ndarray | None = None

    @classmethod
    def zeros(cls, n: int, appearance: bool = False) -> "GradientBuffer":
        return cls(
            offsets=np.zeros((n, 3)),
            color=np.zeros((n, 3)) if appearance else None,
            opacity=np.zeros(n) if appearance else None,
        )

    def add(self, other: "GradientBuffer", scale: float = 1.0) -> None:
        self.offsets += scale * other.offsets
        if other.color is not None:
            if self.color is None:
                self.color = np.zeros_like(other.color)
                self.opacity = np.zeros_like(other.opacity)
            self.color += scale * other.color
            self.opacity += scale * other.opacity

    def check_finite(self, step: int | None = None) -> None:
        for name in ("offsets", "color", "opacity"):
            arr = getattr(self, name)
            if arr is not None and not np.all(np.isfinite(arr)):
                raise TrainingError(f"non-finite {name} gradient" + ("" if step is None else f" at step {step}"))


# ---------------------------------------------------------------------------
# backward passes


def backward_vote(render, gt: VoteMap2D, scene: Scene, view: CameraView) -> GradientBuffer:
    """Gradient of the vote loss wrt each Gaussian's 3D vote (and so its offset).

    Accepts a ``RenderOutput`` with member records.
    """
    members = render.members
    if members is None:
        raise ValidationError("backward_vote needs the render's member records")
    vote3d = render.vote3d.reshape(-1, 3)
    valid, res = vote_residuals(render.vote2d, gt)
    return _vote_grad(members, vote3d, valid, res, scene.votes(render.level), view, render.blend_mode, scene.n)


def _vote_grad(members, vote3d, valid, res, votes, view, blend_mode, n) -> GradientBuffer:
    grad = GradientBuffer.zeros(n)
    count = int(valid.sum())
    if count == 0:
        return grad
    pix = np.flatnonzero(valid)
    sign = np.sign(res[pix])  # sign(0) = 0
    counts = members.counts()
    starts = members.offsets[pix]
    lens = counts[pix]
    entry_pix = np.repeat(np.arange(len(pix)), lens)
    entries = np.repeat(starts - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens) + np.arange(lens.sum())
    ids = members.ids[entries]
    if blend_mode == "project_first":
        J = screen_jacobian(view, votes[ids])
        vals = np.einsum("eij,ei->ej", J, sign[entry_pix]) / (lens[entry_pix, None] * count)
    else:
        J = screen_jacobian(view, vote3d[pix])
        gp = np.einsum("pij,pi->pj", J, sign) / count
        if blend_mode == "alpha":
            vals = gp[entry_pix] * members.weights[entries, None]
        else:
            vals = gp[entry_pix] / lens[entry_pix, None]
    np.add.at(grad.offsets, ids, vals)
    return grad


def backward_depth(render, scene: Scene, view: CameraView, pixels=None, variant: str = "unweighted", normalize: bool = True):
    """Gradient of the depth distortion of member vote depths.

    ``pixels`` are the flat pixel indices the loss averages over (default: all
    pixels with members). Returns (loss, GradientBuffer).
    """
    members = render.members
    if render.depths is None:
        raise ValidationError("backward_depth needs member vote depths (render with mode 'votes' or 'all')")
    if pixels is None:
        pixels = np.flatnonzero(members.counts() > 0)
    return _depth_grad(members, render.depths, pixels, view, variant, normalize, scene.n)


def _depth_grad(members, depths, pixels, view, variant, normalize, n):
    loss, dz = depth_distortion_csr(
        members.offsets, depths, members.weights, pixels=pixels, variant=variant, normalize=normalize, want_grad=True
    )
    grad = GradientBuffer.zeros(n)
    nz = np.flatnonzero(dz)
    if len(nz):
        np.add.at(grad.offsets, members.ids[nz], dz[nz, None] * view.rotation[2][None, :])
    return loss, grad


@numba.njit(cache=True)
def _color_backward(width, height, tile, tile_offsets, tile_lists, means, conics, opacities, colors, alpha_cut, t_stop, dcolor):
    n = means.shape[0]
    g_color = np.zeros((n, 3))
    g_opacity = np.zeros(n)
    ntx = (width + tile - 1) // tile
    nty = (height + tile - 1) // tile
    max_len = 0
    for t in range(ntx * nty):
        max_len = max(max_len, tile_offsets[t + 1] - tile_offsets[t])
    js = np.empty(max_len, dtype=np.int64)
    al = np.empty(max_len)
    gs = np.empty(max_len)
    ts = np.empty(max_len)
    for ty in range(nty):
        for tx in range(ntx):
            t = ty * ntx + tx
            start = tile_offsets[t]
            stop = tile_offsets[t + 1]
            for py in range(ty * tile, min((ty + 1) * tile, height)):
                for px in range(tx * tile, min((tx + 1) * tile, width)):
                    T = 1.0
                    m = 0
                    for k in range(start, stop):
                        j = tile_lists[k]
                        dx = px + 0.5 - means[j, 0]
                        dy = py + 0.5 - means[j, 1]
                        m2 = conics[j, 0] * dx * dx + 2.0 * conics[j, 1] * dx * dy + conics[j, 2] * dy * dy
                        if m2 > 9.0 or m2 < 0.0:
                            continue
                        gval = np.exp(-0.5 * m2)
                        a = opacities[j] * gval
                        if a <= alpha_cut:
                            continue
                        js[m] = j
                        al[m] = a
                        gs[m] = gval
                        ts[m] = T
                        m += 1
                        T = T * (1.0 - a)
                        if T < t_stop:
                            break
                    d0 = dcolor[py, px, 0]
                    d1 = dcolor[py, px, 1]
                    d2 = dcolor[py, px, 2]
                    b0 = 0.0
                    b1 = 0.0
                    b2 = 0.0
                    for q in range(m - 1, -1, -1):
                        j = js[q]
                        a = al[q]
                        w = a * ts[q]
                        g_color[j, 0] += w * d0
                        g_color[j, 1] += w * d1
                        g_color[j, 2] += w * d2
                        # dC/d alpha_j = T_j (c_j - B_j), B_j = color composited behind j
                        da = ts[q] * ((colors[j, 0] - b0) * d0 + (colors[j, 1] - b1) * d1 + (colors[j, 2] - b2) * d2)
                        g_opacity[j] += da * gs[q]
                        b0 = colors[j, 0] * a + (1.0 - a) * b0
                        b1 = colors[j, 1] * a + (1.0 - a) * b1
                        b2 = colors[j, 2] * a + (1.0 - a) * b2
    return g_color, g_opacity


def backward_color(raster: Raster, dcolor: np.ndarray, n: int) -> GradientBuffer:
    """Chain d loss / d rendered color into per-Gaussian color and opacity gradients."""
    p = raster.proj
    gc, go = _color_backward(
        raster.view.width, raster.view.height, 16, raster.tile_offsets, raster.tile_lists,
        p.means, p.conics, p.opacities, p.colors, ALPHA_CUT, T_STOP, np.ascontiguousarray(dcolor, dtype=np.float64),
    )
    grad = GradientBuffer.zeros(n, appearance=True)
    grad.color[p.order] = gc
    grad.opacity[p.order] = go
    return grad


# ---------------------------------------------------------------------------
# optimizers


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray, lr: float | None = None) -> None:
        if self.m is None:
            self.m = np.zeros_like(param)
            self.v = np.zeros_like(param)
        self.t += 1
        lr = self.lr if lr is None else lr
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        param -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


class SGD:
    def __init__(self, lr: float, **_):
        self.lr = lr

    def step(self, param: np.ndarray, grad: np.ndarray, lr: float | None = None) -> None:
        param -= (self.lr if lr is None else lr) * grad


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainResult:
    scene: Scene
    history: list = field(default_factory=list)  # LossReport per step


@dataclass
class _ViewData:
    view: CameraView
    gt: VoteMap2D
    pixels_sup: np.ndarray  # flat indices of P
    image: np.ndarray | None


def _check_parameters(scene: Scene, step: int) -> None:
    for name in ("positions", "offsets", "colors", "opacities"):
        if not np.all(np.isfinite(getattr(scene, name))):
            raise TrainingError(f"non-finite {name} " + ("before training" if step == 0 else f"after step {step}"))


def _view_sampler(n_views: int, per_step: int, rng: np.random.Generator):
    """Yield view batches; each epoch is a fresh permutation."""
    queue: list = []
    while True:
        batch = []
        while len(batch) < min(per_step, n_views):
            if not queue:
                queue = rng.permutation(n_views).tolist()
            batch.append(queue.pop(0))
        yield batch


def train(
    scene: Scene,
    rig: CameraRig,
    masks,
    config: TrainConfig,
    images=None,
    log_path: str | Path | None = None,
    checkpoint_dir: str | Path | None = None,
    vote_maps=None,
) -> TrainResult:
    """Optimize the scene; returns a trained copy. ``masks`` are LabelMasks at ``config.level``, one per view."""
    scene = scene.copy()
    level = config.level
    if not 0 <= level < scene.levels:
        raise ConfigError(f"level {level} out of range for a {scene.levels}-level scene", field="level")
    _check_parameters(scene, 0)
    if vote_maps is None:
        if masks is None or len(masks) != len(rig):
            raise ConfigError(f"need one mask per view ({len(rig)} views, {0 if masks is None else len(masks)} masks)")
        vote_maps = []
        for k, (view, mask) in enumerate(zip(rig, masks)):
            if mask.labels.shape != (view.height, view.width):
                raise ConfigError(f"mask {k} is {mask.labels.shape}, view is {(view.height, view.width)}", field=f"masks[{k}]")
            vote_maps.append(build_vote_map(mask, config.border_margin))
    if len(vote_maps) != len(rig):
        raise ConfigError("need one vote map per view")
    if images is not None and len(images) != len(rig):
        raise ConfigError("need one image per view")
    views = [
        _ViewData(v, gt, np.flatnonzero(gt.supervised.reshape(-1)), None if images is None else np.asarray(images[k]))
        for k, (v, gt) in enumerate(zip(rig, vote_maps))
    ]

    view0 = rig[0]
    weights = config.weights or LossWeights.defaults_for(float(np.hypot(view0.width, view0.height)), scene.diagonal)
    lr_offset = config.lr_offset or 1e-3 * scene.diagonal
    lr_final = config.lr_offset_final or lr_offset / 10.0
    make = Adam if config.optimizer == "adam" else SGD
    opt_kw = dict(beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    trainable = set(config.trainable)
    appearance = bool(trainable & {"color", "opacity"})
    if appearance and images is None:
        raise ConfigError("color/opacity training needs ground-truth images")
    opts = {
        "offsets": make(lr_offset, **opt_kw),
        "position": make(config.lr_position or lr_offset, **opt_kw),
        "color": make(config.lr_color, **opt_kw),
        "opacity": make(config.lr_opacity, **opt_kw),
    }
    cache_members = not (trainable & {"opacity", "position"})
    raster_cache: dict = {}
    sampler = _view_sampler(len(views), config.views_per_step, np.random.default_rng(config.seed))
    logger = LossLog(log_path)
    history = []
    ckpt_dir = None if checkpoint_dir is None else Path(checkpoint_dir)
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    tau = 0.0 if config.blend_mode == "alpha" else config.tau_front
    use_vote = weights.lambda_vote > 0
    use_depth = config.use_depth_loss and weights.lambda_depth > 0

    for step in range(1, config.steps + 1):
        batch = next(sampler)
        grad = GradientBuffer.zeros(scene.n, appearance)
        votes = scene.votes(level)
        totals = np.zeros(3)
        n_sup = 0
        for k in batch:
            vd = views[k]
            if cache_members and k in raster_cache and not ("color" in trainable):
                ras = raster_cache[k]
            else:
                ras = rasterize(scene, vd.view, tau)
                if cache_members:
                    raster_cache[k] = ras
            v3, v2 = blend_votes(ras.members, votes, vd.view, config.blend_mode)
            valid, res = vote_residuals(v2, vd.gt)
            cnt = int(valid.sum())
            n_sup += cnt
            l_vote = float(np.sum(np.abs(res[valid])) / cnt) if cnt else 0.0
            if use_vote and cnt:
                grad.add(_vote_grad(ras.members, v3, valid, res, votes, vd.view, config.blend_mode, scene.n), weights.lambda_vote)
            l_depth = 0.0
            pix = np.flatnonzero(valid)
            if len(pix):
                depths = member_vote_depths(ras.members, votes, vd.view)
                if use_depth:
                    l_depth, dgrad = _depth_grad(
                        ras.members, depths, pix, vd.view, config.depth_variant, config.normalize_depth, scene.n
                    )
                    grad.add(dgrad, weights.lambda_depth)
                else:
                    l_depth, _ = depth_distortion_csr(
                        ras.members.offsets, depths, ras.members.weights, pixels=pix,
                        variant=config.depth_variant, normalize=config.normalize_depth,
                    )
            l_color = 0.0
            if vd.image is not None:
                l_color, dcol = color_loss_and_grad(ras.color, vd.image, weights.lambda_dssim, want_grad=appearance)
                if appearance:
                    grad.add(backward_color(ras, dcol, scene.n))
            totals += (l_color, l_vote, l_depth)
        nb = len(batch)
        grad.offsets /= nb
        if grad.color is not None:
            grad.color /= nb
            grad.opacity /= nb
        totals /= nb
        report = rvd_total(*totals, weights=weights, supervised_pixel_count=n_sup)
        if not np.isfinite(report.total):
            raise TrainingError(f"loss became non-finite at step {step}")
        grad.check_finite(step)

        frac = (step - 1) / max(config.steps - 1, 1)
        lr_now = lr_offset * (lr_final / lr_offset) ** frac
        if "offsets" in trainable:
            opts["offsets"].step(scene.offsets[level], grad.offsets, lr_now)
        if "position" in trainable:
            opts["position"].step(scene.positions, grad.offsets)
            np.clip(scene.positions, scene.bounds[0], scene.bounds[1], out=scene.positions)
        if "color" in trainable:
            opts["color"].step(scene.colors, grad.color)
            np.clip(scene.colors, 0.0, 1.0, out=scene.colors)
        if "opacity" in trainable:
            opts["opacity"].step(scene.opacities, grad.opacity)
            np.clip(scene.opacities, 0.0, 1.0, out=scene.opacities)
        _check_parameters(scene, step)
        history.append(report)
        logger.append(step, report)
        if ckpt_dir is not None and config.checkpoint_every and step % config.checkpoint_every == 0:
            save_scene(scene, ckpt_dir / f"step_{step:06d}.json")
        if step % 500 == 0:
            log.info("step %d: vote %.4f depth %.4f total %.6f", step, report.l_vote, report.l_depth, report.total)
    return TrainResult(scene=scene, history=history)
