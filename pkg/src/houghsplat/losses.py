"""Training objectives: photometric (L1 + D-SSIM), vote L1, depth distortion, and their sum.

Reductions use numpy's pairwise summation over arrays in a fixed order, so a
loss is bit-identical between runs on the same inputs.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from scipy.ndimage import correlate1d

from ._util import strict_kwargs
from .errors import ValidationError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass
class LossWeights:
    lambda_vote: float = 1e-3
    lambda_depth: float = 1e-3
    lambda_dssim: float = 0.2

    def __post_init__(self):
        if self.lambda_vote < 0 or self.lambda_depth < 0:
            raise ValidationError("loss weights must be non-negative")
        if not 0.0 <= self.lambda_dssim <= 1.0:
            raise ValidationError("lambda_dssim must lie in [0, 1]")

    @classmethod
    def defaults_for(cls, image_diagonal_px: float, scene_diagonal: float) -> "LossWeights":
        """Size-aware defaults: the vote term is scaled by the image diagonal, depth by the scene diagonal."""
        return cls(lambda_vote=0.1 / image_diagonal_px, lambda_depth=0.01 / scene_diagonal, lambda_dssim=0.2)

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(**strict_kwargs(cls, d, "weights"))


@dataclass
class LossReport:
    l_color: float
    l_vote: float
    l_depth: float
    total: float
    supervised_pixel_count: int


def rvd_total(l_color: float, l_vote: float, l_depth: float, weights: LossWeights, supervised_pixel_count: int = 0) -> LossReport:
    total = l_color + weights.lambda_vote * l_vote + weights.lambda_depth * l_depth
    return LossReport(float(l_color), float(l_vote), float(l_depth), float(total), int(supervised_pixel_count))


# ---------------------------------------------------------------------------
# vote loss


def vote_residuals(vote2d: np.ndarray, gt) -> tuple[np.ndarray, np.ndarray]:
    """(mask of P', residual rendered - target) on the flattened pixel grid."""
    pred = np.asarray(vote2d).reshape(-1, 2)
    target = gt.votes.reshape(-1, 2)
    if pred.shape != target.shape:
        raise ValidationError(f"vote map shape {gt.votes.shape[:2]} does not match render {np.shape(vote2d)[:2]}")
    valid = gt.supervised.reshape(-1) & np.isfinite(pred[:, 0]) & np.isfinite(pred[:, 1])
    return valid, pred - target


def vote_loss(render, gt) -> float:
    """Mean over supervised pixels with a non-empty member set of |du| + |dv|."""
    vote2d = render.vote2d if hasattr(render, "vote2d") else render
    valid, res = vote_residuals(vote2d, gt)
    n = int(valid.sum())
    if n == 0:
        warnings.warn("vote loss: no supervised pixel has a vote member; loss defined as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return float(np.sum(np.abs(res[valid])) / n)


# ---------------------------------------------------------------------------
# depth distortion


@numba.njit(cache=True)
def _pixel_distortion(z, w, weighted, normalize, want_grad, grad_out):
    n = z.shape[0]
    if n < 2:
        return 0.0
    order = np.argsort(z, kind="mergesort")
    zs = z[order]
    raw = 0.0
    if weighted:
        ws = w[order]
        wsum = 0.0
        wz = 0.0
        for k in range(n):
            raw += ws[k] * (zs[k] * wsum - wz)
            wsum += ws[k]
            wz += ws[k] * zs[k]
    else:
        for k in range(n):
            raw += (2.0 * k - n + 1.0) * zs[k]
    norm = n * (n - 1) / 2.0 if normalize else 1.0
    if want_grad:
        # d/dz_i sum_{pairs} c_ij |z_i - z_j| = sum_j c_ij sign(z_i - z_j); equal depths contribute 0
        total_w = 0.0
        if weighted:
            for k in range(n):
                total_w += w[k]
        k = 0
        below_w = 0.0
        while k < n:
            e = k
            while e + 1 < n and zs[e + 1] == zs[k]:
                e += 1
            if weighted:
                tie_w = 0.0
                for m in range(k, e + 1):
                    tie_w += w[order[m]]
                above_w = total_w - below_w - tie_w
                for m in range(k, e + 1):
                    i = order[m]
                    grad_out[i] = w[i] * (below_w - above_w) / norm
                below_w += tie_w
            else:
                g = (k - (n - 1 - e)) / norm
                for m in range(k, e + 1):
                    grad_out[order[m]] = g
            k = e + 1
    return raw / norm


@numba.njit(cache=True)
def _distortion_csr(offsets, pixels, z, w, weighted, normalize, want_grad):
    terms = np.zeros(pixels.shape[0])
    grad = np.zeros(z.shape[0])
    for q in range(pixels.shape[0]):
        p = pixels[q]
        s = offsets[p]
        e = offsets[p + 1]
        if e - s < 2:
            continue
        g = np.zeros(e - s)
        terms[q] = _pixel_distortion(z[s:e], w[s:e], weighted, normalize, want_grad, g)
        if want_grad:
            grad[s:e] = g
    return terms, grad


def depth_distortion_csr(offsets, depths, weights=None, pixels=None, variant: str = "unweighted", normalize: bool = True, want_grad: bool = False):
    """Depth distortion over ragged per-pixel lists.

    Returns (loss, per-entry gradient d loss / d depth or None). The loss is the
    mean over ``pixels`` (default: every pixel) of each pixel's pair sum,
    divided by its pair count when ``normalize``.
    """
    if variant not in ("weighted", "unweighted"):
        raise ValidationError(f"unknown depth distortion variant {variant!r}")
    offsets = np.asarray(offsets, dtype=np.int64)
    depths = np.ascontiguousarray(depths, dtype=np.float64)
    if pixels is None:
        pixels = np.arange(len(offsets) - 1, dtype=np.int64)
    pixels = np.asarray(pixels, dtype=np.int64)
    weighted = variant == "weighted"
    if weighted:
        if weights is None:
            raise ValidationError("weighted depth distortion needs weights")
        w = np.ascontiguousarray(weights, dtype=np.float64)
    else:
        w = np.ones_like(depths)
    terms, grad = _distortion_csr(offsets, pixels, depths, w, weighted, normalize, want_grad)
    if len(pixels) == 0:
        return 0.0, (np.zeros_like(depths) if want_grad else None)
    loss = float(np.sum(terms) / len(pixels))
    if want_grad:
        return loss, grad / len(pixels)
    return loss, None


def depth_distortion(depths, weights=None, variant: str = "unweighted", normalize: bool = True) -> float:
    """Mean per-pixel depth distortion for a list of per-pixel depth arrays."""
    lists = [np.asarray(d, dtype=np.float64).reshape(-1) for d in depths]
    offsets = np.zeros(len(lists) + 1, dtype=np.int64)
    np.cumsum([len(d) for d in lists], out=offsets[1:])
    flat = np.concatenate(lists) if lists else np.zeros(0)
    wflat = None
    if weights is not None:
        wflat = np.concatenate([np.asarray(x, dtype=np.float64).reshape(-1) for x in weights]) if lists else np.zeros(0)
    loss, _ = depth_distortion_csr(offsets, flat, wflat, variant=variant, normalize=normalize)
    return loss


# ---------------------------------------------------------------------------
# photometric loss


def _gauss_window() -> np.ndarray:
    x = np.arange(SSIM_WINDOW) - SSIM_WINDOW // 2
    g = np.exp(-(x**2) / (2.0 * SSIM_SIGMA**2))
    return g / g.sum()


_WINDOW = _gauss_window()


def _filter(img: np.ndarray) -> np.ndarray:
    out = correlate1d(img, _WINDOW, axis=0, mode="constant", cval=0.0)
    return correlate1d(out, _WINDOW, axis=1, mode="constant", cval=0.0)


def _ssim_parts(x: np.ndarray, y: np.ndarray):
    mx, my = _filter(x), _filter(y)
    sxx = _filter(x * x) - mx * mx
    syy = _filter(y * y) - my * my
    sxy = _filter(x * y) - mx * my
    a1 = 2.0 * mx * my + SSIM_C1
    a2 = 2.0 * sxy + SSIM_C2
    b1 = mx * mx + my * my + SSIM_C1
    b2 = sxx + syy + SSIM_C2
    return mx, my, a1, a2, b1, b2


def ssim(x: np.ndarray, y: np.ndarray) -> float:
    """Mean SSIM of two [0, 1] images, 11x11 Gaussian window (sigma 1.5), zero padded."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValidationError(f"image shapes differ: {x.shape} vs {y.shape}")
    if x.ndim == 2:
        x, y = x[..., None], y[..., None]
    _, _, a1, a2, b1, b2 = _ssim_channels(x, y)
    return float(np.mean(a1 * a2 / (b1 * b2)))


def _ssim_channels(x, y):
    parts = [_ssim_parts(x[..., c], y[..., c]) for c in range(x.shape[-1])]
    return tuple(np.stack([p[k] for p in parts], axis=-1) for k in range(6))


def _ssim_and_grad(x: np.ndarray, y: np.ndarray):
    mx, my, a1, a2, b1, b2 = _ssim_channels(x, y)
    s = a1 * a2 / (b1 * b2)
    n = s.size
    d_mx = (2.0 * my * (a2 - a1)) / (b1 * b2) - 2.0 * mx * s * (1.0 / b1 - 1.0 / b2)
    d_mxx = -s / b2
    d_mxy = 2.0 * a1 / (b1 * b2)
    grad = np.empty_like(x)
    for c in range(x.shape[-1]):
        grad[..., c] = (
            _filter(d_mx[..., c]) + 2.0 * x[..., c] * _filter(d_mxx[..., c]) + y[..., c] * _filter(d_mxy[..., c])
        ) / n
    return float(np.mean(s)), grad


def color_loss(rendered: np.ndarray, gt: np.ndarray, lambda_dssim: float = 0.2) -> float:
    return color_loss_and_grad(rendered, gt, lambda_dssim, want_grad=False)[0]


def color_loss_and_grad(rendered: np.ndarray, gt: np.ndarray, lambda_dssim: float = 0.2, want_grad: bool = True):
    """(1 - l) * mean|x - y| + l * (1 - SSIM) / 2, and its gradient wrt the rendered image."""
    x = np.asarray(rendered, dtype=np.float64)
    y = np.asarray(gt, dtype=np.float64)
    if x.shape != y.shape:
        raise ValidationError(f"image shapes differ: {x.shape} vs {y.shape}")
    if x.ndim == 2:
        x, y = x[..., None], y[..., None]
    diff = x - y
    l1 = float(np.mean(np.abs(diff)))
    if lambda_dssim > 0:
        s, sgrad = _ssim_and_grad(x, y) if want_grad else (ssim(x, y), None)
    else:
        s, sgrad = 1.0, None
    loss = (1.0 - lambda_dssim) * l1 + lambda_dssim * (1.0 - s) / 2.0
    if not want_grad:
        return loss, None
    grad = (1.0 - lambda_dssim) * np.sign(diff) / diff.size
    if sgrad is not None:
        grad = grad - lambda_dssim * sgrad / 2.0
    return loss, grad.reshape(np.shape(rendered))


# ---------------------------------------------------------------------------
# loss log


LOSS_COLUMNS = ("step", "l_color", "l_vote", "l_depth", "total")


class LossLog:
    """Appends one CSV row per step."""

    def __init__(self, path: str | Path | None):
        self.path = None if path is None else Path(path)
        self.rows = []
        if self.path is not None:
            with self.path.open("w", newline="") as fh:
                csv.writer(fh).writerow(LOSS_COLUMNS)

    def append(self, step: int, report: LossReport) -> None:
        row = (step, report.l_color, report.l_vote, report.l_depth, report.total)
        self.rows.append(row)
        if self.path is not None:
            with self.path.open("a", newline="") as fh:
                csv.writer(fh).writerow([step] + [repr(float(v)) for v in row[1:]])
