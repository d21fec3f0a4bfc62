"""Independent reference computations shared by unit and acceptance tests."""

import numpy as np

from houghsplat.camera import ring_rig
from houghsplat.losses import depth_distortion_csr, vote_loss
from houghsplat.optimizer import backward_depth, backward_vote
from houghsplat.raster import member_vote_depths, render
from houghsplat.scene import GaussianPrimitive, Scene
from houghsplat.votemaps import VoteMap2D


def fd_scene(rng, n):
    gs = [
        GaussianPrimitive(
            position=rng.normal(0, 0.6, 3),
            scale=np.full(3, 0.5),
            rotation=np.array([1.0, 0, 0, 0]),
            opacity=0.7,
            color=rng.random(3),
            offsets=rng.normal(0, 0.3, (1, 3)),
        )
        for _ in range(n)
    ]
    return Scene.from_gaussians(gs)


def kink_free_targets(out, rng):
    """Targets at least 0.5 px from the rendered votes along each axis.

    Finite differences of an L1 loss are only meaningful when no residual
    changes sign inside the stencil, so residuals are kept away from zero.
    """
    mag = rng.uniform(0.5, 3.0, out.vote2d.shape) * rng.choice([-1.0, 1.0], out.vote2d.shape)
    sup = ~np.isnan(out.vote2d[..., 0])
    return VoteMap2D(votes=np.where(sup[..., None], out.vote2d + mag, np.nan), supervised=sup, centroids={})


def gradient_check(rng, n_scenes=20, rel_h=1e-4):
    """Worst relative error of analytic vote and depth offset gradients against central differences."""
    worst = 0.0
    checked = 0
    for _ in range(n_scenes):
        s = fd_scene(rng, int(rng.integers(3, 11)))
        rig = ring_rig(2, 4.0, width=32, height=32, fov_deg=60, azimuth0=float(rng.uniform(0, 360)))
        for view in rig:
            out = render(s, view)
            gt = kink_free_targets(out, rng)
            pix = np.flatnonzero(gt.supervised.reshape(-1))
            g_vote = backward_vote(out, gt, s, view).offsets
            g_depth = backward_depth(out, s, view, pixels=pix)[1].offsets

            def losses(sc):
                o = render(sc, view)
                d = member_vote_depths(o.members, sc.votes(0), view)
                return np.array([vote_loss(o, gt), depth_distortion_csr(o.members.offsets, d, pixels=pix)[0]])

            h = rel_h * s.diagonal
            fd = np.zeros((2,) + g_vote.shape)
            for i in range(s.n):
                for k in range(3):
                    sp, sm = s.copy(), s.copy()
                    sp.offsets[0, i, k] += h
                    sm.offsets[0, i, k] -= h
                    fd[:, i, k] = (losses(sp) - losses(sm)) / (2 * h)
            for a, b in ((g_vote, fd[0]), (g_depth, fd[1])):
                m = np.abs(a) > 1e-8
                checked += int(m.sum())
                # entries with no analytic gradient must have none numerically either
                worst = max(worst, float(np.max(np.abs(b[~m]), initial=0.0)))
                if m.any():
                    worst = max(worst, float(np.max(np.abs(a - b)[m] / np.abs(a)[m])))
    return worst, checked
