import numpy as np
import pytest

from conftest import axis_view, make_scene, random_scene
from oracles import gradient_check, kink_free_targets
from houghsplat.camera import project_points, ring_rig
from houghsplat.errors import ConfigError, TrainingError
from houghsplat.losses import LossWeights, color_loss
from houghsplat.optimizer import SGD, Adam, TrainConfig, backward_color, backward_depth, backward_vote, train
from houghsplat.raster import rasterize, render
from houghsplat.votemaps import LabelMask, VoteMap2D, label_mask_from_scene


def test_vote_and_depth_gradients_match_finite_differences():
    worst, checked = gradient_check(np.random.default_rng(7), n_scenes=4)
    assert checked > 0
    assert worst < 1e-4


def test_zero_residual_gives_zero_vote_gradient(rng):
    s = random_scene(rng, 6)
    view = ring_rig(1, 4.0, width=24, height=24)[0]
    out = render(s, view)
    sup = ~np.isnan(out.vote2d[..., 0])
    gt = VoteMap2D(out.vote2d.copy(), sup, {})
    assert not backward_vote(out, gt, s, view).offsets.any()


def test_single_gaussian_gradient_points_toward_target():
    view = axis_view(32, 32, 32.0)
    s = make_scene([[0, 0, 4]], scale=0.3, opacity=0.9)
    out = render(s, view)
    sup = ~np.isnan(out.vote2d[..., 0])
    target = np.where(sup[..., None], out.vote2d + [3.0, 0.0], np.nan)  # target lies to +u
    g = backward_vote(out, VoteMap2D(target, sup, {}), s, view).offsets[0]
    assert g[0] < 0 and abs(g[1]) < 1e-12
    # vote moves toward the target under a descent step
    s.offsets[0, 0] -= 0.01 * g / np.linalg.norm(g)
    assert project_points(view, s.votes(0))[0][0, 0] > out.vote2d[16, 16, 0]


def test_depth_gradient_examples():
    view = axis_view(16, 16, 16.0)
    # two members at the center pixel; votes at depths 1 and 3 along the axis
    s = make_scene([[0, 0, 2.0], [0, 0, 2.5]], scale=1e-4, opacity=0.2, offsets=[[[0, 0, -1.0], [0, 0, 0.5]]])
    out = render(s, view)
    p = 8 * 16 + 8
    assert out.members.ids[out.members.pixel(p)].tolist() == [0, 1]
    loss, g = backward_depth(out, s, view, pixels=[p])
    assert loss == pytest.approx(2.0)
    np.testing.assert_allclose(g.offsets, [[0, 0, -1.0], [0, 0, 1.0]])
    s.offsets[0, :, 2] = [0.5, 0.0]  # both votes at depth 2.5
    loss, g = backward_depth(render(s, view), s, view, pixels=[p])
    assert loss == 0.0 and not g.offsets.any()


def test_color_backward_matches_finite_differences(rng):
    s = random_scene(rng, 5)
    view = ring_rig(1, 4.0, width=20, height=20)[0]
    target = rng.random((20, 20, 3))

    def loss(sc):
        return color_loss(rasterize(sc, view).color, target)

    from houghsplat.losses import color_loss_and_grad

    ras = rasterize(s, view)
    _, dcol = color_loss_and_grad(ras.color, target)
    g = backward_color(ras, dcol, s.n)
    h = 1e-6
    for i in range(s.n):
        for k in range(3):
            sp, sm = s.copy(), s.copy()
            sp.colors[i, k] += h
            sm.colors[i, k] -= h
            assert (loss(sp) - loss(sm)) / (2 * h) == pytest.approx(g.color[i, k], rel=1e-4, abs=1e-9)
        sp, sm = s.copy(), s.copy()
        sp.opacities[i] += h
        sm.opacities[i] -= h
        assert (loss(sp) - loss(sm)) / (2 * h) == pytest.approx(g.opacity[i], rel=1e-4, abs=1e-9)


def test_adam_first_step_is_lr_times_sign():
    p = np.array([1.0, -2.0, 3.0])
    Adam(0.1).step(p, np.array([5.0, -0.01, 0.0]))
    np.testing.assert_allclose(p, [0.9, -1.9, 3.0], atol=1e-6)
    q = np.array([1.0])
    SGD(0.5).step(q, np.array([2.0]))
    assert q[0] == 0.0


def two_blob_setup():
    rng = np.random.default_rng(3)
    pts = np.concatenate([rng.normal([-0.8, 0, 0], 0.25, (40, 3)), rng.normal([0.8, 0, 0], 0.25, (40, 3))])
    labels = np.repeat([0, 1], 40)
    s = make_scene(pts, scale=0.12, opacity=0.7, labels=labels)
    rig = ring_rig(6, 5.0, width=48, height=48, fov_deg=50, elevations=(20.0, -20.0))
    masks = [label_mask_from_scene(s, v) for v in rig]
    return s, rig, masks


def test_training_pulls_votes_to_centroids():
    s, rig, masks = two_blob_setup()
    centers = np.array([s.positions[s.labels == k].mean(axis=0) for k in (0, 1)])

    def err(sc):
        return np.mean(np.linalg.norm(sc.votes(0) - centers[sc.labels], axis=1))

    res = train(s, rig, masks, TrainConfig(steps=150, views_per_step=2))
    assert err(res.scene) < 0.5 * err(s)
    votes = [r.l_vote for r in res.history]
    assert np.mean(votes[-20:]) < np.mean(votes[:20])


def test_centroid_error_decreases_over_windows(tmp_path):
    from houghsplat.scene import SyntheticSceneSpec, generate_synthetic_scene, load_scene

    spec = SyntheticSceneSpec.from_dict({"instances": [{"center": [0.3, -0.2, 0.1], "radius": 1.0, "count": 120}], "seed": 9})
    s = generate_synthetic_scene(spec)
    c = s.instance_centroids()[0]
    rig = ring_rig(6, 8.0, width=48, height=48, fov_deg=45, elevations=(25.0, -25.0))
    masks = [label_mask_from_scene(s, v) for v in rig]
    train(s, rig, masks, TrainConfig(steps=300, views_per_step=2, checkpoint_every=10), checkpoint_dir=tmp_path)
    errs = [np.linalg.norm(s.votes(0) - c, axis=1).mean()]
    for step in range(10, 301, 10):
        errs.append(np.linalg.norm(load_scene(tmp_path / f"step_{step:06d}.json").votes(0) - c, axis=1).mean())
    windows = np.array(errs[1:]).reshape(6, 5).mean(axis=1)  # 50-step windows
    assert np.all(np.diff(windows) < 0)
    assert windows[-1] < 0.7 * errs[0]


def test_unsupervised_gaussians_keep_zero_offsets():
    s, rig, masks = two_blob_setup()
    # an extra splat far outside every view's member sets plus one never labeled
    bg = make_scene([[0, -30, 0]], scale=0.1)
    from houghsplat.scene import Scene

    merged = Scene(
        positions=np.concatenate([s.positions, bg.positions]),
        scales=np.concatenate([s.scales, bg.scales]),
        rotations=np.concatenate([s.rotations, bg.rotations]),
        opacities=np.concatenate([s.opacities, bg.opacities]),
        colors=np.concatenate([s.colors, bg.colors]),
        offsets=np.concatenate([s.offsets, bg.offsets], axis=1),
        labels=np.concatenate([s.labels, [-1]]),
        bounds=np.array([[-1, -31, -1], [1, 1, 1.0]]) * 1.0,
    )
    res = train(merged, rig, masks, TrainConfig(steps=30, views_per_step=3))
    assert np.all(res.scene.offsets[0, -1] == 0.0)
    assert np.any(res.scene.offsets[0, :-1] != 0.0)


def test_training_is_deterministic():
    s, rig, masks = two_blob_setup()
    cfg = TrainConfig(steps=20, views_per_step=2, seed=5)
    a = train(s, rig, masks, cfg).scene
    b = train(s, rig, masks, cfg).scene
    assert np.array_equal(a.offsets, b.offsets)


def test_color_training_reduces_photometric_loss():
    view = axis_view(24, 24, 24.0)
    target_scene = make_scene([[0, 0, 3]], scale=0.4, opacity=0.9, colors=np.array([[0.9, 0.2, 0.1]]))
    s = make_scene([[0, 0, 3]], scale=0.4, opacity=0.9, colors=np.array([[0.3, 0.6, 0.5]]))
    from houghsplat.camera import CameraRig

    rig = CameraRig([view])
    image = render(target_scene, view, mode="color").color
    masks = [LabelMask(np.zeros((24, 24), dtype=int))]
    weights = LossWeights(lambda_vote=0.0, lambda_depth=0.0)
    cfg = TrainConfig(steps=10, trainable=("color",), views_per_step=1, lr_color=0.05, weights=weights)
    res = train(s, rig, masks, cfg, images=[image])
    losses = [r.l_color for r in res.history]
    assert np.all(np.diff(losses[:8]) < 0)
    assert losses[-1] < 0.2 * losses[0]


def test_non_finite_gradient_aborts():
    s, rig, masks = two_blob_setup()
    s.offsets[0, 0, 0] = np.nan
    with pytest.raises(TrainingError):
        train(s, rig, masks, TrainConfig(steps=2))


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(steps=0)
    with pytest.raises(ConfigError):
        TrainConfig(optimizer="lbfgs")
    with pytest.raises(ConfigError):
        TrainConfig(blend_mode="max")
    with pytest.raises(ConfigError):
        TrainConfig(trainable=("scale",))
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"steps": 10, "learning_rate": 1})
    cfg = TrainConfig.from_dict({"steps": 3, "weights": {"lambda_vote": 0.5}, "trainable": ["offsets"]})
    assert cfg.weights == LossWeights(lambda_vote=0.5) and cfg.trainable == ("offsets",)


def test_mask_view_mismatch():
    s, rig, masks = two_blob_setup()
    with pytest.raises(ConfigError):
        train(s, rig, masks[:-1], TrainConfig(steps=1))
    bad = list(masks)
    bad[0] = LabelMask(np.zeros((10, 10), dtype=int))
    with pytest.raises(ConfigError):
        train(s, rig, bad, TrainConfig(steps=1))
    with pytest.raises(ConfigError):
        train(s, rig, masks, TrainConfig(steps=1, level=1))
    with pytest.raises(ConfigError):
        train(s, rig, masks, TrainConfig(steps=1, trainable=("color",)))


def test_checkpoints_and_log(tmp_path):
    s, rig, masks = two_blob_setup()
    train(s, rig, masks, TrainConfig(steps=4, checkpoint_every=2), log_path=tmp_path / "loss.csv", checkpoint_dir=tmp_path / "ck")
    assert sorted(p.name for p in (tmp_path / "ck").glob("*.json")) == ["step_000002.json", "step_000004.json"]
    assert len((tmp_path / "loss.csv").read_text().splitlines()) == 5


def test_kink_free_targets_keep_residuals_away_from_zero(rng):
    s = random_scene(rng, 4)
    out = render(s, ring_rig(1, 4.0, width=16, height=16)[0])
    gt = kink_free_targets(out, rng)
    r = np.abs(gt.votes - out.vote2d)[gt.supervised]
    assert r.min() >= 0.5
