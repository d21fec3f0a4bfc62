import numpy as np
import pytest

from conftest import axis_view, make_scene
from houghsplat.camera import CameraRig
from houghsplat.clustering import InstanceEntry, InstanceTable, remove_instance
from houghsplat.errors import FormatError, ValidationError
from houghsplat.semantics import (
    FeatureBank,
    PlaneFeatures,
    SyntheticFeatures,
    associate_features,
    instance_id_map,
    pick,
    query,
    rank,
    selection_masks,
)
from houghsplat.votemaps import LabelMask


def side_by_side():
    """Two instances side by side, A (id 0) left and B (id 1) right, and an occluded pair on the axis."""
    pts = np.array([[-0.6, 0, 4.0], [0.6, 0, 4.0]])
    s = make_scene(pts, scale=0.25, opacity=0.9, labels=np.array([0, 1]))
    table = InstanceTable({0: InstanceEntry([0], pts[0]), 1: InstanceEntry([1], pts[1])})
    return s, table


def test_constant_feature_plane_gives_that_feature():
    s, table = side_by_side()
    view = axis_view(32, 32, 32.0)
    f = np.array([3.0, 4.0, 0.0])
    bank = associate_features(s, table, CameraRig([view]), PlaneFeatures([np.broadcast_to(f, (32, 32, 3))]))
    np.testing.assert_allclose(bank.features[0], f / 5.0)
    np.testing.assert_allclose(bank.features[1], f / 5.0)
    np.testing.assert_allclose(table.instances[0].feature, f / 5.0)


def test_views_are_weighted_by_pixel_count():
    s, table = side_by_side()
    near = axis_view(32, 32, 32.0)
    far = axis_view(32, 32, 32.0, z_offset=4.0)  # instances look smaller
    rig = CameraRig([near, far])
    f1, f2 = np.eye(2)
    planes = [np.broadcast_to(f1, (32, 32, 2)), np.broadcast_to(f2, (32, 32, 2))]
    bank = associate_features(s, table, rig, PlaneFeatures(planes))
    n1 = int((instance_id_map(s, table, near) == 0).sum())
    n2 = int((instance_id_map(s, table, far) == 0).sum())
    assert n1 > n2 > 0
    want = n1 * f1 + n2 * f2
    np.testing.assert_allclose(bank.features[0], want / np.linalg.norm(want))
    assert bank.pixel_counts[0] == n1 + n2


def test_occluded_instance_gets_a_feature_from_side_views():
    from houghsplat.camera import ring_rig

    pts = np.array([[0, 0, 2.0], [0, 0, -1.0]])
    s = make_scene(pts, scale=[[0.6, 0.6, 0.6], [0.2, 0.2, 0.2]], opacity=0.99, labels=np.array([0, 1]))
    table = InstanceTable({0: InstanceEntry([0], pts[0]), 1: InstanceEntry([1], pts[1])})
    rig = ring_rig(4, 8.0, width=32, height=32, fov_deg=40, elevations=(0.0,))
    cams = [np.linalg.inv(v.world_to_camera)[:3, 3] for v in rig]
    front = int(np.argmax([c[2] for c in cams]))
    assert not (instance_id_map(s, table, rig[front]) == 1).any()
    ids = [instance_id_map(s, table, v) for v in rig]
    masks = [LabelMask(np.where(i >= 0, i + 1, 0)) for i in ids]
    src = SyntheticFeatures(masks, dim=8, seed=0)
    bank = associate_features(s, table, rig, src)
    assert bank.missing == []
    np.testing.assert_allclose(bank.features[1], src.vector(2))


def test_instances_out_of_view_are_missing():
    s, table = side_by_side()
    table.instances[2] = InstanceEntry([], np.zeros(3))
    bank = associate_features(s, table, CameraRig([axis_view()]), PlaneFeatures([np.ones((32, 32, 2))]))
    assert bank.missing == [2]
    with pytest.raises(ValidationError):
        associate_features(s, table, CameraRig([axis_view()]), PlaneFeatures([np.ones((8, 8, 2))]))


def synthetic_bank():
    s, table = side_by_side()
    view = axis_view(32, 32, 32.0)
    ids = instance_id_map(s, table, view)
    masks = [LabelMask(np.where(ids >= 0, ids + 1, 0))]
    src = SyntheticFeatures(masks, dim=8, seed=3)
    return s, table, CameraRig([view]), associate_features(s, table, CameraRig([view]), src), src


def test_self_query_scores_one_and_retrieves_the_instance():
    s, table, rig, bank, src = synthetic_bank()
    for k in (0, 1):
        res = query(bank, src.vector(k + 1), s, table, rig)
        assert res.ranking[0] == (k, pytest.approx(1.0))
        assert res.selected == [k]
        assert res.gaussian_ids.tolist() == [k]


def test_query_scores_are_cosines():
    bank = FeatureBank(dim=3, features={0: np.array([1.0, 0, 0]), 1: np.array([0, 1.0, 0])})
    r = rank(bank, [0, 0, 2.0])
    assert [score for _, score in r] == [0.0, 0.0]
    assert rank(bank, [5.0, 0, 0]) == rank(bank, [0.1, 0, 0])
    assert rank(bank, [1.0, 1.0, 0])[0] == (0, pytest.approx(np.sqrt(0.5)))  # ties resolve by id
    with pytest.raises(ValidationError):
        rank(bank, [0, 0, 0])
    with pytest.raises(ValidationError):
        rank(bank, [1, 0])
    with pytest.raises(ValidationError):
        rank(FeatureBank(dim=3), [1, 0, 0])


def test_one_hot_query_selects_exact_gaussians_and_masks():
    s, table = side_by_side()
    rig = CameraRig([axis_view(32, 32, 32.0)])
    bank = FeatureBank(dim=2, features={0: np.array([1.0, 0]), 1: np.array([0, 1.0])})
    res = query(bank, [0, 1.0], s, table, rig)
    assert res.selected == [1] and res.gaussian_ids.tolist() == [1]
    mask = res.masks[0]
    assert mask[16, 16 + 5] and not mask[16, 16 - 5]
    both = query(bank, [1.0, 1.0], s, table, rig, threshold=0.5)
    assert both.selected == [0, 1]
    assert selection_masks(s, [], rig)[0].sum() == 0


def test_pick_matches_rendered_id_map():
    s, table = side_by_side()
    rig = CameraRig([axis_view(32, 32, 32.0)])
    ids = instance_id_map(s, table, rig[0])
    for u, v in [(10, 16), (22, 16), (0, 0), (16, 16)]:
        assert pick(s, table, rig, 0, (u, v)) == ids[v, u]
    assert pick(s, table, rig, 0, (10, 16)) == 0
    assert pick(s, table, rig, 0, (0, 0)) == -1


def test_pick_sees_the_front_instance_then_the_one_behind():
    pts = np.array([[0, 0, 3.0], [0, 0, 6.0]])
    s = make_scene(pts, scale=0.3, opacity=0.95, labels=np.array([0, 1]))
    table = InstanceTable({0: InstanceEntry([0], pts[0]), 1: InstanceEntry([1], pts[1])})
    rig = CameraRig([axis_view(32, 32, 32.0)])
    assert pick(s, table, rig, 0, (16, 16)) == 0
    s2, t2 = remove_instance(s, table, 0)
    assert pick(s2, t2, rig, 0, (16, 16)) == 1


def test_pick_errors():
    s, table = side_by_side()
    rig = CameraRig([axis_view(32, 32, 32.0)])
    with pytest.raises(ValidationError):
        pick(s, table, rig, 0, (32, 0))
    with pytest.raises(ValidationError):
        pick(s, table, rig, 1, (0, 0))


def test_synthetic_features_are_seeded_unit_vectors():
    src = SyntheticFeatures([], dim=5, seed=1)
    assert np.linalg.norm(src.vector(3)) == pytest.approx(1.0)
    np.testing.assert_array_equal(src.vector(3), SyntheticFeatures([], dim=5, seed=1).vector(3))
    assert not src.vector(0).any()
    with pytest.raises(ValidationError):
        SyntheticFeatures([], dim=0)


def test_feature_bank_roundtrip(tmp_path):
    *_, bank, _ = synthetic_bank()
    bank.save(tmp_path / "b.json")
    back = FeatureBank.load(tmp_path / "b.json")
    assert back.to_dict() == bank.to_dict()
    d = bank.to_dict()
    d["dim"] = 3
    with pytest.raises(FormatError):
        FeatureBank.from_dict(d)
