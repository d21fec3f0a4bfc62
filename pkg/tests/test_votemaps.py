import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import axis_view, make_scene
from houghsplat.errors import ValidationError
from houghsplat.votemaps import LabelMask, build_vote_map, label_mask_from_scene, segment_centroid


def test_centroid_of_two_pixels():
    labels = np.zeros((10, 10), dtype=int)
    labels[4, 2] = labels[6, 4] = 1
    assert segment_centroid(LabelMask(labels), 1) == (3, 5)


def test_centroid_halves_round_away_from_zero():
    labels = np.zeros((6, 10), dtype=int)
    labels[1:3, 2:6] = 1  # x mean 3.5, y mean 1.5
    assert segment_centroid(LabelMask(labels), 1) == (4, 2)


def test_l_shape_matches_direct_mean():
    labels = np.zeros((12, 12), dtype=int)
    labels[2:9, 2:4] = 3
    labels[7:9, 2:9] = 3
    ys, xs = np.nonzero(labels == 3)
    expect = (int(np.floor(xs.mean() + 0.5)), int(np.floor(ys.mean() + 0.5)))
    assert segment_centroid(LabelMask(labels), 3) == expect
    vm = build_vote_map(LabelMask(labels))
    np.testing.assert_array_equal(vm.votes[labels == 3], np.tile(np.add(expect, 0.5), (len(xs), 1)))


def test_border_segments_are_dropped():
    labels = np.zeros((10, 10), dtype=int)
    labels[2:4, 2:4] = 1
    labels[6:8, 2:4] = 2
    labels[0:3, 6:9] = 3  # touches the top edge
    vm = build_vote_map(LabelMask(labels))
    assert sorted(vm.centroids) == [1, 2]
    assert not vm.supervised[labels == 3].any()
    assert np.isnan(vm.votes[labels == 3]).all()
    assert len({tuple(v) for v in vm.votes[vm.supervised]}) == 2
    assert vm.count == 8


def test_margin_zero_keeps_clipped_segments():
    labels = np.zeros((6, 6), dtype=int)
    labels[0:2, 0:2] = 1
    assert build_vote_map(LabelMask(labels), border_margin=0).count == 4
    labels2 = np.zeros((8, 8), dtype=int)
    labels2[1:3, 3:5] = 1
    assert build_vote_map(LabelMask(labels2), border_margin=1).count == 4
    assert build_vote_map(LabelMask(labels2), border_margin=2).count == 0


def test_background_is_unsupervised():
    vm = build_vote_map(LabelMask(np.zeros((5, 5), dtype=int)))
    assert vm.count == 0 and np.isnan(vm.votes).all()


@settings(max_examples=40, deadline=None)
@given(dx=st.integers(-3, 3), dy=st.integers(-3, 3), seed=st.integers(0, 10_000))
def test_translation_equivariance(dx, dy, seed):
    rng = np.random.default_rng(seed)
    labels = np.zeros((20, 20), dtype=int)
    labels[5:15, 5:15] = (rng.random((10, 10)) < 0.5) * rng.integers(1, 3, (10, 10))
    if not labels.any():
        labels[8, 8] = 1
    shifted = np.roll(labels, (dy, dx), axis=(0, 1))
    a = build_vote_map(LabelMask(labels))
    b = build_vote_map(LabelMask(shifted))
    assert a.centroids.keys() == b.centroids.keys()
    for k, (cx, cy) in a.centroids.items():
        assert b.centroids[k] == (cx + dx, cy + dy)


def test_negative_labels_rejected():
    with pytest.raises(ValidationError):
        LabelMask(np.array([[-1]]))
    with pytest.raises(ValidationError):
        segment_centroid(LabelMask(np.zeros((2, 2), dtype=int)), 1)


def test_rendered_mask_keeps_pure_pixels_only():
    view = axis_view(32, 32, 32.0)
    s = make_scene([[-0.5, 0, 4], [0.5, 0, 4]], scale=0.25, opacity=0.9, labels=np.array([0, 1]))
    m = label_mask_from_scene(s, view)
    assert set(np.unique(m.labels)) == {0, 1, 2}
    # columns left of the image center belong to the first Gaussian
    assert (m.labels[:, :12] != 2).all() and (m.labels[:, 20:] != 1).all()
    # unlabeled Gaussians never produce labels
    s.labels[:] = -1
    assert not label_mask_from_scene(s, view).labels.any()
