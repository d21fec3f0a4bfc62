import itertools
import json

import numpy as np
import pytest

from conftest import make_scene
from houghsplat.camera import ring_rig
from houghsplat.errors import ValidationError
from houghsplat.evaluation import ari, depth_spread, iou, m_acc, vote_error, write_metrics


def test_iou_examples():
    a = np.zeros((4, 4), dtype=bool)
    a[:2] = True
    b = np.zeros((4, 4), dtype=bool)
    b[:, :2] = True
    assert iou(a, a) == 1.0
    assert iou(a, ~a) == 0.0
    assert iou(a, b) == pytest.approx(1 / 3)
    assert iou(np.zeros((2, 2)), np.zeros((2, 2))) == 1.0
    with pytest.raises(ValidationError):
        iou(a, a[:2])


def test_m_acc_threshold_is_strict():
    assert m_acc([0.3, 0.2]) == 0.5
    assert m_acc([0.25]) == 0.0
    with pytest.raises(ValidationError):
        m_acc([])


def rand_index_pairs(a, b):
    """Brute-force pair counts for the ARI formula."""
    n = len(a)
    both = sum(1 for i, j in itertools.combinations(range(n), 2) if a[i] == a[j] and b[i] == b[j])
    sa = sum(1 for i, j in itertools.combinations(range(n), 2) if a[i] == a[j])
    sb = sum(1 for i, j in itertools.combinations(range(n), 2) if b[i] == b[j])
    total = n * (n - 1) / 2
    expected = sa * sb / total
    mx = (sa + sb) / 2
    return 1.0 if mx == expected else (both - expected) / (mx - expected)


def test_ari_examples():
    assert ari([0, 0, 1, 1], [5, 5, 9, 9]) == 1.0
    # one cluster against all singletons carries no information
    assert ari([0, 0, 0, 0], [0, 1, 2, 3]) == 0.0
    with pytest.raises(ValidationError):
        ari([0, 1], [0])


@pytest.mark.parametrize("seed", range(20))
def test_ari_matches_pair_counting(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 25))
    a = rng.integers(0, 4, n)
    b = rng.integers(-1, 3, n)
    assert ari(a, b) == pytest.approx(rand_index_pairs(a.tolist(), b.tolist()), abs=1e-12)


def test_ari_matches_sklearn_and_is_near_zero_for_random(rng):
    metrics = pytest.importorskip("sklearn.metrics")
    vals = []
    for _ in range(100):
        a = rng.integers(0, 5, 400)
        b = rng.integers(0, 5, 400)
        assert ari(a, b) == pytest.approx(metrics.adjusted_rand_score(a, b), abs=1e-12)
        vals.append(ari(a, b))
    assert np.max(np.abs(vals)) < 0.1


def test_ari_is_label_permutation_invariant(rng):
    a = rng.integers(0, 4, 50)
    b = rng.integers(0, 4, 50)
    assert ari(a, b) == pytest.approx(ari((a + 2) % 4, b * 7))
    assert ari(a, b) == pytest.approx(ari(b, a))


def test_vote_error_zero_for_perfect_votes():
    pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [5.0, 0, 0], [6.0, 0, 0]])
    c = {0: np.array([0.5, 0, 0]), 1: np.array([5.5, 0, 0])}
    offsets = np.array([c[k] for k in (0, 0, 1, 1)]) - pts
    s = make_scene(pts, offsets=offsets[None], labels=np.array([0, 0, 1, 1]))
    rep = vote_error(s, c, radii={0: 1.0, 1: 1.0})
    assert rep.mean_error == {0: pytest.approx(0.0, abs=1e-12), 1: pytest.approx(0.0, abs=1e-12)}
    assert rep.overall_within == 1.0
    s.offsets[0, 0, 0] += 0.5
    rep = vote_error(s, c, radii={0: 1.0, 1: 1.0})
    assert rep.within_fraction[0] == 0.5 and rep.overall_within == 0.75
    assert rep.mean_error[0] == pytest.approx(0.25)


def test_depth_spread_of_a_known_split():
    # eight splats in a cluster; votes alternate between two depths 2*delta apart along the view axis
    rig = ring_rig(1, 6.0, width=48, height=48, fov_deg=40, elevations=(0.0,), azimuth0=0.0)
    view = rig[0]
    pts = np.random.default_rng(2).normal(0, 0.15, (8, 3))
    s = make_scene(pts, scale=0.15, opacity=0.1, labels=np.zeros(8, dtype=int))
    delta = 0.2
    axis = view.world_to_camera[2, :3]
    s.offsets[0] = -pts + np.where(np.arange(8)[:, None] % 2 == 0, delta, -delta) * axis
    spread, per_view = depth_spread(s, rig, s.labels)
    assert spread == pytest.approx(delta, rel=1e-9)
    assert per_view == [pytest.approx(delta, rel=1e-9)]


def test_write_metrics_is_sorted(tmp_path):
    write_metrics(tmp_path / "m.json", {"b": np.float64(1.5), "a": np.int64(2)})
    text = (tmp_path / "m.json").read_text()
    assert json.loads(text) == {"a": 2, "b": 1.5}
    assert text.index('"a"') < text.index('"b"')
