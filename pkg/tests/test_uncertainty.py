import math

import numpy as np
import pytest

from uqod.uncertainty import (
    image_uncertainty,
    mutual_information,
    object_uncertainty,
    predictive_surface,
    shannon_entropy,
    total_variance,
    variation_ratio,
)

from helpers import cluster, det

ONE_HOT_0 = (1.0, 0.0, 0.0)
ONE_HOT_1 = (0.0, 1.0, 0.0)
ONE_HOT_2 = (0.0, 0.0, 1.0)


def identical_cluster(n=5):
    return cluster(*[det(10, 10, 60, 60, ONE_HOT_0, i) for i in range(n)])


def random_cluster(rng, n_classes=3):
    w = int(rng.integers(1, 26))
    dets = []
    for i in range(w):
        x1, y1 = rng.uniform(0, 500, size=2)
        bw, bh = rng.uniform(1, 100, size=2)
        raw = rng.uniform(0, 1, size=n_classes) + 1e-9
        probs = tuple(float(v) for v in raw / raw.sum())
        dets.append(det(x1, y1, x1 + bw, y1 + bh, probs, i))
    return cluster(*dets)


def test_variation_ratio_hand_values():
    # four votes for class 0, one for class 1
    c = cluster(
        *[det(0, 0, 10, 10, ONE_HOT_0, i) for i in range(4)],
        det(0, 0, 10, 10, ONE_HOT_1, 4),
    )
    assert variation_ratio(c) == pytest.approx(0.2)
    # three-way split is the worst case for three classes
    c3 = cluster(
        det(0, 0, 10, 10, ONE_HOT_0, 0),
        det(0, 0, 10, 10, ONE_HOT_1, 1),
        det(0, 0, 10, 10, ONE_HOT_2, 2),
    )
    assert variation_ratio(c3) == pytest.approx(2 / 3)
    assert variation_ratio(identical_cluster()) == 0.0


def test_shannon_entropy_of_split_votes():
    # mean softmax (0.5, 0.5, 0): entropy is ln 2
    c = cluster(det(0, 0, 10, 10, ONE_HOT_0, 0), det(0, 0, 10, 10, ONE_HOT_1, 1))
    assert shannon_entropy(c) == pytest.approx(math.log(2), abs=1e-9)


def test_mutual_information_equals_entropy_for_confident_disagreement():
    # each pass is certain (entropy 0) but they disagree: MI == SE
    c = cluster(det(0, 0, 10, 10, ONE_HOT_0, 0), det(0, 0, 10, 10, ONE_HOT_1, 1))
    assert mutual_information(c) == pytest.approx(math.log(2), abs=1e-9)


def test_agreeing_uncertain_passes_have_low_mi():
    soft = (0.5, 0.5, 0.0)
    c = cluster(det(0, 0, 10, 10, soft, 0), det(0, 0, 10, 10, soft, 1))
    assert shannon_entropy(c) == pytest.approx(math.log(2), abs=1e-9)
    assert mutual_information(c) == 0.0


def test_total_variance_hand_value():
    # coordinate pairs (0, 1): sample variance 0.5 each, times four coordinates
    c = cluster(det(0, 0, 10, 10, ONE_HOT_0, 0), det(1, 1, 11, 11, ONE_HOT_0, 1))
    assert total_variance(c) == pytest.approx(2.0)


def test_total_variance_single_member_is_zero():
    assert total_variance(cluster(det(0, 0, 10, 10))) == 0.0


def test_predictive_surface_unit_square_clouds():
    # each of the four corner clouds traces the unit square
    c = cluster(
        det(0, 0, 10, 10, ONE_HOT_0, 0),
        det(1, 0, 11, 10, ONE_HOT_0, 1),
        det(0, 1, 10, 11, ONE_HOT_0, 2),
        det(1, 1, 11, 11, ONE_HOT_0, 3),
    )
    assert predictive_surface(c) == pytest.approx(1.0)


def test_predictive_surface_collinear_boxes_is_zero():
    c = cluster(det(0, 0, 10, 10, ONE_HOT_0, 0), det(5, 5, 15, 15, ONE_HOT_0, 1))
    assert predictive_surface(c) == 0.0


def test_identical_cluster_is_exactly_zero_everywhere():
    o = object_uncertainty(identical_cluster())
    assert o.vr == 0.0
    assert o.se == 0.0
    assert o.mi == 0.0
    assert o.tv == 0.0
    assert o.ps == 0.0
    # no negative zeros in reports
    for v in (o.se, o.mi):
        assert math.copysign(1.0, v) == 1.0


def test_metric_bounds_on_random_clusters():
    rng = np.random.default_rng(101)
    for _ in range(400):
        o = object_uncertainty(random_cluster(rng))
        assert 0.0 <= o.vr <= 2 / 3
        assert 0.0 <= o.se <= math.log(3)
        assert 0.0 <= o.mi <= o.se
        assert o.tv >= 0.0
        assert o.ps >= 0.0


def test_metrics_invariant_under_member_permutation():
    rng = np.random.default_rng(59)
    for _ in range(20):
        c = random_cluster(rng)
        base = object_uncertainty(c)
        perm = rng.permutation(c.size)
        shuffled = cluster(*[c.members[i] for i in perm])
        other = object_uncertainty(shuffled)
        for name in ("vr", "se", "mi", "tv", "ps"):
            assert getattr(other, name) == pytest.approx(getattr(base, name), abs=1e-9)


def test_empty_cluster_rejected():
    with pytest.raises(ValueError):
        variation_ratio(cluster())
    with pytest.raises(ValueError):
        object_uncertainty(cluster())


def test_image_uncertainty_is_unweighted_mean():
    big = identical_cluster(10)  # all metrics zero
    small = cluster(det(0, 0, 10, 10, ONE_HOT_0, 0), det(0, 0, 10, 10, ONE_HOT_1, 1))
    img = image_uncertainty([big, small])
    assert img.n_clusters == 2
    # the mean ignores cluster sizes
    assert img.se == pytest.approx(math.log(2) / 2, abs=1e-9)
    assert img.vr == pytest.approx(0.25)


def test_image_uncertainty_empty_is_none():
    assert image_uncertainty([]) is None
