import json

import numpy as np
import pytest

from uqod.clustering import cluster_detections
from uqod.io import dump_to_obj, read_dump, read_manifest
from uqod.synthgen import (
    NOMINAL_DROPOUT_RATE,
    AdversarialDegradation,
    SynthConfig,
    config_from_obj,
    generate,
    write_dataset,
)
from uqod.types import validate_dump
from uqod.uncertainty import image_uncertainty

QUIET = SynthConfig(
    n_images=4,
    num_passes=10,
    n_adversarial=2,
    rng_seed=5,
)


def test_generation_is_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    write_dataset(QUIET, a)
    write_dataset(QUIET, b)
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    names_a = sorted(p.name for p in (a / "dumps").iterdir())
    names_b = sorted(p.name for p in (b / "dumps").iterdir())
    assert names_a == names_b
    for name in names_a:
        assert (a / "dumps" / name).read_bytes() == (b / "dumps" / name).read_bytes()


def test_different_seed_changes_content():
    _, dumps_a = generate(SynthConfig(n_images=2, box_jitter_sigma=1.0, rng_seed=1, n_adversarial=0))
    _, dumps_b = generate(SynthConfig(n_images=2, box_jitter_sigma=1.0, rng_seed=2, n_adversarial=0))
    assert dump_to_obj(dumps_a[0]) != dump_to_obj(dumps_b[0])


def test_all_dumps_pass_validation():
    config = SynthConfig(
        n_images=3,
        num_passes=8,
        box_jitter_sigma=2.0,
        label_flip_prob=0.1,
        softmax_temperature=0.5,
        detect_drop_prob=0.1,
        n_adversarial=2,
        adversarial_degradation=AdversarialDegradation(extra_jitter=2.0, extra_flip=0.1),
        rng_seed=11,
    )
    manifest, dumps = generate(config)
    assert len(dumps) == 3 * (1 + 2)
    for d in dumps:
        assert validate_dump(d).ok, validate_dump(d).violations
    ids = {d.image_id for d in dumps}
    for entry in manifest.entries:
        assert entry.original in ids
        for adv in entry.adversarial:
            assert adv in ids


def test_zero_noise_reproduces_ground_truth_exactly():
    manifest, dumps = generate(QUIET)
    by_id = {d.image_id: d for d in dumps}
    for entry in manifest.entries:
        original = by_id[entry.original]
        n_obj = len(entry.annotation.objects)
        assert len(original.detections) == QUIET.num_passes * n_obj
        gt_boxes = {o.box.as_tuple() for o in entry.annotation.objects}
        for det in original.detections:
            assert det.box.as_tuple() in gt_boxes
            assert max(det.score.probabilities) == 1.0  # exact one-hot
        assert original.dropout_rate == NOMINAL_DROPOUT_RATE
        # without degradation the adversarial dumps carry identical content
        want = dump_to_obj(original)
        for adv in entry.adversarial:
            got = dump_to_obj(by_id[adv])
            assert got["detections"] == want["detections"]


def test_temperature_softens_softmax():
    config = SynthConfig(n_images=1, num_passes=5, softmax_temperature=1.0, n_adversarial=0, rng_seed=3)
    _, dumps = generate(config)
    for det in dumps[0].detections:
        p = det.score.probabilities
        assert sum(p) == pytest.approx(1.0, abs=1e-9)
        assert max(p) < 1.0


def test_noise_knobs_share_the_random_stream():
    # raising jitter must not disturb the planted scenes or detection counts
    base = SynthConfig(n_images=3, num_passes=6, n_adversarial=0, rng_seed=9)
    noisy = SynthConfig(
        n_images=3, num_passes=6, n_adversarial=0, rng_seed=9, box_jitter_sigma=3.0
    )
    man_a, dumps_a = generate(base)
    man_b, dumps_b = generate(noisy)
    assert man_a.entries == man_b.entries
    for da, db in zip(dumps_a, dumps_b):
        assert len(da.detections) == len(db.detections)
        for x, y in zip(da.detections, db.detections):
            assert x.score == y.score  # labels and confidences unchanged


def test_box_jitter_raises_total_variance():
    medians = []
    for sigma in (0.5, 2.0, 8.0):
        config = SynthConfig(
            n_images=6, num_passes=12, box_jitter_sigma=sigma, n_adversarial=0, rng_seed=15
        )
        _, dumps = generate(config)
        tvs = []
        for d in dumps:
            clusters, _ = cluster_detections(d)
            uq = image_uncertainty(clusters)
            if uq is not None:
                tvs.append(uq.tv)
        medians.append(float(np.median(tvs)))
    assert medians[0] < medians[1] < medians[2]


def test_detect_drop_removes_detections():
    config = SynthConfig(
        n_images=2, num_passes=20, detect_drop_prob=0.4, n_adversarial=0, rng_seed=21
    )
    manifest, dumps = generate(config)
    total_objects = sum(len(e.annotation.objects) for e in manifest.entries)
    n_detections = sum(len(d.detections) for d in dumps)
    assert n_detections < 20 * total_objects


def test_manifest_and_dumps_written_to_disk(tmp_path):
    manifest_path = write_dataset(QUIET, tmp_path)
    manifest = read_manifest(manifest_path)
    assert manifest.name == "synth-5"
    assert len(manifest.entries) == 4
    first = manifest.entries[0]
    dump = read_dump(tmp_path / "dumps" / f"{first.original}.json")
    assert validate_dump(dump).ok


def test_config_from_obj_round_trip():
    raw = {
        "n_images": 7,
        "objects_per_image": [2, 3],
        "box_jitter_sigma": 1.5,
        "adversarial_degradation": {"extra_jitter": 4.0, "extra_flip": 0.2},
        "rng_seed": 99,
        "canvas_size": [320, 240],
    }
    config = config_from_obj(json.loads(json.dumps(raw)))
    assert config.n_images == 7
    assert config.objects_per_image == (2, 3)
    assert config.adversarial_degradation == AdversarialDegradation(4.0, 0.2)
    assert config.canvas_size == (320, 240)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(n_images=0)
    with pytest.raises(ValueError):
        SynthConfig(num_passes=0)
    with pytest.raises(ValueError):
        SynthConfig(objects_per_image=(3, 2))
    with pytest.raises(ValueError):
        SynthConfig(box_jitter_sigma=-1.0)
    with pytest.raises(TypeError):
        config_from_obj({"not_a_field": 1})


def test_no_adversarial_variants():
    manifest, dumps = generate(SynthConfig(n_images=2, n_adversarial=0, rng_seed=1))
    assert all(e.adversarial == () for e in manifest.entries)
    assert len(dumps) == 2
