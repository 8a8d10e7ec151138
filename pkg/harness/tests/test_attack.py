import json

import pytest
import torch

from uqod.io import read_manifest

from uqod_harness import (
    DagConfig,
    HarnessConfig,
    attack_dataset,
    build_detector,
    dag_attack,
    load_image_tensor,
    save_image_tensor,
    targets_from_annotation,
    write_fixture,
)


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    root = tmp_path_factory.mktemp("scene")
    paths, scenes = write_fixture(root / "images", n_images=1, seed=2)
    image_id = paths[0].stem
    return paths[0], targets_from_annotation(scenes[image_id]), scenes


def seeded(seed):
    g = torch.Generator()
    g.manual_seed(seed)
    return g


def test_zero_budget_returns_input_unchanged(scene):
    path, targets, _ = scene
    model = build_detector(dropout_rate=0.0)
    x0 = load_image_tensor(path)
    result = dag_attack(model, x0, targets, DagConfig(max_iterations=0), seeded(0))
    assert torch.equal(result.image, x0)
    assert result.iterations == 0
    assert not result.success
    assert result.linf == 0.0


def test_attack_flips_every_target_on_fresh_pass(scene, tmp_path):
    path, targets, _ = scene
    model = build_detector(dropout_rate=0.0)
    x0 = load_image_tensor(path)
    preds = torch.argmax(model.cell_logits(x0), dim=1)
    assert all(int(preds[cell]) == gt for cell, gt in targets)

    result = dag_attack(model, x0, targets, DagConfig(), seeded(11))
    assert result.success
    assert 0 < result.iterations <= 150

    save_image_tensor(result.image, tmp_path / "adv.png")
    fresh = load_image_tensor(tmp_path / "adv.png")
    # serialization may shift values by an ulp but never off the pixel grid
    assert float((fresh - result.image).abs().max()) < 1e-12
    save_image_tensor(fresh, tmp_path / "again.png")
    assert torch.equal(load_image_tensor(tmp_path / "again.png"), fresh)
    preds = torch.argmax(model.cell_logits(fresh), dim=1)
    assert all(int(preds[cell]) != gt for cell, gt in targets)


def test_perturbation_stays_inside_ball(scene):
    path, targets, _ = scene
    model = build_detector(dropout_rate=0.0)
    x0 = load_image_tensor(path)
    for seed in range(5):
        result = dag_attack(model, x0, targets, DagConfig(), seeded(seed))
        assert result.linf <= 8 / 255 + 1e-12
        assert float((result.image - x0).abs().max()) == result.linf
        # every pixel stays on the 1/255 grid
        scaled = result.image * 255.0
        assert float((scaled - torch.round(scaled)).abs().max()) < 1e-9


def test_fixed_policies_also_succeed(scene):
    path, targets, _ = scene
    model = build_detector(dropout_rate=0.0)
    x0 = load_image_tensor(path)
    for policy in ("background", "other"):
        result = dag_attack(
            model, x0, targets, DagConfig(target_policy=policy), seeded(3)
        )
        assert result.success, policy


def test_non_module_model_rejected(scene):
    path, targets, _ = scene
    x0 = load_image_tensor(path)
    with pytest.raises(TypeError, match="torch.nn.Module"):
        dag_attack(lambda x: x, x0, targets, DagConfig(), seeded(0))


def test_empty_targets_rejected(scene):
    path, _, _ = scene
    model = build_detector(dropout_rate=0.0)
    with pytest.raises(ValueError, match="no targets"):
        dag_attack(model, load_image_tensor(path), [], DagConfig(), seeded(0))


def test_attack_dataset_layout(tmp_path):
    paths, scenes = write_fixture(tmp_path / "clean", n_images=2, seed=6)
    config = HarnessConfig(
        images=tuple(str(p) for p in paths),
        out_dir=str(tmp_path / "out"),
        rng_seed=9,
        runs_per_image=3,
    )
    manifest_path, report = attack_dataset(config, scenes)
    manifest = read_manifest(manifest_path)
    assert manifest.name == "harness-9"
    assert [e.original for e in manifest.entries] == ["img0001", "img0002"]
    for entry in manifest.entries:
        assert len(entry.adversarial) == 3
        for adv in entry.adversarial:
            assert (tmp_path / "out" / "images" / f"{adv}.png").exists()
        assert (tmp_path / "out" / "images" / f"{entry.original}.png").exists()
    assert set(report) == {a for e in manifest.entries for a in e.adversarial}
    on_disk = json.loads((tmp_path / "out" / "attack_report.json").read_text())
    assert on_disk == report


def test_attack_dataset_requires_ground_truth(tmp_path):
    paths, scenes = write_fixture(tmp_path / "clean", n_images=2, seed=6)
    del scenes["img0002"]
    config = HarnessConfig(images=tuple(str(p) for p in paths), out_dir=str(tmp_path / "out"))
    with pytest.raises(ValueError, match="img0002"):
        attack_dataset(config, scenes)
