import json

from uqod.pipeline import RunConfig, run_evaluate, run_robustness

from uqod_harness.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_full_round_trip_feeds_the_evaluator(tmp_path, capsys):
    fix = tmp_path / "fix"
    code, out, _ = run_cli(capsys, "fixture", "--out", str(fix), "--images", "4", "--seed", "3")
    assert code == 0
    assert "wrote 4 images" in out

    atk = tmp_path / "atk"
    code, out, _ = run_cli(
        capsys,
        "attack",
        "--images", str(fix / "images"),
        "--scenes", str(fix / "scenes.json"),
        "--out", str(atk),
        "--seed", "3",
        "--runs", "2",
    )
    assert code == 0
    assert "attacked 4 images" in out

    code, out, _ = run_cli(
        capsys,
        "predict",
        "--images", str(atk / "images"),
        "--out", str(atk),
        "--passes", "10",
        "--seed", "3",
        "--check-schema",
    )
    assert code == 0
    assert "wrote 12 dumps" in out
    assert "schema ok: 12 dumps, 0 violations" in out

    # the emitted dataset is consumable end to end by the evaluation toolkit;
    # evaluate scores the four originals, robustness consumes all twelve dumps
    summary = run_evaluate(
        RunConfig(str(atk / "manifest.json"), str(atk / "dumps"), str(tmp_path / "eval"))
    )
    assert summary["n_images"] == 4
    assert 0.0 <= summary["metrics"]["mAP"]["mean"] <= 1.0
    rob = run_robustness(
        RunConfig(str(atk / "manifest.json"), str(atk / "dumps"), str(tmp_path / "rob"))
    )
    assert rob["rs_map"] is not None
    assert rob["rs_uq"] is not None


def test_attack_lowers_robustness_scores(tmp_path, capsys):
    fix = tmp_path / "fix"
    assert run_cli(capsys, "fixture", "--out", str(fix), "--images", "4", "--seed", "12")[0] == 0
    atk = tmp_path / "atk"
    assert (
        run_cli(
            capsys,
            "attack",
            "--images", str(fix / "images"),
            "--scenes", str(fix / "scenes.json"),
            "--out", str(atk),
            "--seed", "12",
            "--runs", "2",
        )[0]
        == 0
    )
    assert (
        run_cli(
            capsys,
            "predict",
            "--images", str(atk / "images"),
            "--out", str(atk),
            "--passes", "12",
            "--seed", "12",
        )[0]
        == 0
    )
    rob = run_robustness(
        RunConfig(str(atk / "manifest.json"), str(atk / "dumps"), str(tmp_path / "rob"))
    )
    # successful label flips must show up as degraded accuracy robustness
    assert rob["rs_map"] < 1.0


def test_predict_missing_images_exits_2(tmp_path, capsys):
    empty = tmp_path / "none"
    empty.mkdir()
    code, _, err = run_cli(capsys, "predict", "--images", str(empty), "--out", str(tmp_path / "o"))
    assert code == 2
    assert "no .png images" in err


def test_predict_bad_rate_exits_2(tmp_path, capsys):
    fix = tmp_path / "fix"
    assert run_cli(capsys, "fixture", "--out", str(fix), "--images", "1")[0] == 0
    code, _, err = run_cli(
        capsys,
        "predict",
        "--images", str(fix / "images"),
        "--out", str(tmp_path / "o"),
        "--dropout-rate", "1.5",
    )
    assert code == 2
    assert "dropout_rate" in err


def test_attack_corrupt_scenes_exits_2(tmp_path, capsys):
    fix = tmp_path / "fix"
    assert run_cli(capsys, "fixture", "--out", str(fix), "--images", "1")[0] == 0
    bad = tmp_path / "scenes.json"
    bad.write_text(json.dumps({"img0001": {"image_id": "img0001"}}), encoding="utf-8")
    code, _, err = run_cli(
        capsys,
        "attack",
        "--images", str(fix / "images"),
        "--scenes", str(bad),
        "--out", str(tmp_path / "o"),
    )
    assert code == 2
    assert "error" in err
