import json

import pytest

from uqod.errors import SchemaError
from uqod.io import (
    annotation_to_obj,
    dump_to_obj,
    manifest_to_obj,
    parse_annotation,
    parse_dump,
    parse_manifest,
    parse_run,
    read_dump,
    run_to_obj,
    write_dump,
    write_manifest,
    write_run,
    read_manifest,
    read_run,
)
from uqod.types import (
    BoundingBox,
    DatasetManifest,
    EvaluationRun,
    GroundTruthAnnotation,
    GroundTruthObject,
    ImageMetrics,
    ManifestEntry,
)

from helpers import det, dump


def test_dump_round_trip(tmp_path):
    original = dump([det(0, 0, 10, 10, (0.9, 0.05, 0.05), 0), det(1, 2, 3, 4, (0.0, 1.0, 0.0), 7)])
    path = tmp_path / "img0001.json"
    write_dump(original, path)
    assert read_dump(path) == original


def test_dump_wire_keys():
    obj = dump_to_obj(dump([det(0, 0, 10, 10, pass_index=3)]))
    assert set(obj) == {"image_id", "T", "dropout_rate", "detections"}
    assert obj["T"] == 20
    assert obj["detections"][0]["pass"] == 3
    assert obj["detections"][0]["box"] == [0.0, 0.0, 10.0, 10.0]
    assert len(obj["detections"][0]["softmax"]) == 3


def test_parse_dump_collects_all_diagnostics():
    broken = {
        "image_id": 7,  # wrong type
        "dropout_rate": 0.25,
        "detections": [
            {"pass": 0, "box": [0, 0, 1], "softmax": [1.0, 0.0, 0.0]},  # short box
            {"pass": "x", "box": [0, 0, 1, 1], "softmax": [1.0, 0.0, 0.0]},  # bad pass
            "not an object",
        ],
    }  # and "T" is missing entirely
    with pytest.raises(SchemaError) as err:
        parse_dump(broken, where="fixture")
    text = str(err.value)
    assert "missing key 'T'" in text
    assert "key 'image_id' has wrong type" in text
    assert "box must be a list of 4 numbers" in text
    assert "key 'pass' has wrong type" in text
    assert "must be an object" in text
    assert err.value.exit_code == 2


def test_parse_dump_rejects_non_object():
    with pytest.raises(SchemaError):
        parse_dump([1, 2, 3])


def test_read_dump_rejects_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(SchemaError, match="not valid JSON"):
        read_dump(path)


def test_read_dump_missing_file(tmp_path):
    with pytest.raises(SchemaError, match="cannot read"):
        read_dump(tmp_path / "nope.json")


def test_annotation_round_trip():
    ann = GroundTruthAnnotation(
        image_id="img0002",
        objects=(
            GroundTruthObject(label=0, box=BoundingBox(1, 2, 3, 4)),
            GroundTruthObject(label=1, box=BoundingBox(5, 6, 7, 8)),
        ),
    )
    assert parse_annotation(annotation_to_obj(ann)) == ann


def test_manifest_round_trip(tmp_path):
    ann = GroundTruthAnnotation(
        image_id="img0001", objects=(GroundTruthObject(0, BoundingBox(0, 0, 50, 50)),)
    )
    manifest = DatasetManifest(
        name="fixture",
        entries=(
            ManifestEntry(
                original="img0001", adversarial=("img0001_adv00",), annotation=ann
            ),
        ),
    )
    path = tmp_path / "manifest.json"
    write_manifest(manifest, path)
    assert read_manifest(path) == manifest
    obj = manifest_to_obj(manifest)
    assert parse_manifest(obj) == manifest


def test_manifest_diagnostics():
    with pytest.raises(SchemaError) as err:
        parse_manifest({"name": "x", "entries": [{"original": 3}]})
    assert "original" in str(err.value)


def test_run_round_trip(tmp_path):
    run = EvaluationRun(
        model_id="sdm-a",
        dataset_id="synth-0",
        dropout_rate=0.25,
        per_image={
            "img0000": ImageMetrics(mean_ap=1.0, vr=0.1, se=0.2, mi=0.05, tv=3.0, ps=4.0),
            "img0001": ImageMetrics(),  # everything undefined
        },
    )
    path = tmp_path / "run.json"
    write_run(run, path)
    assert read_run(path) == run


def test_run_json_is_sorted_and_stable(tmp_path):
    run = EvaluationRun(
        model_id="m",
        dataset_id="d",
        dropout_rate=0.5,
        per_image={"b": ImageMetrics(mean_ap=0.5), "a": ImageMetrics(mean_ap=1.0)},
    )
    obj = run_to_obj(run)
    assert list(obj["per_image"]) == ["a", "b"]
    path = tmp_path / "run.json"
    write_run(run, path)
    text = path.read_text(encoding="utf-8")
    assert json.loads(text)["model_id"] == "m"
    write_run(run, path)
    assert path.read_text(encoding="utf-8") == text


def test_parse_run_rejects_bad_metrics():
    with pytest.raises(SchemaError):
        parse_run(
            {
                "model_id": "m",
                "dataset_id": "d",
                "dropout_rate": 0.5,
                "per_image": {"img": {"map": "high"}},
            }
        )
