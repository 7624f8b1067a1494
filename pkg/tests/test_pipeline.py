import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from screenforge import pipeline
from screenforge.cli import main
from screenforge.model import read_record

FIXTURES = Path(__file__).parent / "fixtures"


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_validate_clean_fixtures_exit_zero():
    result = invoke("validate", "--layouts", FIXTURES / "layouts")
    assert result.exit_code == 0, result.output


def test_validate_flags_dirty_template(tmp_path):
    bundle = tmp_path / "bad_layout"
    bundle.mkdir()
    (bundle / "page.html").write_text(
        '<div><span data-pii="contact">john@doe.com</span></div>')
    (bundle / "layout.meta").write_text(json.dumps(
        {"page_type": "cart", "fields": []}))
    result = invoke("validate", "--layouts", tmp_path)
    assert result.exit_code == 3
    assert "hardcoded-pii" in result.output


def test_validate_reports_unparseable_template(tmp_path):
    bundle = tmp_path / "broken_layout"
    bundle.mkdir()
    (bundle / "page.html").write_text("<div><span>oops</div>")
    (bundle / "layout.meta").write_text(json.dumps(
        {"page_type": "cart", "fields": []}))
    result = invoke("validate", "--layouts", tmp_path)
    assert result.exit_code == 3
    assert "parse-error" in result.output


def test_cli_eval_against_coco_ground_truth(tmp_path, golden_run):
    from screenforge.dataset import ClassMap, export, split_cross_page
    from screenforge.evalkit import Detection, write_detections
    from screenforge.pipeline import layout_infos

    infos = list(layout_infos(golden_run["layouts"]).values())
    assignment = split_cross_page(infos, 0.2, seed=3)
    export(golden_run["samples"], assignment, ClassMap("coarse"), "coco",
           tmp_path / "coco")
    test_samples = [s for s in golden_run["samples"]
                    if s.layout_id in assignment.test]
    dets = [
        Detection(s.sample_id.key, a.box,
                  "image" if a.cls.fine_label.value == "product_image" else "text",
                  0.9)
        for s in test_samples for a in s.annotations
    ]
    det_file = tmp_path / "dets.txt"
    write_detections(dets, det_file)
    result = invoke("eval", "--detections", det_file,
                    "--coco", tmp_path / "coco" / "test",
                    "--report-out", tmp_path / "r.json")
    assert result.exit_code == 0, result.output
    assert json.loads((tmp_path / "r.json").read_text())["map50"] == 1.0


def test_gen_configs_writes_layout_variant_tree(tmp_path):
    result = invoke(
        "gen-configs", "--layouts", FIXTURES / "layouts",
        "--catalog", FIXTURES / "catalog.jsonl", "--assets", FIXTURES / "assets",
        "--seed", 7, "--variants", 2, "--out", tmp_path)
    assert result.exit_code == 0, result.output
    assert (tmp_path / "configs/shopmart_cart_01/0").exists()
    assert (tmp_path / "configs/shopmart_cart_01/1").exists()
    data = json.loads((tmp_path / "configs/shopmart_cart_01/0").read_text())
    assert data["schema"] == 1


def test_render_resume_skips_done_samples(tmp_path, fixture_layouts,
                                          fixture_catalog):
    sub = [t for t in fixture_layouts if t.layout_id == "dealmart_account_10"]
    configs = pipeline.generate_configs(sub, fixture_catalog, 3, 2, tmp_path)
    first, fail1 = pipeline.render_samples(
        sub, configs, tmp_path, 3, "all", viewport=(1400, 900),
        asset_root=FIXTURES / "assets")
    assert not fail1
    marker = sorted((tmp_path / "done").glob("*.done"))[0]
    record = sorted((tmp_path / "records/dealmart_account_10").glob("*.json"))[0]
    before = record.read_bytes()
    record_mtime = record.stat().st_mtime_ns
    again, fail2 = pipeline.render_samples(
        sub, configs, tmp_path, 3, "all", viewport=(1400, 900),
        asset_root=FIXTURES / "assets")
    assert not fail2
    assert record.stat().st_mtime_ns == record_mtime  # untouched on resume
    assert record.read_bytes() == before
    assert len(again) == len(first)
    marker.unlink()  # dropping a marker forces exactly that re-render
    third, _ = pipeline.render_samples(
        sub, configs, tmp_path, 3, "all", viewport=(1400, 900),
        asset_root=FIXTURES / "assets")
    assert len(third) == len(first)


def test_cli_full_flow_split_export_stats(tmp_path):
    work = tmp_path / "work"
    result = invoke(
        "render", "--layouts", FIXTURES / "layouts",
        "--catalog", FIXTURES / "catalog.jsonl", "--assets", FIXTURES / "assets",
        "--seed", 11, "--variants", 1, "--partials", "all",
        "--viewport", "1400x900", "--out", work)
    assert result.exit_code == 0, result.output
    assert (work / "render.manifest").exists()

    result = invoke("split", "--layouts", FIXTURES / "layouts",
                    "--strategy", "cross-page:0.2", "--seed", 5, "--out", work)
    assert result.exit_code == 0, result.output
    split_data = json.loads((work / "split.json").read_text())
    assert len(split_data["test"]) == 2  # ceil(0.2 * 10)

    dest = tmp_path / "exported"
    result = invoke("export", "--work", work, "--layouts", FIXTURES / "layouts",
                    "--format", "coco", "--classes", "coarse", "--dest", dest)
    assert result.exit_code == 0, result.output
    assert (dest / "manifest").exists()
    assert (dest / "train/annotations.index").exists()

    result = invoke("stats", "--work", work, "--layouts", FIXTURES / "layouts")
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["images"] == 29  # sum of states over layouts, 1 variant


def test_cli_export_blocks_planted_leakage(tmp_path):
    work = tmp_path / "work"
    result = invoke(
        "render", "--layouts", FIXTURES / "layouts",
        "--catalog", FIXTURES / "catalog.jsonl", "--assets", FIXTURES / "assets",
        "--seed", 11, "--variants", 1, "--partials", "1", "--out", work)
    assert result.exit_code == 0, result.output
    invoke("split", "--layouts", FIXTURES / "layouts",
           "--strategy", "cross-page:0.2", "--seed", 5, "--out", work)
    # plant a collision: copy a test-layout value into a train-layout config
    split_data = json.loads((work / "split.json").read_text())
    train_id, test_id = split_data["train"][0], split_data["test"][0]
    train_cfg = json.loads((work / "configs" / train_id / "0").read_text())
    test_cfg = json.loads((work / "configs" / test_id / "0").read_text())
    for key in ("PII_FULLNAME", "ORDER_ID", "PII_EMAIL"):
        if key in train_cfg["values"] and key in test_cfg["values"]:
            test_cfg["values"][key] = train_cfg["values"][key]
            break
    else:
        pytest.fail("fixture configs share no plantable key")
    (work / "configs" / test_id / "0").write_text(json.dumps(test_cfg))
    result = invoke("export", "--work", work, "--layouts", FIXTURES / "layouts",
                    "--format", "yolo", "--dest", tmp_path / "never")
    assert result.exit_code == 3
    assert "leakage" in result.output


def test_cli_eval_round_trip(tmp_path, golden_run):
    # ground-truth-as-predictions scores a perfect 1.0 through the CLI
    from screenforge.evalkit import Detection, write_detections

    work = golden_run["work"]
    dets = []
    for sample in golden_run["samples"]:
        for a in sample.annotations:
            cls = "image" if a.cls.fine_label.value == "product_image" else "text"
            dets.append(Detection(sample.sample_id.key, a.box, cls, 0.99))
    det_file = tmp_path / "dets.txt"
    write_detections(dets, det_file)
    result = invoke("eval", "--detections", det_file, "--work", work,
                    "--classes", "coarse", "--report-out", tmp_path / "report.json")
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["map50"] == 1.0
    assert report["per_fill_state"]["partial"]["map50"] == 1.0


def test_cli_baseline(tmp_path):
    ocr = tmp_path / "ocr.txt"
    ocr.write_text("s0 jane.doe@example.org 0 0 120 10 0.9\n")
    out = tmp_path / "dets.txt"
    result = invoke("baseline", "--ocr", ocr, "--out", out)
    assert result.exit_code == 0, result.output
    assert "1 detections" in result.output


def test_cli_bench(tmp_path):
    img = tmp_path / "i.png"
    img.write_bytes(b"x")
    result = invoke("bench", "--runner", "sh -c true", "--images", img,
                    "--warmup", 0, "--reps", 2)
    assert result.exit_code == 0, result.output
    assert "median_ms" in result.output


def test_render_parallel_matches_serial_bytes(tmp_path, fixture_layouts,
                                              fixture_catalog):
    sub = [t for t in fixture_layouts
           if t.layout_id in ("shopmart_checkout_02", "acmestore_gift_06")]
    outputs = {}
    for label, jobs in (("serial", 1), ("parallel", 4)):
        work = tmp_path / label
        configs = pipeline.generate_configs(sub, fixture_catalog, 5, 2, work)
        samples, failures = pipeline.render_samples(
            sub, configs, work, 5, "all", viewport=(1400, 900),
            asset_root=FIXTURES / "assets", parallelism=jobs)
        assert not failures
        outputs[label] = {
            p.relative_to(work): p.read_bytes()
            for p in sorted(work.glob("records/*/*.json"))
        }
        outputs[label + "_order"] = [s.sample_id.key for s in samples]
    assert outputs["serial"] == outputs["parallel"]
    assert outputs["serial_order"] == outputs["parallel_order"]


def test_cli_export_empty_test_split_warns(tmp_path):
    # review ledger approves only train-side layouts: the test split
    # exports zero images and the command exits with the warning code
    from screenforge.review import ReviewLedger

    work = tmp_path / "work"
    invoke("render", "--layouts", FIXTURES / "layouts",
           "--catalog", FIXTURES / "catalog.jsonl", "--assets", FIXTURES / "assets",
           "--seed", 11, "--variants", 1, "--partials", "1", "--out", work)
    invoke("split", "--layouts", FIXTURES / "layouts",
           "--strategy", "cross-page:0.2", "--seed", 5, "--out", work)
    split_data = json.loads((work / "split.json").read_text())
    ledger = ReviewLedger(work / "review" / "ledger.jsonl")
    for layout_id in split_data["train"]:
        ledger.append(layout_id, "approved")
    result = invoke("export", "--work", work, "--layouts", FIXTURES / "layouts",
                    "--format", "yolo", "--dest", tmp_path / "out",
                    "--review-ledger", work / "review" / "ledger.jsonl")
    assert result.exit_code == 4, result.output
    assert "a split is empty" in result.output
    manifest = json.loads((tmp_path / "out/manifest").read_text())
    assert manifest["counts"]["test"]["images"] == 0
    assert manifest["counts"]["train"]["images"] > 0


def test_cli_export_count_identity_cross_check(tmp_path):
    work = tmp_path / "work"
    invoke("render", "--layouts", FIXTURES / "layouts",
           "--catalog", FIXTURES / "catalog.jsonl", "--assets", FIXTURES / "assets",
           "--seed", 11, "--variants", 1, "--partials", "1", "--out", work)
    invoke("split", "--layouts", FIXTURES / "layouts",
           "--strategy", "cross-page:0.2", "--seed", 5, "--out", work)
    # drop one record: exported count no longer matches the run manifest
    victim = sorted(work.glob("records/*/*.json"))[0]
    victim.unlink()
    result = invoke("export", "--work", work, "--layouts", FIXTURES / "layouts",
                    "--format", "yolo", "--dest", tmp_path / "out")
    assert result.exit_code == 3, result.output
    assert "count identity" in result.output


def test_run_manifest_echoes_configuration(tmp_path):
    work = tmp_path / "work"
    invoke("render", "--layouts", FIXTURES / "layouts",
           "--catalog", FIXTURES / "catalog.jsonl", "--assets", FIXTURES / "assets",
           "--seed", 9, "--variants", 1, "--partials", "3", "--out", work)
    manifest = json.loads((work / "render.manifest").read_text())
    assert manifest["seed"] == 9
    assert manifest["partials"] == "3"
    assert manifest["variants"] == 1
    assert len(manifest["layouts"]) == 10


def test_preview_renderer_three_states(tmp_path, fixture_catalog):
    from screenforge.render.png import read_dims

    renderer = pipeline.PreviewRenderer(
        FIXTURES / "layouts", tmp_path, master_seed=42,
        viewport=(1400, 900), asset_root=FIXTURES / "assets",
        catalog=fixture_catalog)
    previews = renderer("shopmart_checkout_02")
    assert set(previews) == {"full", "partial", "empty"}
    for tag, data in previews.items():
        assert read_dims(data["image"])[0] == 1400
        assert data["annotations"], tag

    def input_values(tag):
        return [a["has_value"] for a in previews[tag]["annotations"]
                if a["element_kind"] == "input"]

    assert all(input_values("full"))
    assert not any(input_values("empty"))
    partial_states = input_values("partial")
    assert any(partial_states) and not all(partial_states)

    # static page gets a single completed preview
    assert set(renderer("shopmart_cart_01")) == {"full"}


def test_records_round_trip_from_disk(golden_run):
    work = golden_run["work"]
    record_files = sorted(work.glob("records/*/*.json"))
    assert len(record_files) == len(golden_run["samples"])
    by_key = {s.sample_id.key: s for s in golden_run["samples"]}
    for path in record_files[:20]:
        sample = read_record(path)
        expected = by_key[sample.sample_id.key]
        sample.image_ref = str(work / sample.image_ref)  # records are relative
        assert sample == expected
