"""Command-line entry point orchestrating the pipeline end to end.

Exit codes: 0 success; 1 unexpected error; 2 usage; 3 validation, leakage
or gate failure; 4 export completed with an empty split (warning); 5 one
or more renders failed.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import configgen, evalkit, pipeline
from .baseline import ExternalClassifier, run_baseline
from .catalog import load_catalog
from .dataset import (
    ClassMap,
    SplitAssignment,
    check_leakage,
    export as export_dataset,
    split as make_split,
    stats as compute_stats,
)
from .model import SampleId, dumps_canonical
from .review import ReviewLedger, ReviewService, create_app, export_gate
from .templates import load_template, validate_template

EXIT_OK = 0
EXIT_GATE = 3
EXIT_EMPTY_SPLIT = 4
EXIT_RENDER_FAILURES = 5

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")


def _viewport(value: str) -> tuple[int, int]:
    w, _, h = value.partition("x")
    return int(w), int(h)


def _density(value: str):
    return "all" if value == "all" else int(value)


@click.group()
def main():
    """Synthetic web-UI screenshot datasets for visual PII detection."""


@main.command()
@click.option("--layouts", required=True, type=click.Path(exists=True))
def validate(layouts):
    """Parse and lint every layout template; nonzero exit on any issue."""
    from .htmldoc import ParseError
    from .templates import load_template as load_one

    failed = False
    bundles = sorted(p for p in Path(layouts).iterdir()
                     if p.is_dir() and (p / "page.html").exists())
    for bundle in bundles:
        try:
            template = load_one(bundle)
        except ParseError as exc:
            failed = True
            click.echo(f"{bundle.name}: parse-error: {exc}")
            continue
        issues = validate_template(template)
        for issue in issues:
            failed = True
            click.echo(f"{template.layout_id}: {issue.code}: {issue.message}")
        if not issues:
            click.echo(f"{template.layout_id}: ok")
    sys.exit(EXIT_GATE if failed else EXIT_OK)


def _load_inputs(layouts, catalog, assets):
    layout_list = pipeline.discover_layouts(layouts)
    cat = load_catalog(catalog, assets) if catalog else None
    return layout_list, cat


@main.command("gen-configs")
@click.option("--layouts", required=True, type=click.Path(exists=True))
@click.option("--catalog", type=click.Path(exists=True))
@click.option("--assets", type=click.Path(exists=True))
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--variants", default=25, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path())
def gen_configs(layouts, catalog, assets, seed, variants, out):
    """Write seeded injection configs for every layout variant."""
    layout_list, cat = _load_inputs(layouts, catalog, assets)
    Path(out).mkdir(parents=True, exist_ok=True)
    configs = pipeline.generate_configs(layout_list, cat, seed, variants, out)
    click.echo(f"wrote {sum(len(v) for v in configs.values())} configs "
               f"for {len(configs)} layouts")


@main.command()
@click.option("--layouts", required=True, type=click.Path(exists=True))
@click.option("--catalog", type=click.Path(exists=True))
@click.option("--assets", type=click.Path(exists=True))
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--variants", default=25, show_default=True, type=int)
@click.option("--partials", default="all", show_default=True,
              type=click.Choice(["all", "1", "3", "5"]))
@click.option("--viewport", default="1400x900", show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("-j", "--jobs", default=1, show_default=True, type=int,
              help="render parallelism")
@click.option("--no-resume", is_flag=True, help="ignore done markers")
def render(layouts, catalog, assets, seed, variants, partials, viewport,
           out, jobs, no_resume):
    """Instantiate, render and extract every (layout, variant, fill state)."""
    layout_list, cat = _load_inputs(layouts, catalog, assets)
    Path(out).mkdir(parents=True, exist_ok=True)
    density = _density(partials)
    configs = pipeline.generate_configs(layout_list, cat, seed, variants, out)
    samples, failures = pipeline.render_samples(
        layout_list, configs, out, seed, density,
        viewport=_viewport(viewport),
        asset_root=Path(assets) if assets else None,
        resume=not no_resume, parallelism=jobs)
    expected = pipeline.expected_sample_count(layout_list, variants, density)
    pipeline.write_run_manifest(out, {
        "seed": seed, "variants": variants, "partials": partials,
        "viewport": viewport, "layouts": sorted(t.layout_id for t in layout_list),
        "expected_samples": expected, "rendered": len(samples),
        "failures": failures,
    })
    click.echo(f"rendered {len(samples)}/{expected} samples, "
               f"{len(failures)} failures")
    if failures:
        sys.exit(EXIT_RENDER_FAILURES)
    if len(samples) != expected:
        click.echo("count identity violated", err=True)
        sys.exit(EXIT_GATE)


@main.command()
@click.option("--layouts", required=True, type=click.Path(exists=True))
@click.option("--strategy", required=True,
              help="cross-page:0.2 | cross-company:<brand> | cross-type:<type>")
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--stratify-brand", is_flag=True)
@click.option("--out", required=True, type=click.Path())
def split(layouts, strategy, seed, stratify_brand, out):
    """Assign layouts to train/test under a hold-out strategy."""
    layout_list = pipeline.discover_layouts(layouts)
    infos = list(pipeline.layout_infos(layout_list).values())
    assignment = make_split(infos, strategy, seed, stratify_brand)
    Path(out).mkdir(parents=True, exist_ok=True)
    (Path(out) / "split.json").write_text(
        dumps_canonical(assignment.to_json()), encoding="utf-8")
    click.echo(f"{assignment.strategy}: train={len(assignment.train)} "
               f"test={len(assignment.test)}")


@main.command()
@click.option("--work", required=True, type=click.Path(exists=True),
              help="render work dir (records/, configs/, split.json)")
@click.option("--layouts", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="coco", show_default=True,
              type=click.Choice(["coco", "yolo"]))
@click.option("--classes", default="coarse", show_default=True,
              type=click.Choice(["fine", "coarse"]))
@click.option("--dest", required=True, type=click.Path())
@click.option("--review-ledger", type=click.Path(),
              help="apply the review export gate from this ledger")
def export(work, layouts, fmt, classes, dest, review_ledger):
    """Export gated, leakage-checked samples to a detection dataset."""
    layout_list = pipeline.discover_layouts(layouts)
    split_path = Path(work) / "split.json"
    if not split_path.exists():
        raise click.UsageError(f"no split.json under {work}; run `split` first")
    assignment = SplitAssignment.from_json(
        json.loads(split_path.read_text(encoding="utf-8")))
    configs = pipeline.load_configs(work, [t.layout_id for t in layout_list])
    findings = check_leakage(assignment, configs)
    if findings:
        for f in findings[:20]:
            click.echo(f"leakage: {f.value!r} in train{list(f.train_layouts)} "
                       f"and test{list(f.test_layouts)}", err=True)
        click.echo(f"{len(findings)} leaked values; export refused", err=True)
        sys.exit(EXIT_GATE)
    samples = pipeline.collect_samples(work)
    gate_note = {}
    if review_ledger:
        ledger = ReviewLedger(review_ledger)
        samples, report = export_gate(ledger, samples)
        gate_note = {"review_gate": report}
        click.echo(f"review gate: {report['samples_out']}/{report['samples_in']} "
                   f"samples from {report['layouts_approved']} approved layouts")
    manifest = export_dataset(
        samples, assignment, ClassMap(classes), fmt, dest,
        leakage=findings, extra_manifest=gate_note)
    click.echo(f"exported: {manifest['counts']}")
    exported_images = sum(c["images"] for c in manifest["counts"].values())
    run_manifest = Path(work) / "render.manifest"
    if not review_ledger and run_manifest.exists():
        expected = json.loads(run_manifest.read_text())["expected_samples"]
        if exported_images != expected:
            click.echo(f"count identity violated: exported {exported_images} "
                       f"!= expected {expected}", err=True)
            sys.exit(EXIT_GATE)
    if manifest["counts"]["test"]["images"] == 0 \
            or manifest["counts"]["train"]["images"] == 0:
        click.echo("warning: a split is empty", err=True)
        sys.exit(EXIT_EMPTY_SPLIT)


@main.command()
@click.option("--work", required=True, type=click.Path(exists=True))
@click.option("--layouts", type=click.Path(exists=True))
def stats(work, layouts):
    """Dataset statistics over rendered records."""
    samples = pipeline.collect_samples(work)
    infos = None
    if layouts:
        infos = pipeline.layout_infos(pipeline.discover_layouts(layouts))
    report = compute_stats(samples, infos)
    click.echo(dumps_canonical(report), nl=False)


@main.command()
@click.option("--detections", required=True, type=click.Path(exists=True))
@click.option("--work", type=click.Path(exists=True),
              help="work dir with ground-truth records")
@click.option("--coco", type=click.Path(exists=True),
              help="coco split dir as ground truth (alternative to --work)")
@click.option("--classes", default="coarse", show_default=True,
              type=click.Choice(["fine", "coarse"]))
@click.option("--conf", default=0.25, show_default=True, type=float)
@click.option("--report-out", type=click.Path())
def eval(detections, work, coco, classes, conf, report_out):
    """Score a detections file against rendered ground truth."""
    if not work and not coco:
        raise click.UsageError("need --work or --coco for ground truth")
    if coco:
        from .dataset import import_coco
        gt_samples = import_coco(coco)
    else:
        gt_samples = pipeline.collect_samples(work)
    class_map = ClassMap(classes)

    def class_of(ann):
        return class_map.name_of(ann.cls)

    dets = evalkit.read_detections(detections)
    group_keys = {s.sample_id.key: SampleId.parse(s.sample_id.key).fill_tag.split("_")[0]
                  for s in gt_samples}
    report = evalkit.evaluate(
        dets, gt_samples, class_map.names(), group_keys=group_keys,
        conf_threshold=conf, class_of=class_of)
    click.echo(report.table())
    if report_out:
        evalkit.write_report(report, report_out)


@main.command()
@click.option("--ocr", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--classifier-cmd", help="external classifier command "
              "(reads word JSON on stdin, prints pii_items JSON)")
def baseline(ocr, out, classifier_cmd):
    """Run the OCR+pattern baseline; emits an evalkit detections file."""
    classifier = None
    if classifier_cmd:
        classifier = ExternalClassifier(classifier_cmd.split())
    dets = run_baseline(ocr, out, classifier=classifier)
    click.echo(f"wrote {len(dets)} detections to {out}")


@main.command("review-serve")
@click.option("--work", required=True, type=click.Path(exists=True))
@click.option("--layouts", required=True, type=click.Path(exists=True))
@click.option("--catalog", type=click.Path(exists=True))
@click.option("--assets", type=click.Path(exists=True))
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--viewport", default="1400x900", show_default=True)
@click.option("--listen", default="127.0.0.1:8400", show_default=True)
@click.option("--ui", type=click.Path(exists=True),
              help="serve a built review UI from this directory")
def review_serve(work, layouts, catalog, assets, seed, viewport, listen, ui):
    """Serve the review queue HTTP API (and optionally the UI)."""
    import uvicorn

    layout_list = pipeline.discover_layouts(layouts)
    cat = load_catalog(catalog, assets) if catalog else None
    renderer = pipeline.PreviewRenderer(
        layouts, work, seed, viewport=_viewport(viewport),
        asset_root=Path(assets) if assets else None, catalog=cat)
    service = ReviewService(
        ledger=ReviewLedger(Path(work) / "review" / "ledger.jsonl"),
        layout_ids=[t.layout_id for t in layout_list],
        preview_dir=Path(work) / "review" / "previews",
        renderer=renderer)
    for layout_id in service.pending_ids():
        try:
            service.ensure_previews(layout_id)
        except Exception as exc:  # keep serving; item still reviewable later
            click.echo(f"preview render failed for {layout_id}: {exc}", err=True)
    host, _, port = listen.partition(":")
    uvicorn.run(create_app(service, ui_dir=ui), host=host, port=int(port))


@main.command()
@click.option("--runner", required=True,
              help="detector command; image path is appended per run")
@click.option("--images", required=True, type=click.Path(exists=True))
@click.option("--warmup", default=3, show_default=True, type=int)
@click.option("--reps", default=10, show_default=True, type=int)
def bench(runner, images, warmup, reps):
    """Wall-clock latency of an external detector over sample images."""
    image_dir = Path(images)
    paths = sorted(image_dir.glob("**/*.png")) if image_dir.is_dir() else [image_dir]
    result = evalkit.bench_latency(runner.split(), paths, warmup, reps)
    click.echo(dumps_canonical(result), nl=False)


if __name__ == "__main__":
    main()
