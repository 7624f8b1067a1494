"""End-to-end pipeline plumbing shared by the CLI and the review service.

Work directory layout:

  configs/<layout_id>/<variant_index>   injection configs (JSON)
  renders/<layout_id>/<sample_id>.png   screenshots
  records/<layout_id>/<sample_id>.json  annotation records (schema 1)
  done/<sample_id>.done                 resume markers for the render stage
  split.json                            split assignment
  render.manifest                       echo of the run configuration

Pool partitioning: each layout gets slot i of L (sorted order), making
high-entropy injected values disjoint across layouts, so any layout-level
split is leakage-free by construction.
"""

from __future__ import annotations

import logging
from pathlib import Path
from random import Random

from . import __version__, configgen, fillplan, geometry, templates
from .catalog import Catalog
from .configgen import DataConfig, PoolPartition, display, stable_seed
from .dataset import LayoutInfo
from .model import (
    AnnotatedSample,
    SampleId,
    dumps_canonical,
    read_record,
    validate_sample,
    write_record,
)
from .render.harness import RenderJob, render
from .templates import LayoutTemplate

logger = logging.getLogger(__name__)


def discover_layouts(layouts_dir: str | Path) -> list[LayoutTemplate]:
    root = Path(layouts_dir)
    bundles = sorted(p for p in root.iterdir()
                     if p.is_dir() and (p / "page.html").exists())
    return [templates.load_template(p) for p in bundles]


def layout_infos(layout_list: list[LayoutTemplate]) -> dict[str, LayoutInfo]:
    return {t.layout_id: LayoutInfo(t.layout_id, t.brand, t.page_type)
            for t in layout_list}


def partition_for(template: LayoutTemplate,
                  layout_list: list[LayoutTemplate]) -> PoolPartition:
    ids = sorted(t.layout_id for t in layout_list)
    return PoolPartition(slot=ids.index(template.layout_id), total=len(ids))


def generate_configs(layout_list: list[LayoutTemplate], catalog: Catalog | None,
                     master_seed: int, variants: int,
                     work_dir: str | Path) -> dict[str, list[DataConfig]]:
    """Write configs/<layout_id>/<variant_index>; returns them by layout."""
    work = Path(work_dir)
    out: dict[str, list[DataConfig]] = {}
    for template in layout_list:
        part = partition_for(template, layout_list)
        configs = []
        target = work / "configs" / template.layout_id
        target.mkdir(parents=True, exist_ok=True)
        for variant in range(variants):
            config = configgen.generate_config(
                template.data_spec, catalog, master_seed,
                template.layout_id, variant, partition=part)
            configgen.write_config(config, target / str(variant))
            configs.append(config)
        out[template.layout_id] = configs
    return out


def load_configs(work_dir: str | Path,
                 layout_ids: list[str]) -> dict[str, list[DataConfig]]:
    work = Path(work_dir)
    out: dict[str, list[DataConfig]] = {}
    for layout_id in layout_ids:
        cfg_dir = work / "configs" / layout_id
        if not cfg_dir.is_dir():
            continue
        variants = sorted(cfg_dir.iterdir(), key=lambda p: int(p.name))
        out[layout_id] = [configgen.read_config(p) for p in variants]
    return out


def stages_for(template: LayoutTemplate, master_seed: int, variant: int,
               density) -> list[fillplan.Stage]:
    rng = Random(stable_seed(master_seed, template.layout_id, variant, "plan"))
    return fillplan.plan_states(template.n_fields, density, rng).states


def fill_for(template: LayoutTemplate, config: DataConfig,
             stage: fillplan.Stage) -> fillplan.FillState:
    rng = Random(stable_seed(config.seed, "prefix", stage.name))
    return fillplan.concretize(stage, template.fields, config, rng)


def display_values(config: DataConfig) -> dict[str, str]:
    return {k: display(v) for k, v in config.values.items()}


def expected_sample_count(layout_list, variants: int, density) -> int:
    """Exact count identity: sum over layouts of variants x states."""
    total = 0
    for t in layout_list:
        n = t.n_fields
        if n == 0:
            states = 1
        elif density == "all":
            states = n + 1
        else:
            states = min(int(density), n - 1) + 2
        total += variants * states
    return total


def render_samples(layout_list: list[LayoutTemplate],
                   configs_by_layout: dict[str, list[DataConfig]],
                   work_dir: str | Path, master_seed: int, density,
                   viewport=(1400, 900), engine=None, asset_root=None,
                   resume: bool = True,
                   parallelism: int = 1) -> tuple[list[AnnotatedSample], list[str]]:
    """Instantiate, render, extract and finalize every sample.

    Returns (samples, failures) in deterministic sample order regardless
    of `parallelism`. Completed samples are skipped on re-runs via done
    markers; failures never write a marker.
    """
    work = Path(work_dir)
    done_dir = work / "done"
    done_dir.mkdir(parents=True, exist_ok=True)

    pending = []  # (slot, template, config, stage, sid)
    slots: list = []
    for template in layout_list:
        (work / "records" / template.layout_id).mkdir(parents=True, exist_ok=True)
        (work / "renders" / template.layout_id).mkdir(parents=True, exist_ok=True)
        for variant, config in enumerate(configs_by_layout[template.layout_id]):
            for stage in stages_for(template, master_seed, variant, density):
                sid = SampleId(template.layout_id, variant, stage.name)
                record_path = work / "records" / template.layout_id / f"{sid.key}.json"
                marker = done_dir / f"{sid.key}.done"
                if resume and marker.exists() and record_path.exists():
                    done = read_record(record_path)
                    done.image_ref = str(work / done.image_ref)
                    slots.append(done)
                    continue
                pending.append((len(slots), template, config, stage, sid))
                slots.append(None)

    failures: list[str] = []

    def run_one(task):
        slot, template, config, stage, sid = task
        try:
            sample = render_one(
                template, config, stage, sid, work,
                viewport=viewport, engine=engine, asset_root=asset_root)
        except Exception as exc:
            logger.error("render failed for %s: %s", sid.key, exc)
            return slot, sid.key, None
        (done_dir / f"{sid.key}.done").write_text("")
        return slot, sid.key, sample

    if parallelism <= 1 or len(pending) <= 1:
        results = map(run_one, pending)
    else:
        from concurrent.futures import ThreadPoolExecutor
        pool = ThreadPoolExecutor(max_workers=parallelism)
        results = pool.map(run_one, pending)
    for slot, key, sample in results:
        if sample is None:
            failures.append(key)
        else:
            slots[slot] = sample
    if parallelism > 1 and len(pending) > 1:
        pool.shutdown()

    samples = [s for s in slots if s is not None]
    failures.sort()
    return samples, failures


def render_one(template: LayoutTemplate, config: DataConfig,
               stage: fillplan.Stage, sid: SampleId, work_dir: str | Path,
               viewport=(1400, 900), engine=None, asset_root=None) -> AnnotatedSample:
    work = Path(work_dir)
    fill = fill_for(template, config, stage)
    document = templates.instantiate(template, config, fill, asset_root=asset_root)
    job = RenderJob(sid.key, document, viewport=viewport,
                    values=display_values(config))
    result = render(job, engine)
    annotations = geometry.finalize(result.raw_annotations, result.image_dims)
    rel_image = Path("renders") / template.layout_id / f"{sid.key}.png"
    (work / rel_image).write_bytes(result.image)
    # records carry work-relative refs so identical runs are byte-identical
    sample = AnnotatedSample(
        image_ref=str(rel_image),
        layout_id=template.layout_id,
        config_seed=config.seed,
        fill_state=stage.name,
        annotations=annotations,
        image_dims=result.image_dims,
        variant_index=sid.variant_index,
    )
    violations = validate_sample(sample)
    if violations:
        raise RuntimeError(
            f"{sid.key} failed validation: {violations[0].invariant}: "
            f"{violations[0].message}")
    write_record(sample, work / "records" / template.layout_id / f"{sid.key}.json")
    sample.image_ref = str(work / rel_image)
    return sample


def collect_samples(work_dir: str | Path) -> list[AnnotatedSample]:
    work = Path(work_dir)
    samples = []
    for path in sorted(work.glob("records/*/*.json")):
        sample = read_record(path)
        if not Path(sample.image_ref).is_absolute():
            sample.image_ref = str(work / sample.image_ref)
        samples.append(sample)
    return samples


def write_run_manifest(work_dir: str | Path, config: dict) -> None:
    manifest = {"tool": "screenforge", "version": __version__, **config}
    (Path(work_dir) / "render.manifest").write_text(
        dumps_canonical(manifest), encoding="utf-8")


def fill_readback_violations(template: LayoutTemplate, config: DataConfig,
                             stage: fillplan.Stage, document: str) -> list[str]:
    """Check a rendered document against the stage contract.

    For partial(k): fields before k must carry their full value, field k a
    strict non-empty prefix (dropdown/checkbox fields stay untouched at
    their own stage), fields after k must be empty.
    """
    observed = templates.read_fill_back(document, template)
    problems = []
    for f in template.fields_by_order():
        if f.field_id not in observed:
            continue  # excluded optional subtree
        got = observed[f.field_id]
        if f.input_kind == "checkbox":
            want_full = "on"
        else:
            want_full = display(config.values[f.bound_key])
        if stage.tag == "empty":
            expected = ""
            ok = got == expected
        elif stage.tag == "full" or (stage.tag == "partial" and f.fill_order < stage.k):
            ok = got == want_full
        elif stage.tag == "partial" and f.fill_order > stage.k:
            ok = got == ""
        else:  # the mid-typing field itself
            if f.input_kind == "text":
                ok = bool(got) and got != want_full and want_full.startswith(got)
                if len(want_full) == 1:
                    ok = got == want_full  # degenerate one-char value
            else:
                ok = got == ""  # atomic controls stay unselected mid-stage
        if not ok:
            problems.append(
                f"{template.layout_id}/{stage.name}: field {f.field_id} "
                f"(order {f.fill_order}) has {got!r}")
    return problems


class PreviewRenderer:
    """Three-state preview regeneration for the review loop."""

    def __init__(self, layouts_dir: str | Path, work_dir: str | Path,
                 master_seed: int, viewport=(1400, 900), engine=None,
                 asset_root=None, catalog: Catalog | None = None):
        self.layouts_dir = Path(layouts_dir)
        self.work_dir = Path(work_dir)
        self.master_seed = master_seed
        self.viewport = viewport
        self.engine = engine
        self.asset_root = asset_root
        self.catalog = catalog

    def __call__(self, layout_id: str) -> dict:
        # reload from disk: the template may have been hand-edited
        template = templates.load_template(self.layouts_dir / layout_id)
        layout_list = discover_layouts(self.layouts_dir)
        part = partition_for(template, layout_list)
        config = configgen.generate_config(
            template.data_spec, self.catalog, self.master_seed,
            layout_id, 0, partition=part)
        n = template.n_fields
        stages = [fillplan.Stage("full")]
        if n >= 1:
            stages.append(fillplan.Stage("empty"))
        if n >= 2:
            stages.append(fillplan.Stage("partial", max(1, n // 2)))
        out = {}
        for stage in stages:
            fill = fill_for(template, config, stage)
            document = templates.instantiate(
                template, config, fill, asset_root=self.asset_root)
            job = RenderJob(f"{layout_id}__preview__{stage.name}", document,
                            viewport=self.viewport,
                            values=display_values(config))
            result = render(job, self.engine)
            annotations = geometry.finalize(
                result.raw_annotations, result.image_dims)
            # finalized input annotations carry no key; recover the bound
            # key from the raw payload by nearest box so overlays can
            # show fill state
            raw_inputs = [
                (record["rects"][0], record["key"])
                for record in result.raw_annotations["records"]
                if record["element"] == "input" and record["rects"]
            ]

            def input_key_near(box) -> str:
                cx, cy = box.x + box.w / 2, box.y + box.h / 2
                best, best_d = "", 4.0
                for rect, key in raw_inputs:
                    d = abs(rect[0] + rect[2] / 2 - cx) + abs(rect[1] + rect[3] / 2 - cy)
                    if d < best_d:
                        best, best_d = key, d
                return best
            tag = "partial" if stage.tag == "partial" else stage.name
            out[tag] = {
                "image": result.image,
                "dims": list(result.image_dims),
                "fill_state": stage.name,
                "annotations": [
                    {"box": [a.box.x, a.box.y, a.box.w, a.box.h],
                     "kind": a.cls.kind.value,
                     "fine_label": a.cls.fine_label.value,
                     "element_kind": a.cls.element_kind.value,
                     "source_key": a.source_key,
                     "has_value": bool(
                         a.cls.element_kind.value != "input"
                         or _field_has_value(template, fill, input_key_near(a.box)))}
                    for a in annotations
                ],
            }
        return out


def _field_has_value(template, fill, bound_key: str) -> bool:
    for f in template.fields:
        if f.bound_key == bound_key:
            state = fill.per_field.get(f.field_id, "empty")
            return state != "empty"
    return False
