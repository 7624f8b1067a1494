"""Render harness: job/result types, engine selection, batch driving.

The engine is chosen at call time: SCREENFORGE_BROWSER (or an explicit
binary argument) selects the DevTools-protocol engine against a real
headless browser; otherwise the built-in deterministic engine renders the
page. Both produce the same result shape: a PNG, its dimensions, and the
raw annotation payload from the extraction pass.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .extract import EXTRACTOR_SCHEMA_VERSION
from .png import read_dims

MIN_VIEWPORT_WIDTH = 320
DEFAULT_VIEWPORT = (1400, 900)

# deterministic render settings recorded on every job; engines honor them
DEFAULT_SETTINGS = {
    "font_stack": "monospace",
    "clock_ms": 1700000000000,
    "locale": "en-US",
}

# reproducibility preamble injected into every page before load
DETERMINISM_CSS = (
    "*,*::before,*::after{animation:none!important;transition:none!important;"
    "caret-color:transparent!important;font-family:monospace!important}"
)
FROZEN_CLOCK_JS = (
    "(()=>{const t=%d;const D=Date;"
    "window.Date=class extends D{constructor(...a){"
    "a.length?super(...a):super(t)}static now(){return t}};"
    "Math.random=(()=>{let s=42;return()=>{s=(s*1103515245+12345)%%2147483648;"
    "return s/2147483648}})();})();"
)


class RenderError(Exception):
    pass


class NavigationTimeout(RenderError):
    pass


class ScriptError(RenderError):
    pass


class ProtocolError(RenderError):
    pass


class BrowserCrashed(RenderError):
    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial or []


@dataclass
class RenderJob:
    sample_id: str
    document: str
    viewport: tuple[int, int] = DEFAULT_VIEWPORT
    full_page: bool = True
    values: dict = field(default_factory=dict)  # config key -> display string
    settings: dict = field(default_factory=lambda: dict(DEFAULT_SETTINGS))

    def __post_init__(self):
        if self.viewport[0] < MIN_VIEWPORT_WIDTH:
            raise ValueError(
                f"viewport width must be >= {MIN_VIEWPORT_WIDTH}")


@dataclass
class RenderResult:
    image: bytes
    image_dims: tuple[int, int]
    raw_annotations: dict
    timings: dict = field(default_factory=dict)  # phase -> milliseconds


@dataclass
class BatchItem:
    sample_id: str
    result: RenderResult | None = None
    error: Exception | None = None


def default_engine():
    binary = os.environ.get("SCREENFORGE_BROWSER")
    if binary:
        from .cdp import CdpEngine
        return CdpEngine(binary)
    from .builtin import BuiltinEngine
    return BuiltinEngine()


def render(job: RenderJob, engine=None) -> RenderResult:
    """Render one job and verify the result invariants."""
    own_engine = engine is None
    if own_engine:
        engine = default_engine()
    try:
        t0 = time.perf_counter()
        image, dims, payload = engine.render_page(
            job.document, job.viewport, job.full_page, job.values,
            settings=job.settings)
        elapsed = (time.perf_counter() - t0) * 1000.0
        if isinstance(payload, str):
            payload = json.loads(payload)
        if payload.get("extractor") != EXTRACTOR_SCHEMA_VERSION:
            raise ProtocolError(
                f"unexpected extractor payload version: {payload.get('extractor')!r}")
        decoded = read_dims(image)
        if decoded != tuple(dims):
            raise ProtocolError(
                f"image dims {decoded} disagree with reported {dims}")
        return RenderResult(
            image=image, image_dims=tuple(dims), raw_annotations=payload,
            timings={"render_ms": round(elapsed, 3)})
    finally:
        if own_engine:
            engine.close()


def render_batch(jobs, parallelism: int = 1, engine=None) -> list[BatchItem]:
    """Render jobs with per-job failure isolation; output is in job order.

    A BrowserCrashed failure aborts the batch and re-raises with the
    partial results attached.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    own_engine = engine is None
    if own_engine:
        engine = default_engine()
    items = [BatchItem(sample_id=j.sample_id) for j in jobs]

    def run_one(idx_job):
        idx, job = idx_job
        try:
            items[idx].result = render(job, engine)
        except BrowserCrashed:
            raise
        except Exception as exc:
            items[idx].error = exc

    try:
        if parallelism == 1:
            for pair in enumerate(jobs):
                run_one(pair)
        else:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                list(pool.map(run_one, enumerate(jobs)))
    except BrowserCrashed as crash:
        crash.partial = [it for it in items if it.result or it.error]
        raise
    finally:
        if own_engine:
            engine.close()
    return items
