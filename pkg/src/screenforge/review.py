"""Human review loop: decision ledger, layout queue, re-render, export gate.

Decisions are append-only JSONL, fsynced before they are acknowledged, so
an acknowledged decision survives a crash. The latest decision governs
export eligibility; flagged layouts are fixed by editing the template on
disk and hitting re-render, which refreshes the fill-state previews and
returns the layout to the queue tail.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from pydantic import BaseModel

DECISIONS = ("approved", "flagged", "excluded")
PREVIEW_TAGS = ("full", "partial", "empty")


class UnknownLayout(Exception):
    pass


class BadDecision(Exception):
    pass


class ReviewLedger:
    """Append-only decision history, one JSON object per line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.entries: list[dict] = []
        self._queue_seq = 0
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    entry = json.loads(line)
                    self.entries.append(entry)
                    self._queue_seq = max(self._queue_seq, entry.get("queue_seq", 0))
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, layout_id: str, decision: str, note: str = "",
               idempotency_key: str = "") -> dict:
        if idempotency_key:
            for entry in reversed(self.entries):
                if entry.get("key") == idempotency_key:
                    return entry  # duplicate submit: same ack, no new entry
        if decision == "pending":
            self._queue_seq += 1
        entry = {
            "seq": len(self.entries),
            "layout_id": layout_id,
            "decision": decision,
            "note": note,
            "key": idempotency_key,
            "queue_seq": self._queue_seq if decision == "pending" else 0,
        }
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry, sort_keys=True) + "\n")
            f.flush()
            os.fsync(f.fileno())  # decision must survive a crash once acked
        self.entries.append(entry)
        return entry

    def history(self, layout_id: str) -> list[dict]:
        return [e for e in self.entries if e["layout_id"] == layout_id]

    def latest(self, layout_id: str) -> str:
        hist = self.history(layout_id)
        return hist[-1]["decision"] if hist else "pending"

    def queue_seq(self, layout_id: str) -> int:
        hist = self.history(layout_id)
        return hist[-1].get("queue_seq", 0) if hist else 0

    def iteration_count(self, layout_id: str) -> int:
        return sum(1 for e in self.history(layout_id) if e["decision"] == "flagged")


class ReviewService:
    """Queue + decisions over a registered set of layouts.

    `renderer(layout_id) -> {tag: {"image": bytes, "dims": [w, h],
    "annotations": [...]}}` regenerates the full/partial/empty previews;
    it is injected so the service stays independent of the pipeline.
    """

    def __init__(self, ledger: ReviewLedger, layout_ids: list[str],
                 preview_dir: str | Path, renderer=None):
        self.ledger = ledger
        self.layout_ids = sorted(layout_ids)
        self.preview_dir = Path(preview_dir)
        self.renderer = renderer

    def _check(self, layout_id: str) -> None:
        if layout_id not in self.layout_ids:
            raise UnknownLayout(layout_id)

    # --- queue ---

    def pending_ids(self) -> list[str]:
        pending = [lid for lid in self.layout_ids
                   if self.ledger.latest(lid) == "pending"]
        return sorted(pending, key=lambda lid: (self.ledger.queue_seq(lid), lid))

    def queue_next(self) -> dict | None:
        pending = self.pending_ids()
        if not pending:
            return None
        return self.item(pending[0])

    def item(self, layout_id: str) -> dict:
        self._check(layout_id)
        previews = {}
        for tag in PREVIEW_TAGS:
            meta_path = self.preview_dir / layout_id / f"{tag}.json"
            if meta_path.exists():
                previews[tag] = json.loads(meta_path.read_text(encoding="utf-8"))
                previews[tag]["image_url"] = f"/previews/{layout_id}/{tag}.png"
        return {
            "layout_id": layout_id,
            "decision": self.ledger.latest(layout_id),
            "iteration_count": self.ledger.iteration_count(layout_id),
            "history": self.ledger.history(layout_id),
            "previews": previews,
            "remaining": len(self.pending_ids()),
        }

    # --- decisions ---

    def submit_decision(self, layout_id: str, decision: str, note: str = "",
                        idempotency_key: str = "") -> dict:
        self._check(layout_id)
        if decision not in DECISIONS:
            raise BadDecision(decision)
        return self.ledger.append(layout_id, decision, note, idempotency_key)

    def _render_previews(self, layout_id: str) -> None:
        if self.renderer is None:
            raise RuntimeError("service started without a renderer")
        previews = self.renderer(layout_id)
        target = self.preview_dir / layout_id
        target.mkdir(parents=True, exist_ok=True)
        for tag, data in previews.items():
            (target / f"{tag}.png").write_bytes(data["image"])
            meta = {k: v for k, v in data.items() if k != "image"}
            (target / f"{tag}.json").write_text(
                json.dumps(meta, sort_keys=True), encoding="utf-8")

    def ensure_previews(self, layout_id: str) -> None:
        """First-time preview generation; does not touch the ledger."""
        self._check(layout_id)
        if not (self.preview_dir / layout_id / "full.json").exists():
            self._render_previews(layout_id)

    def rerender(self, layout_id: str) -> dict:
        """Refresh previews from the (possibly edited) template; the layout
        returns to pending at the queue tail."""
        self._check(layout_id)
        try:
            self._render_previews(layout_id)
        except Exception as exc:
            self.ledger.append(layout_id, "render_failed", note=str(exc))
            raise
        self.ledger.append(layout_id, "pending", note="re-rendered")
        return self.item(layout_id)

    # --- gate ---

    def gate_report(self) -> dict:
        by_status: dict[str, int] = {"pending": 0, "approved": 0, "flagged": 0,
                                     "excluded": 0, "render_failed": 0}
        for lid in self.layout_ids:
            by_status[self.ledger.latest(lid)] = \
                by_status.get(self.ledger.latest(lid), 0) + 1
        return {"layouts": len(self.layout_ids), "by_status": by_status}


def export_gate(ledger: ReviewLedger, samples: list) -> tuple[list, dict]:
    """Only samples of layouts whose latest decision is approved pass."""
    passed = [s for s in samples if ledger.latest(s.layout_id) == "approved"]
    layouts = {s.layout_id for s in samples}
    report = {
        "layouts_seen": len(layouts),
        "layouts_approved": len({s.layout_id for s in passed}),
        "samples_in": len(samples),
        "samples_out": len(passed),
        "blocked": {
            lid: ledger.latest(lid)
            for lid in sorted(layouts) if ledger.latest(lid) != "approved"
        },
    }
    return passed, report


# --- HTTP API ---

class DecisionBody(BaseModel):
    decision: str
    note: str = ""
    idempotency_key: str = ""


def create_app(service: ReviewService, ui_dir: str | Path | None = None):
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import FileResponse, JSONResponse

    app = FastAPI(title="screenforge review")

    @app.get("/queue/next")
    def queue_next():
        item = service.queue_next()
        if item is None:
            return JSONResponse({"done": True})
        return item

    @app.get("/layout/{layout_id}")
    def layout(layout_id: str):
        try:
            return service.item(layout_id)
        except UnknownLayout:
            raise HTTPException(404, f"unknown layout {layout_id}")

    @app.post("/layout/{layout_id}/decision")
    def decide(layout_id: str, body: DecisionBody):
        try:
            entry = service.submit_decision(
                layout_id, body.decision, body.note, body.idempotency_key)
        except UnknownLayout:
            raise HTTPException(404, f"unknown layout {layout_id}")
        except BadDecision as exc:
            raise HTTPException(422, f"bad decision {exc}")
        return {"ack": True, "entry": entry}

    @app.post("/layout/{layout_id}/rerender")
    def rerender(layout_id: str):
        try:
            return service.rerender(layout_id)
        except UnknownLayout:
            raise HTTPException(404, f"unknown layout {layout_id}")
        except Exception as exc:
            raise HTTPException(500, f"render failed: {exc}")

    @app.get("/report")
    def report():
        return service.gate_report()

    @app.get("/previews/{layout_id}/{name}")
    def preview(layout_id: str, name: str):
        path = service.preview_dir / layout_id / name
        if not path.is_file():
            raise HTTPException(404, "no such preview")
        return FileResponse(path)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
