import { execSync } from "node:child_process";
import { existsSync, readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  extractAnnotations,
  groupLines,
  Rect,
  __sf_extract,
} from "../src/extractor";
import {
  StubDocument,
  StubElement,
  stubWindow,
  textElement,
} from "./dom_stub";

describe("groupLines", () => {
  it("merges rects on an identical baseline", () => {
    expect(groupLines([[0, 10, 20, 16], [25, 10, 30, 16]])).toEqual([
      [0, 10, 55, 16],
    ]);
  });

  it("keeps vertically disjoint rects separate", () => {
    expect(groupLines([[0, 0, 20, 16], [0, 40, 20, 16]])).toEqual([
      [0, 0, 20, 16],
      [0, 40, 20, 16],
    ]);
  });

  it("survives sub-pixel baseline jitter", () => {
    expect(groupLines([[0, 10, 20, 16], [25, 10.4, 30, 16]])).toHaveLength(1);
  });

  it("orders lines top to bottom", () => {
    const lines = groupLines([[0, 50, 10, 10], [0, 0, 10, 10], [0, 25, 10, 10]]);
    expect(lines.map((r) => r[1])).toEqual([0, 25, 50]);
  });
});

describe("extractAnnotations", () => {
  it("matches the injected value with a tight single-line box", () => {
    const doc = new StubDocument();
    const el = new StubElement("div", { "data-pii": "name", "data-key": "K" }, {
      left: 0, top: 100, width: 200, height: 16,
    });
    // "Name: Marc Arnold" with the value in the tail of one line
    el.addText("Name: Marc Arnold", [
      { start: 0, end: 17, left: 0, top: 100, width: 136, height: 16 },
    ]);
    doc.add(el);
    const payload = extractAnnotations(doc, stubWindow, { K: "Marc Arnold" });
    expect(payload.extractor).toBe(1);
    expect(payload.records).toHaveLength(1);
    const rect = payload.records[0].rects[0];
    expect(rect).toEqual([48, 100, 88, 16]); // 6 chars in, 11 chars long
  });

  it("splits a value wrapped over three lines into three boxes", () => {
    const doc = new StubDocument();
    const el = new StubElement("div", { "data-order": "info", "data-key": "W" }, {
      left: 0, top: 0, width: 80, height: 48,
    });
    const text = "alpha beta gamma delta";
    el.addText(text, [
      { start: 0, end: 10, left: 0, top: 0, width: 80, height: 16 },
      { start: 10, end: 16, left: 0, top: 16, width: 48, height: 16 },
      { start: 16, end: 22, left: 0, top: 32, width: 48, height: 16 },
    ]);
    doc.add(el);
    const payload = extractAnnotations(doc, stubWindow, { W: text });
    const rects = payload.records[0].rects;
    expect(rects).toHaveLength(3);
    for (const a of rects) {
      for (const b of rects) {
        if (a === b) continue;
        const overlap = Math.min(a[1] + a[3], b[1] + b[3]) - Math.max(a[1], b[1]);
        expect(overlap).toBeLessThan(0.25 * Math.min(a[3], b[3]));
      }
    }
  });

  it("falls back to whole-element text when the value is absent", () => {
    const doc = new StubDocument();
    doc.add(textElement("div", { "data-pii": "name", "data-key": "K" },
      "something else", 10, 10));
    const payload = extractAnnotations(doc, stubWindow, { K: "Marc Arnold" });
    expect(payload.records[0].rects).toEqual([[10, 10, 14 * 8, 16]]);
  });

  it("reports inputs by border box and images by content box", () => {
    const doc = new StubDocument();
    doc.add(new StubElement("input",
      { "data-pii": "input_field", "data-key": "PII_CITY" },
      { left: 10, top: 40, width: 150, height: 30 }));
    doc.add(new StubElement("img",
      { "data-product": "image", "data-key": "PRODUCT1_IMAGE" },
      { left: 300, top: 40, width: 120, height: 120 }));
    const payload = extractAnnotations(doc, stubWindow, {});
    const byKind = Object.fromEntries(payload.records.map((r) => [r.element, r]));
    expect(byKind.input.rects).toEqual([[10, 40, 150, 30]]);
    expect(byKind.image.rects).toEqual([[300, 40, 120, 120]]);
  });

  it("marks zero-size elements occluded with no rects", () => {
    const doc = new StubDocument();
    doc.add(new StubElement("div", { "data-product": "text", "data-key": "G" }));
    const payload = extractAnnotations(doc, stubWindow, {});
    expect(payload.records[0].visibility).toBe("occluded");
    expect(payload.records[0].rects).toEqual([]);
  });

  it("classifies full / occluded / clipped via the 3x3 grid", () => {
    const doc = new StubDocument();
    const covered = textElement("div",
      { "data-pii": "name", "data-key": "A" }, "Covered Person", 100, 100);
    covered.rect = { left: 100, top: 100, width: 120, height: 60 };
    const half = textElement("div",
      { "data-pii": "address", "data-key": "B" }, "Half Covered", 400, 100);
    half.rect = { left: 400, top: 100, width: 120, height: 60 };
    const free = textElement("div",
      { "data-order": "info", "data-key": "C" }, "Free Element", 700, 100);
    doc.add(covered);
    doc.add(half);
    doc.add(free);
    const backdrop = new StubElement("div", {}, {
      left: 90, top: 90, width: 140, height: 80,
    });
    backdrop.zIndex = 10;
    doc.add(backdrop);
    const overlay = new StubElement("div", {}, {
      left: 460, top: 90, width: 80, height: 80,
    });
    overlay.zIndex = 10;
    doc.add(overlay);

    const payload = extractAnnotations(doc, stubWindow,
      { A: "Covered Person", B: "Half Covered", C: "Free Element" });
    const byKey = Object.fromEntries(payload.records.map((r) => [r.key, r]));
    expect(byKey.A.visibility).toBe("occluded");
    expect(byKey.A.rects).toEqual([]);
    expect(byKey.B.visibility).toBe("clipped");
    const clip = byKey.B.clip as Rect;
    expect(clip[0]).toBe(400);
    expect(clip[0] + clip[2]).toBeLessThanOrEqual(460 + 40); // one cell
    expect(byKey.C.visibility).toBe("full");
  });

  it("emits exactly one record per attributed element", () => {
    const doc = new StubDocument();
    for (let i = 0; i < 5; i++) {
      doc.add(textElement("div", { "data-order": "info", "data-key": `K${i}` },
        `item ${i}`, 0, i * 30));
    }
    doc.add(textElement("div", {}, "not annotated", 0, 500));
    const payload = extractAnnotations(doc, stubWindow, {});
    expect(payload.records).toHaveLength(5);
    expect(payload.errors).toEqual([]);
  });
});

describe("built artifact", () => {
  it("strips module syntax and still produces the same payload", () => {
    if (!existsSync("dist/extractor.js")) {
      execSync("npm run build", { stdio: "ignore" });
    }
    const script = readFileSync("dist/extractor.js", "utf-8");
    expect(script).not.toMatch(/^export /m);

    const doc = new StubDocument();
    doc.add(textElement("span", { "data-pii": "name", "data-key": "K" },
      "Marc Arnold", 10, 20));
    const sandbox = { document: doc, window: stubWindow };
    const factory = new Function(
      "globalThis", "document", "window",
      `${script}; return __sf_extract;`);
    const injected = factory(sandbox, doc, stubWindow);
    const viaScript = JSON.parse(injected({ K: "Marc Arnold" }));

    (globalThis as Record<string, unknown>).document = doc;
    (globalThis as Record<string, unknown>).window = stubWindow;
    const viaModule = JSON.parse(__sf_extract({ K: "Marc Arnold" }));
    delete (globalThis as Record<string, unknown>).document;
    delete (globalThis as Record<string, unknown>).window;

    expect(viaScript).toEqual(viaModule);
    expect(viaScript.extractor).toBe(1);
    expect(viaScript.records[0].rects).toEqual([[10, 20, 88, 16]]);
  });
});
