/* In-page annotation extractor.
 *
 * Walks every element carrying data-pii / data-product / data-order,
 * measures value-matched text through DOM ranges (one box per rendered
 * line, grouped by >= 50% vertical overlap), takes border boxes for
 * inputs and content boxes for images, and classifies visibility by
 * hit-testing a 3x3 grid of cell-center points. Expects the emulated
 * viewport to cover the full page so elementFromPoint works below the
 * original fold.
 *
 * Payload schema: {extractor: 1, page: [w, h], records: [...], errors: [...]}
 *
 * The DOM surface is expressed as narrow structural types so the logic
 * is testable against stub documents; `__sf_extract` binds it to the
 * real document/window when injected.
 */

export type Rect = [number, number, number, number];

export interface RectLike {
  left: number;
  top: number;
  width: number;
  height: number;
}

export interface TextNodeLike {
  data: string;
}

export interface ElementLike {
  tagName: string;
  hasAttribute(name: string): boolean;
  getAttribute(name: string): string | null;
  getBoundingClientRect(): RectLike;
  contains(other: unknown): boolean;
}

export interface RangeLike {
  setStart(node: TextNodeLike, offset: number): void;
  setEnd(node: TextNodeLike, offset: number): void;
  selectNodeContents(node: TextNodeLike): void;
  getClientRects(): ArrayLike<RectLike>;
}

export interface TreeWalkerLike {
  nextNode(): TextNodeLike | null;
}

export interface PageDocumentLike {
  querySelectorAll(selector: string): ArrayLike<ElementLike>;
  createRange(): RangeLike;
  createTreeWalker(root: ElementLike, whatToShow: number): TreeWalkerLike;
  elementFromPoint(x: number, y: number): ElementLike | null;
  documentElement: { scrollWidth: number; scrollHeight: number };
}

export interface WindowLike {
  scrollX: number;
  scrollY: number;
}

export interface RawRecord {
  key: string;
  attr: string;
  label: string;
  element: "text" | "input" | "image";
  rects: Rect[];
  visibility: "full" | "clipped" | "occluded";
  clip?: Rect;
}

export interface ExtractPayload {
  extractor: 1;
  page: [number, number];
  records: RawRecord[];
  errors: { element: string; attr: string | null; error: string }[];
}

export const FAMILIES = ["data-pii", "data-product", "data-order"] as const;

const GRID = 3;
const SHOW_TEXT = 4; // NodeFilter.SHOW_TEXT

/** Group fractional rects into per-line union boxes: two rects share a
 * line iff their vertical overlap is at least half the smaller height. */
export function groupLines(rects: Rect[]): Rect[] {
  const sorted = rects.slice().sort((a, b) => a[1] - b[1] || a[0] - b[0]);
  const groups: Rect[][] = [];
  for (const rect of sorted) {
    let placed = false;
    for (const group of groups) {
      const gy1 = Math.min(...group.map((r) => r[1]));
      const gy2 = Math.max(...group.map((r) => r[1] + r[3]));
      const overlap = Math.min(gy2, rect[1] + rect[3]) - Math.max(gy1, rect[1]);
      const smaller = Math.min(gy2 - gy1, rect[3]);
      if (smaller > 0 && overlap >= 0.5 * smaller) {
        group.push(rect);
        placed = true;
        break;
      }
    }
    if (!placed) groups.push([rect]);
  }
  const lines = groups.map((group): Rect => {
    const x1 = Math.min(...group.map((r) => r[0]));
    const y1 = Math.min(...group.map((r) => r[1]));
    const x2 = Math.max(...group.map((r) => r[0] + r[2]));
    const y2 = Math.max(...group.map((r) => r[1] + r[3]));
    return [x1, y1, x2 - x1, y2 - y1];
  });
  lines.sort((a, b) => a[1] - b[1] || a[0] - b[0]);
  return lines;
}

function pageRect(r: RectLike, win: WindowLike): Rect {
  return [r.left + win.scrollX, r.top + win.scrollY, r.width, r.height];
}

function textNodesUnder(doc: PageDocumentLike, el: ElementLike): TextNodeLike[] {
  const nodes: TextNodeLike[] = [];
  const walker = doc.createTreeWalker(el, SHOW_TEXT);
  let node: TextNodeLike | null;
  while ((node = walker.nextNode())) nodes.push(node);
  return nodes;
}

function collectRects(list: ArrayLike<RectLike>, win: WindowLike): Rect[] {
  const out: Rect[] = [];
  for (let i = 0; i < list.length; i++) {
    const r = list[i];
    if (r.width > 0 && r.height > 0) out.push(pageRect(r, win));
  }
  return out;
}

/** Rects of the range spelling `value` inside the element's text, null
 * when the value does not occur. */
export function valueRangeRects(
  doc: PageDocumentLike, win: WindowLike, el: ElementLike, value: string,
): Rect[] | null {
  if (!value) return null;
  const nodes = textNodesUnder(doc, el);
  const flat = nodes.map((n) => n.data).join("");
  const start = flat.indexOf(value);
  if (start < 0) return null;
  const end = start + value.length;
  const range = doc.createRange();
  let offset = 0;
  for (const node of nodes) {
    const next = offset + node.data.length;
    if (start >= offset && start < next) range.setStart(node, start - offset);
    if (end > offset && end <= next) range.setEnd(node, end - offset);
    offset = next;
  }
  const rects = collectRects(range.getClientRects(), win);
  return rects.length ? rects : null;
}

function wholeTextRects(
  doc: PageDocumentLike, win: WindowLike, el: ElementLike,
): Rect[] {
  const rects: Rect[] = [];
  for (const node of textNodesUnder(doc, el)) {
    const range = doc.createRange();
    range.selectNodeContents(node);
    rects.push(...collectRects(range.getClientRects(), win));
  }
  return rects;
}

/** 3x3 cell-center hit test: full / occluded / clipped with the hit
 * sub-grid expanded to cell boundaries. */
export function visibility(
  doc: PageDocumentLike, win: WindowLike, el: ElementLike, box: Rect,
): { status: RawRecord["visibility"]; clip?: Rect } {
  const hits: boolean[][] = [];
  let nHits = 0;
  for (let row = 0; row < GRID; row++) {
    hits.push([]);
    for (let col = 0; col < GRID; col++) {
      const px = box[0] + ((col + 0.5) * box[2]) / GRID - win.scrollX;
      const py = box[1] + ((row + 0.5) * box[3]) / GRID - win.scrollY;
      const top = doc.elementFromPoint(px, py);
      const hit = top !== null && (top === el || el.contains(top));
      hits[row].push(hit);
      if (hit) nHits++;
    }
  }
  if (nHits === GRID * GRID) return { status: "full" };
  if (nHits === 0) return { status: "occluded" };
  const rows: number[] = [];
  const cols: number[] = [];
  for (let r = 0; r < GRID; r++) {
    for (let c = 0; c < GRID; c++) {
      if (hits[r][c]) {
        if (!rows.includes(r)) rows.push(r);
        if (!cols.includes(c)) cols.push(c);
      }
    }
  }
  const r0 = Math.min(...rows);
  const r1 = Math.max(...rows);
  const c0 = Math.min(...cols);
  const c1 = Math.max(...cols);
  return {
    status: "clipped",
    clip: [
      box[0] + (c0 * box[2]) / GRID,
      box[1] + (r0 * box[3]) / GRID,
      ((c1 - c0 + 1) * box[2]) / GRID,
      ((r1 - r0 + 1) * box[3]) / GRID,
    ],
  };
}

function elementKind(tag: string): RawRecord["element"] {
  if (tag === "input" || tag === "select" || tag === "textarea") return "input";
  return tag === "img" ? "image" : "text";
}

export function extractAnnotations(
  doc: PageDocumentLike, win: WindowLike, values: Record<string, string>,
): ExtractPayload {
  const records: RawRecord[] = [];
  const errors: ExtractPayload["errors"] = [];
  const selector = FAMILIES.map((f) => `[${f}]`).join(",");
  const elements = doc.querySelectorAll(selector);

  for (let i = 0; i < elements.length; i++) {
    const el = elements[i];
    let attr: string | null = null;
    for (const family of FAMILIES) {
      if (el.hasAttribute(family)) {
        attr = family;
        break;
      }
    }
    try {
      const kind = elementKind(el.tagName.toLowerCase());
      const record: RawRecord = {
        key: el.getAttribute("data-key") || "",
        attr: attr as string,
        label: el.getAttribute(attr as string) || "",
        element: kind,
        rects: [],
        visibility: "occluded",
      };
      const border = el.getBoundingClientRect();
      if (border.width <= 0 || border.height <= 0) {
        records.push(record);
        continue;
      }
      const box = pageRect(border, win);
      let rects: Rect[];
      if (kind === "text") {
        const matched = valueRangeRects(doc, win, el, values[record.key] || "");
        const base = matched ?? wholeTextRects(doc, win, el);
        rects = base.length ? groupLines(base) : [box];
      } else {
        rects = [box];
      }
      const vis = visibility(doc, win, el, box);
      record.visibility = vis.status;
      if (vis.status !== "occluded") {
        record.rects = rects;
        if (vis.clip) record.clip = vis.clip;
      }
      records.push(record);
    } catch (err) {
      errors.push({ element: el.tagName, attr, error: String(err) });
    }
  }

  return {
    extractor: 1,
    page: [doc.documentElement.scrollWidth, doc.documentElement.scrollHeight],
    records,
    errors,
  };
}

/** Injection entry point: serialize the payload for the evaluate call. */
export function __sf_extract(values: Record<string, string>): string {
  const doc = (globalThis as { document?: unknown }).document as PageDocumentLike;
  const win = (globalThis as { window?: unknown }).window as WindowLike;
  return JSON.stringify(extractAnnotations(doc, win, values));
}

(globalThis as Record<string, unknown>).__sf_extract = __sf_extract;
