/* Review screen wiring: queue navigation, fill-state tabs, class toggles,
 * zoom, decision controls with keyboard shortcuts (a approve, f flag,
 * x exclude, r re-render), and a retry banner that never loses the
 * current queue position. */

import { Decision, ReviewApi, ReviewItem, makeIdempotencyKey } from "./api";
import { drawOverlay } from "./overlay";
import {
  Family,
  OverlayState,
  initialState,
  setFillState,
  setZoom,
  toggleFamily,
} from "./state";

const api = new ReviewApi("");

let item: ReviewItem | null = null;
let view: OverlayState = initialState();
let pendingKey: string | null = null; // idempotency key of an unacked submit

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function showBanner(message: string, retry: (() => void) | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message;
  banner.classList.toggle("hidden", !message);
  banner.onclick = retry;
}

function fillTags(current: ReviewItem): string[] {
  const order = ["full", "partial", "empty"];
  return order.filter((tag) => tag in current.previews);
}

function renderItem(): void {
  const root = el<HTMLDivElement>("item");
  if (!item) {
    root.classList.add("hidden");
    el<HTMLDivElement>("done").classList.remove("hidden");
    return;
  }
  el<HTMLDivElement>("done").classList.add("hidden");
  root.classList.remove("hidden");
  el<HTMLSpanElement>("layout-id").textContent = item.layout_id;
  el<HTMLSpanElement>("remaining").textContent = String(item.remaining);
  el<HTMLSpanElement>("iterations").textContent = String(item.iteration_count);

  const tabs = el<HTMLDivElement>("fill-tabs");
  tabs.innerHTML = "";
  for (const tag of fillTags(item)) {
    const button = document.createElement("button");
    button.textContent = tag;
    button.className = tag === view.fillState ? "tab active" : "tab";
    button.onclick = () => {
      view = setFillState(view, tag);
      renderPreview();
      renderItem();
    };
    tabs.appendChild(button);
  }
  renderPreview();
}

function renderPreview(): void {
  if (!item) return;
  const tags = fillTags(item);
  if (!tags.includes(view.fillState) && tags.length) {
    view = setFillState(view, tags[0]);
  }
  const preview = item.previews[view.fillState];
  if (!preview) return;
  const image = el<HTMLImageElement>("shot");
  const canvas = el<HTMLCanvasElement>("overlay");
  image.src = preview.image_url;
  const [w, h] = preview.dims;
  image.width = w * view.zoom;
  image.height = h * view.zoom;
  canvas.width = w * view.zoom;
  canvas.height = h * view.zoom;
  const ctx = canvas.getContext("2d");
  if (ctx) drawOverlay(ctx, preview.annotations, view, preview.dims);
}

async function advance(): Promise<void> {
  try {
    item = await api.queueNext();
    view = initialState(item ? fillTags(item)[0] : "full");
    showBanner("", null);
    renderItem();
  } catch (err) {
    showBanner(`queue fetch failed (${err}); click to retry`, () => void advance());
  }
}

async function decide(decision: Decision): Promise<void> {
  if (!item) return;
  const layoutId = item.layout_id;
  let note = "";
  if (decision === "flagged") {
    note = window.prompt("What needs to change?") ?? "";
    if (!note) return;
  }
  // reuse the key across retries so the ledger records the submit once
  const key = pendingKey ?? makeIdempotencyKey();
  pendingKey = key;
  try {
    await api.decide(layoutId, decision, note, key);
    pendingKey = null;
    await advance();
  } catch (err) {
    showBanner(`decision failed (${err}); click to retry`,
      () => void decide(decision));
  }
}

async function rerender(): Promise<void> {
  if (!item) return;
  const layoutId = item.layout_id;
  const spinner = el<HTMLDivElement>("spinner");
  spinner.classList.remove("hidden");
  try {
    item = await api.rerender(layoutId); // same item, refreshed previews
    renderItem();
    showBanner("", null);
  } catch (err) {
    showBanner(`re-render failed (${err}); click to retry`,
      () => void rerender());
  } finally {
    spinner.classList.add("hidden");
  }
}

export function boot(): void {
  el<HTMLButtonElement>("approve").onclick = () => void decide("approved");
  el<HTMLButtonElement>("flag").onclick = () => void decide("flagged");
  el<HTMLButtonElement>("exclude").onclick = () => void decide("excluded");
  el<HTMLButtonElement>("rerender").onclick = () => void rerender();
  for (const family of ["pii", "product", "order"] as Family[]) {
    el<HTMLInputElement>(`toggle-${family}`).onchange = () => {
      view = toggleFamily(view, family);
      renderPreview();
    };
  }
  el<HTMLInputElement>("zoom").oninput = (event) => {
    const value = Number((event.target as HTMLInputElement).value);
    view = setZoom(view, value);
    renderPreview();
  };
  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement) return;
    if (event.key === "a") void decide("approved");
    if (event.key === "f") void decide("flagged");
    if (event.key === "x") void decide("excluded");
    if (event.key === "r") void rerender();
  });
  void advance();
}

if (typeof document !== "undefined" && document.getElementById("item")) {
  boot();
}
