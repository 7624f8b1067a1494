/* Canvas overlay for annotation boxes.
 *
 * Colors: pink product, red PII text, orange order info; input fields
 * are purple when empty, yellow while carrying a partial/typed value,
 * grey on the pristine-form view. Zoom is applied as a single canvas
 * transform so box coordinates never get re-rounded.
 */

import type { AnnotationBox } from "./api";
import type { OverlayState } from "./state";

export const COLORS = {
  product: "#f094b8", // pink
  pii: "#d64541", // red
  order: "#e59449", // orange
  inputEmpty: "#8e62bf", // purple
  inputFilled: "#eecf6d", // yellow
  inputPristine: "#9a9a9a", // grey
} as const;

export interface Ctx2DLike {
  setTransform(a: number, b: number, c: number, d: number, e: number, f: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  strokeStyle: string | unknown;
  lineWidth: number;
}

export function boxColor(ann: AnnotationBox, fillState: string): string {
  if (ann.element_kind === "input") {
    if (ann.has_value) return COLORS.inputFilled;
    return fillState === "empty" ? COLORS.inputPristine : COLORS.inputEmpty;
  }
  return COLORS[ann.kind];
}

export function visibleBoxes(
  annotations: AnnotationBox[], state: OverlayState,
): AnnotationBox[] {
  return annotations.filter((a) => state.visibleFamilies.has(a.kind));
}

export function drawOverlay(
  ctx: Ctx2DLike, annotations: AnnotationBox[], state: OverlayState,
  dims: [number, number],
): number {
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  ctx.clearRect(0, 0, dims[0] * state.zoom, dims[1] * state.zoom);
  ctx.setTransform(state.zoom, 0, 0, state.zoom, 0, 0);
  ctx.lineWidth = 2 / state.zoom;
  let drawn = 0;
  for (const ann of visibleBoxes(annotations, state)) {
    ctx.strokeStyle = boxColor(ann, state.fillState);
    const [x, y, w, h] = ann.box;
    ctx.strokeRect(x, y, w, h);
    drawn++;
  }
  return drawn;
}
