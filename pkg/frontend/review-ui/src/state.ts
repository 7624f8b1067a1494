/* Overlay view state: which class families are visible, which fill
 * state is shown, and the zoom factor. Exactly one fill state shows at
 * a time; zoom stays strictly positive. */

export type Family = "pii" | "product" | "order";

export const ALL_FAMILIES: Family[] = ["pii", "product", "order"];

export interface OverlayState {
  visibleFamilies: Set<Family>;
  fillState: string;
  zoom: number;
}

export function initialState(fillState = "full"): OverlayState {
  return { visibleFamilies: new Set(ALL_FAMILIES), fillState, zoom: 1 };
}

export function toggleFamily(state: OverlayState, family: Family): OverlayState {
  const visible = new Set(state.visibleFamilies);
  if (visible.has(family)) {
    visible.delete(family);
  } else {
    visible.add(family);
  }
  return { ...state, visibleFamilies: visible };
}

export function setFillState(state: OverlayState, fillState: string): OverlayState {
  return { ...state, fillState };
}

export function setZoom(state: OverlayState, zoom: number): OverlayState {
  if (!(zoom > 0)) {
    throw new RangeError(`zoom must be > 0, got ${zoom}`);
  }
  return { ...state, zoom };
}
