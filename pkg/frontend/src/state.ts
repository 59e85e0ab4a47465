// Editor state and its pure transitions. Everything here is
// synchronous and framework-free so the contract tests can drive it
// without a DOM.

import type { AnnotationDoc, SchemaDoc } from "./types";

export interface EditorState {
  imageId: string | null;
  working: AnnotationDoc | null;
  /** Payload at the last saved revision (null before any save/load). */
  saved: AnnotationDoc | null;
  /** Last saved revision; 0 when the document has never been saved. */
  revision: number;
  selected: number | null;
  /** Document the currently displayed preview was rendered from. */
  previewed: AnnotationDoc | null;
}

export function initialState(): EditorState {
  return {
    imageId: null,
    working: null,
    saved: null,
    revision: 0,
    selected: null,
    previewed: null,
  };
}

export function cloneDoc(doc: AnnotationDoc): AnnotationDoc {
  return {
    ...doc,
    image_size: [doc.image_size[0], doc.image_size[1]],
    landmarks: doc.landmarks.map((lm) => ({ ...lm })),
  };
}

export function docsEqual(a: AnnotationDoc | null, b: AnnotationDoc | null): boolean {
  if (a === null || b === null) return a === b;
  if (a.image_id !== b.image_id || a.landmarks.length !== b.landmarks.length) {
    return false;
  }
  return a.landmarks.every((lm, i) => {
    const other = b.landmarks[i]!;
    return (
      lm.id === other.id &&
      lm.x === other.x &&
      lm.y === other.y &&
      lm.visible === other.visible
    );
  });
}

export function loadDocument(
  state: EditorState,
  imageId: string,
  doc: AnnotationDoc,
  revision: number,
): EditorState {
  return {
    ...state,
    imageId,
    working: cloneDoc(doc),
    saved: revision > 0 ? cloneDoc(doc) : null,
    revision,
    selected: null,
    previewed: null,
  };
}

/** The working copy differs from what the server last acknowledged. */
export function isDirty(state: EditorState): boolean {
  if (state.working === null) return false;
  return !docsEqual(state.working, state.saved);
}

/** The displayed preview corresponds to an older working state. */
export function isPreviewStale(state: EditorState): boolean {
  if (state.working === null) return false;
  return !docsEqual(state.working, state.previewed);
}

function withLandmark(
  state: EditorState,
  id: number,
  update: (lm: { x: number; y: number; visible: boolean }) => void,
): EditorState {
  if (state.working === null) return state;
  const doc = cloneDoc(state.working);
  const lm = doc.landmarks.find((l) => l.id === id);
  if (!lm) throw new Error(`unknown landmark id ${id}`);
  update(lm);
  return { ...state, working: doc };
}

const clamp = (v: number, lo: number, hi: number) => Math.min(Math.max(v, lo), hi);

/** Move a landmark; positions clamp to the image rectangle. */
export function dragLandmark(
  state: EditorState,
  id: number,
  x: number,
  y: number,
): EditorState {
  const next = withLandmark(state, id, (lm) => {
    const [w, h] = state.working!.image_size;
    lm.x = clamp(x, 0, w);
    lm.y = clamp(y, 0, h);
  });
  return { ...next, selected: id };
}

/** Arrow-key nudge: 1 px, or 5 px with shift. */
export function nudgeLandmark(
  state: EditorState,
  id: number,
  dx: number,
  dy: number,
  coarse = false,
): EditorState {
  const step = coarse ? 5 : 1;
  const current = state.working?.landmarks.find((l) => l.id === id);
  if (!current) return state;
  return dragLandmark(state, id, current.x + dx * step, current.y + dy * step);
}

export function toggleVisibility(state: EditorState, id: number): EditorState {
  return withLandmark(state, id, (lm) => {
    lm.visible = !lm.visible;
  });
}

export function markPreviewed(state: EditorState, doc: AnnotationDoc): EditorState {
  return { ...state, previewed: cloneDoc(doc) };
}

export function markSaved(
  state: EditorState,
  doc: AnnotationDoc,
  revision: number,
): EditorState {
  return { ...state, saved: cloneDoc(doc), revision };
}

/**
 * Names of direct-fill panels left with fewer than three visible
 * anchor landmarks; these will render as all-hole and deserve a
 * warning badge.
 */
export function panelsBelowMinimum(
  schema: SchemaDoc,
  doc: AnnotationDoc,
): string[] {
  const visible = new Set(
    doc.landmarks.filter((lm) => lm.visible).map((lm) => lm.id),
  );
  const idOf = (ref: string | number): number =>
    typeof ref === "number" ? ref : schema.landmark_names.indexOf(ref);
  return schema.panels
    .filter((p) => p.fill_role === "direct")
    .filter(
      (p) => p.anchors.filter((a) => visible.has(idOf(a.landmark))).length < 3,
    )
    .map((p) => p.name);
}
