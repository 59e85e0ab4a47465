// Save workflow: short-circuit clean documents, update the revision on
// success, surface conflicts for the reload-or-overwrite dialog.

import type { ApiClient, SaveOutcome } from "./api";
import { cloneDoc, isDirty, markSaved, type EditorState } from "./state";

export interface SaveResult {
  state: EditorState;
  outcome: SaveOutcome;
}

export async function saveWorking(
  api: ApiClient,
  state: EditorState,
): Promise<SaveResult> {
  if (state.working === null || state.imageId === null) {
    return { state, outcome: { kind: "noop" } };
  }
  if (!isDirty(state)) {
    return { state, outcome: { kind: "noop" } };
  }
  const doc = cloneDoc(state.working);
  const outcome = await api.putAnnotations(state.imageId, state.revision, doc);
  if (outcome.kind === "saved") {
    return { state: markSaved(state, doc, outcome.revision), outcome };
  }
  return { state, outcome };
}

/** Conflict resolution: keep local edits and overwrite the server copy. */
export async function overwriteRemote(
  api: ApiClient,
  state: EditorState,
  currentRevision: number,
): Promise<SaveResult> {
  if (state.working === null || state.imageId === null) {
    return { state, outcome: { kind: "noop" } };
  }
  const doc = cloneDoc(state.working);
  const outcome = await api.putAnnotations(state.imageId, currentRevision, doc);
  if (outcome.kind === "saved") {
    return { state: markSaved(state, doc, outcome.revision), outcome };
  }
  return { state, outcome };
}
