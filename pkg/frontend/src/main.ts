// DOM wiring. All decision logic lives in state.ts / preview.ts /
// save.ts; this file only translates events and renders.

import { ApiClient } from "./api";
import { PreviewScheduler } from "./preview";
import { saveWorking, overwriteRemote } from "./save";
import {
  dragLandmark,
  initialState,
  isDirty,
  isPreviewStale,
  loadDocument,
  markPreviewed,
  nudgeLandmark,
  panelsBelowMinimum,
  toggleVisibility,
  type EditorState,
} from "./state";
import type { AnnotationDoc, SchemaDoc } from "./types";

const api = new ApiClient("");
let state: EditorState = initialState();
let schema: SchemaDoc | null = null;
let previewUrl: string | null = null;
let dragging: number | null = null;

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const imageSelect = $("image-select") as unknown as HTMLSelectElement;
const stage = $("stage");
const photo = $("photo") as unknown as HTMLImageElement;
const markers = $("markers");
const landmarkList = $("landmark-list");
const previewImg = $("preview") as unknown as HTMLImageElement;
const holeStats = $("hole-stats");
const warnings = $("panel-warnings");
const saveButton = $("save-button") as unknown as HTMLButtonElement;
const statusLine = $("status-line");
const toast = $("toast");

function setState(next: EditorState): void {
  state = next;
  render();
}

function showToast(message: string): void {
  toast.textContent = message;
  toast.classList.add("visible");
  setTimeout(() => toast.classList.remove("visible"), 4000);
}

const scheduler = new PreviewScheduler({
  send: (doc) => api.preview(doc),
  onStale: () => previewImg.classList.add("stale"),
  onResult: (doc, result) => {
    if (previewUrl) URL.revokeObjectURL(previewUrl);
    previewUrl = URL.createObjectURL(result.blob);
    previewImg.src = previewUrl;
    setState(markPreviewed(state, doc));
    const parts = Object.entries(result.holeFractions)
      .sort(([a], [b]) => a.localeCompare(b))
      .map(([name, frac]) => `${name}: ${(frac * 100).toFixed(1)}%`);
    holeStats.textContent = `holes — ${parts.join("  ")}`;
    if (!isPreviewStale(state)) previewImg.classList.remove("stale");
  },
  onError: (error) => {
    showToast(`preview failed: ${String(error)}`);
  },
});

function workingOrThrow(): AnnotationDoc {
  if (!state.working) throw new Error("no document loaded");
  return state.working;
}

function schedulePreview(): void {
  if (state.working) scheduler.request(state.working);
}

// ---------------------------------------------------------------------------
// Rendering

function imageScale(): number {
  if (!state.working) return 1;
  return photo.clientWidth / state.working.image_size[0];
}

function render(): void {
  renderMarkers();
  renderLandmarkList();
  renderWarnings();
  saveButton.disabled = !isDirty(state);
  statusLine.textContent = state.working
    ? `${state.imageId} — revision ${state.revision}` +
      (isDirty(state) ? " (unsaved changes)" : "")
    : "no image loaded";
  previewImg.classList.toggle("stale", isPreviewStale(state));
}

function renderMarkers(): void {
  markers.replaceChildren();
  if (!state.working || !schema) return;
  const scale = imageScale();
  for (const lm of state.working.landmarks) {
    if (!lm.visible) continue;
    const dot = document.createElement("div");
    dot.className = "marker" + (state.selected === lm.id ? " selected" : "");
    dot.style.left = `${lm.x * scale}px`;
    dot.style.top = `${lm.y * scale}px`;
    dot.dataset.id = String(lm.id);
    dot.title = schema.landmark_names[lm.id] ?? `landmark ${lm.id}`;
    const label = document.createElement("span");
    label.textContent = String(lm.id);
    dot.appendChild(label);
    markers.appendChild(dot);
  }
}

function renderLandmarkList(): void {
  landmarkList.replaceChildren();
  if (!state.working || !schema) return;
  for (const lm of state.working.landmarks) {
    const row = document.createElement("label");
    row.className = "landmark-row" + (state.selected === lm.id ? " selected" : "");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = lm.visible;
    box.addEventListener("change", () => {
      setState(toggleVisibility(state, lm.id));
      schedulePreview();
    });
    const name = document.createElement("span");
    name.textContent = `${lm.id} ${schema.landmark_names[lm.id] ?? ""}`;
    name.addEventListener("click", (ev) => {
      ev.preventDefault();
      setState({ ...state, selected: lm.id });
    });
    row.append(box, name);
    landmarkList.appendChild(row);
  }
}

function renderWarnings(): void {
  warnings.replaceChildren();
  if (!state.working || !schema) return;
  for (const panel of panelsBelowMinimum(schema, state.working)) {
    const badge = document.createElement("span");
    badge.className = "badge";
    badge.textContent = `${panel}: <3 landmarks, renders as hole`;
    warnings.appendChild(badge);
  }
}

// ---------------------------------------------------------------------------
// Events

function eventToImageCoords(ev: PointerEvent): [number, number] {
  const rect = photo.getBoundingClientRect();
  const scale = imageScale();
  return [(ev.clientX - rect.left) / scale, (ev.clientY - rect.top) / scale];
}

stage.addEventListener("pointerdown", (ev) => {
  const target = ev.target as HTMLElement;
  const marker = target.closest(".marker") as HTMLElement | null;
  if (marker?.dataset.id) {
    dragging = Number(marker.dataset.id);
    setState({ ...state, selected: dragging });
    stage.setPointerCapture(ev.pointerId);
    ev.preventDefault();
  }
});

stage.addEventListener("pointermove", (ev) => {
  if (dragging === null) return;
  const [x, y] = eventToImageCoords(ev);
  setState(dragLandmark(state, dragging, x, y));
  schedulePreview();
});

stage.addEventListener("pointerup", (ev) => {
  if (dragging !== null) stage.releasePointerCapture(ev.pointerId);
  dragging = null;
});

document.addEventListener("keydown", (ev) => {
  if (state.selected === null || !state.working) return;
  const dirs: Record<string, [number, number]> = {
    ArrowLeft: [-1, 0],
    ArrowRight: [1, 0],
    ArrowUp: [0, -1],
    ArrowDown: [0, 1],
  };
  const dir = dirs[ev.key];
  if (!dir) return;
  if ((ev.target as HTMLElement).tagName === "INPUT") return;
  ev.preventDefault();
  setState(nudgeLandmark(state, state.selected, dir[0], dir[1], ev.shiftKey));
  schedulePreview();
});

saveButton.addEventListener("click", () => {
  void (async () => {
    const { state: next, outcome } = await saveWorking(api, state);
    setState(next);
    if (outcome.kind === "saved") {
      showToast(`saved revision ${outcome.revision}`);
    } else if (outcome.kind === "conflict") {
      const overwrite = window.confirm(
        "Someone saved a newer revision. OK to overwrite it with your " +
          "version; Cancel to reload theirs (discarding your edits).",
      );
      if (overwrite) {
        const result = await overwriteRemote(api, state, outcome.currentRevision);
        setState(result.state);
        if (result.outcome.kind === "saved") {
          showToast(`overwrote as revision ${result.outcome.revision}`);
        }
      } else {
        await openImage(state.imageId!);
      }
    } else if (outcome.kind === "invalid") {
      showToast(`rejected: ${outcome.errors.join("; ")}`);
    }
  })();
});

imageSelect.addEventListener("change", () => {
  if (imageSelect.value) void openImage(imageSelect.value);
});

// ---------------------------------------------------------------------------
// Bootstrap

async function openImage(imageId: string): Promise<void> {
  const record = await api.getAnnotations(imageId);
  if (!record) {
    showToast(
      `no annotations for ${imageId}; start the service with ` +
        "--seed-defaults for a starting layout",
    );
    return;
  }
  const doc = record.annotations;
  if (!schema || schema.garment_kind !== doc.garment_kind) {
    schema = await api.schema(doc.garment_kind);
  }
  photo.src = api.imageUrl(imageId);
  await photo.decode().catch(() => undefined);
  setState(loadDocument(state, imageId, doc, record.revision));
  scheduler.requestNow(workingOrThrow());
}

async function boot(): Promise<void> {
  const images = await api.listImages();
  imageSelect.replaceChildren(
    ...images.map((info) => {
      const opt = document.createElement("option");
      opt.value = info.id;
      opt.textContent = `${info.id} (${info.width}x${info.height})`;
      return opt;
    }),
  );
  if (images.length > 0) await openImage(images[0]!.id);
  window.addEventListener("resize", render);
}

void boot().catch((error) => showToast(`startup failed: ${String(error)}`));
