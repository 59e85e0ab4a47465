import type { AnnotationDoc, SchemaDoc } from "../src/types";
import { initialState, loadDocument, type EditorState } from "../src/state";

export function makeSchema(): SchemaDoc {
  return {
    format_version: 1,
    garment_kind: "trousers",
    landmark_names: [
      "waist_left",
      "waist_center",
      "waist_right",
      "crotch",
      "hem_left_outer",
      "hem_left_inner",
      "hem_right_inner",
      "hem_right_outer",
    ],
    atlas_size: { w: 512, h: 512 },
    panels: [
      {
        name: "front",
        uv_rect: [0, 0, 0.5, 0.9375],
        fill_role: "direct",
        anchors: [
          { landmark: "waist_left", u: 0.08, v: 0.03 },
          { landmark: "waist_center", u: 0.25, v: 0.035 },
          { landmark: "waist_right", u: 0.42, v: 0.03 },
          { landmark: "crotch", u: 0.25, v: 0.4 },
          { landmark: "hem_left_outer", u: 0.06, v: 0.9 },
          { landmark: "hem_left_inner", u: 0.19, v: 0.9 },
          { landmark: "hem_right_inner", u: 0.31, v: 0.9 },
          { landmark: "hem_right_outer", u: 0.44, v: 0.9 },
        ],
      },
      {
        name: "back",
        uv_rect: [0.5, 0, 1.0, 0.9375],
        fill_role: "back_fill",
        anchors: [],
      },
    ],
  };
}

export function makeDoc(): AnnotationDoc {
  return {
    format_version: 1,
    image_id: "img0",
    image_size: [400, 500],
    garment_kind: "trousers",
    landmarks: Array.from({ length: 8 }, (_, i) => ({
      id: i,
      x: 40 + i * 40,
      y: 30 + i * 50,
      visible: true,
    })),
  };
}

export function loadedState(revision = 1): EditorState {
  return loadDocument(initialState(), "img0", makeDoc(), revision);
}
