// Document shapes shared with the annotation service (docs/formats.md).

export interface Landmark {
  id: number;
  x: number;
  y: number;
  visible: boolean;
}

export interface AnnotationDoc {
  format_version: number;
  image_id: string;
  image_size: [number, number];
  garment_kind: string;
  landmarks: Landmark[];
}

export interface SchemaAnchor {
  landmark: string | number;
  u: number;
  v: number;
}

export interface SchemaPanel {
  name: string;
  uv_rect: [number, number, number, number];
  fill_role: "direct" | "back_fill" | "mirror_fill";
  mirror_of?: string;
  anchors: SchemaAnchor[];
}

export interface SchemaDoc {
  format_version: number;
  garment_kind: string;
  landmark_names: string[];
  atlas_size: { w: number; h: number };
  panels: SchemaPanel[];
}

export interface ImageInfo {
  id: string;
  width: number;
  height: number;
}

export interface PreviewResult {
  blob: Blob;
  holeFractions: Record<string, number>;
  totalHoleFraction: number;
}
