// Client for the annotation service. Save outcomes are modeled as a
// discriminated union instead of exceptions because conflict (409) and
// validation (422) are ordinary UI flows.

import type {
  AnnotationDoc,
  ImageInfo,
  PreviewResult,
  SchemaDoc,
} from "./types";

export type SaveOutcome =
  | { kind: "saved"; revision: number }
  | { kind: "conflict"; currentRevision: number }
  | { kind: "invalid"; errors: string[] }
  | { kind: "noop" };

export interface PreviewOptions {
  atlasSize?: number;
  inpaint?: boolean;
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  imageUrl(imageId: string): string {
    return `${this.base}/api/images/${imageId}`;
  }

  async listImages(): Promise<ImageInfo[]> {
    const resp = await fetch(`${this.base}/api/images`);
    if (!resp.ok) throw new Error(`listing images failed: ${resp.status}`);
    const body = (await resp.json()) as { images: ImageInfo[] };
    return body.images;
  }

  async schema(garmentKind: string): Promise<SchemaDoc> {
    const resp = await fetch(`${this.base}/api/schema/${garmentKind}`);
    if (!resp.ok) throw new Error(`schema fetch failed: ${resp.status}`);
    return (await resp.json()) as SchemaDoc;
  }

  async getAnnotations(
    imageId: string,
  ): Promise<{ revision: number; annotations: AnnotationDoc } | null> {
    const resp = await fetch(`${this.base}/api/annotations/${imageId}`);
    if (resp.status === 404) return null;
    if (!resp.ok) throw new Error(`annotation fetch failed: ${resp.status}`);
    return (await resp.json()) as {
      revision: number;
      annotations: AnnotationDoc;
    };
  }

  async putAnnotations(
    imageId: string,
    revision: number,
    doc: AnnotationDoc,
  ): Promise<SaveOutcome> {
    const resp = await fetch(`${this.base}/api/annotations/${imageId}`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ revision, annotations: doc }),
    });
    if (resp.status === 409) {
      const body = (await resp.json()) as { current_revision: number };
      return { kind: "conflict", currentRevision: body.current_revision };
    }
    if (resp.status === 422) {
      const body = (await resp.json()) as { errors: string[] };
      return { kind: "invalid", errors: body.errors };
    }
    if (!resp.ok) throw new Error(`save failed: ${resp.status}`);
    const body = (await resp.json()) as { revision: number };
    return { kind: "saved", revision: body.revision };
  }

  async preview(
    doc: AnnotationDoc,
    options: PreviewOptions = {},
  ): Promise<PreviewResult> {
    const resp = await fetch(`${this.base}/api/preview`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        image_id: doc.image_id,
        annotations: doc,
        atlas_size: options.atlasSize ?? 512,
        inpaint: options.inpaint ?? false,
      }),
    });
    if (!resp.ok) {
      if (resp.status === 422) {
        const body = (await resp.json()) as { errors: string[] };
        throw new Error(`invalid annotations: ${body.errors.join("; ")}`);
      }
      throw new Error(`preview failed: ${resp.status}`);
    }
    const holeFractions: Record<string, number> = {};
    let total = 0;
    resp.headers.forEach((value, key) => {
      const match = /^x-hole-fraction-(.+)$/i.exec(key);
      if (!match) return;
      if (match[1]!.toLowerCase() === "total") total = parseFloat(value);
      else holeFractions[match[1]!] = parseFloat(value);
    });
    return {
      blob: await resp.blob(),
      holeFractions,
      totalHoleFraction: total,
    };
  }
}
