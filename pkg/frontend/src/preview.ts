// Preview request scheduling: trailing-edge debounce with at most one
// request in flight. While a newer working state exists than the one
// previewed, the consumer dims the stale image via onStale.

import type { AnnotationDoc, PreviewResult } from "./types";

export interface PreviewSchedulerOptions {
  send: (doc: AnnotationDoc) => Promise<PreviewResult>;
  onResult: (doc: AnnotationDoc, result: PreviewResult) => void;
  onStale?: () => void;
  onError?: (error: unknown) => void;
  delayMs?: number;
}

export class PreviewScheduler {
  private readonly send: PreviewSchedulerOptions["send"];
  private readonly onResult: PreviewSchedulerOptions["onResult"];
  private readonly onStale?: () => void;
  private readonly onError?: (error: unknown) => void;
  private readonly delayMs: number;

  private timer: ReturnType<typeof setTimeout> | null = null;
  private pending: AnnotationDoc | null = null;
  private inFlightCount = 0;

  constructor(options: PreviewSchedulerOptions) {
    this.send = options.send;
    this.onResult = options.onResult;
    this.onStale = options.onStale;
    this.onError = options.onError;
    this.delayMs = options.delayMs ?? 150;
  }

  get inFlight(): boolean {
    return this.inFlightCount > 0;
  }

  /** Schedule a preview of `doc`, superseding any queued request. */
  request(doc: AnnotationDoc): void {
    this.pending = doc;
    this.onStale?.();
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.flush();
    }, this.delayMs);
  }

  /** Fire immediately (used on image load). */
  requestNow(doc: AnnotationDoc): void {
    this.pending = doc;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    void this.flush();
  }

  private async flush(): Promise<void> {
    if (this.inFlightCount > 0 || this.pending === null) return;
    const doc = this.pending;
    this.pending = null;
    this.inFlightCount += 1;
    try {
      const result = await this.send(doc);
      this.onResult(doc, result);
    } catch (error) {
      this.onError?.(error);
    } finally {
      this.inFlightCount -= 1;
      if (this.pending !== null) void this.flush();
    }
  }
}
