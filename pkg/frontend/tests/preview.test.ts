import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { PreviewScheduler } from "../src/preview";
import { dragLandmark } from "../src/state";
import type { AnnotationDoc, PreviewResult } from "../src/types";
import { loadedState, makeDoc } from "./helpers";

function makeResult(): PreviewResult {
  return {
    blob: new Blob(["png"]),
    holeFractions: { front: 0.1 },
    totalHoleFraction: 0.05,
  };
}

describe("PreviewScheduler", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("two drags within 150 ms produce exactly one request", async () => {
    const sent: AnnotationDoc[] = [];
    const scheduler = new PreviewScheduler({
      send: async (doc) => {
        sent.push(doc);
        return makeResult();
      },
      onResult: () => undefined,
    });

    const state = loadedState();
    const first = dragLandmark(state, 3, 100, 100);
    scheduler.request(first.working!);
    await vi.advanceTimersByTimeAsync(60);
    const second = dragLandmark(first, 3, 140, 90);
    scheduler.request(second.working!);
    await vi.advanceTimersByTimeAsync(149);
    expect(sent).toHaveLength(0); // still inside the debounce window
    await vi.advanceTimersByTimeAsync(1);
    expect(sent).toHaveLength(1);
    // Trailing edge: the body carries the LATEST coordinates.
    const lm = sent[0]!.landmarks.find((l) => l.id === 3)!;
    expect([lm.x, lm.y]).toEqual([140, 90]);
  });

  it("keeps at most one request in flight and coalesces the backlog", async () => {
    let resolveFirst: (r: PreviewResult) => void = () => undefined;
    const sent: AnnotationDoc[] = [];
    const scheduler = new PreviewScheduler({
      send: (doc) => {
        sent.push(doc);
        if (sent.length === 1) {
          return new Promise<PreviewResult>((resolve) => {
            resolveFirst = resolve;
          });
        }
        return Promise.resolve(makeResult());
      },
      onResult: () => undefined,
    });

    const state = loadedState();
    scheduler.request(state.working!);
    await vi.advanceTimersByTimeAsync(150);
    expect(sent).toHaveLength(1);
    expect(scheduler.inFlight).toBe(true);

    // Three more edits while the first request is still running.
    for (const x of [50, 60, 70]) {
      scheduler.request(dragLandmark(state, 0, x, 10).working!);
      await vi.advanceTimersByTimeAsync(150);
    }
    expect(sent).toHaveLength(1); // nothing new while in flight

    resolveFirst(makeResult());
    await vi.advanceTimersByTimeAsync(0);
    expect(sent).toHaveLength(2); // a single coalesced follow-up
    expect(sent[1]!.landmarks[0]!.x).toBe(70);
  });

  it("marks the preview stale immediately on request", async () => {
    let stale = 0;
    const scheduler = new PreviewScheduler({
      send: async () => makeResult(),
      onResult: () => undefined,
      onStale: () => {
        stale += 1;
      },
    });
    scheduler.request(makeDoc());
    expect(stale).toBe(1);
    await vi.advanceTimersByTimeAsync(150);
  });

  it("delivers results with the doc they were rendered from", async () => {
    const delivered: AnnotationDoc[] = [];
    const scheduler = new PreviewScheduler({
      send: async () => makeResult(),
      onResult: (doc) => delivered.push(doc),
    });
    const doc = makeDoc();
    scheduler.request(doc);
    await vi.advanceTimersByTimeAsync(150);
    expect(delivered).toEqual([doc]);
  });

  it("reports errors through onError and keeps accepting requests", async () => {
    const errors: unknown[] = [];
    let calls = 0;
    const scheduler = new PreviewScheduler({
      send: async () => {
        calls += 1;
        if (calls === 1) throw new Error("boom");
        return makeResult();
      },
      onResult: () => undefined,
      onError: (e) => errors.push(e),
    });
    scheduler.request(makeDoc());
    await vi.advanceTimersByTimeAsync(150);
    expect(errors).toHaveLength(1);
    scheduler.request(makeDoc());
    await vi.advanceTimersByTimeAsync(150);
    expect(calls).toBe(2);
  });
});
