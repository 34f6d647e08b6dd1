import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { CaptureLoop } from "../src/capture.js";

function makeLoop(overrides: Partial<ConstructorParameters<typeof CaptureLoop>[0]> = {}) {
  const sent: (ArrayBuffer | Blob)[] = [];
  let buffered = 0;
  const loop = new CaptureLoop({
    grabFrame: async () => new ArrayBuffer(1000),
    send: (frame) => sent.push(frame),
    bufferedAmount: () => buffered,
    ...overrides,
  });
  return { loop, sent, setBuffered: (v: number) => (buffered = v) };
}

describe("CaptureLoop", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("sends roughly fps * seconds frames", async () => {
    const { loop, sent } = makeLoop({ fps: 25 });
    loop.start();
    for (let i = 0; i < 100; i++) {
      await vi.advanceTimersByTimeAsync(40);
    }
    loop.stop();
    expect(sent.length).toBeGreaterThanOrEqual(95);
    expect(sent.length).toBeLessThanOrEqual(101);
  });

  it("skips frames above the high-water mark and resumes below it", async () => {
    const { loop, sent, setBuffered } = makeLoop({ highWaterMark: 4096 });
    await loop.tick();
    expect(sent).toHaveLength(1);

    setBuffered(8192); // socket backed up: skip locally
    await loop.tick();
    await loop.tick();
    expect(sent).toHaveLength(1);
    expect(loop.framesSkipped).toBe(2);

    setBuffered(0); // drained: resume
    await loop.tick();
    expect(sent).toHaveLength(2);
  });

  it("null frames (camera warming up) are not sent", async () => {
    const { loop, sent } = makeLoop({ grabFrame: async () => null });
    await loop.tick();
    expect(sent).toHaveLength(0);
    expect(loop.framesSent).toBe(0);
  });

  it("a failing frame source stops the loop and reports camera loss", async () => {
    const lost: unknown[] = [];
    const { loop } = makeLoop({
      grabFrame: async () => {
        throw new Error("camera stream ended");
      },
      onCameraLost: (err) => lost.push(err),
    });
    loop.start();
    await loop.tick();
    expect(lost).toHaveLength(1);
    expect(loop.running).toBe(false);
  });

  it("does not overlap ticks when encoding is slower than the timer", async () => {
    let inFlight = 0;
    let maxInFlight = 0;
    const { loop } = makeLoop({
      grabFrame: async () => {
        inFlight += 1;
        maxInFlight = Math.max(maxInFlight, inFlight);
        await new Promise((r) => setTimeout(r, 100));
        inFlight -= 1;
        return new ArrayBuffer(8);
      },
      fps: 25,
    });
    loop.start();
    await vi.advanceTimersByTimeAsync(1000);
    loop.stop();
    expect(maxInFlight).toBe(1);
  });
});
