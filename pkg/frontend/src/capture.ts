// Webcam capture loop: grab, JPEG-encode, send — with local frame
// skipping when the socket's outbound buffer is above the high-water
// mark. Timer and frame source are injected for testability.

export const DEFAULT_FPS = 25;
export const DEFAULT_JPEG_QUALITY = 0.8;
export const DEFAULT_HIGH_WATER_MARK = 1 << 20; // 1 MiB of unsent frames

export interface CaptureLoopOptions {
  /** produce one encoded frame, or null if the camera has no frame yet */
  grabFrame: () => Promise<ArrayBuffer | Blob | null>;
  send: (frame: ArrayBuffer | Blob) => void;
  bufferedAmount: () => number;
  fps?: number;
  highWaterMark?: number;
  setInterval?: (fn: () => void, ms: number) => ReturnType<typeof setInterval>;
  clearInterval?: (handle: ReturnType<typeof setInterval>) => void;
  onCameraLost?: (err: unknown) => void;
}

export class CaptureLoop {
  framesSent = 0;
  framesSkipped = 0;

  private readonly opts: CaptureLoopOptions;
  private handle: ReturnType<typeof setInterval> | null = null;
  private busy = false;

  constructor(opts: CaptureLoopOptions) {
    this.opts = opts;
  }

  get running(): boolean {
    return this.handle !== null;
  }

  start(): void {
    if (this.handle !== null) return;
    const fps = this.opts.fps ?? DEFAULT_FPS;
    const schedule = this.opts.setInterval ?? setInterval;
    this.handle = schedule(() => void this.tick(), 1000 / fps);
  }

  stop(): void {
    if (this.handle === null) return;
    (this.opts.clearInterval ?? clearInterval)(this.handle);
    this.handle = null;
  }

  async tick(): Promise<void> {
    if (this.busy) return; // encoding slower than the timer: drop, don't queue
    const hwm = this.opts.highWaterMark ?? DEFAULT_HIGH_WATER_MARK;
    if (this.opts.bufferedAmount() > hwm) {
      this.framesSkipped += 1;
      return;
    }
    this.busy = true;
    try {
      const frame = await this.opts.grabFrame();
      if (frame !== null) {
        this.opts.send(frame);
        this.framesSent += 1;
      }
    } catch (err) {
      this.stop();
      this.opts.onCameraLost?.(err);
    } finally {
      this.busy = false;
    }
  }
}

/**
 * Frame source backed by a <video> element and an offscreen canvas,
 * encoding JPEG at the configured quality.
 */
export function videoFrameGrabber(
  video: HTMLVideoElement,
  quality: number = DEFAULT_JPEG_QUALITY
): () => Promise<Blob | null> {
  const canvas = document.createElement("canvas");
  return () =>
    new Promise((resolve, reject) => {
      if (video.videoWidth === 0) {
        resolve(null);
        return;
      }
      if (!(video.srcObject as MediaStream | null)?.active) {
        reject(new Error("camera stream ended"));
        return;
      }
      canvas.width = video.videoWidth;
      canvas.height = video.videoHeight;
      const ctx = canvas.getContext("2d");
      if (!ctx) {
        reject(new Error("no 2d canvas context"));
        return;
      }
      ctx.drawImage(video, 0, 0);
      canvas.toBlob(
        (blob) => resolve(blob),
        "image/jpeg",
        quality
      );
    });
}
