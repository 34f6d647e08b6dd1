// WebSocket session client. The socket is injected behind a minimal
// interface so the protocol logic runs under vitest without a browser.

import {
  parseServerMessage,
  type ErrorMessage,
  type GlossMessage,
  type StatsMessage,
  type TunableField,
} from "./protocol.js";
import { UiSessionState, type PendingTune } from "./state.js";

export interface SocketLike {
  binaryType: string;
  bufferedAmount: number;
  send(data: string | ArrayBuffer | Blob): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export interface SessionClientOptions {
  url: string;
  state?: UiSessionState;
  createSocket?: (url: string) => SocketLike;
  onGloss?: (msg: GlossMessage) => void;
  onStats?: (msg: StatsMessage) => void;
  onConfigSettled?: (settled: PendingTune | null) => void;
  onConfigRejected?: (rejected: PendingTune | null, error: ErrorMessage) => void;
  onStatusChange?: (status: string) => void;
  onServerError?: (error: ErrorMessage) => void;
}

export class SessionClient {
  readonly state: UiSessionState;
  private readonly opts: SessionClientOptions;
  private socket: SocketLike | null = null;

  constructor(opts: SessionClientOptions) {
    this.opts = opts;
    this.state = opts.state ?? new UiSessionState();
  }

  connect(): void {
    const create =
      this.opts.createSocket ??
      ((url: string) => new WebSocket(url) as unknown as SocketLike);
    const socket = create(this.opts.url);
    socket.binaryType = "arraybuffer";
    socket.onopen = () => {
      this.state.setStatus("open");
      this.opts.onStatusChange?.("open");
    };
    socket.onmessage = (ev) => {
      if (typeof ev.data === "string") this.handleText(ev.data);
    };
    socket.onclose = () => {
      this.state.setStatus("closed");
      this.opts.onStatusChange?.("closed");
    };
    socket.onerror = () => {
      this.state.setStatus("error");
      this.opts.onStatusChange?.("error");
    };
    this.socket = socket;
    this.state.setStatus("connecting");
  }

  get bufferedAmount(): number {
    return this.socket?.bufferedAmount ?? 0;
  }

  get isOpen(): boolean {
    return this.state.status === "open";
  }

  sendFrame(frame: ArrayBuffer | Blob): void {
    if (this.socket && this.isOpen) this.socket.send(frame);
  }

  /** Request one tunable change; the UI snaps only on the server's ack. */
  tune(field: TunableField, value: number): void {
    if (!this.socket || !this.isOpen) return;
    this.state.beginTune(field, value);
    this.socket.send(JSON.stringify({ type: "config", [field]: value }));
  }

  close(): void {
    this.socket?.close();
    this.socket = null;
  }

  private handleText(raw: string): void {
    const msg = parseServerMessage(raw);
    if (msg === null) {
      console.warn("ignoring malformed server message", raw);
      return;
    }
    switch (msg.type) {
      case "hello": {
        const replay = this.state.lastAckedTunables;
        this.state.acceptHello(msg.effective_config);
        this.opts.onStatusChange?.("open");
        // a reconnect must restore what the operator had dialed in
        if (replay !== null) {
          this.socket?.send(JSON.stringify({ type: "config", ...replay }));
        }
        break;
      }
      case "gloss":
        this.state.appendGloss(
          msg.label,
          msg.confidence,
          msg.frame_start,
          msg.frame_end
        );
        this.opts.onGloss?.(msg);
        break;
      case "stats":
        this.state.updateStats(msg);
        this.opts.onStats?.(msg);
        break;
      case "config": {
        const settled = this.state.acceptConfig(msg.effective_config);
        this.opts.onConfigSettled?.(settled);
        break;
      }
      case "error": {
        if (this.state.pendingTune !== null) {
          const rejected = this.state.rejectConfig();
          this.opts.onConfigRejected?.(rejected, msg);
        } else {
          this.opts.onServerError?.(msg);
        }
        break;
      }
    }
  }
}
