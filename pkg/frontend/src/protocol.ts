// Message types for the recognition service WebSocket protocol.
//
// The server speaks JSON text messages; the client additionally sends
// binary JPEG frames. Everything the UI knows about the session comes
// from these messages — the client never invents config values locally.

export interface EffectiveConfig {
  window_len: number;
  stride_fraction: number;
  avg_size: number;
  threshold: number;
  [extra: string]: unknown;
}

export interface HelloMessage {
  type: "hello";
  session_id: string;
  vocab_size: number;
  window_len: number;
  effective_config: EffectiveConfig;
}

export interface GlossMessage {
  type: "gloss";
  label: string;
  confidence: number;
  frame_start: number;
  frame_end: number;
}

export interface StatsMessage {
  type: "stats";
  pred_per_sec: number;
  frames_received: number;
  frames_dropped: number;
  windows_inferred: number;
  windows_dropped: number;
  events_emitted: number;
  latency_ms: number;
}

export interface ConfigAckMessage {
  type: "config";
  effective_config: EffectiveConfig;
}

export interface ErrorMessage {
  type: "error";
  code: string;
  detail: string;
}

export type ServerMessage =
  | HelloMessage
  | GlossMessage
  | StatsMessage
  | ConfigAckMessage
  | ErrorMessage;

export type TunableField = "threshold" | "avg_size" | "stride_fraction";

export const TUNABLE_FIELDS: TunableField[] = [
  "threshold",
  "avg_size",
  "stride_fraction",
];

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null;
}

function hasConfigShape(v: unknown): v is EffectiveConfig {
  return (
    isRecord(v) &&
    typeof v.window_len === "number" &&
    typeof v.stride_fraction === "number" &&
    typeof v.avg_size === "number" &&
    typeof v.threshold === "number"
  );
}

/**
 * Parse one text frame from the server. Returns null for anything
 * malformed — the UI logs and ignores such frames rather than dying.
 */
export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (!isRecord(data) || typeof data.type !== "string") return null;
  switch (data.type) {
    case "hello":
      if (
        typeof data.vocab_size === "number" &&
        typeof data.window_len === "number" &&
        hasConfigShape(data.effective_config)
      ) {
        return data as unknown as HelloMessage;
      }
      return null;
    case "gloss":
      if (
        typeof data.label === "string" &&
        typeof data.confidence === "number" &&
        data.confidence >= 0 &&
        data.confidence <= 1
      ) {
        return data as unknown as GlossMessage;
      }
      return null;
    case "stats":
      if (typeof data.pred_per_sec === "number") {
        return data as unknown as StatsMessage;
      }
      return null;
    case "config":
      if (hasConfigShape(data.effective_config)) {
        return data as unknown as ConfigAckMessage;
      }
      return null;
    case "error":
      if (typeof data.code === "string") {
        return data as unknown as ErrorMessage;
      }
      return null;
    default:
      return null;
  }
}
