// UI session state, kept free of DOM so it can be tested headlessly.
//
// Two rules the rest of the client relies on:
//  - the displayed config is always the last server-acknowledged one,
//    never the optimistic local slider value;
//  - the transcript is append-only and ordered by arrival.

import type {
  EffectiveConfig,
  StatsMessage,
  TunableField,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "closed" | "error";

export interface TranscriptRow {
  label: string;
  confidence: number;
  frameStart: number;
  frameEnd: number;
  receivedAt: number;
}

export interface PendingTune {
  field: TunableField;
  requested: number;
  sentAt: number;
}

export interface Tunables {
  threshold: number;
  avg_size: number;
  stride_fraction: number;
}

export function tunablesOf(config: EffectiveConfig): Tunables {
  return {
    threshold: config.threshold,
    avg_size: config.avg_size,
    stride_fraction: config.stride_fraction,
  };
}

export class UiSessionState {
  status: ConnectionStatus = "connecting";
  effectiveConfig: EffectiveConfig | null = null;
  transcript: TranscriptRow[] = [];
  stats: StatsMessage | null = null;
  pendingTune: PendingTune | null = null;
  /** last server-acknowledged tunables; replayed after a reconnect */
  lastAckedTunables: Tunables | null = null;

  private readonly now: () => number;

  constructor(now: () => number = () => Date.now()) {
    this.now = now;
  }

  setStatus(status: ConnectionStatus): void {
    this.status = status;
  }

  acceptHello(config: EffectiveConfig): void {
    this.status = "open";
    this.effectiveConfig = config;
    if (this.lastAckedTunables === null) {
      this.lastAckedTunables = tunablesOf(config);
    }
  }

  appendGloss(
    label: string,
    confidence: number,
    frameStart: number,
    frameEnd: number
  ): TranscriptRow {
    const row: TranscriptRow = {
      label,
      confidence,
      frameStart,
      frameEnd,
      receivedAt: this.now(),
    };
    this.transcript.push(row);
    return row;
  }

  updateStats(stats: StatsMessage): void {
    this.stats = stats;
  }

  /** Local clear only; server decoder state is untouched. */
  clearTranscript(): void {
    this.transcript = [];
  }

  beginTune(field: TunableField, requested: number): void {
    this.pendingTune = { field, requested, sentAt: this.now() };
  }

  /** Server accepted a config change: snap to the effective values. */
  acceptConfig(config: EffectiveConfig): PendingTune | null {
    const settled = this.pendingTune;
    this.effectiveConfig = config;
    this.lastAckedTunables = tunablesOf(config);
    this.pendingTune = null;
    return settled;
  }

  /**
   * Server rejected a config change: the pending request is dropped and
   * the caller reverts its control to the returned acknowledged value.
   */
  rejectConfig(): PendingTune | null {
    const rejected = this.pendingTune;
    this.pendingTune = null;
    return rejected;
  }

  /** Value a slider for `field` should display right now. */
  displayedValue(field: TunableField): number | null {
    if (this.effectiveConfig === null) return null;
    return this.effectiveConfig[field] as number;
  }
}
