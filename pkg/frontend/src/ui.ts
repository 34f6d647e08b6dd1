// DOM layer: transcript list, stats meters, tuning sliders, toasts.

import type { SessionClient } from "./client.js";
import type { StatsMessage, TunableField } from "./protocol.js";
import type { TranscriptRow } from "./state.js";

interface SliderSpec {
  field: TunableField;
  inputId: string;
  valueId: string;
  format: (v: number) => string;
  parse: (raw: string) => number;
}

const SLIDERS: SliderSpec[] = [
  {
    field: "threshold",
    inputId: "threshold-slider",
    valueId: "threshold-value",
    format: (v) => v.toFixed(2),
    parse: parseFloat,
  },
  {
    field: "avg_size",
    inputId: "avg-size-slider",
    valueId: "avg-size-value",
    format: (v) => String(v),
    parse: (raw) => parseInt(raw, 10),
  },
  {
    field: "stride_fraction",
    inputId: "stride-slider",
    valueId: "stride-value",
    format: (v) => v.toFixed(2),
    parse: parseFloat,
  },
];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function appendTranscriptRow(row: TranscriptRow): void {
  const list = el<HTMLUListElement>("transcript");
  const item = document.createElement("li");
  item.className = "gloss-row";
  item.innerHTML = `<span class="label"></span><span class="conf"></span>`;
  (item.querySelector(".label") as HTMLElement).textContent = row.label;
  (item.querySelector(".conf") as HTMLElement).textContent =
    row.confidence.toFixed(2);
  list.appendChild(item);
  list.scrollTop = list.scrollHeight;
  markActivity();
}

let quiescenceTimer: ReturnType<typeof setTimeout> | null = null;

function markActivity(): void {
  const dot = el<HTMLElement>("activity");
  dot.classList.add("active");
  if (quiescenceTimer !== null) clearTimeout(quiescenceTimer);
  quiescenceTimer = setTimeout(() => dot.classList.remove("active"), 1500);
}

export function renderStats(stats: StatsMessage): void {
  el("stat-pred-rate").textContent = stats.pred_per_sec.toFixed(1);
  el("stat-latency").textContent = `${stats.latency_ms.toFixed(0)} ms`;
  el("stat-frames-dropped").textContent = String(stats.frames_dropped);
  el("stat-windows-dropped").textContent = String(stats.windows_dropped);
}

export function renderStatus(status: string): void {
  const badge = el<HTMLElement>("status");
  badge.textContent = status;
  badge.dataset.status = status;
}

export function showToast(text: string): void {
  const toast = el<HTMLElement>("toast");
  toast.textContent = text;
  toast.classList.add("visible");
  setTimeout(() => toast.classList.remove("visible"), 4000);
}

/** Snap every slider to the server-acknowledged config. */
export function syncSliders(client: SessionClient): void {
  for (const spec of SLIDERS) {
    const value = client.state.displayedValue(spec.field);
    if (value === null) continue;
    el<HTMLInputElement>(spec.inputId).value = String(value);
    el(spec.valueId).textContent = spec.format(value);
  }
}

export function wireSliders(client: SessionClient): void {
  for (const spec of SLIDERS) {
    const input = el<HTMLInputElement>(spec.inputId);
    input.addEventListener("change", () => {
      client.tune(spec.field, spec.parse(input.value));
    });
  }
  el<HTMLButtonElement>("clear-transcript").addEventListener("click", () => {
    client.state.clearTranscript();
    el("transcript").innerHTML = "";
  });
}
