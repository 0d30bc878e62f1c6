/** Append-only per-metric series fed by the server-sent metric stream.
 * Chart data is byte-derived from the stream: no smoothing, no resampling.
 */

import { MetricRecord } from "./types.js";

export interface Point {
  step: number;
  value: number;
}

export class MetricStore {
  private series = new Map<string, Point[]>();
  private seen = new Set<string>();
  /** Highest step observed; reconnects resume from here. */
  lastStep = 0;

  append(record: MetricRecord): boolean {
    const key = `${record.name}@${record.step}`;
    if (this.seen.has(key)) return false; // replayed duplicate
    this.seen.add(key);
    let pts = this.series.get(record.name);
    if (!pts) {
      pts = [];
      this.series.set(record.name, pts);
    }
    // records arrive step-ordered per name; keep the invariant if not
    const pt = { step: record.step, value: record.value };
    if (pts.length && pts[pts.length - 1].step > record.step) {
      let i = pts.length;
      while (i > 0 && pts[i - 1].step > record.step) i--;
      pts.splice(i, 0, pt);
    } else {
      pts.push(pt);
    }
    if (record.step > this.lastStep) this.lastStep = record.step;
    return true;
  }

  appendLine(jsonLine: string): boolean {
    return this.append(JSON.parse(jsonLine) as MetricRecord);
  }

  names(): string[] {
    return [...this.series.keys()].sort();
  }

  get(name: string): Point[] {
    return this.series.get(name) ?? [];
  }
}

/** Incremental parser for a text/event-stream body. Feed raw chunks;
 * receives `data:` payload lines and event names as they complete. */
export class SseParser {
  private buffer = "";
  private eventName = "message";
  private dataLines: string[] = [];

  constructor(
    private onEvent: (event: string, data: string) => void,
  ) {}

  feed(chunk: string): void {
    this.buffer += chunk;
    let idx: number;
    while ((idx = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, idx).replace(/\r$/, "");
      this.buffer = this.buffer.slice(idx + 1);
      if (line === "") {
        if (this.dataLines.length) {
          this.onEvent(this.eventName, this.dataLines.join("\n"));
        }
        this.eventName = "message";
        this.dataLines = [];
      } else if (line.startsWith("event:")) {
        this.eventName = line.slice("event:".length).trim();
      } else if (line.startsWith("data:")) {
        this.dataLines.push(line.slice("data:".length).trimStart());
      }
    }
  }
}

/** Subscribe a store to a run's metric stream, reconnecting with
 * from_step so interrupted subscriptions never leave gaps. */
export async function followMetrics(
  store: MetricStore,
  runId: string,
  opts: { fetchImpl?: typeof fetch; baseUrl?: string; onUpdate?: () => void } = {},
): Promise<void> {
  const fetchImpl = opts.fetchImpl ?? fetch;
  const base = opts.baseUrl ?? "";
  for (;;) {
    let ended = false;
    const parser = new SseParser((event, data) => {
      if (event === "end") {
        ended = true;
      } else if (data && data !== "{}") {
        if (store.appendLine(data)) opts.onUpdate?.();
      }
    });
    try {
      const resp = await fetchImpl(
        `${base}/api/runs/${runId}/metrics/stream?from_step=${store.lastStep}`,
      );
      if (!resp.ok || !resp.body) return;
      const reader = resp.body.getReader();
      const decoder = new TextDecoder();
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        parser.feed(decoder.decode(value, { stream: true }));
      }
    } catch {
      // connection dropped; fall through to reconnect
    }
    if (ended) return;
    await new Promise((r) => setTimeout(r, 1000));
  }
}

/** Draw one series as a polyline on a canvas. */
export function drawSeries(
  ctx: CanvasRenderingContext2D,
  points: Point[],
  width: number,
  height: number,
  label: string,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(label, 6, 12);
  if (points.length === 0) return;
  const xs = points.map((p) => p.step);
  const ys = points.map((p) => p.value);
  const x0 = Math.min(...xs);
  const x1 = Math.max(...xs);
  const y0 = Math.min(...ys);
  const y1 = Math.max(...ys);
  const sx = (s: number) => 4 + ((width - 8) * (s - x0)) / Math.max(1, x1 - x0);
  const sy = (v: number) =>
    height - 4 - ((height - 22) * (v - y0)) / Math.max(1e-12, y1 - y0);
  ctx.strokeStyle = "#2266cc";
  ctx.lineWidth = 1.25;
  ctx.beginPath();
  points.forEach((p, i) => (i === 0 ? ctx.moveTo(sx(p.step), sy(p.value)) : ctx.lineTo(sx(p.step), sy(p.value))));
  ctx.stroke();
  ctx.fillStyle = "#888";
  ctx.fillText(`${ys[ys.length - 1].toPrecision(4)}`, width - 60, 12);
}
