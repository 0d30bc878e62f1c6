// Live-chart integrity: after consuming a completed run's metric stream —
// including the duplicates produced by replay-then-live subscription and by
// reconnects — the chart point sets must equal the metrics file content.
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { MetricStore, SseParser } from "../src/charts.js";
import type { MetricRecord } from "../src/types.js";

const FIXTURE = join(__dirname, "fixtures", "metrics_sample.jsonl");

function fileRecords(): MetricRecord[] {
  return readFileSync(FIXTURE, "utf-8")
    .split("\n")
    .filter((l) => l.trim() !== "")
    .map((l) => JSON.parse(l) as MetricRecord);
}

function asSse(records: MetricRecord[]): string {
  return records.map((r) => `data: ${JSON.stringify(r)}\n\n`).join("");
}

describe("metric store vs metrics file", () => {
  it("chart point sets equal the file content for every metric name", () => {
    const records = fileRecords();
    const store = new MetricStore();

    // first connection: replays the head of the file, then drops
    const feedThrough = (chunk: string) => parser.feed(chunk);
    let parser = new SseParser((event, data) => {
      if (event !== "end") store.appendLine(data);
    });
    feedThrough(asSse(records.slice(0, 40)));

    // reconnect: the server replays everything from the requested step,
    // so the first 40 records arrive a second time
    parser = new SseParser((event, data) => {
      if (event !== "end") store.appendLine(data);
    });
    feedThrough(asSse(records));
    feedThrough("event: end\ndata: {}\n\n");

    const byName = new Map<string, Set<string>>();
    for (const r of records) {
      if (!byName.has(r.name)) byName.set(r.name, new Set());
      byName.get(r.name)!.add(`${r.step}:${r.value}`);
    }
    expect(new Set(store.names())).toEqual(new Set(byName.keys()));
    for (const [name, expected] of byName) {
      const charted = new Set(store.get(name).map((p) => `${p.step}:${p.value}`));
      expect(charted).toEqual(expected);
      // and no duplicated points survive
      expect(store.get(name).length).toBe(expected.size);
    }
  });

  it("keeps each series sorted by step", () => {
    const store = new MetricStore();
    for (const r of fileRecords().reverse()) store.append(r);
    for (const name of store.names()) {
      const steps = store.get(name).map((p) => p.step);
      expect([...steps].sort((a, b) => a - b)).toEqual(steps);
    }
  });

  it("tracks the resume step for reconnects", () => {
    const store = new MetricStore();
    const records = fileRecords();
    for (const r of records) store.append(r);
    expect(store.lastStep).toBe(Math.max(...records.map((r) => r.step)));
  });
});

describe("SSE parser", () => {
  it("handles payloads split across arbitrary chunk boundaries", () => {
    const events: [string, string][] = [];
    const parser = new SseParser((e, d) => events.push([e, d]));
    const body = 'data: {"a": 1}\n\nevent: end\ndata: {}\n\n';
    for (const ch of body) parser.feed(ch); // one byte at a time
    expect(events).toEqual([
      ["message", '{"a": 1}'],
      ["end", "{}"],
    ]);
  });

  it("ignores comment/blank keep-alives", () => {
    const events: [string, string][] = [];
    const parser = new SseParser((e, d) => events.push([e, d]));
    parser.feed("\n\n: keep-alive\n\ndata: {}\n\n");
    expect(events).toEqual([["message", "{}"]]);
  });
});
