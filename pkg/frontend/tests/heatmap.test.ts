// Heatmap equivalence: replaying the fixture event stream must reproduce
// the server-side heatmap export cell for cell.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { HeatmapModel } from "../src/heatmap.js";
import type { AttemptRecord, StartedEvent } from "../src/types.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

interface FixtureLine {
  event: "attempt" | "lifecycle";
  id?: number;
  data: Record<string, unknown>;
}

function loadFixture(): { started: StartedEvent; attempts: AttemptRecord[] } {
  const lines = readFileSync(join(FIXTURES, "events.jsonl"), "utf-8")
    .trim()
    .split("\n")
    .map((line) => JSON.parse(line) as FixtureLine);
  const started = lines.find(
    (l) => l.event === "lifecycle" && l.data.phase === "started",
  )!.data as unknown as StartedEvent;
  const attempts = lines
    .filter((l) => l.event === "attempt")
    .map((l) => l.data as unknown as AttemptRecord);
  return { started, attempts };
}

function replay(): HeatmapModel {
  const { started, attempts } = loadFixture();
  const model = HeatmapModel.fromStarted(started);
  for (const record of attempts) {
    model.ingest(record);
  }
  return model;
}

describe("heatmap replay", () => {
  it("reproduces the server export byte for byte", () => {
    const expected = readFileSync(join(FIXTURES, "heatmap.csv"), "utf-8");
    expect(replay().toCsv()).toBe(expected);
  });

  it("cell counts equal received event counts", () => {
    const { attempts } = loadFixture();
    const model = replay();
    expect(model.received).toBe(attempts.length);
    expect(model.totalAttempts()).toBe(attempts.length);
  });

  it("is deterministic across replays", () => {
    expect(replay().toCsv()).toBe(replay().toCsv());
  });

  it("counts faults and bypasses into the color rate", () => {
    const model = new HeatmapModel({ x: 0, y: 0 }, { dx: 0, dy: 0 });
    const base = {
      v: 1,
      seq: 0,
      ts: "",
      pulse: { voltage: 500, width_ns: 73, probe: { diameter_mm: 4, winding: "CW" } },
      supply: { v_soc: 0.59, v_core: 1.1 },
      plan: { delay: 0, window: 0 },
      eff_delay: 0,
      payload: { kind: "ark_verify" },
      response: "",
      events: [] as [string, number][],
    };
    const at = (outcome: string) =>
      ({ ...base, pos: { x: 1.0, y: 2.0, z: 0 }, outcome }) as unknown as AttemptRecord;
    model.ingest(at("PayloadFault"));
    model.ingest(at("BypassSuccess"));
    model.ingest(at("NoEffect"));
    model.ingest(at("Crash"));
    const cell = model.cellAt(1.0, 2.0)!;
    expect(cell).toMatchObject({ attempts: 4, faults: 1, bypasses: 1, crashes: 1 });
    expect(model.rateOf(cell)).toBeCloseTo(0.5);
  });

  it("empty campaign yields a uniform zero map", () => {
    const model = new HeatmapModel({ x: 0, y: 0 }, { dx: 0, dy: 0 });
    expect(model.maxRate()).toBe(0);
    expect(model.toCsv()).toBe("x_mm,y_mm,attempts,faults,crashes,bypasses\n");
  });

  it("resuming from last-id does not double count", () => {
    const { started, attempts } = loadFixture();
    // First session sees records 0..k, reconnect replays k+1.. only.
    const k = 700;
    const model = HeatmapModel.fromStarted(started);
    for (const record of attempts.filter((r) => r.seq <= k)) model.ingest(record);
    for (const record of attempts.filter((r) => r.seq > k)) model.ingest(record);
    const expected = readFileSync(join(FIXTURES, "heatmap.csv"), "utf-8");
    expect(model.toCsv()).toBe(expected);
  });
});
