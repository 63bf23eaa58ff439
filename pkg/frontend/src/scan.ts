// Scan providers: where "collect N" and live testing get their RSS scans.
// Real-device capture is out of scope for a browser, so scans are replayed
// from an uploaded JSONL file (survey samples or a recorded walk).

import type { Reading, SampleRecord, WalkEntry } from "./types.js";

export interface Scan {
  t: string;
  readings: Reading[];
  headingDeg: number | null;
  truth?: { x: number; y: number };
}

export interface ScanProvider {
  // next scan for the given survey selection, or any scan when unspecified;
  // null when the source is exhausted
  next(pointId?: string, headingDeg?: number): Scan | null;
  remaining(): number;
}

function parseJsonl(text: string): unknown[] {
  const out: unknown[] = [];
  for (const line of text.split("\n")) {
    const trimmed = line.trim();
    if (trimmed.length > 0) {
      out.push(JSON.parse(trimmed));
    }
  }
  return out;
}

// Replays survey samples; prefers records matching the selected reference
// point and heading so a recorded survey lines up with the operator's clicks.
export class SurveyReplayProvider implements ScanProvider {
  private records: SampleRecord[];
  private used: Set<number> = new Set();

  constructor(jsonlText: string) {
    this.records = parseJsonl(jsonlText) as SampleRecord[];
  }

  next(pointId?: string, headingDeg?: number): Scan | null {
    let fallback = -1;
    for (let i = 0; i < this.records.length; i++) {
      if (this.used.has(i)) {
        continue;
      }
      const r = this.records[i];
      if (pointId !== undefined && r.point_id === pointId && r.heading_deg === headingDeg) {
        this.used.add(i);
        return { t: r.t, readings: r.readings, headingDeg: r.heading_deg };
      }
      if (fallback < 0) {
        fallback = i;
      }
    }
    if (fallback < 0) {
      return null;
    }
    this.used.add(fallback);
    const r = this.records[fallback];
    return { t: r.t, readings: r.readings, headingDeg: r.heading_deg };
  }

  remaining(): number {
    return this.records.length - this.used.size;
  }
}

// Replays a recorded walk in order; each scan carries its ground truth.
export class WalkReplayProvider implements ScanProvider {
  private entries: WalkEntry[];
  private cursor = 0;

  constructor(jsonlText: string) {
    this.entries = parseJsonl(jsonlText) as WalkEntry[];
  }

  next(): Scan | null {
    if (this.cursor >= this.entries.length) {
      return null;
    }
    const e = this.entries[this.cursor++];
    return {
      t: e.t,
      readings: e.readings,
      headingDeg: e.heading_deg,
      truth: { x: e.x, y: e.y },
    };
  }

  remaining(): number {
    return this.entries.length - this.cursor;
  }

  rewind(): void {
    this.cursor = 0;
  }
}
