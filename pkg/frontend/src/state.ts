// Console state: mode gating, live trail, accuracy log, collection badges.
// No positioning math here beyond the running mean/std (n-1, matching the
// service) and display geometry; every estimate and error value comes from
// the service.

import type { Area, Estimate, SessionInfo } from "./types.js";

export type Mode = "survey" | "live" | "accuracy";

export const TRAIL_LIMIT = 50;

export interface AccuracyEntry {
  gtX: number;
  gtY: number;
  estimate: Estimate;
  errorM: number; // from the service eval record
}

export class ConsoleState {
  mode: Mode = "survey";
  sessionId: string | null = null;
  sessionState: SessionInfo["state"] = "Collecting";
  area: Area | null = null;
  gridSpacing = 1.0;
  selectedRp: string | null = null;
  heading: 0 | 90 | 180 | 270 = 0;
  readonly badges = new Map<string, number>(); // "pointId/headingDeg" -> count
  readonly trail: Estimate[] = [];
  readonly accuracyLog: AccuracyEntry[] = [];
  skippedTests = 0; // insufficient-overlap outcomes; distinct non-error badge

  canEnter(mode: Mode): boolean {
    if (mode === "survey") {
      return true;
    }
    return this.sessionState === "Trained";
  }

  setMode(mode: Mode): boolean {
    if (!this.canEnter(mode)) {
      return false;
    }
    this.mode = mode;
    return true;
  }

  attachSession(info: SessionInfo): void {
    this.sessionId = info.session_id;
    this.sessionState = info.state;
    this.area = info.area;
  }

  recordCollected(pointId: string, headingDeg: number, count: number): void {
    const key = `${pointId}/${headingDeg}`;
    this.badges.set(key, (this.badges.get(key) ?? 0) + count);
  }

  collectedCount(pointId: string, headingDeg: number): number {
    return this.badges.get(`${pointId}/${headingDeg}`) ?? 0;
  }

  applyEstimate(estimate: Estimate): void {
    this.trail.push(estimate);
    if (this.trail.length > TRAIL_LIMIT) {
      this.trail.splice(0, this.trail.length - TRAIL_LIMIT);
    }
  }

  latestEstimate(): Estimate | null {
    return this.trail.length > 0 ? this.trail[this.trail.length - 1] : null;
  }

  // Ground truth must be clicked inside the room.
  validGroundTruth(x: number, y: number): boolean {
    if (!this.area) {
      return false;
    }
    return x >= 0 && x <= this.area.width && y >= 0 && y <= this.area.height;
  }

  recordAccuracy(entry: AccuracyEntry): void {
    this.accuracyLog.push(entry);
  }

  recordSkippedTest(): void {
    this.skippedTests += 1;
  }

  runningMean(): number {
    const n = this.accuracyLog.length;
    if (n === 0) {
      return NaN;
    }
    let total = 0;
    for (const entry of this.accuracyLog) {
      total += entry.errorM;
    }
    return total / n;
  }

  // n-1 convention, matching the service eval summary.
  runningStd(): number {
    const n = this.accuracyLog.length;
    if (n === 0) {
      return NaN;
    }
    if (n === 1) {
      return 0;
    }
    const mean = this.runningMean();
    let sum = 0;
    for (const entry of this.accuracyLog) {
      sum += (entry.errorM - mean) ** 2;
    }
    return Math.sqrt(sum / (n - 1));
  }
}
