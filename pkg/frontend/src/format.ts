// Display formatting. All displayed numbers round half-up to 2 decimals;
// exports keep full precision.

import type { AccuracyEntry } from "./state.js";

export function round2(value: number): number {
  return Math.round(value * 100) / 100;
}

export function display2(value: number): string {
  return round2(value).toFixed(2);
}

export function errorLabel(errorM: number): string {
  return `${display2(errorM)} m`;
}

export function meanLabel(meanM: number, stdM: number, n: number): string {
  return `mean ${display2(meanM)} m · std ${display2(stdM)} m · n=${n}`;
}

// Matches the service CSV schema; floats at full precision.
export function accuracyLogToCsv(entries: AccuracyEntry[]): string {
  const lines = ["gt_x,gt_y,est_x,est_y,heading_est,error_m,matched_aps"];
  for (const e of entries) {
    lines.push(
      `${e.gtX},${e.gtY},${e.estimate.x},${e.estimate.y},` +
        `${e.estimate.heading_est},${e.errorM},${e.estimate.matched_ap_count}`,
    );
  }
  return lines.join("\n") + "\n";
}
