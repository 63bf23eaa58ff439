// Wire types of the positioning service API.

export interface ReferencePoint {
  point_id: string;
  x: number;
  y: number;
}

export interface Area {
  width: number;
  height: number;
  reference_points: ReferencePoint[];
}

export interface Reading {
  bssid: string;
  band: "2.4" | "5";
  ssid?: string;
  rssi: number;
}

export interface SampleRecord {
  point_id: string;
  x: number;
  y: number;
  heading_deg: number;
  t: string;
  device_id: string;
  readings: Reading[];
}

export interface ObservationBody {
  t: string;
  heading_deg?: number | null;
  readings: Reading[];
}

export interface TopCell {
  cell: number;
  heading: string;
  log_likelihood: number;
}

export interface Estimate {
  x: number;
  y: number;
  heading_est: string;
  log_likelihood: number;
  matched_ap_count: number;
  top_cells: TopCell[];
}

export interface AccuracyRecord {
  gt_x: number;
  gt_y: number;
  est_x: number;
  est_y: number;
  heading_est: string;
  error_m: number;
  matched_aps: number;
}

export interface EvalSummary {
  mean_error_m: number;
  std_error_m: number;
  n: number;
  skipped: number;
}

export interface TrainReport {
  status: string;
  sample_count: number;
  spacing: number;
  hyper_policy: string;
  min_presence: number;
  grid: { nx: number; ny: number };
  surfaces: unknown[];
  skipped: unknown[];
  wall_clock_s: number;
}

export interface SessionInfo {
  session_id: string;
  state: "Collecting" | "Training" | "Trained" | "Failed";
  area: Area;
  sample_count: number;
}

export interface RadioMapGrid {
  width: number;
  height: number;
  spacing: number;
  nx: number;
  ny: number;
}

export interface StreamEvent {
  type: "estimate" | "accuracy";
  payload: Estimate | AccuracyRecord;
}

// One observation with its ground truth (walk.jsonl line).
export interface WalkEntry {
  x: number;
  y: number;
  t: string;
  heading_deg: number | null;
  readings: Reading[];
}
