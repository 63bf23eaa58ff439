// The three operator workflows, decoupled from the DOM so they are testable
// headless: survey collection, the live view, and accuracy testing.

import { ApiClient, ApiError } from "./api.js";
import type { Scan, ScanProvider } from "./scan.js";
import { StreamClient, StreamStatus } from "./sse.js";
import { ConsoleState } from "./state.js";
import type {
  AccuracyRecord,
  Estimate,
  ObservationBody,
  SampleRecord,
  StreamEvent,
} from "./types.js";

export class SurveyFlow {
  constructor(
    private api: ApiClient,
    private state: ConsoleState,
    private provider: ScanProvider,
  ) {}

  // Collect n scans for the selected reference point and heading, post them
  // as one batch, and bump the badge on success.
  async collect(n: number): Promise<number> {
    const { sessionId, selectedRp, heading, area } = this.state;
    if (!sessionId || !selectedRp || !area) {
      throw new Error("select a reference point first");
    }
    const rp = area.reference_points.find((r) => r.point_id === selectedRp);
    if (!rp) {
      throw new Error(`unknown reference point ${selectedRp}`);
    }
    const samples: SampleRecord[] = [];
    for (let i = 0; i < n; i++) {
      const scan = this.provider.next(selectedRp, heading);
      if (!scan) {
        break;
      }
      samples.push({
        point_id: rp.point_id,
        x: rp.x,
        y: rp.y,
        heading_deg: this.state.heading,
        t: scan.t,
        device_id: "console",
        readings: scan.readings,
      });
    }
    if (samples.length === 0) {
      throw new Error("scan provider exhausted");
    }
    const { accepted } = await this.api.ingest(sessionId, samples);
    this.state.recordCollected(rp.point_id, this.state.heading, accepted);
    return accepted;
  }
}

export interface LiveHandlers {
  onEstimate?: (estimate: Estimate) => void;
  onAccuracy?: (record: AccuracyRecord) => void;
  onStatus?: (status: StreamStatus) => void;
}

// Subscribes to the session stream and applies estimate events to the trail.
export class LiveView {
  private client: StreamClient | null = null;
  status: StreamStatus = "idle";

  constructor(
    private api: ApiClient,
    private state: ConsoleState,
    private handlers: LiveHandlers = {},
    private fetchImpl: typeof fetch = fetch,
  ) {}

  start(): void {
    const sessionId = this.state.sessionId;
    if (!sessionId) {
      throw new Error("no session");
    }
    this.client = new StreamClient(
      this.api.streamUrl(sessionId),
      {
        onEvent: (data) => this.dispatch(data as StreamEvent),
        onStatus: (status) => {
          this.status = status;
          this.handlers.onStatus?.(status);
        },
      },
      this.fetchImpl,
    );
    this.client.start();
  }

  stop(): void {
    this.client?.stop();
    this.client = null;
  }

  private dispatch(event: StreamEvent): void {
    if (event.type === "estimate") {
      const estimate = event.payload as Estimate;
      this.state.applyEstimate(estimate);
      this.handlers.onEstimate?.(estimate);
    } else if (event.type === "accuracy") {
      this.handlers.onAccuracy?.(event.payload as AccuracyRecord);
    }
  }
}

// Feeds the live view: posts scans from a provider at a fixed period; the
// resulting estimates come back over the stream.
export class ScanPump {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private api: ApiClient,
    private state: ConsoleState,
    private provider: ScanProvider,
    private onError: (err: unknown) => void = () => {},
  ) {}

  start(periodMs: number): void {
    this.stop();
    this.timer = setInterval(() => {
      void this.pumpOne();
    }, periodMs);
  }

  async pumpOne(): Promise<Estimate | null> {
    const sessionId = this.state.sessionId;
    if (!sessionId) {
      return null;
    }
    const scan = this.provider.next();
    if (!scan) {
      this.stop();
      return null;
    }
    try {
      return await this.api.localize(sessionId, scanToObservation(scan));
    } catch (err) {
      if (err instanceof ApiError && err.code === "InsufficientOverlap") {
        return null; // a thin scan is not an error for the pump
      }
      this.onError(err);
      return null;
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}

export function scanToObservation(scan: Scan): ObservationBody {
  return { t: scan.t, heading_deg: null, readings: scan.readings };
}

export type AccuracyOutcome =
  | { kind: "recorded"; record: AccuracyRecord }
  | { kind: "no-overlap" } // distinct non-error badge
  | { kind: "rejected"; reason: string };

// One accuracy test: the operator clicks the ground truth, the next scan is
// evaluated by the service, and the returned error joins the log. The error
// value always comes from the service, never from client-side math.
export class AccuracyFlow {
  constructor(
    private api: ApiClient,
    private state: ConsoleState,
  ) {}

  async test(gtX: number, gtY: number, scan: Scan): Promise<AccuracyOutcome> {
    if (!this.state.validGroundTruth(gtX, gtY)) {
      return { kind: "rejected", reason: "ground truth outside the room bounds" };
    }
    const sessionId = this.state.sessionId;
    if (!sessionId) {
      return { kind: "rejected", reason: "no session" };
    }
    const { summary, records } = await this.api.evaluate(sessionId, [
      { observation: scanToObservation(scan), truth: { x: gtX, y: gtY } },
    ]);
    if (summary.skipped > 0 || records.length === 0) {
      this.state.recordSkippedTest();
      return { kind: "no-overlap" };
    }
    const record = records[0];
    this.state.recordAccuracy({
      gtX: record.gt_x,
      gtY: record.gt_y,
      estimate: {
        x: record.est_x,
        y: record.est_y,
        heading_est: record.heading_est,
        log_likelihood: NaN,
        matched_ap_count: record.matched_aps,
        top_cells: [],
      },
      errorM: record.error_m,
    });
    return { kind: "recorded", record };
  }
}
