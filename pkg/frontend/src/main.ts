// DOM wiring for the survey console.

import { ApiClient, ApiError } from "./api.js";
import { AccuracyFlow, LiveView, ScanPump, SurveyFlow } from "./flows.js";
import { fitTransform, toMeters } from "./geometry.js";
import { accuracyLogToCsv, display2, errorLabel, meanLabel } from "./format.js";
import { MapScene, drawScene, gridFromRadiomap, nearestReferencePoint } from "./render.js";
import { Scan, SurveyReplayProvider, WalkReplayProvider } from "./scan.js";
import { ConsoleState } from "./state.js";
import type { Area, RadioMapGrid, ReferencePoint } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing #${id}`);
  }
  return el as T;
};

const state = new ConsoleState();
let api = new ApiClient("http://127.0.0.1:8000");
let surveyProvider: SurveyReplayProvider | null = null;
let walkProvider: WalkReplayProvider | null = null;
let liveView: LiveView | null = null;
let pump: ScanPump | null = null;
let grid: RadioMapGrid | null = null;
let pendingGroundTruth: { x: number; y: number } | null = null;

const canvas = $("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;

function note(text: string, isError = false): void {
  const el = $("status");
  el.textContent = text;
  el.className = isError ? "error" : "";
}

function redraw(): void {
  if (!state.area) {
    return;
  }
  const t = fitTransform(state.area.width, state.area.height, canvas.width, canvas.height);
  const scene: MapScene = {
    area: state.area,
    grid,
    gridSpacing: state.gridSpacing,
    aps: [],
    selectedRp: state.selectedRp,
    badges: state.badges,
    heading: state.heading,
    trail: state.trail,
    accuracyLog: state.accuracyLog,
    pendingGroundTruth,
  };
  drawScene(ctx, t, scene);
  updateFooter();
}

function updateFooter(): void {
  const footer = $("footer-stats");
  if (state.accuracyLog.length === 0) {
    footer.textContent = state.skippedTests > 0
      ? `no scored tests yet (${state.skippedTests} with insufficient overlap)`
      : "no accuracy tests yet";
    return;
  }
  let text = meanLabel(state.runningMean(), state.runningStd(), state.accuracyLog.length);
  if (state.skippedTests > 0) {
    text += ` · ${state.skippedTests} no-overlap`;
  }
  footer.textContent = text;
}

function defaultGridArea(width: number, height: number, spacing: number): Area {
  const rps: ReferencePoint[] = [];
  const nx = Math.floor(width / spacing - 0.5 + 1e-9) + 1;
  const ny = Math.floor(height / spacing - 0.5 + 1e-9) + 1;
  for (let j = 0; j < ny; j++) {
    for (let i = 0; i < nx; i++) {
      rps.push({
        point_id: `rp-${String(j * nx + i).padStart(4, "0")}`,
        x: (i + 0.5) * spacing,
        y: (j + 0.5) * spacing,
      });
    }
  }
  return { width, height, reference_points: rps };
}

async function createSession(): Promise<void> {
  api = new ApiClient(($("base-url") as HTMLInputElement).value);
  const width = Number(($("room-width") as HTMLInputElement).value);
  const height = Number(($("room-height") as HTMLInputElement).value);
  const spacing = Number(($("rp-spacing") as HTMLInputElement).value);
  const area = defaultGridArea(width, height, spacing);
  try {
    const { session_id } = await api.createSession(area);
    const info = await api.sessionInfo(session_id);
    state.attachSession(info);
    ($("session-id") as HTMLInputElement).value = session_id;
    note(`session ${session_id} created (${area.reference_points.length} reference points)`);
    redraw();
  } catch (err) {
    note(String(err), true);
  }
}

async function resumeSession(): Promise<void> {
  api = new ApiClient(($("base-url") as HTMLInputElement).value);
  const sessionId = ($("session-id") as HTMLInputElement).value.trim();
  try {
    const info = await api.sessionInfo(sessionId);
    state.attachSession(info);
    if (info.state === "Trained") {
      grid = gridFromRadiomap(await api.radiomap(sessionId));
    }
    note(`session ${sessionId}: ${info.state}, ${info.sample_count} samples`);
    redraw();
  } catch (err) {
    note(String(err), true);
  }
}

async function collect(): Promise<void> {
  if (!surveyProvider) {
    note("load a survey JSONL file first", true);
    return;
  }
  if (!state.selectedRp) {
    note("select a reference point on the map", true);
    return;
  }
  const flow = new SurveyFlow(api, state, surveyProvider);
  const n = Number(($("collect-n") as HTMLInputElement).value);
  try {
    const accepted = await flow.collect(n);
    note(
      `collected ${accepted} at ${state.selectedRp}/${state.heading}` +
        ` (badge ${state.collectedCount(state.selectedRp, state.heading)})`,
    );
    redraw();
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      note("session not collecting", true);
    } else {
      note(String(err), true);
    }
  }
}

async function train(): Promise<void> {
  if (!state.sessionId) {
    note("no session", true);
    return;
  }
  note("training...");
  try {
    const report = await api.train(state.sessionId, {
      spacing: state.gridSpacing,
      hyper_policy: ($("hyper-policy") as HTMLSelectElement).value as "fixed" | "grid-search",
    });
    state.sessionState = "Trained";
    grid = gridFromRadiomap(await api.radiomap(state.sessionId));
    note(
      `trained ${report.surfaces.length} surfaces in ${display2(report.wall_clock_s)} s` +
        ` (${report.skipped.length} skipped)`,
    );
    redraw();
  } catch (err) {
    note(String(err), true);
  }
}

function startLive(): void {
  if (!state.setMode("live")) {
    note("train the session before going live", true);
    return;
  }
  if (!walkProvider) {
    note("load a walk JSONL file to feed scans", true);
    return;
  }
  liveView = new LiveView(api, state, {
    onEstimate: () => redraw(),
    onStatus: (status) => {
      $("stream-status").textContent = status;
      $("stream-status").className = status === "live" ? "ok" : "warn";
    },
  });
  liveView.start();
  pump = new ScanPump(api, state, walkProvider, (err) => note(String(err), true));
  pump.start(Number(($("scan-period") as HTMLInputElement).value) * 1000);
  note("live view running");
}

function stopLive(): void {
  pump?.stop();
  liveView?.stop();
  note("live view stopped");
}

async function onMapClick(ev: MouseEvent): Promise<void> {
  if (!state.area) {
    return;
  }
  const rect = canvas.getBoundingClientRect();
  const t = fitTransform(state.area.width, state.area.height, canvas.width, canvas.height);
  const [x, y] = toMeters(t, ev.clientX - rect.left, ev.clientY - rect.top);

  if (state.mode === "survey") {
    const rp = nearestReferencePoint(state.area, x, y, 0.75);
    if (rp) {
      state.selectedRp = rp;
      note(`selected ${rp}`);
      redraw();
    }
    return;
  }

  if (state.mode === "accuracy") {
    if (!state.validGroundTruth(x, y)) {
      note("click inside the room bounds", true);
      return;
    }
    if (!walkProvider) {
      note("load a walk JSONL file to supply test scans", true);
      return;
    }
    const scan: Scan | null = walkProvider.next();
    if (!scan) {
      note("walk file exhausted", true);
      return;
    }
    pendingGroundTruth = { x, y };
    redraw();
    const flow = new AccuracyFlow(api, state);
    const outcome = await flow.test(x, y, scan);
    pendingGroundTruth = null;
    if (outcome.kind === "recorded") {
      note(`error ${errorLabel(outcome.record.error_m)}`);
    } else if (outcome.kind === "no-overlap") {
      note("insufficient overlap (not an error)");
    } else {
      note(outcome.reason, true);
    }
    redraw();
  }
}

function exportCsv(): void {
  const blob = new Blob([accuracyLogToCsv(state.accuracyLog)], { type: "text/csv" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "accuracy_log.csv";
  a.click();
  URL.revokeObjectURL(a.href);
}

function wireFileInput(id: string, apply: (text: string) => void): void {
  $(id).addEventListener("change", (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) {
      return;
    }
    void file.text().then((text) => {
      apply(text);
      note(`${file.name} loaded`);
    });
  });
}

function wire(): void {
  $("btn-create").addEventListener("click", () => void createSession());
  $("btn-resume").addEventListener("click", () => void resumeSession());
  $("btn-collect").addEventListener("click", () => void collect());
  $("btn-train").addEventListener("click", () => void train());
  $("btn-live").addEventListener("click", () => startLive());
  $("btn-stop-live").addEventListener("click", () => stopLive());
  $("btn-accuracy").addEventListener("click", () => {
    if (!state.setMode("accuracy")) {
      note("train the session before accuracy testing", true);
    } else {
      note("accuracy test: click the ground truth on the map");
    }
  });
  $("btn-survey-mode").addEventListener("click", () => {
    state.setMode("survey");
    note("survey mode: select a reference point");
  });
  $("btn-export").addEventListener("click", () => exportCsv());
  ($("heading") as HTMLSelectElement).addEventListener("change", (ev) => {
    state.heading = Number((ev.target as HTMLSelectElement).value) as 0 | 90 | 180 | 270;
    redraw();
  });
  wireFileInput("survey-file", (text) => {
    surveyProvider = new SurveyReplayProvider(text);
  });
  wireFileInput("walk-file", (text) => {
    walkProvider = new WalkReplayProvider(text);
  });
  canvas.addEventListener("click", (ev) => void onMapClick(ev));
}

wire();
note("create or resume a session to begin");
