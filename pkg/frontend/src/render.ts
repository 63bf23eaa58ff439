// Canvas rendering of the floor map: grid overlay, reference points,
// AP glyphs, live marker with confidence ring, trail, and accuracy lines.

import { ViewTransform, cellCenter, confidenceRadius, toPx } from "./geometry.js";
import type { AccuracyEntry } from "./state.js";
import { display2 } from "./format.js";
import type { Area, Estimate, RadioMapGrid } from "./types.js";

export interface ApGlyph {
  x: number;
  y: number;
  label: string;
}

export interface MapScene {
  area: Area;
  grid: RadioMapGrid | null;
  gridSpacing: number;
  aps: ApGlyph[];
  selectedRp: string | null;
  badges: Map<string, number>;
  heading: number;
  trail: Estimate[];
  accuracyLog: AccuracyEntry[];
  pendingGroundTruth: { x: number; y: number } | null;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  t: ViewTransform,
  scene: MapScene,
): void {
  const { area } = scene;
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);

  // room
  const [x0, y0] = toPx(t, 0, area.height);
  ctx.fillStyle = "#fbfbf8";
  ctx.strokeStyle = "#333";
  ctx.lineWidth = 2;
  ctx.fillRect(x0, y0, area.width * t.scale, area.height * t.scale);
  ctx.strokeRect(x0, y0, area.width * t.scale, area.height * t.scale);

  // grid overlay at the dense-map spacing
  const spacing = scene.grid?.spacing ?? scene.gridSpacing;
  ctx.strokeStyle = "#ddd";
  ctx.lineWidth = 1;
  for (let x = spacing; x < area.width; x += spacing) {
    const [px, pyTop] = toPx(t, x, area.height);
    const [, pyBot] = toPx(t, x, 0);
    ctx.beginPath();
    ctx.moveTo(px, pyTop);
    ctx.lineTo(px, pyBot);
    ctx.stroke();
  }
  for (let y = spacing; y < area.height; y += spacing) {
    const [pxLeft, py] = toPx(t, 0, y);
    const [pxRight] = toPx(t, area.width, y);
    ctx.beginPath();
    ctx.moveTo(pxLeft, py);
    ctx.lineTo(pxRight, py);
    ctx.stroke();
  }

  // reference points with collected-count badges
  for (const rp of area.reference_points) {
    const [px, py] = toPx(t, rp.x, rp.y);
    const selected = rp.point_id === scene.selectedRp;
    ctx.fillStyle = selected ? "#d9480f" : "#868e96";
    ctx.beginPath();
    ctx.arc(px, py, selected ? 5 : 3, 0, 2 * Math.PI);
    ctx.fill();
    const count = scene.badges.get(`${rp.point_id}/${scene.heading}`) ?? 0;
    if (count > 0) {
      ctx.fillStyle = "#2b8a3e";
      ctx.font = "10px sans-serif";
      ctx.fillText(String(count), px + 5, py - 5);
    }
  }

  // AP glyphs (when the scenario is known)
  ctx.fillStyle = "#1864ab";
  for (const ap of scene.aps) {
    const [px, py] = toPx(t, ap.x, ap.y);
    ctx.fillRect(px - 4, py - 4, 8, 8);
  }

  // trail, oldest faintest
  const n = scene.trail.length;
  scene.trail.forEach((estimate, i) => {
    const [px, py] = toPx(t, estimate.x, estimate.y);
    ctx.fillStyle = `rgba(34, 139, 230, ${0.15 + (0.55 * (i + 1)) / n})`;
    ctx.beginPath();
    ctx.arc(px, py, 3, 0, 2 * Math.PI);
    ctx.fill();
  });

  // marker + confidence ring
  const latest = n > 0 ? scene.trail[n - 1] : null;
  if (latest) {
    const [px, py] = toPx(t, latest.x, latest.y);
    if (scene.grid) {
      const radius = confidenceRadius(latest, scene.grid) * t.scale;
      ctx.strokeStyle = "rgba(34, 139, 230, 0.5)";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(px, py, radius, 0, 2 * Math.PI);
      ctx.stroke();
    }
    ctx.fillStyle = "#1c7ed6";
    ctx.beginPath();
    ctx.arc(px, py, 6, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#000";
    ctx.font = "11px sans-serif";
    ctx.fillText(latest.heading_est, px + 8, py + 4);
  }

  // accuracy lines: ground truth to estimate, labeled with the error
  for (const entry of scene.accuracyLog) {
    const [gx, gy] = toPx(t, entry.gtX, entry.gtY);
    const [ex, ey] = toPx(t, entry.estimate.x, entry.estimate.y);
    ctx.strokeStyle = "#e8590c";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(gx, gy);
    ctx.lineTo(ex, ey);
    ctx.stroke();
    ctx.fillStyle = "#e8590c";
    ctx.beginPath();
    ctx.arc(gx, gy, 4, 0, 2 * Math.PI);
    ctx.fill();
    ctx.font = "11px sans-serif";
    ctx.fillText(`${display2(entry.errorM)} m`, (gx + ex) / 2 + 4, (gy + ey) / 2 - 4);
  }

  if (scene.pendingGroundTruth) {
    const [px, py] = toPx(t, scene.pendingGroundTruth.x, scene.pendingGroundTruth.y);
    ctx.strokeStyle = "#e8590c";
    ctx.beginPath();
    ctx.arc(px, py, 6, 0, 2 * Math.PI);
    ctx.stroke();
  }
}

export function nearestReferencePoint(
  area: Area,
  x: number,
  y: number,
  maxDistanceM: number,
): string | null {
  let best: string | null = null;
  let bestD = maxDistanceM;
  for (const rp of area.reference_points) {
    const d = Math.hypot(rp.x - x, rp.y - y);
    if (d <= bestD) {
      best = rp.point_id;
      bestD = d;
    }
  }
  return best;
}

export function gridFromRadiomap(doc: unknown): RadioMapGrid {
  const grid = (doc as { grid: RadioMapGrid }).grid;
  return grid;
}

export { cellCenter };
