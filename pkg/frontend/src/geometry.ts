// Display geometry: meter/pixel transforms and the confidence ring.

import type { Estimate, RadioMapGrid } from "./types.js";

export interface ViewTransform {
  scale: number; // px per meter
  offsetX: number;
  offsetY: number;
  height: number; // canvas px, for y-flip (y grows north, canvas grows down)
}

export function fitTransform(
  areaWidth: number,
  areaHeight: number,
  canvasWidth: number,
  canvasHeight: number,
  margin = 24,
): ViewTransform {
  const scale = Math.min(
    (canvasWidth - 2 * margin) / areaWidth,
    (canvasHeight - 2 * margin) / areaHeight,
  );
  return { scale, offsetX: margin, offsetY: margin, height: canvasHeight };
}

export function toPx(t: ViewTransform, x: number, y: number): [number, number] {
  return [t.offsetX + x * t.scale, t.height - (t.offsetY + y * t.scale)];
}

export function toMeters(t: ViewTransform, px: number, py: number): [number, number] {
  return [(px - t.offsetX) / t.scale, (t.height - py - t.offsetY) / t.scale];
}

export function cellCenter(grid: RadioMapGrid, index: number): [number, number] {
  const i = index % grid.nx;
  const j = Math.floor(index / grid.nx);
  return [(i + 0.5) * grid.spacing, (j + 0.5) * grid.spacing];
}

// Ring radius proportional to the spread of the top-k cells around the
// estimate (RMS distance, floored to half a cell so it stays visible).
export function confidenceRadius(estimate: Estimate, grid: RadioMapGrid): number {
  if (estimate.top_cells.length === 0) {
    return grid.spacing / 2;
  }
  let sum = 0;
  for (const tc of estimate.top_cells) {
    const [cx, cy] = cellCenter(grid, tc.cell);
    sum += (cx - estimate.x) ** 2 + (cy - estimate.y) ** 2;
  }
  const rms = Math.sqrt(sum / estimate.top_cells.length);
  return Math.max(rms, grid.spacing / 2);
}
