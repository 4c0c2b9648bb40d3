/** Canvas renderers for the three linked panels.
 *
 * Renderers draw through a minimal context interface so tests can record
 * the command stream without a DOM. Colors follow the archive scheme:
 * selected exits green, other exits red, non-exiting grey; before any
 * selection cells are hued by exit id.
 */

import { decimate, worldToCanvas } from "./geom.js";
import type { SelectionDraft, SnapshotView } from "./state.js";
import type { CellKey } from "./types.js";

export interface Ctx {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number, ccw?: boolean): void;
  stroke(): void;
  fill(): void;
}

export const EXIT_HUES: Record<number, string> = {
  0: "#9a9a9a",
  1: "#2e8b57",
  2: "#b8860b",
  3: "#4169e1",
};

export function cellColor(
  exit: number,
  reentered: boolean,
  selected: boolean | undefined,
): string {
  if (selected === undefined) {
    return reentered ? "#c96f6f" : EXIT_HUES[exit] ?? "#9a9a9a";
  }
  if (selected) return "#2e8b57";
  return exit === 0 ? "#9a9a9a" : "#c0392b";
}

export interface PanelOptions {
  size: number;
  everyNth: number; // path decimation; 1 = all
  hovered: CellKey | null;
  draft: SelectionDraft | null;
}

export function renderMazePanel(ctx: Ctx, view: SnapshotView, opts: PanelOptions): void {
  const { size } = opts;
  const t = worldToCanvas(view.bound, size);
  ctx.clearRect(0, 0, size, size);
  // ring walls with gate arcs left open
  ctx.strokeStyle = "#222";
  view.ringRadii.forEach((radius, ring) => {
    ctx.lineWidth = Math.max(1, view.wallThickness * t.scale);
    const centers = view.gateCenters[ring] ?? [];
    const half = (view.gateArcWidth / 2) * (Math.PI / 180);
    const sorted = [...centers].map((c) => (c * Math.PI) / 180).sort((a, b) => a - b);
    for (let g = 0; g < sorted.length; g++) {
      const from = sorted[g] + half;
      const to = sorted[(g + 1) % sorted.length] - half + (g + 1 === sorted.length ? 2 * Math.PI : 0);
      ctx.beginPath();
      // canvas y is flipped, so sweep angles negatively
      ctx.arc(t.x(0), t.y(0), radius * t.scale, -from, -to, true);
      ctx.stroke();
    }
  });
  ctx.lineWidth = 1;
  const keys = decimate(view.order, opts.everyNth);
  for (const key of keys) {
    const path = view.paths.get(key);
    const cell = view.cells.get(key);
    if (!path || !cell || path.length < 2) continue;
    ctx.strokeStyle = cellColor(cell.exit, cell.reentered, opts.draft?.has(key));
    ctx.globalAlpha = key === opts.hovered ? 1.0 : 0.45;
    ctx.lineWidth = key === opts.hovered ? 2.5 : 1;
    ctx.beginPath();
    ctx.moveTo(t.x(path[0][0]), t.y(path[0][1]));
    for (let i = 1; i < path.length; i++) ctx.lineTo(t.x(path[i][0]), t.y(path[i][1]));
    ctx.stroke();
  }
  ctx.globalAlpha = 1.0;
}

export function renderHeatmapPanel(ctx: Ctx, view: SnapshotView, opts: PanelOptions): void {
  const { size } = opts;
  ctx.clearRect(0, 0, size, size);
  const cw = size / view.gridCols;
  const ch = size / view.gridRows;
  let maxFitness = 1;
  for (const cell of view.cells.values()) maxFitness = Math.max(maxFitness, cell.fitness);
  for (const [key, cell] of view.cells) {
    const x = cell.col * cw;
    const y = size - (cell.row + 1) * ch; // row 0 is the bottom of the world
    ctx.fillStyle = cellColor(cell.exit, cell.reentered, opts.draft?.has(key));
    ctx.globalAlpha = 0.35 + 0.65 * (1 - cell.fitness / maxFitness);
    ctx.fillRect(x, y, cw, ch);
    if (cell.drift !== undefined) {
      ctx.globalAlpha = cell.drift * 0.8;
      ctx.fillStyle = "#000";
      ctx.fillRect(x, y, cw, ch);
    }
    if (key === opts.hovered) {
      ctx.globalAlpha = 1.0;
      ctx.strokeStyle = "#000";
      ctx.lineWidth = 2;
      ctx.strokeRect(x, y, cw, ch);
    }
  }
  ctx.globalAlpha = 1.0;
}

export function scatterExtent(view: SnapshotView): { min: number; max: number } {
  let min = Infinity;
  let max = -Infinity;
  for (const p of view.embedding.values()) {
    min = Math.min(min, p.x, p.y);
    max = Math.max(max, p.x, p.y);
  }
  if (!isFinite(min)) return { min: -1, max: 1 };
  const pad = 0.05 * (max - min || 1);
  return { min: min - pad, max: max + pad };
}

export function scatterToCanvas(view: SnapshotView, size: number) {
  const { min, max } = scatterExtent(view);
  const scale = size / (max - min);
  return {
    x: (vx: number) => (vx - min) * scale,
    y: (vy: number) => size - (vy - min) * scale,
  };
}

export function renderScatterPanel(ctx: Ctx, view: SnapshotView, opts: PanelOptions): void {
  const { size } = opts;
  ctx.clearRect(0, 0, size, size);
  const t = scatterToCanvas(view, size);
  for (const key of view.order) {
    const point = view.embedding.get(key);
    const cell = view.cells.get(key);
    if (!point || !cell) continue;
    ctx.fillStyle = cellColor(cell.exit, cell.reentered, opts.draft?.has(key));
    ctx.globalAlpha = 0.9;
    ctx.beginPath();
    const radius = key === opts.hovered ? 6 : 3;
    ctx.arc(t.x(point.x), t.y(point.y), radius, 0, 2 * Math.PI);
    ctx.fill();
    if (key === opts.hovered) {
      ctx.strokeStyle = "#000";
      ctx.lineWidth = 1.5;
      ctx.stroke();
    }
  }
  ctx.globalAlpha = 1.0;
}
