/** View models: read-only snapshot mirror plus the user's selection draft. */

import type { CellEntry, CellKey, SnapshotPayload } from "./types.js";
import { cellKey } from "./types.js";

export interface SnapshotView {
  iteration: number;
  gridRows: number;
  gridCols: number;
  cells: Map<CellKey, CellEntry>;
  order: CellKey[]; // ascending cell order, aligned with embedding points
  embedding: Map<CellKey, { x: number; y: number }>;
  paths: Map<CellKey, number[][]>;
  bound: number;
  ringRadii: number[];
  gateCenters: number[][];
  gateArcWidth: number;
  wallThickness: number;
}

export function snapshotView(payload: SnapshotPayload): SnapshotView {
  const cells = new Map<CellKey, CellEntry>();
  const order: CellKey[] = [];
  for (const cell of payload.cells) {
    const key = cellKey(cell.row, cell.col);
    cells.set(key, cell);
    order.push(key);
  }
  const embedding = new Map<CellKey, { x: number; y: number }>();
  for (const point of payload.embedding) {
    embedding.set(cellKey(point.row, point.col), { x: point.x, y: point.y });
  }
  const paths = new Map<CellKey, number[][]>();
  for (const [key, path] of Object.entries(payload.paths)) {
    paths.set(key, path);
  }
  if (embedding.size !== cells.size) {
    throw new Error("snapshot invariant broken: embedding does not cover cells");
  }
  return {
    iteration: payload.iteration,
    gridRows: payload.grid.rows,
    gridCols: payload.grid.cols,
    cells,
    order,
    embedding,
    paths,
    bound: payload.maze.bound,
    ringRadii: payload.maze.ring_radii,
    gateCenters: payload.maze.gate_center_angles,
    gateArcWidth: payload.maze.gate_arc_width,
    wallThickness: payload.maze.wall_thickness,
  };
}

/** Mutable selection over a snapshot's occupied cells. */
export class SelectionDraft {
  private selected = new Set<CellKey>();

  constructor(private occupied: Set<CellKey>) {}

  static forView(view: SnapshotView): SelectionDraft {
    return new SelectionDraft(new Set(view.cells.keys()));
  }

  toggle(key: CellKey): void {
    if (!this.occupied.has(key)) return;
    if (this.selected.has(key)) this.selected.delete(key);
    else this.selected.add(key);
  }

  add(keys: Iterable<CellKey>): void {
    for (const key of keys) {
      if (this.occupied.has(key)) this.selected.add(key);
    }
  }

  clear(): void {
    this.selected.clear();
  }

  has(key: CellKey): boolean {
    return this.selected.has(key);
  }

  get countSelected(): number {
    return this.selected.size;
  }

  get countDeselected(): number {
    return this.occupied.size - this.selected.size;
  }

  /** A usable partition needs both sides non-empty. */
  get canSubmit(): boolean {
    return this.countSelected > 0 && this.countDeselected > 0;
  }

  get blockedReason(): string | null {
    if (this.countSelected === 0) return "nothing selected";
    if (this.countDeselected === 0) return "everything selected; deselect something to contrast against";
    return null;
  }

  toCellArray(): number[][] {
    return [...this.selected]
      .map((key) => key.split(",").map(Number))
      .sort((a, b) => a[0] - b[0] || a[1] - b[1]);
  }
}
