/** Payload shapes of the session service (schema version 1). */

export interface CellEntry {
  row: number;
  col: number;
  fitness: number;
  exit: number; // 0 = never left the inner ring
  reentered: boolean;
  end: [number, number];
  drift?: number;
  selected?: boolean;
}

export interface EmbeddingPoint {
  row: number;
  col: number;
  x: number;
  y: number;
}

export interface MazeConfig {
  ring_radii: number[];
  wall_thickness: number;
  gate_arc_width: number;
  gate_center_angles: number[][];
  bound: number;
  start: number[];
}

export interface SnapshotPayload {
  schema_version: number;
  iteration: number;
  grid: { rows: number; cols: number };
  maze: MazeConfig;
  occupancy: number;
  cells: CellEntry[];
  embedding: EmbeddingPoint[];
  paths: Record<string, number[][]>;
}

export interface ProgressPayload {
  state: "idle" | "running" | "failed";
  generation: number;
  total_generations: number;
  occupancy: number;
  failure: string | null;
}

export interface IterationRecord {
  index: number;
  mode: string;
  generations: number;
  occupancy: number;
  partition: { selected_cells: number[][] } | null;
  model: string | null;
}

export interface SessionDetail {
  id: string;
  state: string;
  task: { kind: string };
  iterations: IterationRecord[];
}

export interface PartitionResponse {
  iteration: number;
  n_selected: number;
  n_deselected: number;
  drift_preview: { row: number; col: number; drift: number }[];
}

export interface ReportSide {
  occupancy: number;
  exit_pct: Record<string, number>;
  nonexit_pct: number;
  drift_median: number;
  drift_histogram: { edges: number[]; counts: number[] };
}

export interface ReportPayload {
  before_iteration: number;
  after_iteration: number;
  mode: string;
  before: ReportSide;
  after: ReportSide;
}

export type CellKey = string; // "row,col"

export function cellKey(row: number, col: number): CellKey {
  return `${row},${col}`;
}
