/** Browser wiring: session bootstrap, linked panels, selection gestures,
 * continuation launch, and progress polling. */

import { ApiClient } from "./api.js";
import { defaultForm, freshToken, MODES, validateForm } from "./controls.js";
import { pointInPolygon, worldToCanvas } from "./geom.js";
import { LinkIndex } from "./linking.js";
import {
  renderHeatmapPanel,
  renderMazePanel,
  renderScatterPanel,
  scatterToCanvas,
} from "./panels.js";
import { SelectionDraft, snapshotView, type SnapshotView } from "./state.js";
import { cellKey, type CellKey, type ProgressPayload } from "./types.js";

const SIZE = 420;
const api = new ApiClient("");

interface UiState {
  sessionId: string | null;
  taskKind: string;
  view: SnapshotView | null;
  links: LinkIndex | null;
  draft: SelectionDraft | null;
  hovered: CellKey | null;
  everyNth: number;
  partitionSubmitted: boolean;
  beforeView: SnapshotView | null;
}

const state: UiState = {
  sessionId: null,
  taskKind: "planner",
  view: null,
  links: null,
  draft: null,
  hovered: null,
  everyNth: 5,
  partitionSubmitted: false,
  beforeView: null,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element ${id}`);
  return node as T;
}

function canvasCtx(id: string): CanvasRenderingContext2D {
  const canvas = el<HTMLCanvasElement>(id);
  canvas.width = SIZE;
  canvas.height = SIZE;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("no 2d context");
  return ctx;
}

function redraw(): void {
  if (!state.view) return;
  const opts = {
    size: SIZE,
    everyNth: state.everyNth,
    hovered: state.hovered,
    draft: state.partitionSubmitted || draftHasMarks() ? state.draft : null,
  };
  renderMazePanel(canvasCtx("maze"), state.view, opts);
  renderHeatmapPanel(canvasCtx("heatmap"), state.view, opts);
  renderScatterPanel(canvasCtx("scatter"), state.view, opts);
  updateCounts();
}

function draftHasMarks(): boolean {
  return !!state.draft && state.draft.countSelected > 0;
}

function updateCounts(): void {
  const draft = state.draft;
  const counts = el<HTMLSpanElement>("counts");
  if (!draft) {
    counts.textContent = "";
    return;
  }
  counts.textContent = `selected ${draft.countSelected} / deselected ${draft.countDeselected}`;
  const submit = el<HTMLButtonElement>("submit-partition");
  submit.disabled = !draft.canSubmit;
  submit.title = draft.blockedReason ?? "";
}

function setStatus(text: string): void {
  el<HTMLSpanElement>("status").textContent = text;
}

// -- hit testing --------------------------------------------------------------

function heatmapCellAt(x: number, y: number): CellKey | null {
  if (!state.view) return null;
  const cw = SIZE / state.view.gridCols;
  const ch = SIZE / state.view.gridRows;
  const col = Math.floor(x / cw);
  const row = state.view.gridRows - 1 - Math.floor(y / ch);
  const key = cellKey(row, col);
  return state.view.cells.has(key) ? key : null;
}

function scatterCellAt(x: number, y: number): CellKey | null {
  if (!state.view) return null;
  const t = scatterToCanvas(state.view, SIZE);
  let best: CellKey | null = null;
  let bestDist = 8 * 8;
  for (const [key, p] of state.view.embedding) {
    const dx = t.x(p.x) - x;
    const dy = t.y(p.y) - y;
    const d = dx * dx + dy * dy;
    if (d < bestDist) {
      bestDist = d;
      best = key;
    }
  }
  return best;
}

function pathCellAt(x: number, y: number): CellKey | null {
  if (!state.view) return null;
  const t = worldToCanvas(state.view.bound, SIZE);
  let best: CellKey | null = null;
  let bestDist = 6 * 6;
  for (const [key, path] of state.view.paths) {
    const end = path[path.length - 1];
    const dx = t.x(end[0]) - x;
    const dy = t.y(end[1]) - y;
    const d = dx * dx + dy * dy;
    if (d < bestDist) {
      bestDist = d;
      best = key;
    }
  }
  return best;
}

// -- lasso --------------------------------------------------------------------

function attachLasso(canvasId: string, project: (key: CellKey) => { x: number; y: number } | null): void {
  const canvas = el<HTMLCanvasElement>(canvasId);
  let lasso: { x: number; y: number }[] | null = null;
  canvas.addEventListener("mousedown", (event) => {
    if (!event.shiftKey) return;
    lasso = [{ x: event.offsetX, y: event.offsetY }];
  });
  canvas.addEventListener("mousemove", (event) => {
    if (lasso) lasso.push({ x: event.offsetX, y: event.offsetY });
  });
  canvas.addEventListener("mouseup", () => {
    if (!lasso || !state.view || !state.draft) {
      lasso = null;
      return;
    }
    const enclosed: CellKey[] = [];
    for (const key of state.view.cells.keys()) {
      const p = project(key);
      if (p && pointInPolygon(p, lasso)) enclosed.push(key);
    }
    state.draft.add(enclosed);
    lasso = null;
    redraw();
  });
}

// -- actions -------------------------------------------------------------------

async function loadSnapshot(iteration: number): Promise<void> {
  if (!state.sessionId) return;
  const payload = await api.getSnapshot(state.sessionId, iteration);
  state.view = snapshotView(payload);
  state.links = new LinkIndex(state.view);
  state.draft = SelectionDraft.forView(state.view);
  state.partitionSubmitted = false;
  // restore a previously submitted partition so reloads render it
  const detail = await api.getSession(state.sessionId);
  const record = detail.iterations[iteration];
  if (record?.partition) {
    state.draft.add(record.partition.selected_cells.map(([r, c]) => cellKey(r, c)));
    state.partitionSubmitted = true;
  }
  redraw();
}

function tick(progress: ProgressPayload): void {
  const bar = el<HTMLProgressElement>("progress");
  bar.max = Math.max(progress.total_generations, 1);
  bar.value = progress.generation;
  setStatus(`${progress.state} gen ${progress.generation}/${progress.total_generations} occ ${progress.occupancy}`);
}

async function startSession(): Promise<void> {
  state.taskKind = el<HTMLSelectElement>("task-kind").value;
  const created = await api.createSession(state.taskKind);
  state.sessionId = created.session_id;
  el<HTMLSpanElement>("session-id").textContent = created.session_id;
  const form = defaultForm(state.taskKind);
  el<HTMLInputElement>("penalty-weight").value = String(form.penaltyWeight);
  const generations = Number(el<HTMLInputElement>("generations").value);
  await api.startRun(state.sessionId, generations, freshToken("run"));
  const done = await api.pollUntilIdle(state.sessionId, tick);
  if (done.state === "failed") {
    setStatus(`run failed: ${done.failure}`);
    return;
  }
  await loadSnapshot(0);
  setStatus("idle; select solutions (click or shift-lasso), then submit");
}

async function submitPartition(): Promise<void> {
  if (!state.sessionId || !state.draft?.canSubmit || !state.view) return;
  const result = await api.submitPartition(
    state.sessionId,
    state.draft.toCellArray(),
    freshToken("part"),
  );
  for (const preview of result.drift_preview) {
    const cell = state.view.cells.get(cellKey(preview.row, preview.col));
    if (cell) cell.drift = preview.drift;
  }
  state.partitionSubmitted = true;
  setStatus(`partition accepted: ${result.n_selected} selected; drift preview shaded`);
  redraw();
}

async function launchContinuation(): Promise<void> {
  if (!state.sessionId || !state.view) return;
  const form = {
    mode: el<HTMLSelectElement>("mode").value as (typeof MODES)[number],
    penaltyWeight: Number(el<HTMLInputElement>("penalty-weight").value),
    generations: Number(el<HTMLInputElement>("generations").value),
  };
  const problem = validateForm(form);
  if (problem) {
    setStatus(problem);
    return;
  }
  state.beforeView = state.view;
  const before = summarize(state.view);
  await api.continueRun(
    state.sessionId,
    form.mode,
    form.penaltyWeight,
    form.generations,
    freshToken("cont"),
  );
  const done = await api.pollUntilIdle(state.sessionId, tick);
  if (done.state === "failed") {
    setStatus(`continuation failed: ${done.failure}`);
    return;
  }
  const detail = await api.getSession(state.sessionId);
  await loadSnapshot(detail.iterations.length - 1);
  const after = summarize(state.view!);
  el<HTMLDivElement>("compare").textContent =
    `before: ${before} | after: ${after}`;
  setStatus("continuation complete");
}

function summarize(view: SnapshotView): string {
  const total = view.cells.size;
  const byExit = [0, 0, 0, 0];
  for (const cell of view.cells.values()) byExit[cell.exit] += 1;
  const pct = (n: number) => ((100 * n) / Math.max(total, 1)).toFixed(1);
  return `occ ${total}, exits 1/2/3: ${pct(byExit[1])}/${pct(byExit[2])}/${pct(byExit[3])}%`;
}

function attachHover(canvasId: string, locate: (x: number, y: number) => CellKey | null): void {
  const canvas = el<HTMLCanvasElement>(canvasId);
  canvas.addEventListener("mousemove", (event) => {
    if (event.buttons) return;
    const key = locate(event.offsetX, event.offsetY);
    if (key !== state.hovered) {
      state.hovered = key;
      redraw();
    }
  });
  canvas.addEventListener("click", (event) => {
    const key = locate(event.offsetX, event.offsetY);
    if (key && state.draft) {
      state.draft.toggle(key);
      redraw();
    }
  });
}

export function boot(): void {
  el<HTMLButtonElement>("start").addEventListener("click", () => {
    startSession().catch((err) => setStatus(String(err)));
  });
  el<HTMLButtonElement>("submit-partition").addEventListener("click", () => {
    submitPartition().catch((err) => setStatus(String(err)));
  });
  el<HTMLButtonElement>("continue").addEventListener("click", () => {
    launchContinuation().catch((err) => setStatus(String(err)));
  });
  el<HTMLInputElement>("show-all-paths").addEventListener("change", (event) => {
    state.everyNth = (event.target as HTMLInputElement).checked ? 1 : 5;
    redraw();
  });
  const modeSelect = el<HTMLSelectElement>("mode");
  for (const mode of MODES) {
    const option = document.createElement("option");
    option.value = mode;
    option.textContent = mode;
    if (mode === "combined") option.selected = true;
    modeSelect.appendChild(option);
  }
  attachHover("heatmap", heatmapCellAt);
  attachHover("scatter", scatterCellAt);
  attachHover("maze", pathCellAt);
  attachLasso("scatter", (key) => {
    const p = state.view?.embedding.get(key);
    if (!p || !state.view) return null;
    const t = scatterToCanvas(state.view, SIZE);
    return { x: t.x(p.x), y: t.y(p.y) };
  });
  attachLasso("heatmap", (key) => {
    if (!state.view) return null;
    const [row, col] = key.split(",").map(Number);
    const cw = SIZE / state.view.gridCols;
    const ch = SIZE / state.view.gridRows;
    return { x: (col + 0.5) * cw, y: SIZE - (row + 0.5) * ch };
  });
  setStatus("create a session to begin");
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
