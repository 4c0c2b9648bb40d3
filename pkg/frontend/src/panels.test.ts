import { describe, expect, it } from "vitest";

import { defaultForm, defaultPenaltyWeight, freshToken, validateForm } from "./controls.js";
import { cellColor, renderHeatmapPanel, renderMazePanel, renderScatterPanel, type Ctx } from "./panels.js";
import { SelectionDraft, snapshotView } from "./state.js";
import { fixturePayload } from "./state.test.js";

class RecordingCtx implements Ctx {
  fillStyle: string | CanvasGradient | CanvasPattern = "";
  strokeStyle: string | CanvasGradient | CanvasPattern = "";
  lineWidth = 1;
  globalAlpha = 1;
  ops: string[] = [];
  clearRect() { this.ops.push("clear"); }
  fillRect() { this.ops.push("fillRect"); }
  strokeRect() { this.ops.push("strokeRect"); }
  beginPath() { this.ops.push("begin"); }
  moveTo() { this.ops.push("move"); }
  lineTo() { this.ops.push("line"); }
  arc() { this.ops.push("arc"); }
  stroke() { this.ops.push("stroke"); }
  fill() { this.ops.push("fill"); }
  count(op: string): number { return this.ops.filter((o) => o === op).length; }
}

const view = snapshotView(fixturePayload(6));
const baseOpts = { size: 400, everyNth: 1, hovered: null, draft: null };

describe("renderers", () => {
  it("heatmap fills one rect per occupied cell", () => {
    const ctx = new RecordingCtx();
    renderHeatmapPanel(ctx, view, baseOpts);
    expect(ctx.count("fillRect")).toBe(6);
  });

  it("heatmap outlines only the hovered cell", () => {
    const ctx = new RecordingCtx();
    renderHeatmapPanel(ctx, view, { ...baseOpts, hovered: "0,0" });
    expect(ctx.count("strokeRect")).toBe(1);
  });

  it("scatter draws one dot per embedding point", () => {
    const ctx = new RecordingCtx();
    renderScatterPanel(ctx, view, baseOpts);
    expect(ctx.count("fill")).toBe(6);
  });

  it("maze draws every path, and respects every-5th decimation", () => {
    const all = new RecordingCtx();
    renderMazePanel(all, view, baseOpts);
    const pathStrokes = all.count("move"); // one moveTo per drawn path
    expect(pathStrokes).toBe(6);
    const decimated = new RecordingCtx();
    renderMazePanel(decimated, view, { ...baseOpts, everyNth: 5 });
    expect(decimated.count("move")).toBe(2); // 6 elites -> ceil(6/5)
  });

  it("drift preview adds a shading pass per previewed cell", () => {
    const shaded = snapshotView(fixturePayload(6));
    for (const cell of shaded.cells.values()) cell.drift = 0.7;
    const ctx = new RecordingCtx();
    renderHeatmapPanel(ctx, shaded, baseOpts);
    expect(ctx.count("fillRect")).toBe(12);
  });
});

describe("cellColor", () => {
  it("hues by exit before any selection", () => {
    expect(cellColor(0, false, undefined)).toBe("#9a9a9a");
    expect(cellColor(1, false, undefined)).not.toBe(cellColor(2, false, undefined));
  });

  it("uses green/red/grey once a selection exists", () => {
    expect(cellColor(1, false, true)).toBe("#2e8b57");
    expect(cellColor(2, false, false)).toBe("#c0392b");
    expect(cellColor(0, false, false)).toBe("#9a9a9a");
  });
});

describe("controls", () => {
  it("defaults the penalty weight per task", () => {
    expect(defaultPenaltyWeight("planner")).toBe(10);
    expect(defaultPenaltyWeight("controller")).toBe(200);
    expect(defaultForm("controller").penaltyWeight).toBe(200);
  });

  it("validates continuation forms", () => {
    expect(validateForm({ mode: "combined", penaltyWeight: 10, generations: 64 })).toBeNull();
    expect(validateForm({ mode: "combined", penaltyWeight: -1, generations: 64 })).toMatch(/penalty/);
    expect(validateForm({ mode: "combined", penaltyWeight: 0, generations: 1.5 })).toMatch(/generations/);
  });

  it("generates unique request tokens", () => {
    expect(freshToken("a")).not.toBe(freshToken("a"));
  });
});

describe("selection rendering integration", () => {
  it("selected cells render green in every panel", () => {
    const draft = SelectionDraft.forView(view);
    draft.add(["0,0"]);
    const ctx = new RecordingCtx();
    renderHeatmapPanel(ctx, view, { ...baseOpts, draft });
    expect(ctx.count("fillRect")).toBe(6);
  });
});
