import { describe, expect, it } from "vitest";

import { SelectionDraft, snapshotView } from "./state.js";
import type { SnapshotPayload } from "./types.js";

export function fixturePayload(cellCount = 6): SnapshotPayload {
  const cells = [];
  const embedding = [];
  const paths: Record<string, number[][]> = {};
  for (let i = 0; i < cellCount; i++) {
    const row = Math.floor(i / 3);
    const col = i % 3;
    cells.push({
      row,
      col,
      fitness: 10 + i,
      exit: (i % 4),
      reentered: i === 5,
      end: [i * 10, i * 5] as [number, number],
    });
    embedding.push({ row, col, x: i - 2.5, y: (i % 2) - 0.5 });
    paths[`${row},${col}`] = [[0, 0], [i * 10, i * 5]];
  }
  return {
    schema_version: 1,
    iteration: 0,
    grid: { rows: 30, cols: 30 },
    maze: {
      ring_radii: [65, 130, 195],
      wall_thickness: 5,
      gate_arc_width: 30,
      gate_center_angles: [[90, 210, 330], [30, 150, 270], [90, 210, 330]],
      bound: 200,
      start: [0, 0],
    },
    occupancy: cellCount,
    cells,
    embedding,
    paths,
  };
}

describe("snapshotView", () => {
  it("mirrors cells, embedding and paths", () => {
    const view = snapshotView(fixturePayload());
    expect(view.cells.size).toBe(6);
    expect(view.embedding.size).toBe(6);
    expect(view.paths.size).toBe(6);
    expect(view.order.length).toBe(6);
    expect(view.bound).toBe(200);
  });

  it("rejects embeddings that do not cover the cells", () => {
    const payload = fixturePayload();
    payload.embedding.pop();
    expect(() => snapshotView(payload)).toThrow(/invariant/);
  });
});

describe("SelectionDraft", () => {
  const view = snapshotView(fixturePayload());

  it("toggling twice is the identity", () => {
    const draft = SelectionDraft.forView(view);
    draft.toggle("0,0");
    expect(draft.has("0,0")).toBe(true);
    draft.toggle("0,0");
    expect(draft.has("0,0")).toBe(false);
    expect(draft.countSelected).toBe(0);
  });

  it("ignores cells that are not occupied", () => {
    const draft = SelectionDraft.forView(view);
    draft.toggle("17,3");
    expect(draft.countSelected).toBe(0);
  });

  it("blocks submission when empty or full", () => {
    const draft = SelectionDraft.forView(view);
    expect(draft.canSubmit).toBe(false);
    expect(draft.blockedReason).toMatch(/nothing/);
    draft.add(view.order);
    expect(draft.countDeselected).toBe(0);
    expect(draft.canSubmit).toBe(false);
    expect(draft.blockedReason).toMatch(/everything/);
    draft.toggle("0,0");
    expect(draft.canSubmit).toBe(true);
    expect(draft.blockedReason).toBeNull();
  });

  it("emits a sorted cell array for the wire", () => {
    const draft = SelectionDraft.forView(view);
    draft.add(["1,2", "0,1", "0,0"]);
    expect(draft.toCellArray()).toEqual([[0, 0], [0, 1], [1, 2]]);
  });

  it("counts stay consistent after mixed edits", () => {
    const draft = SelectionDraft.forView(view);
    draft.add(["0,0", "0,1"]);
    draft.toggle("0,1");
    expect(draft.countSelected).toBe(1);
    expect(draft.countSelected + draft.countDeselected).toBe(view.cells.size);
  });
});
