/** Linked brushing: one hovered element highlights its counterparts.
 *
 * Every occupied cell owns exactly one path and one scatter point, so the
 * link index is a bijection keyed by the cell.
 */

import type { SnapshotView } from "./state.js";
import type { CellKey } from "./types.js";

export interface LinkTargets {
  cellKey: CellKey;
  scatterIndex: number;
  hasPath: boolean;
}

export class LinkIndex {
  private byCell = new Map<CellKey, LinkTargets>();
  private byScatter: CellKey[] = [];

  constructor(view: SnapshotView) {
    view.order.forEach((key, index) => {
      this.byCell.set(key, {
        cellKey: key,
        scatterIndex: index,
        hasPath: view.paths.has(key),
      });
      this.byScatter.push(key);
    });
  }

  get size(): number {
    return this.byScatter.length;
  }

  fromCell(key: CellKey): LinkTargets | undefined {
    return this.byCell.get(key);
  }

  fromScatter(index: number): LinkTargets | undefined {
    const key = this.byScatter[index];
    return key === undefined ? undefined : this.byCell.get(key);
  }

  /** True when the index is a bijection between cells and scatter points. */
  consistent(): boolean {
    if (new Set(this.byScatter).size !== this.byScatter.length) return false;
    for (const [key, targets] of this.byCell) {
      if (this.byScatter[targets.scatterIndex] !== key) return false;
    }
    return true;
  }
}
