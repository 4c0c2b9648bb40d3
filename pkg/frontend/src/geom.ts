/** Pure geometry used by the panels: hit tests, lasso, decimation. */

export interface Point {
  x: number;
  y: number;
}

/** Ray-casting point-in-polygon; boundary points count as inside. */
export function pointInPolygon(p: Point, polygon: Point[]): boolean {
  if (polygon.length < 3) return false;
  let inside = false;
  for (let i = 0, j = polygon.length - 1; i < polygon.length; j = i++) {
    const a = polygon[i];
    const b = polygon[j];
    if (onSegment(p, a, b)) return true;
    const crosses =
      a.y > p.y !== b.y > p.y &&
      p.x < ((b.x - a.x) * (p.y - a.y)) / (b.y - a.y) + a.x;
    if (crosses) inside = !inside;
  }
  return inside;
}

function onSegment(p: Point, a: Point, b: Point): boolean {
  const cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
  if (Math.abs(cross) > 1e-9) return false;
  const dot = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
  const len2 = (b.x - a.x) ** 2 + (b.y - a.y) ** 2;
  return dot >= 0 && dot <= len2;
}

export function rectContains(p: Point, a: Point, b: Point): boolean {
  return (
    p.x >= Math.min(a.x, b.x) &&
    p.x <= Math.max(a.x, b.x) &&
    p.y >= Math.min(a.y, b.y) &&
    p.y <= Math.max(a.y, b.y)
  );
}

/** Linear world-to-canvas mapping for the square [-bound, bound]^2. */
export function worldToCanvas(bound: number, size: number) {
  const scale = size / (2 * bound);
  return {
    x: (wx: number) => (wx + bound) * scale,
    y: (wy: number) => size - (wy + bound) * scale, // canvas y grows downward
    scale,
  };
}

/** Every n-th key (first included) for legible path rendering. */
export function decimate<T>(items: T[], every: number): T[] {
  if (every <= 1) return [...items];
  return items.filter((_, index) => index % every === 0);
}
