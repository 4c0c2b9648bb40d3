"""Ring-maze geometry: wall model, collision queries, exit classification, binning.

The maze is three concentric ring walls around the origin. Each ring is an
annulus of ``wall_thickness`` centered on its radius, interrupted by three
gate arcs. The world is the axis-aligned square ``[-bound, bound]^2``.

All queries here are pure functions of their inputs; angles in the public
configuration are degrees, coordinates are world units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


def _wrap_angle(a: float) -> float:
    """Wrap an angle in radians to [0, 2*pi)."""
    a = math.fmod(a, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    return a


def _ang_dist(a: float, b: float) -> float:
    """Smallest absolute angular distance between two angles in radians."""
    d = abs(_wrap_angle(a) - _wrap_angle(b))
    return min(d, TWO_PI - d)


@dataclass(frozen=True)
class MazeSpec:
    """Geometry of the three-ring maze.

    Config file keys match the field names below. Units: world units for
    lengths, degrees for angles. ``bound`` is the half-width of the square
    world, i.e. coordinates live in ``[-bound, bound]``.
    """

    ring_radii: tuple[float, float, float] = (65.0, 130.0, 195.0)
    wall_thickness: float = 5.0
    gates_per_ring: int = 3
    gate_arc_width: float = 30.0
    gate_center_angles: tuple[tuple[float, ...], ...] = (
        (90.0, 210.0, 330.0),
        (30.0, 150.0, 270.0),
        (90.0, 210.0, 330.0),
    )
    bound: float = 200.0
    start: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        radii = tuple(float(r) for r in self.ring_radii)
        if len(radii) != 3 or any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("ring_radii must be three strictly increasing values")
        if radii[-1] + self.wall_thickness > self.bound:
            raise ValueError("outermost ring plus wall thickness must fit inside the bound")
        if len(self.gate_center_angles) != 3:
            raise ValueError("gate_center_angles needs one tuple per ring")
        for ring, centers in enumerate(self.gate_center_angles):
            if len(centers) != self.gates_per_ring:
                raise ValueError(f"ring {ring} must have {self.gates_per_ring} gates")
            cs = sorted(_wrap_angle(math.radians(c)) for c in centers)
            for a, b in zip(cs, cs[1:] + [cs[0] + TWO_PI]):
                if (b - a) <= math.radians(self.gate_arc_width):
                    raise ValueError(f"gate arcs overlap on ring {ring}")
            # three-fold symmetry: centers of one ring sit 120 degrees apart
            for a, b in zip(cs, cs[1:]):
                if abs((b - a) - TWO_PI / 3) > 1e-9:
                    raise ValueError("gate centers within a ring must be 120 degrees apart")

    @property
    def half_thickness(self) -> float:
        return self.wall_thickness / 2.0

    def gate_centers_rad(self, ring: int) -> tuple[float, ...]:
        """Gate centers of ``ring`` in radians, sorted ascending (gate ids 1..n)."""
        return tuple(sorted(_wrap_angle(math.radians(c)) for c in self.gate_center_angles[ring]))

    def gate_half_arc_rad(self) -> float:
        return math.radians(self.gate_arc_width) / 2.0

    def angle_in_gate(self, ring: int, angle_rad: float) -> bool:
        half = self.gate_half_arc_rad()
        return any(_ang_dist(angle_rad, c) <= half for c in self.gate_centers_rad(ring))

    def gate_id_at(self, ring: int, angle_rad: float) -> Optional[int]:
        """1-based gate id containing ``angle_rad`` on ``ring``, or None."""
        half = self.gate_half_arc_rad()
        for gid, c in enumerate(self.gate_centers_rad(ring), start=1):
            if _ang_dist(angle_rad, c) <= half:
                return gid
        return None

    def to_json(self, indent: int = 2) -> str:
        d = {
            "ring_radii": list(self.ring_radii),
            "wall_thickness": self.wall_thickness,
            "gates_per_ring": self.gates_per_ring,
            "gate_arc_width": self.gate_arc_width,
            "gate_center_angles": [list(c) for c in self.gate_center_angles],
            "bound": self.bound,
            "start": list(self.start),
        }
        return json.dumps(d, indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MazeSpec":
        d = json.loads(text)
        return cls(
            ring_radii=tuple(d["ring_radii"]),
            wall_thickness=d["wall_thickness"],
            gates_per_ring=d["gates_per_ring"],
            gate_arc_width=d["gate_arc_width"],
            gate_center_angles=tuple(tuple(c) for c in d["gate_center_angles"]),
            bound=d["bound"],
            start=tuple(d["start"]),
        )


@dataclass(frozen=True)
class Collision:
    """First contact of a path with wall material."""

    segment: int
    t: float
    point: tuple[float, float]


@dataclass(frozen=True)
class RingCrossing:
    """One crossing of a ring's centerline radius."""

    ring: int
    segment: int
    outward: bool
    gate: Optional[int]


@dataclass
class ExitTrace:
    """Which inner-ring gate a path first left through, and whether it later
    left through a different one."""

    inner_exit: Optional[int] = None
    reentered_and_left_elsewhere: bool = False
    crossings: list[RingCrossing] = field(default_factory=list)


def point_in_wall(p: Sequence[float], maze: MazeSpec) -> bool:
    """True when ``p`` lies inside wall material (closed annuli minus gates)."""
    x, y = float(p[0]), float(p[1])
    r = math.hypot(x, y)
    h = maze.half_thickness
    for ring, radius in enumerate(maze.ring_radii):
        if abs(r - radius) <= h:
            theta = math.atan2(y, x)
            if not maze.angle_in_gate(ring, theta):
                return True
    return False


def _segment_circle_ts(p0, d, radius: float) -> list[float]:
    """Parameters t where ``p0 + t*d`` meets the circle of ``radius``."""
    a = d[0] * d[0] + d[1] * d[1]
    if a == 0.0:
        return []
    b = 2.0 * (p0[0] * d[0] + p0[1] * d[1])
    c = p0[0] * p0[0] + p0[1] * p0[1] - radius * radius
    disc = b * b - 4.0 * a * c
    if disc <= 0.0:
        return []
    s = math.sqrt(disc)
    return [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)]


def _segment_events(p0, p1, maze: MazeSpec) -> list[float]:
    """Candidate parameters where wall-membership can change along a segment.

    Membership is piecewise constant between events, so testing interval
    midpoints gives an exact answer. Events are crossings of the annulus
    boundary circles and of gate-edge rays.
    """
    d = (p1[0] - p0[0], p1[1] - p0[1])
    seg_len = math.hypot(d[0], d[1])
    if seg_len == 0.0:
        return []
    # min/max distance of the segment from the origin, for ring culling
    ts = []
    r0 = math.hypot(p0[0], p0[1])
    r1 = math.hypot(p1[0], p1[1])
    rmax = max(r0, r1)
    # closest point of the full segment to origin
    tc = -(p0[0] * d[0] + p0[1] * d[1]) / (seg_len * seg_len)
    tc = min(1.0, max(0.0, tc))
    rmin = math.hypot(p0[0] + tc * d[0], p0[1] + tc * d[1])
    h = maze.half_thickness
    half_arc = maze.gate_half_arc_rad()
    for ring, radius in enumerate(maze.ring_radii):
        if rmax < radius - h or rmin > radius + h:
            continue
        for t in _segment_circle_ts(p0, d, radius - h):
            if 0.0 < t <= 1.0:
                ts.append(t)
        for t in _segment_circle_ts(p0, d, radius + h):
            if 0.0 < t <= 1.0:
                ts.append(t)
        for center in maze.gate_centers_rad(ring):
            for edge in (center - half_arc, center + half_arc):
                ex, ey = math.cos(edge), math.sin(edge)
                denom = ex * d[1] - ey * d[0]
                if denom == 0.0:
                    continue
                t = (ey * p0[0] - ex * p0[1]) / denom
                if not 0.0 < t <= 1.0:
                    continue
                px, py = p0[0] + t * d[0], p0[1] + t * d[1]
                if px * ex + py * ey <= 0.0:
                    continue  # on the opposite half-line
                if abs(math.hypot(px, py) - radius) <= h:
                    ts.append(t)
    return ts


def first_collision(path, maze: MazeSpec) -> Optional[Collision]:
    """Earliest point where a polyline enters wall material.

    Returns None for a collision-free path. The path must have at least one
    point; a single point (or zero-length segments) only collide when the
    point itself sits inside wall material.
    """
    pts = np.asarray(path, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] != 2:
        raise ValueError("path must be a non-empty sequence of (x, y) points")
    if not np.all(np.isfinite(pts)):
        raise ValueError("path coordinates must be finite")
    if point_in_wall(pts[0], maze):
        return Collision(0, 0.0, (float(pts[0][0]), float(pts[0][1])))
    for seg in range(pts.shape[0] - 1):
        p0, p1 = pts[seg], pts[seg + 1]
        events = sorted(set(_segment_events(p0, p1, maze)))
        bounds = [0.0] + [t for t in events if t < 1.0] + [1.0]
        d = (p1[0] - p0[0], p1[1] - p0[1])
        for lo, hi in zip(bounds, bounds[1:]):
            mid = 0.5 * (lo + hi)
            if point_in_wall((p0[0] + mid * d[0], p0[1] + mid * d[1]), maze):
                hit = (p0[0] + lo * d[0], p0[1] + lo * d[1])
                return Collision(seg, lo, (float(hit[0]), float(hit[1])))
    return None


def _segment_crossings(p0, p1, radius: float) -> list[tuple[float, bool]]:
    """(t, outward) for true crossings of ``radius`` on one segment.

    Tangential touches are skipped: a crossing needs a nonzero radial
    derivative at the intersection.
    """
    d = (p1[0] - p0[0], p1[1] - p0[1])
    out = []
    for t in sorted(_segment_circle_ts(p0, d, radius)):
        if not 0.0 < t <= 1.0:
            continue
        px, py = p0[0] + t * d[0], p0[1] + t * d[1]
        deriv = px * d[0] + py * d[1]  # sign of d(r^2)/dt / 2
        if deriv > 0.0:
            out.append((t, True))
        elif deriv < 0.0:
            out.append((t, False))
    return out


def classify_exits(path, maze: MazeSpec) -> ExitTrace:
    """Scan ring-radius crossings in path order and classify inner-ring exits.

    Intended for paths already truncated at their first collision, so every
    crossing of a ring centerline passes through a gate. The first outward
    inner-ring crossing sets ``inner_exit``; any later outward crossing
    through a different inner gate sets the reentry flag.
    """
    pts = np.asarray(path, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] != 2:
        raise ValueError("path must be a non-empty sequence of (x, y) points")
    trace = ExitTrace()
    # state machine per ring: are we currently inside the ring's centerline?
    inside = [math.hypot(*pts[0]) < radius for radius in maze.ring_radii]
    for seg in range(pts.shape[0] - 1):
        p0, p1 = pts[seg], pts[seg + 1]
        events = []
        for ring, radius in enumerate(maze.ring_radii):
            for t, outward in _segment_crossings(p0, p1, radius):
                events.append((t, ring, outward))
        events.sort()
        d = (p1[0] - p0[0], p1[1] - p0[1])
        for t, ring, outward in events:
            if outward is (not inside[ring]):
                continue  # not a state change (e.g. grazing duplicates)
            inside[ring] = not outward
            theta = math.atan2(p0[1] + t * d[1], p0[0] + t * d[0])
            gate = maze.gate_id_at(ring, theta)
            trace.crossings.append(RingCrossing(ring, seg, outward, gate))
            if ring == 0 and outward and gate is not None:
                if trace.inner_exit is None:
                    trace.inner_exit = gate
                elif gate != trace.inner_exit:
                    trace.reentered_and_left_elsewhere = True
    return trace


def descriptor_cell(end_point, maze: MazeSpec, grid: tuple[int, int] = (30, 30)) -> tuple[int, int]:
    """Uniform bin of ``end_point`` in the world square.

    Bins are half-open with the last bin closed; boundary points clamp into
    the grid. Row indexes the y axis, column the x axis, both 0-based from
    the ``(-bound, -bound)`` corner.
    """
    x, y = float(end_point[0]), float(end_point[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("end point coordinates must be finite")
    rows, cols = grid
    width = 2.0 * maze.bound
    col = int((x + maze.bound) / width * cols)
    row = int((y + maze.bound) / width * rows)
    return (min(max(row, 0), rows - 1), min(max(col, 0), cols - 1))
