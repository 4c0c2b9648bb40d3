"""Genome-to-behavior mapping for the two maze tasks.

Planner: 7 waypoint nodes decoded into a polyline, truncated at the first
wall contact. Controller: a recurrent network (hidden + context layer, all
weights evolved) driving a two-output robot for a fixed number of ticks.
Both produce the same evaluation record: traveled path, its length as the
fitness (minimized), the end-point archive cell, and inner-ring exit data.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .maze import ExitTrace, MazeSpec, classify_exits, descriptor_cell, first_collision

GRID_SHAPE = (30, 30)


@dataclass(frozen=True)
class Kinematics:
    """Robot motion and sensing constants."""

    max_translation: float = 3.0     # world units per tick
    max_rotation: float = 0.2        # radians per tick
    rangefinder_angles: tuple[float, ...] = (-45.0, 0.0, 45.0)  # degrees, relative
    rangefinder_range: float = 100.0


@dataclass(frozen=True)
class ElmanTopology:
    """Recurrent controller wiring.

    Inputs are 3 rangefinder readings plus a 4-way one-hot home-beacon
    quadrant. The context layer stores a weighted copy of the previous
    hidden activations; those hidden-to-context weights are part of the
    genome. Hidden and output units use tanh; the context update is linear.
    """

    n_inputs: int = 7
    n_hidden: int = 5
    n_context: int = 5
    n_outputs: int = 2
    evolve_hidden_to_context: bool = True
    biases: bool = False

    def __post_init__(self):
        if min(self.n_inputs, self.n_hidden, self.n_context, self.n_outputs) <= 0:
            raise ValueError("all layer sizes must be positive")

    @property
    def weight_count(self) -> int:
        n = (self.n_inputs * self.n_hidden
             + self.n_context * self.n_hidden
             + self.n_hidden * self.n_context
             + self.n_hidden * self.n_outputs)
        if self.biases:
            n += self.n_hidden + self.n_outputs
        return n


@dataclass(frozen=True)
class TaskSpec:
    """What a genome is and how it turns into behavior."""

    kind: str
    gene_count: int
    gene_range: tuple[float, float]
    sim_steps: int = 0
    topology: Optional[ElmanTopology] = None
    kinematics: Kinematics = Kinematics()

    def __post_init__(self):
        if self.kind not in ("planner", "controller"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.gene_count <= 0:
            raise ValueError("gene_count must be positive")
        if self.gene_range[0] >= self.gene_range[1]:
            raise ValueError("gene_range lower bound must be below upper bound")

    @property
    def range_width(self) -> float:
        return self.gene_range[1] - self.gene_range[0]

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "gene_count": self.gene_count,
            "gene_range": list(self.gene_range),
            "sim_steps": self.sim_steps,
        }
        if self.topology is not None:
            t = self.topology
            d["topology"] = {
                "n_inputs": t.n_inputs,
                "n_hidden": t.n_hidden,
                "n_context": t.n_context,
                "n_outputs": t.n_outputs,
                "evolve_hidden_to_context": t.evolve_hidden_to_context,
                "biases": t.biases,
            }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        topo = None
        if "topology" in d and d["topology"] is not None:
            topo = ElmanTopology(**d["topology"])
        return cls(
            kind=d["kind"],
            gene_count=d["gene_count"],
            gene_range=tuple(d["gene_range"]),
            sim_steps=d.get("sim_steps", 0),
            topology=topo,
        )


def planner_task() -> TaskSpec:
    """Seven (x, y) waypoint genes spanning the whole world square."""
    return TaskSpec(kind="planner", gene_count=14, gene_range=(-200.0, 200.0))


def controller_task(topology: Optional[ElmanTopology] = None, sim_steps: int = 1000) -> TaskSpec:
    topology = topology or ElmanTopology()
    return TaskSpec(
        kind="controller",
        gene_count=topology.weight_count,
        gene_range=(-3.0, 3.0),
        sim_steps=sim_steps,
        topology=topology,
    )


@dataclass
class EvaluatedSolution:
    """A genome together with its expressed behavior."""

    genome: np.ndarray
    path: np.ndarray
    fitness: float
    cell: tuple[int, int]
    exits: ExitTrace
    headings: Optional[np.ndarray] = None


@dataclass
class BatchEval:
    """Struct-of-arrays result of a batch evaluation."""

    genomes: np.ndarray
    fitness: np.ndarray
    end: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    inner_exit: np.ndarray   # 0 = never left the inner ring
    flag: np.ndarray
    paths: list = field(default_factory=list)
    headings: Optional[list] = None

    def __len__(self) -> int:
        return self.genomes.shape[0]


def _maze_arrays(maze: MazeSpec):
    radii = np.asarray(maze.ring_radii, dtype=np.float64)
    h = float(maze.half_thickness)
    n_rings = len(maze.ring_radii)
    gates = maze.gates_per_ring
    centers = np.empty((n_rings, gates), dtype=np.float64)
    edges = np.empty((n_rings, 2 * gates), dtype=np.float64)
    half = maze.gate_half_arc_rad()
    for ring in range(n_rings):
        cs = maze.gate_centers_rad(ring)
        for g, c in enumerate(cs):
            centers[ring, g] = c
            edges[ring, 2 * g] = c - half
            edges[ring, 2 * g + 1] = c + half
    return (radii, h, np.cos(centers), np.sin(centers), math.cos(half),
            np.cos(edges), np.sin(edges))


def _cells_for(end: np.ndarray, maze: MazeSpec):
    rows_n, cols_n = GRID_SHAPE
    width = 2.0 * maze.bound
    col = ((end[:, 0] + maze.bound) / width * cols_n).astype(np.int64)
    row = ((end[:, 1] + maze.bound) / width * rows_n).astype(np.int64)
    np.clip(col, 0, cols_n - 1, out=col)
    np.clip(row, 0, rows_n - 1, out=row)
    return row, col


def decode_planner(genome, maze: Optional[MazeSpec] = None) -> np.ndarray:
    """Polyline of the origin followed by the genome's 7 nodes.

    With a maze given, the polyline is truncated at its first wall contact.
    """
    g = np.asarray(genome, dtype=np.float64)
    if g.shape != (14,):
        raise ValueError(f"planner genome must have 14 genes, got shape {g.shape}")
    pts = np.vstack([np.zeros((1, 2)), g.reshape(7, 2)])
    if maze is None:
        return pts
    hit = first_collision(pts, maze)
    if hit is None:
        return pts
    truncated = pts[: hit.segment + 1]
    return np.vstack([truncated, np.asarray(hit.point)[None, :]])


def simulate_controller(genome, topology: ElmanTopology, maze: MazeSpec,
                        steps: int, initial_heading: float = 90.0,
                        kinematics: Kinematics = Kinematics()):
    """Integrate one robot; returns (positions, headings) arrays.

    ``initial_heading`` is in degrees. Deterministic: same genome and
    heading always yield the same trajectory.
    """
    g = np.ascontiguousarray(genome, dtype=np.float64).reshape(1, -1)
    if g.shape[1] != topology.weight_count:
        raise ValueError(
            f"genome has {g.shape[1]} weights, topology needs {topology.weight_count}")
    if topology.n_inputs != len(kinematics.rangefinder_angles) + 4:
        raise ValueError("simulation feeds 3 rangefinders plus a 4-way beacon; "
                         f"topology wants {topology.n_inputs} inputs")
    radii, h, gux, guy, cos_half, ecos, esin = _maze_arrays(maze)
    paths = np.empty((1, steps + 1, 2), dtype=np.float64)
    headings = np.empty((1, steps + 1), dtype=np.float64)
    fitness = np.empty(1, dtype=np.float64)
    inner_exit = np.zeros(1, dtype=np.int64)
    flag = np.zeros(1, dtype=np.bool_)
    psi0 = np.full(1, math.radians(initial_heading), dtype=np.float64)
    rf = np.radians(np.asarray(kinematics.rangefinder_angles, dtype=np.float64))
    _kernels.simulate_controllers(
        g, topology.n_inputs, topology.n_hidden, topology.n_context,
        topology.n_outputs, topology.biases,
        radii, h, gux, guy, cos_half, ecos, esin,
        float(maze.bound), float(maze.start[0]), float(maze.start[1]),
        psi0, steps, kinematics.max_translation, kinematics.max_rotation,
        np.cos(rf), np.sin(rf), kinematics.rangefinder_range,
        paths, headings, fitness, inner_exit, flag)
    return paths[0], headings[0]


def sense(position, heading_deg: float, maze: MazeSpec,
          kinematics: Kinematics = Kinematics()) -> np.ndarray:
    """Reference sensor model: 3 normalized rangefinder readings plus the
    one-hot quadrant of the origin-pointing vector in the robot frame."""
    px, py = float(position[0]), float(position[1])
    psi = math.radians(heading_deg)
    readings = []
    for off in kinematics.rangefinder_angles:
        ang = psi + math.radians(off)
        tip = (px + kinematics.rangefinder_range * math.cos(ang),
               py + kinematics.rangefinder_range * math.sin(ang))
        hit = first_collision([(px, py), tip], maze)
        readings.append(1.0 if hit is None else hit.t)
    vx, vy = maze.start[0] - px, maze.start[1] - py
    bx = math.cos(psi) * vx + math.sin(psi) * vy
    by = -math.sin(psi) * vx + math.cos(psi) * vy
    phi = math.atan2(by, bx)
    if phi < 0.0:
        phi += 2.0 * math.pi
    quad = min(int(phi / (math.pi / 2.0)), 3)
    onehot = [0.0] * 4
    onehot[quad] = 1.0
    return np.asarray(readings + onehot)


def evaluate(genome, task: TaskSpec, maze: MazeSpec,
             initial_heading: float = 90.0) -> EvaluatedSolution:
    """Evaluate one genome through the reference (non-batched) pipeline."""
    g = np.asarray(genome, dtype=np.float64)
    if g.shape != (task.gene_count,):
        raise ValueError(f"genome shape {g.shape} does not match task ({task.gene_count},)")
    lo, hi = task.gene_range
    if g.min() < lo - 1e-9 or g.max() > hi + 1e-9:
        raise ValueError("genome outside the task gene range")
    headings = None
    if task.kind == "planner":
        path = decode_planner(g, maze)
    else:
        path, headings = simulate_controller(g, task.topology, maze,
                                             task.sim_steps, initial_heading,
                                             task.kinematics)
    seglens = np.hypot(np.diff(path[:, 0]), np.diff(path[:, 1]))
    fitness = float(seglens.sum())
    cell = descriptor_cell(path[-1], maze, GRID_SHAPE)
    exits = classify_exits(path, maze)
    return EvaluatedSolution(genome=g, path=path, fitness=fitness,
                             cell=cell, exits=exits, headings=headings)


def evaluate_batch(genomes, task: TaskSpec, maze: MazeSpec,
                   initial_heading: float = 90.0) -> BatchEval:
    """Evaluate many genomes through the jitted kernels."""
    G = np.ascontiguousarray(genomes, dtype=np.float64)
    if G.ndim != 2 or G.shape[1] != task.gene_count:
        raise ValueError(f"genome batch must be (B, {task.gene_count})")
    B = G.shape[0]
    radii, h, gux, guy, cos_half, ecos, esin = _maze_arrays(maze)
    fitness = np.empty(B, dtype=np.float64)
    inner_exit = np.zeros(B, dtype=np.int64)
    flag = np.zeros(B, dtype=np.bool_)
    if task.kind == "planner":
        nodes = G.reshape(B, 7, 2)
        paths = np.empty((B, 8, 2), dtype=np.float64)
        n_points = np.empty(B, dtype=np.int64)
        _kernels.evaluate_planners(nodes, radii, h, gux, guy, cos_half, ecos, esin,
                                   paths, n_points, fitness, inner_exit, flag)
        path_list = [paths[b, : n_points[b]] for b in range(B)]
        end = np.stack([p[-1] for p in path_list])
        head_list = None
    else:
        topo = task.topology
        steps = task.sim_steps
        kin = task.kinematics
        paths = np.empty((B, steps + 1, 2), dtype=np.float64)
        headings = np.empty((B, steps + 1), dtype=np.float64)
        psi0 = np.full(B, math.radians(initial_heading), dtype=np.float64)
        rf = np.radians(np.asarray(kin.rangefinder_angles, dtype=np.float64))
        _kernels.simulate_controllers(
            G, topo.n_inputs, topo.n_hidden, topo.n_context, topo.n_outputs,
            topo.biases, radii, h, gux, guy, cos_half, ecos, esin,
            float(maze.bound), float(maze.start[0]), float(maze.start[1]),
            psi0, steps, kin.max_translation, kin.max_rotation,
            np.cos(rf), np.sin(rf), kin.rangefinder_range,
            paths, headings, fitness, inner_exit, flag)
        path_list = [paths[b] for b in range(B)]
        head_list = [headings[b] for b in range(B)]
        end = paths[:, -1, :].copy()
    rows, cols = _cells_for(end, maze)
    return BatchEval(genomes=G, fitness=fitness, end=end, rows=rows, cols=cols,
                     inner_exit=inner_exit.astype(np.int8), flag=flag,
                     paths=path_list, headings=head_list)


def path_table(path, headings=None) -> str:
    """Render a trace as a comma-separated (step, x, y, heading) table.

    Headings are degrees; without recorded headings the direction of the
    outgoing segment is used (repeated for the final point).
    """
    pts = np.asarray(path, dtype=float)
    out = io.StringIO()
    out.write("step,x,y,heading\n")
    n = pts.shape[0]
    for i in range(n):
        if headings is not None:
            hd = math.degrees(float(headings[i]))
        elif n == 1:
            hd = 0.0
        else:
            j = min(i, n - 2)
            hd = math.degrees(math.atan2(pts[j + 1, 1] - pts[j, 1],
                                         pts[j + 1, 0] - pts[j, 0]))
        out.write(f"{i},{pts[i, 0]!r},{pts[i, 1]!r},{hd!r}\n")
    return out.getvalue()
