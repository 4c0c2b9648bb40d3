"""Grid-archive evolution: random parent selection, Gaussian mutation,
strictly-better elite replacement.

The archive is a fixed 30x30 lattice aligned to the maze square; each cell
holds at most one elite and is only ever replaced by a strictly better
(lower) score under the objective active at insertion time. Scores are
written at insertion and are not recomputed during a run; switching
objectives between runs is the caller's concern (see
:meth:`Archive.rescore`).
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .maze import MazeSpec, classify_exits
from .persist import load_bundle, save_bundle
from .tasks import (GRID_SHAPE, BatchEval, EvaluatedSolution, TaskSpec,
                    evaluate_batch)

SNAPSHOT_VERSION = 1


class FitnessObjective:
    """Identity objective: the score of a solution is its path length."""

    def score(self, fitness: np.ndarray, genomes: np.ndarray) -> np.ndarray:
        return np.asarray(fitness, dtype=float).copy()


@dataclass(frozen=True)
class EvolutionConfig:
    """Knobs of one evolution run."""

    generations: int
    children_per_gen: int = 32
    mutation_sigma_pct: float = 5.0
    init_kind: str = "normal"        # "normal" around the box center, or "sobol"
    init_sigma: float = 10.0         # world units, normal init only
    init_count: int = 2000
    rng_seed: int = 0

    def __post_init__(self):
        if self.generations < 0 or self.children_per_gen <= 0 or self.init_count <= 0:
            raise ValueError("generation and population counts must be positive")
        if self.mutation_sigma_pct <= 0:
            raise ValueError("mutation_sigma_pct must be positive")
        if self.init_kind not in ("normal", "sobol"):
            raise ValueError(f"unknown init kind {self.init_kind!r}")


class Archive:
    """30x30 lattice of elites stored as flat struct-of-arrays."""

    def __init__(self, task: TaskSpec, maze: MazeSpec,
                 shape: tuple[int, int] = GRID_SHAPE, initial_heading: float = 90.0):
        self.task = task
        self.maze = maze
        self.shape = shape
        self.initial_heading = float(initial_heading)
        n = shape[0] * shape[1]
        g = task.gene_count
        self.occupied = np.zeros(n, dtype=bool)
        self.genomes = np.zeros((n, g), dtype=np.float64)
        self.fitness = np.full(n, np.nan)
        self.score = np.full(n, np.nan)
        self.end = np.zeros((n, 2), dtype=np.float64)
        self.inner_exit = np.zeros(n, dtype=np.int8)
        self.flag = np.zeros(n, dtype=bool)
        self.paths: list = [None] * n

    @property
    def capacity(self) -> int:
        return self.shape[0] * self.shape[1]

    def occupancy(self) -> int:
        return int(self.occupied.sum())

    def occupied_indices(self) -> np.ndarray:
        return np.flatnonzero(self.occupied)

    def cell_index(self, row: int, col: int) -> int:
        return row * self.shape[1] + col

    def insert_batch(self, batch: BatchEval, scores: np.ndarray) -> int:
        """Claim empty cells or replace on strictly better score; returns the
        number of accepted solutions."""
        accepted = 0
        idx = batch.rows * self.shape[1] + batch.cols
        for i in range(len(batch)):
            j = int(idx[i])
            if self.occupied[j] and not (scores[i] < self.score[j]):
                continue
            self.occupied[j] = True
            self.genomes[j] = batch.genomes[i]
            self.fitness[j] = batch.fitness[i]
            self.score[j] = scores[i]
            self.end[j] = batch.end[i]
            self.inner_exit[j] = batch.inner_exit[i]
            self.flag[j] = batch.flag[i]
            self.paths[j] = np.array(batch.paths[i])
            accepted += 1
        return accepted

    def rescore(self, objective) -> None:
        """Recompute stored scores under a new objective.

        Call this when continuing an existing archive under a different
        objective, so incumbents and children compete on the same scale.
        """
        occ = self.occupied_indices()
        if occ.size:
            self.score[occ] = objective.score(self.fitness[occ], self.genomes[occ])

    def elite(self, row: int, col: int) -> Optional[EvaluatedSolution]:
        j = self.cell_index(row, col)
        if not self.occupied[j]:
            return None
        path = self.paths[j]
        return EvaluatedSolution(
            genome=self.genomes[j].copy(), path=path.copy(),
            fitness=float(self.fitness[j]), cell=(row, col),
            exits=classify_exits(path, self.maze))

    def copy(self) -> "Archive":
        other = Archive(self.task, self.maze, self.shape, self.initial_heading)
        other.occupied = self.occupied.copy()
        other.genomes = self.genomes.copy()
        other.fitness = self.fitness.copy()
        other.score = self.score.copy()
        other.end = self.end.copy()
        other.inner_exit = self.inner_exit.copy()
        other.flag = self.flag.copy()
        other.paths = [None if p is None else p.copy() for p in self.paths]
        return other

    # -- serialization ----------------------------------------------------

    def to_bundle(self) -> dict:
        n = self.capacity
        offsets = np.zeros(n + 1, dtype=np.int64)
        chunks = []
        total = 0
        for j in range(n):
            if self.paths[j] is not None:
                chunks.append(self.paths[j])
                total += len(self.paths[j])
            offsets[j + 1] = total
        concat = (np.concatenate(chunks, axis=0) if chunks
                  else np.zeros((0, 2), dtype=np.float64))
        meta = {
            "task": self.task.to_dict(),
            "maze": json.loads(self.maze.to_json()),
            "initial_heading": self.initial_heading,
            "shape": list(self.shape),
        }
        return dict(
            version=np.int64(SNAPSHOT_VERSION),
            rows=np.int64(self.shape[0]), cols=np.int64(self.shape[1]),
            occupied=self.occupied, genomes=self.genomes,
            fitness=self.fitness, score=self.score, end=self.end,
            inner_exit=self.inner_exit, flag=self.flag,
            path_concat=concat, path_offsets=offsets,
            meta_json=np.array(json.dumps(meta, sort_keys=True)),
        )

    def save(self, path) -> None:
        save_bundle(path, **self.to_bundle())

    @classmethod
    def from_bundle(cls, data: dict) -> "Archive":
        version = int(data["version"])
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        meta = json.loads(str(data["meta_json"]))
        task = TaskSpec.from_dict(meta["task"])
        maze = MazeSpec.from_json(json.dumps(meta["maze"]))
        archive = cls(task, maze, tuple(meta["shape"]), meta["initial_heading"])
        archive.occupied = data["occupied"].astype(bool)
        archive.genomes = data["genomes"].astype(np.float64)
        archive.fitness = data["fitness"].astype(np.float64)
        archive.score = data["score"].astype(np.float64)
        archive.end = data["end"].astype(np.float64)
        archive.inner_exit = data["inner_exit"].astype(np.int8)
        archive.flag = data["flag"].astype(bool)
        offsets = data["path_offsets"]
        concat = data["path_concat"]
        for j in range(archive.capacity):
            if archive.occupied[j]:
                archive.paths[j] = concat[offsets[j]:offsets[j + 1]].copy()
        return archive

    @classmethod
    def load(cls, path) -> "Archive":
        return cls.from_bundle(load_bundle(path))

    def content_hash(self) -> str:
        """Stable identifier of the archive contents."""
        digest = hashlib.sha256()
        bundle = self.to_bundle()
        for key in sorted(bundle):
            digest.update(key.encode())
            digest.update(np.ascontiguousarray(bundle[key]).tobytes())
        return digest.hexdigest()[:16]


def initialize_population(config: EvolutionConfig, task: TaskSpec,
                          rng: np.random.Generator) -> np.ndarray:
    """Initial genomes: clipped normals around the box center, or the first
    points of an unscrambled Sobol sequence (the all-zeros point skipped)."""
    lo, hi = task.gene_range
    if config.init_kind == "normal":
        center = 0.5 * (lo + hi)
        pop = rng.normal(center, config.init_sigma, size=(config.init_count, task.gene_count))
        return np.clip(pop, lo, hi)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # unscrambled Sobol balance notice
        sob = qmc.Sobol(d=task.gene_count, scramble=False)
        pts = sob.random(config.init_count + 1)[1:]
    return lo + pts * (hi - lo)


def mutate(parents: np.ndarray, sigma_pct: float, task: TaskSpec,
           rng: np.random.Generator, clip: bool = True) -> np.ndarray:
    """Per-gene Gaussian mutation with std = sigma_pct percent of the range."""
    sigma = sigma_pct / 100.0 * task.range_width
    children = parents + rng.normal(0.0, sigma, size=parents.shape)
    if clip:
        lo, hi = task.gene_range
        np.clip(children, lo, hi, out=children)
    return children


def run_map_elites(archive: Archive, config: EvolutionConfig,
                   objective=None, rng: Optional[np.random.Generator] = None,
                   init_genomes: Optional[np.ndarray] = None,
                   progress: Optional[Callable[[int, int], None]] = None) -> Archive:
    """Run the generational loop on ``archive`` in place.

    Per generation: draw ``children_per_gen`` parents uniformly from the
    occupied cells, mutate, evaluate, then claim empty cells or replace
    strictly-better per cell. Fully deterministic given the rng state.
    """
    objective = objective or FitnessObjective()
    rng = rng or np.random.default_rng(config.rng_seed)
    task, maze = archive.task, archive.maze
    if init_genomes is not None and len(init_genomes):
        batch = evaluate_batch(init_genomes, task, maze, archive.initial_heading)
        archive.insert_batch(batch, objective.score(batch.fitness, batch.genomes))
    if archive.occupancy() == 0:
        raise ValueError("cannot evolve an empty archive without initial genomes")
    for gen in range(config.generations):
        occ = archive.occupied_indices()
        parents = archive.genomes[occ[rng.integers(0, occ.size, config.children_per_gen)]]
        children = mutate(parents, config.mutation_sigma_pct, task, rng)
        batch = evaluate_batch(children, task, maze, archive.initial_heading)
        archive.insert_batch(batch, objective.score(batch.fitness, batch.genomes))
        if progress is not None:
            progress(gen + 1, archive.occupancy())
    return archive


def seed_archive(selection: np.ndarray, task: TaskSpec, maze: MazeSpec,
                 initial_heading: float = 90.0, objective=None,
                 shape: tuple[int, int] = GRID_SHAPE) -> Archive:
    """Fresh archive populated by re-evaluating only the given genomes."""
    sel = np.atleast_2d(np.asarray(selection, dtype=np.float64))
    if sel.size == 0:
        raise ValueError("cannot seed an archive from an empty selection")
    objective = objective or FitnessObjective()
    archive = Archive(task, maze, shape, initial_heading)
    batch = evaluate_batch(sel, task, maze, initial_heading)
    archive.insert_batch(batch, objective.score(batch.fitness, batch.genomes))
    return archive
