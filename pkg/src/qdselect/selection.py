"""Modeling a user's archive selection and steering evolution with it.

A selection model freezes the similarity-space map at decision time: two
GP regressors (one per coordinate) are fitted to the archive's t-SNE image,
and the selected/deselected elites are stored as reference points in that
frozen map. New candidates are projected through the GPs, never through a
t-SNE rerun, so a genome's drift value can never change after the decision.

Drift of a candidate is dist-to-nearest-selected over the sum of distances
to nearest selected and nearest deselected reference: 0 on selected points,
1 on deselected ones. The penalty objective scales (minimized) fitness by
(1 + weight * drift), which preserves per-cell argmin semantics while
penalizing candidates that sit far from the selection.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .gp import MaternGPRegressor
from .maze import MazeSpec
from .persist import load_bundle, save_bundle
from .projection import Embedding, ProjectionConfig, normalize_unit_box, run_tsne
from .qd import (Archive, EvolutionConfig, FitnessObjective, initialize_population,
                 run_map_elites, seed_archive)
from .tasks import EvaluatedSolution, TaskSpec

MODES = ("none", "penalty", "seeding", "combined")
MODEL_VERSION = 1


class PartitionError(ValueError):
    """The selection cannot be used (one side of the partition is empty)."""


@dataclass(frozen=True)
class SelectionPartition:
    """Binary split of a snapshot's occupied elites.

    ``cells`` are the snapshot's occupied flat cell indices in ascending
    order; ``selected`` is the aligned boolean mask.
    """

    cells: np.ndarray
    selected: np.ndarray
    snapshot_id: str = ""

    def __post_init__(self):
        if self.cells.shape != self.selected.shape:
            raise ValueError("cells and selected mask must align")

    @property
    def n_selected(self) -> int:
        return int(self.selected.sum())

    @property
    def n_deselected(self) -> int:
        return int((~self.selected).sum())

    def validate_usable(self) -> None:
        if self.n_selected == 0:
            raise PartitionError("no solutions selected")
        if self.n_deselected == 0:
            raise PartitionError("every solution selected; nothing to contrast against")


@dataclass(frozen=True)
class PenaltyConfig:
    """Weight of the drift penalty on the minimized objective."""

    weight: float = 0.0
    mode: str = "multiplicative_min"
    zero_fitness_floor: float = 1e-6

    def __post_init__(self):
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError("penalty weight must be finite and non-negative")
        if self.mode != "multiplicative_min":
            raise ValueError(f"unknown penalty composition {self.mode!r}")


def drift_ratio(proj: np.ndarray, ref_sel: np.ndarray, ref_desel: np.ndarray) -> np.ndarray:
    """Normalized drift of projected points against reference sets.

    Returns d_sel / (d_sel + d_desel) per point. A point whose projection
    coincides with members of both sets (numerically possible only if two
    distinct genomes project identically) gets 0.5 with a warning.
    """
    d_sel = cdist(proj, ref_sel).min(axis=1)
    d_desel = cdist(proj, ref_desel).min(axis=1)
    denom = d_sel + d_desel
    collided = denom == 0.0
    if collided.any():
        warnings.warn("candidate projects onto both partitions; drift set to 0.5")
        denom = np.where(collided, 1.0, denom)
        d_sel = np.where(collided, 0.5, d_sel)
    return d_sel / denom


class SelectionDriftModel:
    """Frozen projection plus the selection partition it was decided on."""

    def __init__(self, gp_x: MaternGPRegressor, gp_y: MaternGPRegressor,
                 norm_lo: np.ndarray, norm_span: np.ndarray,
                 partition: SelectionPartition,
                 ref_sel: np.ndarray, ref_desel: np.ndarray):
        self.gp_x = gp_x
        self.gp_y = gp_y
        self.norm_lo = norm_lo
        self.norm_span = norm_span
        self.partition = partition
        self.ref_sel = ref_sel
        self.ref_desel = ref_desel

    @property
    def snapshot_id(self) -> str:
        return self.partition.snapshot_id

    def project(self, genomes: np.ndarray) -> np.ndarray:
        """Map genomes into the frozen similarity space."""
        G = np.atleast_2d(np.asarray(genomes, dtype=np.float64))
        Gn = (G - self.norm_lo) / self.norm_span
        return np.column_stack([self.gp_x.predict(Gn), self.gp_y.predict(Gn)])

    def drift(self, genomes: np.ndarray):
        """Drift in [0, 1] for one genome (float) or a batch (array)."""
        G = np.asarray(genomes, dtype=np.float64)
        single = G.ndim == 1
        values = drift_ratio(self.project(G), self.ref_sel, self.ref_desel)
        return float(values[0]) if single else values

    # -- serialization -----------------------------------------------------

    def to_bundle(self) -> dict:
        data = dict(
            version=np.int64(MODEL_VERSION),
            norm_lo=self.norm_lo, norm_span=self.norm_span,
            cells=self.partition.cells, selected=self.partition.selected,
            snapshot_id=np.array(self.partition.snapshot_id),
            ref_sel=self.ref_sel, ref_desel=self.ref_desel,
        )
        data.update(self.gp_x.to_arrays("gpx_"))
        data.update(self.gp_y.to_arrays("gpy_"))
        return data

    def save(self, path) -> None:
        save_bundle(path, **self.to_bundle())

    @classmethod
    def from_bundle(cls, data: dict) -> "SelectionDriftModel":
        if int(data["version"]) != MODEL_VERSION:
            raise ValueError(f"unsupported model version {int(data['version'])}")
        partition = SelectionPartition(
            cells=data["cells"].astype(np.int64),
            selected=data["selected"].astype(bool),
            snapshot_id=str(data["snapshot_id"]))
        return cls(
            gp_x=MaternGPRegressor.from_arrays(data, "gpx_"),
            gp_y=MaternGPRegressor.from_arrays(data, "gpy_"),
            norm_lo=data["norm_lo"].astype(np.float64),
            norm_span=data["norm_span"].astype(np.float64),
            partition=partition,
            ref_sel=data["ref_sel"].astype(np.float64),
            ref_desel=data["ref_desel"].astype(np.float64))

    @classmethod
    def load(cls, path) -> "SelectionDriftModel":
        return cls.from_bundle(load_bundle(path))


@dataclass
class FrozenProjection:
    """Two fitted GPs plus the normalization they were trained under, and
    the projected coordinates of every snapshot elite (ascending cell
    order). Partition-independent, so one fit serves many selections."""

    gp_x: MaternGPRegressor
    gp_y: MaternGPRegressor
    norm_lo: np.ndarray
    norm_span: np.ndarray
    proj: np.ndarray


def fit_frozen_projection(archive: Archive, embedding: Embedding,
                          noise_var: float = 1e-6,
                          optimize: bool = True) -> FrozenProjection:
    """Fit one GP per similarity coordinate on a snapshot's embedding."""
    cells = archive.occupied_indices()
    if embedding.n_points != cells.size:
        raise ValueError("embedding does not match the snapshot")
    G = archive.genomes[cells]
    Gn, lo, span = normalize_unit_box(G)
    gp_x = MaternGPRegressor(noise_var=noise_var, optimize=optimize).fit(
        Gn, embedding.points[:, 0])
    gp_y = MaternGPRegressor(noise_var=noise_var, optimize=optimize).fit(
        Gn, embedding.points[:, 1])
    proj = np.column_stack([gp_x.predict(Gn), gp_y.predict(Gn)])
    return FrozenProjection(gp_x, gp_y, lo, span, proj)


def partition_model(frozen: FrozenProjection, archive: Archive,
                    selected: np.ndarray) -> SelectionDriftModel:
    """Bind a selection to an already-fitted frozen projection."""
    cells = archive.occupied_indices()
    selected = np.asarray(selected, dtype=bool)
    if selected.shape[0] != cells.size:
        raise ValueError("selection mask must cover the snapshot's occupied cells")
    partition = SelectionPartition(cells=cells, selected=selected,
                                   snapshot_id=archive.content_hash())
    partition.validate_usable()
    return SelectionDriftModel(frozen.gp_x, frozen.gp_y, frozen.norm_lo,
                               frozen.norm_span, partition,
                               ref_sel=frozen.proj[selected].copy(),
                               ref_desel=frozen.proj[~selected].copy())


def build_selection_model(archive: Archive, embedding: Embedding,
                          selected: np.ndarray, noise_var: float = 1e-6,
                          optimize: bool = True) -> SelectionDriftModel:
    """Fit the frozen projection for a snapshot and bind its selection.

    ``embedding`` must come from this snapshot's occupied elites in
    ascending cell order; ``selected`` is the aligned boolean mask. The
    reference coordinates of both partitions are GP projections (not raw
    t-SNE points), so selected genomes have drift exactly 0 and deselected
    exactly 1.
    """
    frozen = fit_frozen_projection(archive, embedding, noise_var, optimize)
    return partition_model(frozen, archive, selected)


def embed_archive(archive: Archive,
                  config: Optional[ProjectionConfig] = None) -> Embedding:
    """Project a snapshot's occupied elites (ascending cell order)."""
    cells = archive.occupied_indices()
    return run_tsne(archive.genomes[cells], config, normalize=True)


class DriftPenaltyObjective:
    """Minimized score: fitness * (1 + weight * drift).

    Zero-length paths still need the drift to discriminate among them, so
    they score weight * drift * floor with a small positive floor.
    """

    def __init__(self, model: SelectionDriftModel, config: PenaltyConfig):
        self.model = model
        self.config = config

    def score(self, fitness: np.ndarray, genomes: np.ndarray) -> np.ndarray:
        fitness = np.asarray(fitness, dtype=float)
        drift = self.model.drift(np.atleast_2d(genomes))
        scaled = fitness * (1.0 + self.config.weight * drift)
        floor = self.config.weight * drift * self.config.zero_fitness_floor
        return np.where(fitness > 0.0, scaled, floor)


def penalized_fitness(model: SelectionDriftModel, config: PenaltyConfig,
                      solution: EvaluatedSolution) -> float:
    """Penalized score of a single evaluated solution."""
    score = DriftPenaltyObjective(model, config).score(
        np.array([solution.fitness]), solution.genome[None, :])
    return float(score[0])


def continue_archive(snapshot: Archive, mode: str, config: EvolutionConfig,
                     model: Optional[SelectionDriftModel] = None,
                     penalty: Optional[PenaltyConfig] = None,
                     rng: Optional[np.random.Generator] = None) -> Archive:
    """Continue evolution from a decided-on snapshot in one of four modes.

    none      plain continuation of the full archive
    penalty   full archive, drift-penalized objective
    seeding   fresh archive re-seeded from the selected genomes only
    combined  re-seeded archive plus the penalized objective

    Incumbent scores are recomputed under the continuation's objective so
    children and incumbents compete on the same scale; during the run
    scores are only written at insertion time.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode != "none" and model is None:
        raise ValueError(f"mode {mode!r} requires a selection model")
    if mode in ("penalty", "combined") and penalty is None:
        raise ValueError(f"mode {mode!r} requires a penalty config")

    if mode in ("seeding", "combined"):
        sel_cells = model.partition.cells
        sel_genomes = snapshot.genomes[sel_cells[model.partition.selected]]
        archive = seed_archive(sel_genomes, snapshot.task, snapshot.maze,
                               snapshot.initial_heading, shape=snapshot.shape)
    else:
        archive = snapshot.copy()

    if mode in ("penalty", "combined"):
        objective = DriftPenaltyObjective(model, penalty)
    else:
        objective = FitnessObjective()
    archive.rescore(objective)
    return run_map_elites(archive, config, objective, rng)


@dataclass
class UdqdResult:
    """Everything produced by one select-and-continue iteration."""

    init_archive: Archive
    embedding: Embedding
    model: SelectionDriftModel
    final_archive: Archive
    mode: str
    penalty: Optional[PenaltyConfig]


def run_udqd(task: TaskSpec, maze: MazeSpec, init_config: EvolutionConfig,
             cont_config: EvolutionConfig, selector: Callable[[Archive], np.ndarray],
             mode: str = "combined", penalty: Optional[PenaltyConfig] = None,
             projection: Optional[ProjectionConfig] = None,
             initial_heading: float = 90.0,
             rng: Optional[np.random.Generator] = None) -> UdqdResult:
    """One full user-driven iteration: evolve, project, select, continue.

    The selector maps the initial archive to a boolean mask over its
    occupied cells (ascending order). A selector that selects nothing (or
    everything) aborts with :class:`PartitionError`.
    """
    rng = rng or np.random.default_rng(init_config.rng_seed)
    archive = Archive(task, maze, initial_heading=initial_heading)
    init = initialize_population(init_config, task, rng)
    run_map_elites(archive, init_config, rng=rng, init_genomes=init)
    embedding = embed_archive(archive, projection)
    selected = np.asarray(selector(archive), dtype=bool)
    model = build_selection_model(archive, embedding, selected)
    final = continue_archive(archive, mode, cont_config, model, penalty, rng)
    return UdqdResult(init_archive=archive, embedding=embedding, model=model,
                      final_archive=final, mode=mode, penalty=penalty)
