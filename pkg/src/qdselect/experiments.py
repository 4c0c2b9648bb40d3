"""Scripted-selection experiment matrix, statistics, and report files.

A plan enumerates (replicate x target exit x mode x sweep point) runs.
Each replicate owns one initial archive; the projection model is fitted
once per replicate and partitioned per target exit, so all continuations
of a replicate compare against the same frozen decision state, mirroring
how a single user decision fans out into the compared continuations.

Reports carry per-run metrics over occupied cells: the fraction that left
the inner ring through the scripted exit without later leaving through
another one (correct), the fraction that exited otherwise (incorrect), the
non-exiting remainder, and drift statistics under the replicate's model.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import multiprocessing as mp
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .maze import MazeSpec
from .projection import ProjectionConfig
from .qd import Archive, EvolutionConfig, initialize_population, run_map_elites
from .selection import (PartitionError, PenaltyConfig, SelectionDriftModel,
                        SelectionPartition, build_selection_model,
                        continue_archive, embed_archive, fit_frozen_projection,
                        partition_model)
from .tasks import TaskSpec, controller_task, planner_task

RUN_COLUMNS = [
    "task", "plan_kind", "replicate", "exit", "mode", "penalty_weight",
    "sigma_cont", "occupancy", "correct_pct", "incorrect_pct", "nonexit_pct",
    "drift_median", "drift_median_exiting", "drift_mean", "init_occupancy",
    "kl_final", "kl_exaggeration_end", "skipped", "error",
]
SUMMARY_METRICS = ["correct_pct", "incorrect_pct", "nonexit_pct",
                   "drift_median", "drift_mean"]
KS_METRICS = ["correct_pct", "incorrect_pct", "drift_median"]


# -- statistics -------------------------------------------------------------


def kolmogorov_sf(x: float) -> float:
    """Survival function of the Kolmogorov distribution.

    Uses the alternating series for large arguments and its theta-function
    dual below x ~ 1.18, where the alternating form converges too slowly.
    """
    if x <= 0.0:
        return 1.0
    if x < 1.18:
        cdf = 0.0
        factor = math.sqrt(2.0 * math.pi) / x
        for k in range(1, 101):
            term = math.exp(-((2 * k - 1) * math.pi) ** 2 / (8.0 * x * x))
            cdf += term
            if term < 1e-16:
                break
        return min(1.0, max(0.0, 1.0 - factor * cdf))
    total = 0.0
    sign = 1.0
    for k in range(1, 101):
        term = sign * math.exp(-2.0 * (k * x) ** 2)
        total += term
        if abs(term) < 1e-16:
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def ks_two_sample(sample_a, sample_b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.

    D is the sup distance between the empirical CDFs; p evaluates the
    Kolmogorov distribution at D scaled by the effective sample size
    sqrt(n*m/(n+m)).
    """
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.abs(cdf_a - cdf_b).max())
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    return d, kolmogorov_sf(en * d)


# -- scripted user ----------------------------------------------------------


@dataclass(frozen=True)
class ScriptedSelector:
    """Selects elites that left the inner ring through one target gate and
    never left through another; everything else (wrong exit, reentrant,
    non-exiting) is deselected."""

    target_exit: int

    def __post_init__(self):
        if self.target_exit not in (1, 2, 3):
            raise ValueError("target_exit must be a gate id 1..3")

    def __call__(self, archive: Archive) -> np.ndarray:
        occ = archive.occupied_indices()
        return (archive.inner_exit[occ] == self.target_exit) & (~archive.flag[occ])


def scripted_partition(archive: Archive, selector: ScriptedSelector) -> SelectionPartition:
    """Partition of an archive under the scripted exit rule."""
    if archive.occupancy() == 0:
        raise ValueError("archive is empty")
    cells = archive.occupied_indices()
    return SelectionPartition(cells=cells, selected=selector(archive),
                              snapshot_id=archive.content_hash())


# -- plans ------------------------------------------------------------------

PLAN_KINDS = ("mode_comparison", "penalty_sweep", "mutation_sweep")

PENALTY_GRIDS = {"planner": (0.0, 1.0, 5.0, 10.0, 20.0, 50.0),
                 "controller": (0.0, 10.0, 50.0, 100.0, 200.0, 400.0)}
MUTATION_GRIDS = {"planner": (0.5, 1.0, 2.0, 5.0, 10.0),
                  "controller": (0.01, 0.05, 0.1, 0.5, 1.0, 5.0)}
OPTIMAL_PENALTY = {"planner": 10.0, "controller": 200.0}
INIT_SIGMA_PCT = {"planner": 5.0, "controller": 1.0}
INIT_COUNT = {"planner": 2000, "controller": 200}
PAPER_INIT_GENS = {"planner": 8192, "controller": 2048}


@dataclass(frozen=True)
class ExperimentPlan:
    """Full description of one experiment matrix."""

    kind: str
    task_kind: str
    modes: tuple[str, ...]
    penalty_weights: tuple[float, ...]
    mutation_sigmas: tuple[float, ...]          # continuation sigma grid (pct)
    replicates: int = 3
    exits: tuple[int, ...] = (1, 2, 3)
    init_generations: int = 1024
    cont_generations: int = 512
    children_per_gen: int = 32
    init_sigma_pct: float = 5.0                 # mutation sigma of the initial run
    init_count: int = 2000
    init_kind: str = "normal"
    init_spread: float = 10.0                   # world units, normal init
    heading_start: float = 30.0
    heading_step: float = 60.0
    master_seed: int = 7
    projection: ProjectionConfig = ProjectionConfig()
    gp_optimize: bool = True
    save_snapshots: bool = False

    def __post_init__(self):
        if self.kind not in PLAN_KINDS:
            raise ValueError(f"unknown plan kind {self.kind!r}")
        if self.task_kind not in ("planner", "controller"):
            raise ValueError(f"unknown task kind {self.task_kind!r}")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if len(set(self.exits)) != len(self.exits):
            raise ValueError("exits must be distinct")

    def task(self) -> TaskSpec:
        return planner_task() if self.task_kind == "planner" else controller_task()

    def heading(self, replicate: int) -> float:
        if self.task_kind == "controller":
            return self.heading_start + self.heading_step * replicate
        return 90.0

    def sweep_points(self) -> list[tuple[str, float, float]]:
        """(mode, penalty_weight, sigma_cont) triples of the matrix."""
        points = []
        for mode in self.modes:
            for wp in self.penalty_weights:
                if mode in ("none", "seeding") and wp != self.penalty_weights[0]:
                    continue  # weight has no effect without the penalty objective
                for sigma in self.mutation_sigmas:
                    use_wp = wp if mode in ("penalty", "combined") else 0.0
                    points.append((mode, use_wp, sigma))
        return sorted(set(points))

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind, "task_kind": self.task_kind,
            "modes": list(self.modes),
            "penalty_weights": list(self.penalty_weights),
            "mutation_sigmas": list(self.mutation_sigmas),
            "replicates": self.replicates, "exits": list(self.exits),
            "init_generations": self.init_generations,
            "cont_generations": self.cont_generations,
            "children_per_gen": self.children_per_gen,
            "init_sigma_pct": self.init_sigma_pct,
            "init_count": self.init_count, "init_kind": self.init_kind,
            "init_spread": self.init_spread,
            "heading_start": self.heading_start, "heading_step": self.heading_step,
            "master_seed": self.master_seed,
            "projection": self.projection.to_dict(),
            "gp_optimize": self.gp_optimize,
            "save_snapshots": self.save_snapshots,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        d["modes"] = tuple(d["modes"])
        d["penalty_weights"] = tuple(d["penalty_weights"])
        d["mutation_sigmas"] = tuple(d["mutation_sigmas"])
        d["exits"] = tuple(d["exits"])
        d["projection"] = ProjectionConfig.from_dict(d["projection"])
        return cls(**d)


def comparison_plan(task_kind: str, scale: str = "desk", seed: int = 7) -> ExperimentPlan:
    """Mode comparison at the task's reference settings."""
    desk = scale == "desk"
    sigma_cont = {"planner": 5.0,
                  "controller": 0.1 if desk else 1.0}[task_kind]
    return ExperimentPlan(
        kind="mode_comparison", task_kind=task_kind,
        modes=("none", "penalty", "seeding", "combined"),
        penalty_weights=(OPTIMAL_PENALTY[task_kind],),
        mutation_sigmas=(sigma_cont,),
        replicates=3 if desk else 6,
        init_generations=1024 if desk else PAPER_INIT_GENS[task_kind],
        cont_generations=512 if desk else 4096,
        init_sigma_pct=INIT_SIGMA_PCT[task_kind],
        init_count=INIT_COUNT[task_kind],
        init_kind="normal" if task_kind == "planner" else "sobol",
        master_seed=seed)


def penalty_sweep_plan(task_kind: str, scale: str = "desk", seed: int = 7) -> ExperimentPlan:
    """Penalty-weight sweep, penalty mode only, 5 percent mutation."""
    desk = scale == "desk"
    return ExperimentPlan(
        kind="penalty_sweep", task_kind=task_kind,
        modes=("penalty",),
        penalty_weights=PENALTY_GRIDS[task_kind],
        mutation_sigmas=(5.0,),
        replicates=3 if desk else 6,
        init_generations=1024 if desk else PAPER_INIT_GENS[task_kind],
        cont_generations=512 if desk else 4096,
        init_sigma_pct=INIT_SIGMA_PCT[task_kind],
        init_count=INIT_COUNT[task_kind],
        init_kind="normal" if task_kind == "planner" else "sobol",
        master_seed=seed)


def mutation_sweep_plan(task_kind: str, scale: str = "desk", seed: int = 7) -> ExperimentPlan:
    """Mutation-distance sweep of all modes at the task's optimal weight.

    The sweep sigma applies to the continuation; the initial archive keeps
    the task's default mutation so every sweep point contrasts against the
    same decision state.
    """
    desk = scale == "desk"
    return ExperimentPlan(
        kind="mutation_sweep", task_kind=task_kind,
        modes=("none", "penalty", "seeding", "combined"),
        penalty_weights=(OPTIMAL_PENALTY[task_kind],),
        mutation_sigmas=MUTATION_GRIDS[task_kind],
        replicates=3 if desk else 6,
        init_generations=1024 if desk else PAPER_INIT_GENS[task_kind],
        cont_generations=512 if desk else 4096,
        init_sigma_pct=INIT_SIGMA_PCT[task_kind],
        init_count=INIT_COUNT[task_kind],
        init_kind="normal" if task_kind == "planner" else "sobol",
        master_seed=seed)


# -- metrics ----------------------------------------------------------------


def archive_metrics(archive: Archive, target_exit: int,
                    model: Optional[SelectionDriftModel] = None) -> dict:
    """Correct/incorrect/non-exiting fractions and drift statistics."""
    occ = archive.occupied_indices()
    n = occ.size
    if n == 0:
        raise ValueError("archive is empty")
    exits = archive.inner_exit[occ]
    flags = archive.flag[occ]
    correct = (exits == target_exit) & (~flags)
    exiting = exits != 0
    incorrect = exiting & (~correct)
    out = {
        "occupancy": int(n),
        "correct_pct": 100.0 * float(correct.sum()) / n,
        "incorrect_pct": 100.0 * float(incorrect.sum()) / n,
        "nonexit_pct": 100.0 * float((~exiting).sum()) / n,
    }
    if model is not None:
        drift = model.drift(archive.genomes[occ])
        out["drift_median"] = float(np.median(drift))
        out["drift_mean"] = float(drift.mean())
        out["drift_median_exiting"] = (float(np.median(drift[exiting]))
                                       if exiting.any() else float("nan"))
    else:
        out["drift_median"] = float("nan")
        out["drift_mean"] = float("nan")
        out["drift_median_exiting"] = float("nan")
    return out


# -- rng derivation ----------------------------------------------------------


def derive_rng(master_seed: int, *tags) -> np.random.Generator:
    """Independent generator for a tagged sub-task of a seeded plan."""
    digest = hashlib.sha256("|".join(str(t) for t in tags).encode()).digest()
    words = [master_seed] + [int.from_bytes(digest[i:i + 4], "big") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence(words))


# -- plan execution -----------------------------------------------------------

_SHARED: dict = {}


def _run_init(plan: ExperimentPlan, replicate: int):
    """Initial archive, its embedding, and the frozen projection GPs."""
    task = plan.task()
    maze = MazeSpec()
    config = EvolutionConfig(
        generations=plan.init_generations, children_per_gen=plan.children_per_gen,
        mutation_sigma_pct=plan.init_sigma_pct, init_kind=plan.init_kind,
        init_sigma=plan.init_spread, init_count=plan.init_count)
    rng = derive_rng(plan.master_seed, "init", plan.task_kind, replicate)
    archive = Archive(task, maze, initial_heading=plan.heading(replicate))
    t0 = time.monotonic()
    run_map_elites(archive, config, rng=rng,
                   init_genomes=initialize_population(config, task, rng))
    init_seconds = time.monotonic() - t0
    embedding = embed_archive(archive, plan.projection)
    frozen = fit_frozen_projection(archive, embedding, optimize=plan.gp_optimize)
    return archive, embedding, frozen, init_seconds


def _init_job(args):
    plan, replicate = args
    archive, embedding, frozen, seconds = _run_init(plan, replicate)
    return replicate, archive, embedding, frozen, seconds


def _continuation_job(key):
    """Run one continuation from the shared replicate state; returns a row."""
    plan = _SHARED["plan"]
    replicate, target_exit, mode, weight, sigma = key
    archive = _SHARED["archives"][replicate]
    embedding = _SHARED["embeddings"][replicate]
    model = _SHARED["models"][(replicate, target_exit)]
    row = {
        "task": plan.task_kind, "plan_kind": plan.kind, "replicate": replicate,
        "exit": target_exit, "mode": mode, "penalty_weight": weight,
        "sigma_cont": sigma, "init_occupancy": archive.occupancy(),
        "kl_final": embedding.kl_final,
        "kl_exaggeration_end": embedding.kl_exaggeration_end,
        "skipped": False, "error": "",
    }
    config = EvolutionConfig(
        generations=plan.cont_generations, children_per_gen=plan.children_per_gen,
        mutation_sigma_pct=sigma, init_count=plan.init_count)
    rng = derive_rng(plan.master_seed, "cont", plan.task_kind, replicate,
                     target_exit, mode, repr(float(weight)), repr(float(sigma)))
    t0 = time.monotonic()
    try:
        final = continue_archive(archive, mode, config, model,
                                 PenaltyConfig(weight=weight), rng)
        row.update(archive_metrics(final, target_exit, model))
    except Exception as exc:
        row.update({"skipped": True, "error": str(exc), "occupancy": 0,
                    "correct_pct": float("nan"), "incorrect_pct": float("nan"),
                    "nonexit_pct": float("nan"), "drift_median": float("nan"),
                    "drift_mean": float("nan"), "drift_median_exiting": float("nan")})
        return key, row, 0.0, None
    seconds = time.monotonic() - t0
    bundle = final.to_bundle() if plan.save_snapshots else None
    return key, row, seconds, bundle


def run_plan(plan: ExperimentPlan, out_dir=None, workers: int = 1,
             log=None) -> "ExperimentReport":
    """Execute the full matrix; optionally write report files to ``out_dir``.

    Individual run failures are recorded on their rows and do not stop the
    plan. With ``workers > 1`` replicate initializations and continuations
    run in parallel; outputs are byte-identical to a sequential run.
    """
    t_plan = time.monotonic()
    log = log or (lambda msg: None)
    init_args = [(plan, rep) for rep in range(plan.replicates)]
    if workers > 1:
        ctx = mp.get_context("fork")
        with ctx.Pool(min(workers, len(init_args))) as pool:
            init_results = pool.map(_init_job, init_args)
    else:
        init_results = [_init_job(a) for a in init_args]
    archives, embeddings, frozens = {}, {}, {}
    timings = {"init_seconds": {}, "run_seconds": {}}
    for replicate, archive, embedding, frozen, seconds in init_results:
        archives[replicate] = archive
        embeddings[replicate] = embedding
        frozens[replicate] = frozen
        timings["init_seconds"][replicate] = seconds
        log(f"init replicate {replicate}: occupancy {archive.occupancy()}")

    models, dead_pairs = {}, {}
    for replicate in range(plan.replicates):
        for target_exit in plan.exits:
            selector = ScriptedSelector(target_exit)
            try:
                models[(replicate, target_exit)] = partition_model(
                    frozens[replicate], archives[replicate], selector(archives[replicate]))
            except PartitionError as exc:
                dead_pairs[(replicate, target_exit)] = str(exc)

    keys, rows = [], []
    for replicate in range(plan.replicates):
        for target_exit in plan.exits:
            for mode, weight, sigma in plan.sweep_points():
                key = (replicate, target_exit, mode, weight, sigma)
                if (replicate, target_exit) in dead_pairs:
                    rows.append({
                        "task": plan.task_kind, "plan_kind": plan.kind,
                        "replicate": replicate, "exit": target_exit, "mode": mode,
                        "penalty_weight": weight, "sigma_cont": sigma,
                        "init_occupancy": archives[replicate].occupancy(),
                        "kl_final": embeddings[replicate].kl_final,
                        "kl_exaggeration_end": embeddings[replicate].kl_exaggeration_end,
                        "occupancy": 0, "correct_pct": float("nan"),
                        "incorrect_pct": float("nan"), "nonexit_pct": float("nan"),
                        "drift_median": float("nan"), "drift_mean": float("nan"),
                        "drift_median_exiting": float("nan"),
                        "skipped": True, "error": dead_pairs[(replicate, target_exit)],
                    })
                else:
                    keys.append(key)

    _SHARED.clear()
    _SHARED.update(plan=plan, archives=archives, embeddings=embeddings, models=models)
    snapshots = {}
    if workers > 1 and len(keys) > 1:
        ctx = mp.get_context("fork")
        with ctx.Pool(workers) as pool:
            results = pool.map(_continuation_job, keys)
    else:
        results = [_continuation_job(k) for k in keys]
    _SHARED.clear()
    for key, row, seconds, bundle in results:
        rows.append(row)
        timings["run_seconds"][key] = seconds
        if bundle is not None:
            snapshots[key] = bundle
        log(f"run {key}: correct {row.get('correct_pct', float('nan')):.1f}%")

    rows.sort(key=lambda r: (r["replicate"], r["exit"], r["mode"],
                             r["penalty_weight"], r["sigma_cont"]))
    timings["total_seconds"] = time.monotonic() - t_plan
    report = ExperimentReport(plan=plan, rows=rows, timings=timings)
    if out_dir is not None:
        report.save(out_dir)
        out = Path(out_dir)
        for replicate in range(plan.replicates):
            if plan.save_snapshots:
                archives[replicate].save(out / "snapshots" / f"rep{replicate}_init.npz")
        for key, bundle in snapshots.items():
            replicate, target_exit, mode, weight, sigma = key
            name = (f"rep{replicate}_exit{target_exit}_{mode}"
                    f"_w{weight:g}_s{sigma:g}.npz")
            from .persist import save_bundle
            save_bundle(out / "snapshots" / name, **bundle)
    return report


# -- report -----------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row.get(c, "")) for c in columns) + "\n")
    return buf.getvalue()


@dataclass
class ExperimentReport:
    """Rows plus aggregate tables for one executed plan."""

    plan: ExperimentPlan
    rows: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def completed_rows(self) -> list:
        return [r for r in self.rows if not r["skipped"]]

    def select(self, **conditions) -> list:
        out = []
        for row in self.completed_rows():
            if all(row[k] == v for k, v in conditions.items()):
                out.append(row)
        return out

    def metric_values(self, metric: str, **conditions) -> np.ndarray:
        return np.asarray([r[metric] for r in self.select(**conditions)], dtype=float)

    def summary_rows(self) -> list[dict]:
        groups: dict = {}
        for row in self.completed_rows():
            key = (row["mode"], row["penalty_weight"], row["sigma_cont"])
            groups.setdefault(key, []).append(row)
        out = []
        for (mode, weight, sigma) in sorted(groups):
            rows = groups[(mode, weight, sigma)]
            entry = {"task": self.plan.task_kind, "mode": mode,
                     "penalty_weight": weight, "sigma_cont": sigma,
                     "n_runs": len(rows)}
            for metric in SUMMARY_METRICS:
                values = np.asarray([r[metric] for r in rows], dtype=float)
                values = values[np.isfinite(values)]
                if values.size:
                    entry[f"{metric}_median"] = float(np.median(values))
                    entry[f"{metric}_q25"] = float(np.percentile(values, 25))
                    entry[f"{metric}_q75"] = float(np.percentile(values, 75))
                    entry[f"{metric}_mean"] = float(values.mean())
                else:
                    for suffix in ("median", "q25", "q75", "mean"):
                        entry[f"{metric}_{suffix}"] = float("nan")
            out.append(entry)
        return out

    def ks_rows(self) -> list[dict]:
        """Two-sample KS tests between modes at every sweep point."""
        groups: dict = {}
        for row in self.completed_rows():
            key = (row["penalty_weight"], row["sigma_cont"])
            groups.setdefault(key, {}).setdefault(row["mode"], []).append(row)
        sigma_groups: dict = {}
        for row in self.completed_rows():
            sigma_groups.setdefault(row["sigma_cont"], {}).setdefault(
                row["mode"], []).append(row)
        out = []
        for sigma in sorted(sigma_groups):
            by_mode = sigma_groups[sigma]
            modes = sorted(by_mode)
            for i, mode_a in enumerate(modes):
                for mode_b in modes[i + 1:]:
                    for metric in KS_METRICS:
                        a = np.asarray([r[metric] for r in by_mode[mode_a]], float)
                        b = np.asarray([r[metric] for r in by_mode[mode_b]], float)
                        a = a[np.isfinite(a)]
                        b = b[np.isfinite(b)]
                        if a.size == 0 or b.size == 0:
                            continue
                        d, p = ks_two_sample(a, b)
                        out.append({"task": self.plan.task_kind,
                                    "sigma_cont": sigma, "metric": metric,
                                    "mode_a": mode_a, "mode_b": mode_b,
                                    "D": d, "p": p,
                                    "n_a": int(a.size), "n_b": int(b.size)})
        return out

    def runs_csv(self) -> str:
        return _csv(RUN_COLUMNS, self.rows)

    def summary_csv(self) -> str:
        rows = self.summary_rows()
        if not rows:
            return ""
        columns = ["task", "mode", "penalty_weight", "sigma_cont", "n_runs"]
        for metric in SUMMARY_METRICS:
            for suffix in ("median", "q25", "q75", "mean"):
                columns.append(f"{metric}_{suffix}")
        return _csv(columns, rows)

    def ks_csv(self) -> str:
        columns = ["task", "sigma_cont", "metric", "mode_a", "mode_b",
                   "D", "p", "n_a", "n_b"]
        return _csv(columns, self.ks_rows())

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "runs.csv").write_text(self.runs_csv())
        (out / "summary.csv").write_text(self.summary_csv())
        (out / "ks.csv").write_text(self.ks_csv())
        if self.plan.kind == "mode_comparison":
            (out / "table1.csv").write_text(table1_csv(self))
        elif self.plan.kind == "penalty_sweep":
            (out / "penalty_sweep_points.csv").write_text(penalty_sweep_csv(self))
        elif self.plan.kind == "mutation_sweep":
            (out / "mutation_sweep_points.csv").write_text(mutation_sweep_csv(self))
        manifest = {"plan": self.plan.to_dict(), "n_rows": len(self.rows),
                    "columns": RUN_COLUMNS}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


# -- figure/table analogs -----------------------------------------------------


def _median(values: np.ndarray) -> float:
    values = values[np.isfinite(values)]
    return float(np.median(values)) if values.size else float("nan")


def replicate_medians(report: ExperimentReport, metric: str, **conditions) -> np.ndarray:
    """Per-replicate medians of a metric (one seed group per replicate)."""
    out = []
    for rep in range(report.plan.replicates):
        out.append(_median(report.metric_values(metric, replicate=rep, **conditions)))
    return np.asarray(out)


def table1_rows(report: ExperimentReport) -> list[dict]:
    """Mode-comparison medians and means, one row per mode."""
    rows = []
    for mode in report.plan.modes:
        entry = {"task": report.plan.task_kind, "mode": mode}
        for metric in ("correct_pct", "incorrect_pct", "drift_median"):
            values = report.metric_values(metric, mode=mode)
            values = values[np.isfinite(values)]
            entry[f"{metric}_median"] = _median(values)
            entry[f"{metric}_mean"] = float(values.mean()) if values.size else float("nan")
        rows.append(entry)
    return rows


def table1_csv(report: ExperimentReport) -> str:
    columns = ["task", "mode",
               "correct_pct_median", "correct_pct_mean",
               "incorrect_pct_median", "incorrect_pct_mean",
               "drift_median_median", "drift_median_mean"]
    return _csv(columns, table1_rows(report))


def penalty_sweep_rows(report: ExperimentReport) -> list[dict]:
    """Per-weight medians plus improvement over the zero-weight baseline and
    the replicate-smoothed drift used for monotonicity reading."""
    weights = sorted(report.plan.penalty_weights)
    base_correct = _median(report.metric_values("correct_pct", mode="penalty",
                                                penalty_weight=0.0))
    base_incorrect = _median(report.metric_values("incorrect_pct", mode="penalty",
                                                  penalty_weight=0.0))
    rows = []
    for weight in weights:
        cond = dict(mode="penalty", penalty_weight=weight)
        correct = _median(report.metric_values("correct_pct", **cond))
        incorrect = _median(report.metric_values("incorrect_pct", **cond))
        drifts = report.metric_values("drift_median", **cond)
        drifts = drifts[np.isfinite(drifts)]
        smoothed = _median(replicate_medians(report, "drift_median", **cond))
        rows.append({
            "task": report.plan.task_kind, "penalty_weight": weight,
            "correct_pct_median": correct, "incorrect_pct_median": incorrect,
            "correct_improvement": correct - base_correct,
            "incorrect_decrease": base_incorrect - incorrect,
            "drift_median": _median(drifts), "drift_median_smoothed": smoothed,
            "drift_q25": float(np.percentile(drifts, 25)) if drifts.size else float("nan"),
            "drift_q75": float(np.percentile(drifts, 75)) if drifts.size else float("nan"),
        })
    return rows


def penalty_sweep_csv(report: ExperimentReport) -> str:
    columns = ["task", "penalty_weight", "correct_pct_median", "incorrect_pct_median",
               "correct_improvement", "incorrect_decrease",
               "drift_median", "drift_median_smoothed", "drift_q25", "drift_q75"]
    return _csv(columns, penalty_sweep_rows(report))


def mutation_sweep_rows(report: ExperimentReport) -> list[dict]:
    """Per (mode, sigma) medians with quartiles."""
    rows = []
    for mode in report.plan.modes:
        for sigma in sorted(report.plan.mutation_sigmas):
            cond = dict(mode=mode, sigma_cont=sigma)
            entry = {"task": report.plan.task_kind, "mode": mode, "sigma_cont": sigma}
            for metric in ("correct_pct", "incorrect_pct", "drift_median"):
                values = report.metric_values(metric, **cond)
                values = values[np.isfinite(values)]
                entry[f"{metric}_median"] = _median(values)
                entry[f"{metric}_q25"] = (float(np.percentile(values, 25))
                                          if values.size else float("nan"))
                entry[f"{metric}_q75"] = (float(np.percentile(values, 75))
                                          if values.size else float("nan"))
            rows.append(entry)
    return rows


def mutation_sweep_csv(report: ExperimentReport) -> str:
    columns = ["task", "mode", "sigma_cont"]
    for metric in ("correct_pct", "incorrect_pct", "drift_median"):
        columns += [f"{metric}_median", f"{metric}_q25", f"{metric}_q75"]
    return _csv(columns, mutation_sweep_rows(report))
