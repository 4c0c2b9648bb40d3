"""Session service for the live selection loop.

Each session owns an append-only history of iterations; an iteration is an
archive snapshot plus its eagerly computed similarity embedding, and
optionally the partition/model decided on it. Evolution runs execute on a
per-session background thread with pollable progress. Mutating endpoints
accept a ``request_token`` and replay their stored response on retry.

Payloads carry ``schema_version`` 1. Sessions survive restarts: state is a
directory of JSON and array bundles, reloaded lazily on access.
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from .experiments import archive_metrics
from .maze import MazeSpec
from .persist import load_bundle, save_bundle
from .projection import Embedding, ProjectionConfig
from .qd import Archive, EvolutionConfig, initialize_population, run_map_elites
from .selection import (MODES, PartitionError, PenaltyConfig, SelectionDriftModel,
                        build_selection_model, continue_archive, embed_archive)
from .tasks import ElmanTopology, TaskSpec, controller_task, path_table, planner_task

SCHEMA_VERSION = 1


class TaskConfigBody(BaseModel):
    task_kind: str
    initial_heading: float = 90.0
    sim_steps: int = 1000
    topology: Optional[dict] = None
    weight_count: Optional[int] = None
    request_token: Optional[str] = None


class RunBody(BaseModel):
    generations: int = Field(ge=0)
    children_per_gen: int = Field(default=32, gt=0)
    mutation_sigma_pct: Optional[float] = None
    init_count: Optional[int] = None
    tsne_iterations: int = 500
    request_token: Optional[str] = None


class PartitionBody(BaseModel):
    selected_cells: list[tuple[int, int]]
    request_token: Optional[str] = None


class ContinueBody(BaseModel):
    mode: str
    penalty_weight: float = 0.0
    generations: int = Field(ge=0)
    children_per_gen: int = Field(default=32, gt=0)
    mutation_sigma_pct: Optional[float] = None
    tsne_iterations: int = 500
    request_token: Optional[str] = None


def _default_sigma(task_kind: str) -> float:
    return 5.0 if task_kind == "planner" else 1.0


def _default_init_count(task_kind: str) -> int:
    return 2000 if task_kind == "planner" else 200


class Session:
    """On-disk session plus in-memory run state."""

    def __init__(self, root: Path, sid: str):
        self.id = sid
        self.dir = root / sid
        self.lock = threading.RLock()
        self.thread: Optional[threading.Thread] = None
        self.state = "idle"
        self.failure: Optional[str] = None
        self.generation = 0
        self.total_generations = 0
        self.occupancy = 0
        self.meta: dict = {}

    # -- persistence -------------------------------------------------------

    def load(self) -> "Session":
        self.meta = json.loads((self.dir / "session.json").read_text())
        return self

    def persist(self) -> None:
        tmp = self.dir / "session.json.tmp"
        tmp.write_text(json.dumps(self.meta, indent=2, sort_keys=True))
        tmp.replace(self.dir / "session.json")

    @property
    def task(self) -> TaskSpec:
        return TaskSpec.from_dict(self.meta["task"])

    @property
    def maze(self) -> MazeSpec:
        return MazeSpec.from_json(json.dumps(self.meta["maze"]))

    def iteration(self, index: int) -> dict:
        try:
            return self.meta["iterations"][index]
        except IndexError:
            raise HTTPException(404, f"iteration {index} does not exist")

    def archive_at(self, index: int) -> Archive:
        record = self.iteration(index)
        return Archive.load(self.dir / record["snapshot"])

    def embedding_points(self, index: int) -> np.ndarray:
        record = self.iteration(index)
        return load_bundle(self.dir / record["embedding"])["points"]

    def latest_model(self) -> tuple[int, SelectionDriftModel]:
        for index in range(len(self.meta["iterations"]) - 1, -1, -1):
            record = self.meta["iterations"][index]
            if record.get("model"):
                return index, SelectionDriftModel.load(self.dir / record["model"])
        raise HTTPException(409, "no partition submitted yet")

    # -- token replay --------------------------------------------------------

    def replay(self, token: Optional[str]):
        if token and token in self.meta["tokens"]:
            return self.meta["tokens"][token]
        return None

    def remember(self, token: Optional[str], response: dict) -> None:
        if token:
            self.meta["tokens"][token] = response
            self.persist()

    # -- background runs -----------------------------------------------------

    def start_background(self, total: int, target) -> None:
        with self.lock:
            if self.state == "running":
                raise HTTPException(409, "a run is already in progress")
            self.state = "running"
            self.failure = None
            self.generation = 0
            self.total_generations = total
            self.thread = threading.Thread(target=self._guarded, args=(target,), daemon=True)
            self.thread.start()

    def _guarded(self, target) -> None:
        try:
            target()
            with self.lock:
                self.state = "idle"
        except Exception as exc:
            with self.lock:
                self.state = "failed"
                self.failure = str(exc)

    def progress_cb(self, generation: int, occupancy: int) -> None:
        with self.lock:
            self.generation = generation
            self.occupancy = occupancy

    def append_iteration(self, archive: Archive, tsne_iterations: int,
                         mode: str, generations: int) -> int:
        """Persist a finished run eagerly (snapshot + embedding)."""
        index = len(self.meta["iterations"])
        snap_name = f"snapshot_{index:03d}.npz"
        emb_name = f"embedding_{index:03d}.npz"
        archive.save(self.dir / snap_name)
        config = ProjectionConfig(
            iterations=max(tsne_iterations, 2),
            exaggeration_iters=min(250, max(1, tsne_iterations // 2)),
            momentum_switch=min(250, max(1, tsne_iterations // 2)))
        embedding = embed_archive(archive, config)
        cells = archive.occupied_indices()
        save_bundle(self.dir / emb_name, points=embedding.points, cells=cells,
                    kl=np.array([embedding.kl_final, embedding.kl_exaggeration_end]))
        with self.lock:
            self.meta["iterations"].append({
                "index": index, "mode": mode, "generations": generations,
                "snapshot": snap_name, "embedding": emb_name,
                "occupancy": int(cells.size), "partition": None, "model": None,
                "drift_preview": None,
            })
            self.persist()
        return index


class SessionStore:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, body: TaskConfigBody) -> Session:
        if body.task_kind == "planner":
            task = planner_task()
        elif body.task_kind == "controller":
            topology = ElmanTopology(**body.topology) if body.topology else ElmanTopology()
            if body.weight_count is not None and body.weight_count != topology.weight_count:
                raise HTTPException(
                    422, f"weight_count: expected {topology.weight_count} for this "
                         f"topology, got {body.weight_count}")
            task = controller_task(topology, body.sim_steps)
        else:
            raise HTTPException(422, f"task_kind: unknown task {body.task_kind!r}")
        sid = uuid.uuid4().hex[:12]
        session = Session(self.root, sid)
        session.dir.mkdir(parents=True)
        session.meta = {
            "id": sid, "schema_version": SCHEMA_VERSION,
            "task": task.to_dict(),
            "maze": json.loads(MazeSpec().to_json()),
            "initial_heading": body.initial_heading,
            "iterations": [], "tokens": {},
        }
        session.persist()
        with self._lock:
            self._sessions[sid] = session
        return session

    def get(self, sid: str) -> Session:
        with self._lock:
            if sid in self._sessions:
                return self._sessions[sid]
        path = self.root / sid / "session.json"
        if not path.exists():
            raise HTTPException(404, f"unknown session {sid}")
        session = Session(self.root, sid).load()
        with self._lock:
            self._sessions.setdefault(sid, session)
        return self._sessions[sid]

    def list_ids(self) -> list[str]:
        on_disk = {p.name for p in self.root.iterdir()
                   if (p / "session.json").exists()}
        return sorted(on_disk)


def _snapshot_payload(session: Session, index: int, stride: int) -> dict:
    archive = session.archive_at(index)
    points = session.embedding_points(index)
    record = session.iteration(index)
    cells = archive.occupied_indices()
    rows = (cells // archive.shape[1]).tolist()
    cols = (cells % archive.shape[1]).tolist()
    drift_preview = record.get("drift_preview")
    drift_by_cell = ({(d["row"], d["col"]): d["drift"] for d in drift_preview}
                     if drift_preview else {})
    selected_cells = {tuple(c) for c in (record.get("partition") or {}).get(
        "selected_cells", [])}
    cell_entries = []
    paths = {}
    for k, j in enumerate(cells):
        row, col = rows[k], cols[k]
        entry = {
            "row": row, "col": col,
            "fitness": float(archive.fitness[j]),
            "exit": int(archive.inner_exit[j]),
            "reentered": bool(archive.flag[j]),
            "end": [float(archive.end[j][0]), float(archive.end[j][1])],
        }
        if (row, col) in drift_by_cell:
            entry["drift"] = drift_by_cell[(row, col)]
        if selected_cells:
            entry["selected"] = (row, col) in selected_cells
        cell_entries.append(entry)
        path = archive.paths[j]
        if stride > 1 and len(path) > 2:
            decimated = np.vstack([path[:-1:stride], path[-1:]])
        else:
            decimated = path
        paths[f"{row},{col}"] = np.round(decimated, 3).tolist()
    return {
        "schema_version": SCHEMA_VERSION,
        "iteration": index,
        "grid": {"rows": archive.shape[0], "cols": archive.shape[1]},
        "maze": session.meta["maze"],
        "occupancy": len(cell_entries),
        "cells": cell_entries,
        "embedding": [{"row": rows[k], "col": cols[k],
                       "x": float(points[k][0]), "y": float(points[k][1])}
                      for k in range(len(cells))],
        "paths": paths,
    }


def create_app(data_dir) -> FastAPI:
    """Build the service around a persistence directory."""
    store = SessionStore(Path(data_dir))
    app = FastAPI(title="qdselect service")

    @app.get("/api/v1/sessions")
    def list_sessions():
        out = []
        for sid in store.list_ids():
            session = store.get(sid)
            out.append({"id": sid, "state": session.state,
                        "iterations": len(session.meta["iterations"]),
                        "task_kind": session.meta["task"]["kind"]})
        return {"schema_version": SCHEMA_VERSION, "sessions": out}

    @app.post("/api/v1/sessions", status_code=201)
    def create_session(body: TaskConfigBody):
        session = store.create(body)
        return {"schema_version": SCHEMA_VERSION, "session_id": session.id}

    @app.get("/api/v1/sessions/{sid}")
    def get_session(sid: str):
        session = store.get(sid)
        with session.lock:
            return {
                "schema_version": SCHEMA_VERSION,
                "id": session.id,
                "state": session.state,
                "task": session.meta["task"],
                "initial_heading": session.meta["initial_heading"],
                "iterations": session.meta["iterations"],
            }

    @app.get("/api/v1/sessions/{sid}/progress")
    def get_progress(sid: str):
        session = store.get(sid)
        with session.lock:
            return {
                "schema_version": SCHEMA_VERSION,
                "state": session.state,
                "generation": session.generation,
                "total_generations": session.total_generations,
                "occupancy": session.occupancy,
                "failure": session.failure,
            }

    @app.post("/api/v1/sessions/{sid}/runs", status_code=202)
    def start_run(sid: str, body: RunBody):
        session = store.get(sid)
        replayed = session.replay(body.request_token)
        if replayed is not None:
            return replayed
        task = session.task
        sigma = body.mutation_sigma_pct or _default_sigma(task.kind)
        init_count = body.init_count or _default_init_count(task.kind)
        config = EvolutionConfig(
            generations=body.generations, children_per_gen=body.children_per_gen,
            mutation_sigma_pct=sigma,
            init_kind="normal" if task.kind == "planner" else "sobol",
            init_count=init_count,
            rng_seed=len(session.meta["iterations"]))

        def job():
            maze = session.maze
            fresh = len(session.meta["iterations"]) == 0
            if fresh:
                archive = Archive(task, maze,
                                  initial_heading=session.meta["initial_heading"])
                rng = np.random.default_rng(config.rng_seed)
                init = initialize_population(config, task, rng)
                run_map_elites(archive, config, rng=rng, init_genomes=init,
                               progress=session.progress_cb)
            else:
                archive = session.archive_at(len(session.meta["iterations"]) - 1).copy()
                run_map_elites(archive, config, progress=session.progress_cb)
            session.append_iteration(archive, body.tsne_iterations,
                                     "initial" if fresh else "none", body.generations)

        session.start_background(body.generations, job)
        response = {"schema_version": SCHEMA_VERSION, "accepted": True,
                    "iteration": len(session.meta["iterations"])}
        session.remember(body.request_token, response)
        return response

    @app.get("/api/v1/sessions/{sid}/iterations/{index}/snapshot")
    def get_snapshot(sid: str, index: int, stride: int = 0):
        session = store.get(sid)
        if stride <= 0:
            stride = 5 if session.meta["task"]["kind"] == "controller" else 1
        return _snapshot_payload(session, index, stride)

    @app.get("/api/v1/sessions/{sid}/iterations/{index}/cells/{row}/{col}/path.txt",
             response_class=PlainTextResponse)
    def get_path_table(sid: str, index: int, row: int, col: int):
        session = store.get(sid)
        archive = session.archive_at(index)
        elite = archive.elite(row, col)
        if elite is None:
            raise HTTPException(404, f"cell ({row}, {col}) is empty")
        return path_table(elite.path, elite.headings)

    @app.post("/api/v1/sessions/{sid}/partition")
    def submit_partition(sid: str, body: PartitionBody):
        session = store.get(sid)
        replayed = session.replay(body.request_token)
        if replayed is not None:
            return replayed
        with session.lock:
            if session.state == "running":
                raise HTTPException(409, "a run is in progress")
        if not session.meta["iterations"]:
            raise HTTPException(409, "no iteration to select from")
        index = len(session.meta["iterations"]) - 1
        archive = session.archive_at(index)
        cells = archive.occupied_indices()
        occupied_pairs = {(int(j) // archive.shape[1], int(j) % archive.shape[1])
                          for j in cells}
        wanted = {tuple(c) for c in body.selected_cells}
        unknown = wanted - occupied_pairs
        if unknown:
            raise HTTPException(422, f"selected_cells: not occupied: {sorted(unknown)[:5]}")
        mask = np.array([(int(j) // archive.shape[1], int(j) % archive.shape[1]) in wanted
                         for j in cells], dtype=bool)
        points = session.embedding_points(index)
        embedding = Embedding(points=points, kl_final=0.0, kl_exaggeration_end=0.0,
                              kl_history=np.zeros(1), perplexity_effective=0.0)
        try:
            model = build_selection_model(archive, embedding, mask)
        except PartitionError as exc:
            raise HTTPException(422, f"selected_cells: {exc}")
        drift = model.drift(archive.genomes[cells])
        preview = [{"row": int(j) // archive.shape[1],
                    "col": int(j) % archive.shape[1],
                    "drift": float(drift[k])}
                   for k, j in enumerate(cells)]
        model_name = f"model_{index:03d}.npz"
        model.save(session.dir / model_name)
        record = session.iteration(index)
        record["partition"] = {"selected_cells": sorted(map(list, wanted))}
        record["model"] = model_name
        record["drift_preview"] = preview
        session.persist()
        response = {
            "schema_version": SCHEMA_VERSION,
            "iteration": index,
            "n_selected": int(mask.sum()),
            "n_deselected": int((~mask).sum()),
            "drift_preview": preview,
        }
        session.remember(body.request_token, response)
        return response

    @app.post("/api/v1/sessions/{sid}/continue", status_code=202)
    def continue_run(sid: str, body: ContinueBody):
        session = store.get(sid)
        replayed = session.replay(body.request_token)
        if replayed is not None:
            return replayed
        if body.mode not in MODES:
            raise HTTPException(422, f"mode: expected one of {MODES}")
        model_index, model = (None, None)
        if body.mode != "none":
            model_index, model = session.latest_model()
        task = session.task
        if not session.meta["iterations"]:
            raise HTTPException(409, "no snapshot to continue from")
        source_index = (model_index if model_index is not None
                        else len(session.meta["iterations"]) - 1)
        sigma = body.mutation_sigma_pct or _default_sigma(task.kind)
        config = EvolutionConfig(
            generations=body.generations, children_per_gen=body.children_per_gen,
            mutation_sigma_pct=sigma, init_count=1,
            rng_seed=len(session.meta["iterations"]))
        penalty = PenaltyConfig(weight=body.penalty_weight)

        def job():
            snapshot = session.archive_at(source_index)
            rng = np.random.default_rng(config.rng_seed)
            final = continue_archive(snapshot, body.mode, config, model, penalty, rng)
            index = session.append_iteration(final, body.tsne_iterations,
                                             body.mode, body.generations)
            record = session.iteration(index)
            record["source_iteration"] = source_index
            record["penalty_weight"] = body.penalty_weight
            session.persist()

        session.start_background(body.generations, job)
        response = {"schema_version": SCHEMA_VERSION, "accepted": True,
                    "iteration": len(session.meta["iterations"]),
                    "mode": body.mode}
        session.remember(body.request_token, response)
        return response

    @app.get("/api/v1/sessions/{sid}/report")
    def get_report(sid: str, target_exit: int = 0):
        session = store.get(sid)
        iterations = session.meta["iterations"]
        source = next((r for r in reversed(iterations)
                       if r.get("source_iteration") is not None), None)
        if source is None:
            raise HTTPException(409, "no continuation has completed yet")
        after_archive = session.archive_at(source["index"])
        before_archive = session.archive_at(source["source_iteration"])
        _, model = session.latest_model()

        def side(archive: Archive) -> dict:
            occ = archive.occupied_indices()
            exits = archive.inner_exit[occ]
            flags = archive.flag[occ]
            drift = model.drift(archive.genomes[occ])
            hist, edges = np.histogram(drift, bins=10, range=(0.0, 1.0))
            out = {
                "occupancy": int(occ.size),
                "exit_pct": {str(g): 100.0 * float(((exits == g) & ~flags).sum()) / occ.size
                             for g in (1, 2, 3)},
                "nonexit_pct": 100.0 * float((exits == 0).sum()) / occ.size,
                "drift_median": float(np.median(drift)),
                "drift_histogram": {"edges": edges.tolist(), "counts": hist.tolist()},
            }
            if target_exit in (1, 2, 3):
                out["metrics"] = archive_metrics(archive, target_exit, model)
            return out

        return {
            "schema_version": SCHEMA_VERSION,
            "before_iteration": source["source_iteration"],
            "after_iteration": source["index"],
            "mode": source["mode"],
            "before": side(before_archive),
            "after": side(after_archive),
        }

    frontend = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if not frontend.exists():
        frontend = Path.cwd() / "frontend" / "dist"
    if frontend.exists():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(frontend), html=True), name="ui")

    return app
