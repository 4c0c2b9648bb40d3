import hashlib
import json
import os
from pathlib import Path

import pytest

from qdselect.cli import build_parser, main
from qdselect.experiments import ExperimentPlan
from qdselect.projection import ProjectionConfig

MICRO = ["--init-gens", "24", "--cont-gens", "12", "--replicates", "1",
         "--init-count", "150", "--tsne-iters", "100", "--quiet"]


def tree_digest(root: Path) -> dict:
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def micro_plan_file(tmp_path: Path) -> Path:
    plan = ExperimentPlan(
        kind="mode_comparison", task_kind="planner",
        modes=("none", "combined"), penalty_weights=(10.0,),
        mutation_sigmas=(5.0,), replicates=1, exits=(1,),
        init_generations=20, cont_generations=10, init_count=120,
        projection=ProjectionConfig(iterations=80), master_seed=5,
        save_snapshots=True)
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan.to_dict()))
    return path


class TestDeterminism:
    def test_run_experiment_twice_is_byte_identical(self, tmp_path):
        plan = micro_plan_file(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["run-experiment", "--plan", str(plan), "--out", str(out_a),
                     "--quiet"]) == 0
        assert main(["run-experiment", "--plan", str(plan), "--out", str(out_b),
                     "--quiet"]) == 0
        da, db = tree_digest(out_a), tree_digest(out_b)
        assert da and da == db

    def test_reproduce_table1_twice_is_byte_identical(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        args = ["reproduce-table1", "--task", "planner", "--seed", "7"] + MICRO
        assert main(args + ["--out", str(out_a)]) == 0
        assert main(args + ["--out", str(out_b)]) == 0
        assert tree_digest(out_a) == tree_digest(out_b)

    def test_sweep_penalty_twice_is_byte_identical(self, tmp_path, monkeypatch):
        # two weights keep the micro sweep fast; env var supplies the out dir
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        args = ["sweep-penalty", "--task", "planner", "--seed", "3"] + MICRO
        monkeypatch.setenv("QDSELECT_OUT", str(out_a))
        assert main(args) == 0
        monkeypatch.setenv("QDSELECT_OUT", str(out_b))
        assert main(args) == 0
        da, db = tree_digest(out_a), tree_digest(out_b)
        assert da and da == db

    def test_inspect_twice_identical(self, tmp_path, capsys):
        plan = micro_plan_file(tmp_path)
        out = tmp_path / "o"
        main(["run-experiment", "--plan", str(plan), "--out", str(out), "--quiet"])
        snap = next((out / "snapshots").glob("*init.npz"))
        capsys.readouterr()
        assert main(["inspect", str(snap)]) == 0
        first = capsys.readouterr().out
        assert main(["inspect", str(snap)]) == 0
        assert capsys.readouterr().out == first
        payload = json.loads(first)
        assert payload["occupancy"] <= payload["capacity"] == 900


class TestSubcommands:
    def test_reproduce_table1_emits_all_modes(self, tmp_path):
        out = tmp_path / "out"
        assert main(["reproduce-table1", "--task", "planner", "--out", str(out),
                     "--seed", "2"] + MICRO) == 0
        table = (out / "planner" / "table1.csv").read_text().strip().splitlines()
        assert len(table) == 5  # header + 4 modes
        modes = [line.split(",")[1] for line in table[1:]]
        assert modes == ["none", "penalty", "seeding", "combined"]

    def test_sweep_mutation_writes_grid(self, tmp_path):
        out = tmp_path / "out"
        assert main(["sweep-mutation", "--task", "planner", "--out", str(out),
                     "--seed", "2"] + MICRO) == 0
        rows = (out / "mutation_sweep_planner" / "mutation_sweep_points.csv"
                ).read_text().strip().splitlines()
        assert len(rows) == 1 + 4 * 5  # header + modes x sigma grid

    def test_sweep_penalty_covers_weight_grid(self, tmp_path):
        out = tmp_path / "out"
        assert main(["sweep-penalty", "--task", "planner", "--out", str(out),
                     "--seed", "2"] + MICRO) == 0
        rows = (out / "penalty_sweep_planner" / "penalty_sweep_points.csv"
                ).read_text().strip().splitlines()
        weights = [float(line.split(",")[1]) for line in rows[1:]]
        assert weights == [0.0, 1.0, 5.0, 10.0, 20.0, 50.0]

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["inspect", "--bogus", "x"])
        assert exc.value.code == 2

    def test_missing_plan_is_failure_exit_1(self, tmp_path):
        assert main(["run-experiment", "--plan", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o"), "--quiet"]) == 1

    def test_help_lists_every_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for name in ("run-experiment", "reproduce-table1", "sweep-penalty",
                     "sweep-mutation", "serve", "inspect"):
            assert name in text

    def test_help_shows_flag_defaults(self, capsys):
        with pytest.raises(SystemExit):
            main(["reproduce-table1", "--help"])
        text = capsys.readouterr().out
        assert "--seed" in text and "default: 7" in text
        assert "--workers" in text and "--scale" in text and "--out" in text

    def test_writes_stay_inside_out_dir(self, tmp_path, monkeypatch):
        plan = micro_plan_file(tmp_path)
        workdir = tmp_path / "cwd"
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        out = tmp_path / "only-here"
        before = set(workdir.rglob("*"))
        assert main(["run-experiment", "--plan", str(plan), "--out", str(out),
                     "--quiet"]) == 0
        after = set(workdir.rglob("*"))
        assert before == after  # nothing leaked into the working directory
        assert any(out.rglob("runs.csv"))
