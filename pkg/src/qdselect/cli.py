"""Batch command line: experiment matrices, sweeps, snapshot inspection,
and the interactive service.

All randomness derives from ``--seed``; repeated invocations with the same
seed write byte-identical files. Nothing is written outside the chosen
output directory (``--out``, defaulting to ``$QDSELECT_OUT`` or
``./qdselect-out``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .experiments import ExperimentPlan, run_plan
from .qd import Archive

OUT_ENV = "QDSELECT_OUT"

DESK_NOTE = "desk scale: reduced budgets sized for a laptop core"
PAPER_NOTE = ("paper scale: full budgets (thousands of generations x 6 "
              "replicates); expect multiple hours per task")


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or "qdselect-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _apply_overrides(plan: ExperimentPlan, args) -> ExperimentPlan:
    """Dev/test budget overrides; the named presets stay canonical."""
    updates = {}
    if getattr(args, "init_gens", None) is not None:
        updates["init_generations"] = args.init_gens
    if getattr(args, "cont_gens", None) is not None:
        updates["cont_generations"] = args.cont_gens
    if getattr(args, "replicates", None) is not None:
        updates["replicates"] = args.replicates
    if getattr(args, "init_count", None) is not None:
        updates["init_count"] = args.init_count
    if getattr(args, "tsne_iters", None) is not None:
        from .projection import ProjectionConfig
        proj = dict(plan.projection.to_dict())
        proj["iterations"] = args.tsne_iters
        proj["exaggeration_iters"] = min(proj["exaggeration_iters"], args.tsne_iters // 2)
        proj["momentum_switch"] = proj["exaggeration_iters"]
        updates["projection"] = ProjectionConfig.from_dict(proj)
    if getattr(args, "save_snapshots", False):
        updates["save_snapshots"] = True
    if updates:
        d = plan.to_dict()
        d.update({k: (v.to_dict() if k == "projection" else v) for k, v in updates.items()})
        plan = ExperimentPlan.from_dict(d)
    return plan


def _scale_note(args) -> None:
    print(PAPER_NOTE if args.scale == "paper" else DESK_NOTE, file=sys.stderr)


def _log(args):
    if args.quiet:
        return None
    return lambda msg: print(msg, file=sys.stderr)


def _tasks_for(args) -> list[str]:
    return ["planner", "controller"] if args.task == "both" else [args.task]


def cmd_run_experiment(args) -> int:
    plan = ExperimentPlan.from_dict(json.loads(Path(args.plan).read_text()))
    if args.seed is not None:
        d = plan.to_dict()
        d["master_seed"] = args.seed
        plan = ExperimentPlan.from_dict(d)
    out = _out_dir(args)
    run_plan(plan, out_dir=out, workers=args.workers, log=_log(args))
    print(str(out / "runs.csv"))
    return 0


def cmd_reproduce_table1(args) -> int:
    _scale_note(args)
    out = _out_dir(args)
    for task in _tasks_for(args):
        plan = experiments.comparison_plan(task, args.scale, args.seed)
        plan = _apply_overrides(plan, args)
        report = run_plan(plan, out_dir=out / task, workers=args.workers, log=_log(args))
        print((out / task / "table1.csv").as_posix())
        if not args.quiet:
            for row in experiments.table1_rows(report):
                print(f"  {row['mode']:<9} correct {row['correct_pct_median']:6.1f}%  "
                      f"incorrect {row['incorrect_pct_median']:6.1f}%  "
                      f"drift {row['drift_median_median']:.3f}", file=sys.stderr)
    return 0


def cmd_sweep_penalty(args) -> int:
    _scale_note(args)
    out = _out_dir(args)
    for task in _tasks_for(args):
        plan = experiments.penalty_sweep_plan(task, args.scale, args.seed)
        plan = _apply_overrides(plan, args)
        run_plan(plan, out_dir=out / f"penalty_sweep_{task}",
                 workers=args.workers, log=_log(args))
        print((out / f"penalty_sweep_{task}" / "penalty_sweep_points.csv").as_posix())
    return 0


def cmd_sweep_mutation(args) -> int:
    _scale_note(args)
    out = _out_dir(args)
    for task in _tasks_for(args):
        plan = experiments.mutation_sweep_plan(task, args.scale, args.seed)
        plan = _apply_overrides(plan, args)
        run_plan(plan, out_dir=out / f"mutation_sweep_{task}",
                 workers=args.workers, log=_log(args))
        print((out / f"mutation_sweep_{task}" / "mutation_sweep_points.csv").as_posix())
    return 0


def cmd_inspect(args) -> int:
    archive = Archive.load(args.snapshot)
    occ = archive.occupied_indices()
    exits = archive.inner_exit[occ]
    lines = {
        "grid": f"{archive.shape[0]}x{archive.shape[1]}",
        "capacity": archive.capacity,
        "occupancy": int(occ.size),
        "task": archive.task.kind,
        "initial_heading": archive.initial_heading,
        "exits": {str(g): int((exits == g).sum()) for g in (1, 2, 3)},
        "non_exiting": int((exits == 0).sum()),
        "reentrant": int(archive.flag[occ].sum()),
    }
    if occ.size:
        fit = archive.fitness[occ]
        lines["fitness_min"] = float(fit.min())
        lines["fitness_median"] = float(np.median(fit))
        lines["fitness_max"] = float(fit.max())
    print(json.dumps(lines, indent=2, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(Path(args.data_dir))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdselect",
        description="Maze quality-diversity runs with user-selection constraints.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, task_choices=("planner", "controller", "both")):
        p.add_argument("--out", default=None,
                       help=f"output directory (default ${OUT_ENV} or ./qdselect-out)")
        p.add_argument("--seed", type=int, default=7, help="master random seed")
        p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
        p.add_argument("--scale", choices=("desk", "paper"), default="desk",
                       help="budget preset")
        p.add_argument("--task", choices=task_choices, default="both",
                       help="which benchmark task(s)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        p.add_argument("--init-gens", type=int, default=None,
                       help="override initial generations (testing)")
        p.add_argument("--cont-gens", type=int, default=None,
                       help="override continuation generations (testing)")
        p.add_argument("--replicates", type=int, default=None,
                       help="override replicate count (testing)")
        p.add_argument("--init-count", type=int, default=None,
                       help="override initial population size (testing)")
        p.add_argument("--tsne-iters", type=int, default=None,
                       help="override projection iterations (testing)")
        p.add_argument("--save-snapshots", action="store_true",
                       help="write initial/final archive snapshots")

    p = sub.add_parser("run-experiment", help="execute a plan file",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--plan", required=True, help="path to a plan JSON file")
    p.add_argument("--out", default=None,
                   help=f"output directory (default ${OUT_ENV} or ./qdselect-out)")
    p.add_argument("--seed", type=int, default=None, help="override the plan's seed")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    p.set_defaults(func=cmd_run_experiment)

    p = sub.add_parser("reproduce-table1",
                       help="mode-comparison medians for both tasks",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(p)
    p.set_defaults(func=cmd_reproduce_table1)

    p = sub.add_parser("sweep-penalty", help="penalty-weight sweep",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(p)
    p.set_defaults(func=cmd_sweep_penalty)

    p = sub.add_parser("sweep-mutation", help="mutation-distance sweep",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(p)
    p.set_defaults(func=cmd_sweep_mutation)

    p = sub.add_parser("inspect", help="summarize an archive snapshot file",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("snapshot", help="path to a snapshot .npz")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("serve", help="run the interactive session service",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--host", default="127.0.0.1", help="bind address")
    p.add_argument("--port", type=int, default=8000, help="bind port")
    p.add_argument("--data-dir", default="qdselect-sessions",
                   help="session persistence directory")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
