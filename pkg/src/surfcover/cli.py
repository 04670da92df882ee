"""Pipeline command line: parameterize -> plan/train -> rollout -> lift -> evaluate -> render.

Every stage reads one JSON project config, writes its artifacts into the
config's output directory, and embeds the config hash so later stages can
refuse mismatched inputs. Failures print a machine-readable JSON object to
stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import baselines, lift, metrics
from .config import ProjectConfig, stage_seed
from .env import CoverageEnv, RewardConfig, write_trace_csv
from .mesh import extract_region, load_obj, read_face_selection
from .parameterize import build_chart, load_chart, save_chart
from .raster import build_grid_world, stamp_path
from .render import render_svg

STAGES = ("parameterize", "plan", "train", "rollout", "lift", "evaluate", "render")


class StageError(Exception):
    def __init__(self, stage: str, kind: str, message: str):
        super().__init__(message)
        self.stage = stage
        self.kind = kind


def _artifact(config: ProjectConfig, name: str) -> str:
    return os.path.join(config.output_dir, name)


def _require(config: ProjectConfig, stage: str, name: str) -> str:
    path = _artifact(config, name)
    if not os.path.exists(path):
        raise StageError(stage, "missing-artifact", f"required artifact {path} not found")
    return path


def _check_lineage(stage: str, found: str | None, expected: str, force: bool) -> None:
    if found is None or found == expected:
        return
    if force:
        return
    raise StageError(
        stage,
        "lineage-mismatch",
        f"artifact was produced by config {found}, current config is {expected}; rerun or pass --force",
    )


def _load_mesh(config: ProjectConfig, stage: str):
    if not os.path.exists(config.mesh):
        raise StageError(stage, "missing-input", f"mesh file {config.mesh} not found")
    mesh = load_obj(config.mesh, triangulate=config.triangulate)
    if config.region:
        if not os.path.exists(config.region):
            raise StageError(stage, "missing-input", f"region file {config.region} not found")
        mesh = extract_region(mesh, read_face_selection(config.region))
    return mesh


def _load_chart_checked(config: ProjectConfig, stage: str, force: bool):
    path = _require(config, stage, "chart.json")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    _check_lineage(stage, doc.get("config_hash"), config.hash(), force)
    from .parameterize import UVChart

    return UVChart.from_json_dict(doc)


def _build_env(config: ProjectConfig, chart, mesh, seed: int) -> CoverageEnv:
    return CoverageEnv(
        chart,
        mesh,
        reward=config.reward,
        resolution=config.resolution,
        footprint_radius=config.footprint_radius,
        speed=config.speed,
        max_turn_deg=config.max_turn_deg,
        obs_scales=config.obs_scales,
        obs_size=config.obs_size,
        base_window=config.base_window,
        seed=seed,
    )


def _spacing(config: ProjectConfig) -> float:
    if config.plan_spacing is not None:
        return config.plan_spacing
    return baselines.SPACING_FACTOR * config.footprint_radius


# -- stages ---------------------------------------------------------------


def stage_parameterize(config: ProjectConfig, force: bool) -> list[str]:
    mesh = _load_mesh(config, "parameterize")
    chart = build_chart(
        mesh,
        domain=config.domain,
        weights=config.weights,
        start_vertex=config.start_vertex,
    )
    out = _artifact(config, "chart.json")
    save_chart(chart, out, extra={"config_hash": config.hash(), "mesh_path": config.mesh})
    return [out]


def stage_plan(config: ProjectConfig, force: bool) -> list[str]:
    chart = _load_chart_checked(config, "plan", force)
    spacing = _spacing(config)
    if config.plan_method == "zigzag":
        path = baselines.zigzag_path(chart, spacing, margin=config.plan_margin)
    elif config.plan_method == "spiral":
        path = baselines.spiral_path(chart, spacing)
    else:
        raise StageError("plan", "bad-config", f"unknown plan method {config.plan_method!r}")
    out = _artifact(config, "path.csv")
    baselines.save_path_csv(path, out, config_hash=config.hash(), method=config.plan_method)
    return [out]


def stage_train(config: ProjectConfig, force: bool) -> list[str]:
    from .rl import save_checkpoint, train, write_training_log

    chart = _load_chart_checked(config, "train", force)
    mesh = _load_mesh(config, "train")
    env = _build_env(config, chart, mesh, stage_seed(config.seed, "train-env"))
    eval_env = env.clone(seed=stage_seed(config.seed, "eval-env"))
    agent, log = train(env, config.train, seed=stage_seed(config.seed, "train"), eval_env=eval_env)
    ckpt = _artifact(config, "checkpoint.pt")
    log_path = _artifact(config, "training_log.csv")
    save_checkpoint(agent, ckpt, config_hash=config.hash())
    write_training_log(log_path, log, config_hash=config.hash())
    return [ckpt, log_path]


def stage_rollout(config: ProjectConfig, force: bool, deterministic: bool = True) -> list[str]:
    from .rl import load_checkpoint, rollout

    ckpt_path = _require(config, "rollout", "checkpoint.pt")
    agent, found_hash = load_checkpoint(ckpt_path)
    _check_lineage("rollout", found_hash, config.hash(), force)
    chart = _load_chart_checked(config, "rollout", force)
    mesh = _load_mesh(config, "rollout")
    env = _build_env(config, chart, mesh, stage_seed(config.seed, "rollout"))
    path, trace = rollout(agent, env, deterministic=deterministic)
    path_out = _artifact(config, "path.csv")
    trace_out = _artifact(config, "trace.csv")
    baselines.save_path_csv(path, path_out, config_hash=config.hash(), method="learned")
    write_trace_csv(trace_out, trace, config_hash=config.hash())
    return [path_out, trace_out]


def stage_lift(config: ProjectConfig, force: bool) -> list[str]:
    chart = _load_chart_checked(config, "lift", force)
    mesh = _load_mesh(config, "lift")
    path_file = _require(config, "lift", "path.csv")
    path, meta = baselines.load_path_csv(path_file)
    _check_lineage("lift", meta.get("config_hash"), config.hash(), force)
    waypoints = lift.lift_path(
        path, chart, mesh, delta=config.lift_delta, dt=config.lift_dt, gamma0=config.lift_gamma0
    )
    twist_list = lift.twists(waypoints, dt=config.lift_dt, delta=config.lift_delta)
    wp_out = _artifact(config, "waypoints.csv")
    tw_out = _artifact(config, "twists.json")
    lift.save_waypoints_csv(waypoints, wp_out, config_hash=config.hash())
    lift.save_twists_json(twist_list, tw_out, config_hash=config.hash())
    return [wp_out, tw_out]


def stage_evaluate(config: ProjectConfig, force: bool) -> list[str]:
    chart = _load_chart_checked(config, "evaluate", force)
    mesh = _load_mesh(config, "evaluate")
    path_file = _require(config, "evaluate", "path.csv")
    path, meta = baselines.load_path_csv(path_file)
    _check_lineage("evaluate", meta.get("config_hash"), config.hash(), force)
    method = meta.get("method", "unknown")

    wp_file = _artifact(config, "waypoints.csv")
    if os.path.exists(wp_file):
        waypoints, wp_meta = lift.load_waypoints_csv(wp_file)
        _check_lineage("evaluate", wp_meta.get("config_hash"), config.hash(), force)
    else:
        waypoints = lift.lift_path(
            path, chart, mesh, delta=config.lift_delta, dt=config.lift_dt, gamma0=config.lift_gamma0
        )

    world = build_grid_world(chart, mesh, config.resolution)
    stamp_path(world, path.points, config.footprint_radius)
    rep = metrics.report(waypoints, world)

    report_out = _artifact(config, "report.json")
    with open(report_out, "w", encoding="utf-8") as fh:
        doc = json.loads(rep.to_json())
        doc["config_hash"] = config.hash()
        doc["method"] = method
        json.dump(doc, fh, indent=2, sort_keys=True)

    table_out = _artifact(config, "comparison.csv")
    rows = {}
    if os.path.exists(table_out):
        with open(table_out, "r", encoding="utf-8") as fh:
            for row in csv.DictReader(r for r in fh if not r.startswith("#")):
                rows[row["method"]] = row
    rows[method] = {
        "method": method,
        "total_length_m": f"{rep.total_length:.6f}",
        "coverage_fraction": f"{rep.coverage_fraction:.6f}",
        "s_delta_gamma_rad": f"{rep.s_delta_gamma:.6f}",
        "step_count": str(rep.step_count),
    }
    with open(table_out, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_hash={config.hash()}\n")
        writer = csv.DictWriter(
            fh,
            fieldnames=["method", "total_length_m", "coverage_fraction", "s_delta_gamma_rad", "step_count"],
        )
        writer.writeheader()
        for key in sorted(rows):
            writer.writerow(rows[key])
    return [report_out, table_out]


def stage_render(config: ProjectConfig, force: bool) -> list[str]:
    chart = _load_chart_checked(config, "render", force)
    mesh = _load_mesh(config, "render")
    world = build_grid_world(chart, mesh, config.resolution)
    points = None
    path_file = _artifact(config, "path.csv")
    if os.path.exists(path_file):
        path, meta = baselines.load_path_csv(path_file)
        _check_lineage("render", meta.get("config_hash"), config.hash(), force)
        stamp_path(world, path.points, config.footprint_radius)
        points = path.points
    out = _artifact(config, "render.svg")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(render_svg(world, points))
    return [out]


_STAGE_FUNCS = {
    "parameterize": stage_parameterize,
    "plan": stage_plan,
    "train": stage_train,
    "rollout": stage_rollout,
    "lift": stage_lift,
    "evaluate": stage_evaluate,
    "render": stage_render,
}


def run_pipeline(config: ProjectConfig, stages, force: bool = False, **stage_kwargs) -> int:
    """Run the listed stages in order; exit code 0 iff all succeeded."""
    os.makedirs(config.output_dir, exist_ok=True)
    for stage in stages:
        if stage not in _STAGE_FUNCS:
            print(json.dumps({"error": "unknown-stage", "stage": stage}), file=sys.stderr)
            return 2
        try:
            kwargs = stage_kwargs if stage == "rollout" else {}
            artifacts = _STAGE_FUNCS[stage](config, force, **kwargs)
        except StageError as exc:
            print(
                json.dumps({"error": exc.kind, "stage": exc.stage, "detail": str(exc)}),
                file=sys.stderr,
            )
            return 1
        except (ValueError, RuntimeError, OSError) as exc:
            print(
                json.dumps({"error": "stage-failure", "stage": stage, "detail": str(exc)}),
                file=sys.stderr,
            )
            return 1
        for a in artifacts:
            print(a)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surfcover", description=__doc__)
    parser.add_argument("--config", default="config.json", help="project config JSON")
    parser.add_argument("--force", action="store_true", help="ignore config-hash lineage mismatches")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parameterize", help="build the UV chart")
    p.add_argument("--domain", choices=["square", "disk"])
    p.add_argument("--weights", choices=["cotangent", "uniform"])
    p.add_argument("--start-vertex", type=int)

    p = sub.add_parser("plan", help="rule-based coverage path")
    p.add_argument("--method", choices=["zigzag", "spiral"])
    p.add_argument("--spacing", type=float)
    p.add_argument("--margin", type=float)

    p = sub.add_parser("train", help="train the coverage policy")
    p.add_argument("--seed", type=int)
    p.add_argument("--total-steps", type=int)

    p = sub.add_parser("rollout", help="run the trained policy")
    p.add_argument("--checkpoint", help="checkpoint path override")
    p.add_argument("--stochastic", action="store_true", help="sample instead of the mean action")

    sub.add_parser("lift", help="lift the planned path to 3D waypoints")
    sub.add_parser("evaluate", help="compute path metrics")
    sub.add_parser("render", help="render the world and path as SVG")

    p = sub.add_parser("pipeline", help="run several stages in order")
    p.add_argument("stages", nargs="+", choices=STAGES)
    return parser


def _apply_overrides(config: ProjectConfig, args) -> ProjectConfig:
    if getattr(args, "domain", None):
        config.domain = args.domain
    if getattr(args, "weights", None):
        config.weights = args.weights
    if getattr(args, "start_vertex", None) is not None:
        config.start_vertex = args.start_vertex
    if getattr(args, "method", None):
        config.plan_method = args.method
    if getattr(args, "spacing", None) is not None:
        config.plan_spacing = args.spacing
    if getattr(args, "margin", None) is not None:
        config.plan_margin = args.margin
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "total_steps", None) is not None:
        config.train.total_steps = args.total_steps
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ProjectConfig.from_file(args.config)
    except FileNotFoundError:
        print(json.dumps({"error": "missing-config", "detail": args.config}), file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print(json.dumps({"error": "bad-config", "detail": str(exc)}), file=sys.stderr)
        return 2
    config = _apply_overrides(config, args)

    if args.command == "pipeline":
        return run_pipeline(config, args.stages, force=args.force)
    kwargs = {}
    if args.command == "rollout":
        kwargs["deterministic"] = not args.stochastic
        if args.checkpoint:
            os.makedirs(config.output_dir, exist_ok=True)
            target = _artifact(config, "checkpoint.pt")
            if os.path.abspath(args.checkpoint) != os.path.abspath(target):
                import shutil

                shutil.copyfile(args.checkpoint, target)
    return run_pipeline(config, [args.command], force=args.force, **kwargs)


if __name__ == "__main__":
    sys.exit(main())
