"""Command-line harness: generate scenarios, run pipelines, score maps.

Every run is reproducible from (scenario file, seed, flags); the metrics
JSON echoes all three. Outputs use '.' decimals and sorted JSON keys so
reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import dmmtm as dmmtm_mod
from . import mltm as mltm_mod
from . import mmtm as mmtm_mod
from .core import (
    NetworkScenario,
    ScenarioSpec,
    SectorConfig,
    TopologyCoordinate,
    generate_scenario,
    scenario_from_json,
    scenario_to_json,
    seeded_rng,
    worker_count,
)
from .detarsk import export_trace_csv, run_search
from .errors import TopomapError
from .extremum import (
    FieldModel,
    FieldSource,
    NavigationParams,
    export_seek_csv,
    run_seek,
)
from .likelihood import ReceptionProbabilityFn
from .metrics import (
    distance_error_stats,
    one_hop_connectivity_error,
    procrustes_fit,
    sector_displacement,
)
from .trajectory import (
    PlanarSectorAntenna,
    VerticalArrayAntenna,
    VerticalSweepAntenna,
    export_trajectory_csv,
    plan_reference,
    plan_s_shape,
)

EXIT_USAGE = 2
EXIT_ID_MISMATCH = 3


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _json_text(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load_scenario(path: str, seed: int | None) -> NetworkScenario:
    with open(path) as fh:
        scenario = scenario_from_json(fh.read())
    if seed is not None:
        scenario = dataclasses.replace(scenario, rng_seed=seed)
    return scenario


def _physical_map(scenario: NetworkScenario) -> dict[int, np.ndarray]:
    return {n.id: n.position.as_array() for n in scenario.nodes}


def _map_from_csv(path: str) -> dict[int, np.ndarray]:
    out = {}
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("node_id"):
            raise ValueError(f"{path} is not a map CSV")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < 4 or parts[1] == "":
                continue  # unlocatable row
            out[int(parts[0])] = np.array(
                [float(parts[1]), float(parts[2]), float(parts[3])]
            )
    return out


def _reception_fn(scenario, args) -> ReceptionProbabilityFn:
    fn = mltm_mod.default_reception_fn(scenario.environment)
    p0 = args.p0 if args.p0 is not None else fn.p0
    R = args.big_r if args.big_r is not None else fn.R
    r = args.little_r if args.little_r is not None else 0.2 * R
    return ReceptionProbabilityFn(p0=p0, r=r, R=R)


def _map_metrics(scenario, topo, fn, args, extra=None) -> dict:
    phys = _physical_map(scenario)
    est = {k: v.as_array() for k, v in topo.coordinates.items()}
    common_phys = {k: phys[k] for k in est}
    mean_err, var_err, cdf = distance_error_stats(common_phys, est)
    doc = {
        "parameters": {
            "scenario_seed": scenario.rng_seed,
            "p0": fn.p0,
            "r": fn.r,
            "R": fn.R,
            "grid_step": args.grid_step,
            "workers": worker_count(),
        },
        "node_count": len(scenario.nodes),
        "located": len(topo.coordinates),
        "unlocatable": list(topo.unlocatable),
        "distance_error": {
            "mean": mean_err,
            "variance": var_err,
            "cdf": [round(float(v), 6) for v in cdf],
        },
    }
    if len(est) >= 4:
        conn = one_hop_connectivity_error(
            common_phys, est, scenario.environment.comm_radius
        )
        doc["one_hop_connectivity_error_percent"] = conn.total_percent
    if extra:
        doc.update(extra)
    return doc


# --------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    spec = ScenarioSpec(
        template=args.template,
        num_nodes=args.nodes,
        seed=args.seed,
        anchor_ratio=args.anchor_ratio or 0.0,
        node_sectors=args.sectors,
    )
    try:
        scenario = generate_scenario(spec)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    text = scenario_to_json(scenario)
    _write(Path(args.out), text)
    digest = hashlib.sha256(text.encode()).hexdigest()
    print(f"{args.out} sha256={digest} nodes={len(scenario.nodes)}")
    return 0


def _run_mltm(scenario, args, outdir: Path) -> dict:
    fn = _reception_fn(scenario, args)
    if args.grid_step is None:
        args.grid_step = fn.R / 10.0
    planner = plan_s_shape(scenario, packets_required=args.np)
    matrix = mltm_mod.gather_evidence(scenario, planner)
    topo = mltm_mod.estimate_map(matrix, fn, grid_step=args.grid_step)
    _write(outdir / "map.csv", mltm_mod.map_to_csv(topo))
    export_trajectory_csv(matrix.robot_poses, outdir / "trajectory.csv")
    return _map_metrics(
        scenario, topo, fn, args, extra={"dwells": len(matrix.robot_poses)}
    )


def _antenna_setup(args):
    if args.antenna == "vaa":
        return VerticalArrayAntenna((math.radians(25), math.radians(75)))
    if args.antenna == "vbs":
        return VerticalSweepAntenna()
    return PlanarSectorAntenna()


def _run_mmtm(scenario, args, outdir: Path) -> dict:
    from .propagation import power_range

    fn = _reception_fn(scenario, args)
    if args.grid_step is None:
        args.grid_step = fn.R / 10.0
    robot_cfg = SectorConfig.uniform(args.sectors or 16, math.pi / 4)
    setup = _antenna_setup(args)
    dims = 2 if args.antenna in ("vaa", "vbs") else 3
    # lanes must sit within actual reception reach, which the heavy mm path
    # loss usually pins below the protocol radius
    tx = scenario.nodes[0].transmit_power if scenario.nodes else 20.0
    spacing = max(1.0, 0.9 * power_range(scenario.environment, tx))
    planner = plan_s_shape(
        scenario, lane_spacing=spacing, packets_required=args.np,
        dimensionality=dims, max_steps=60_000,
    )
    m, a = mmtm_mod.gather_mm_evidence(scenario, planner, setup, robot_cfg)
    topo = mmtm_mod.estimate_mm_map(m, a, fn, robot_cfg, setup, grid_step=args.grid_step)
    _write(outdir / "map.csv", mltm_mod.map_to_csv(topo))
    export_trajectory_csv(m.robot_poses, outdir / "trajectory.csv")
    table = mmtm_mod.best_sector_table(m, a)
    lines = ["node_id,best_sector"] + [f"{k},{table[k]}" for k in sorted(table)]
    _write(outdir / "sector_table.csv", "\n".join(lines) + "\n")
    phys = _physical_map(scenario)
    est = {k: v.as_array() for k, v in topo.coordinates.items()}
    sd = sector_displacement(
        {k: phys[k] for k in est}, est, 8, scenario.environment.comm_radius
    )
    return _map_metrics(
        scenario, topo, fn, args,
        extra={
            "robot_sectors": robot_cfg.num_sectors,
            "antenna": args.antenna,
            "sector_displacement_histogram": sd,
        },
    )


def _ensure_anchors(scenario, args):
    if any(n.is_anchor for n in scenario.nodes):
        return scenario
    ratio = args.anchor_ratio or 0.15
    rng = seeded_rng(scenario.rng_seed, "cli.anchors")
    count = max(1, int(round(ratio * len(scenario.nodes))))
    chosen = set(rng.choice(len(scenario.nodes), size=count, replace=False).tolist())
    nodes = tuple(
        dataclasses.replace(n, is_anchor=(i in chosen))
        for i, n in enumerate(scenario.nodes)
    )
    return dataclasses.replace(scenario, nodes=nodes)


def _run_dmmtm(scenario, args, outdir: Path, variant: str) -> dict:
    scenario = _ensure_anchors(scenario, args)
    fn = _reception_fn(scenario, args)
    if args.grid_step is None:
        args.grid_step = fn.R / 10.0
    mobile_plan = None
    if variant == "hs":
        mobile_plan = plan_reference("random_walk", scenario, speed=1.0)
    topo, diag = dmmtm_mod.run_dmmtm(
        scenario, variant, fn=fn, grid_step=args.grid_step, mobile_plan=mobile_plan
    )
    _write(outdir / "map.csv", mltm_mod.map_to_csv(topo))
    return _map_metrics(
        scenario, topo, fn, args,
        extra={
            "variant": variant,
            "anchors": sum(1 for n in scenario.nodes if n.is_anchor),
            "category_history": diag["category_history"],
            "anchor_counts": diag["anchor_counts"],
        },
    )


def _run_detarsk(scenario, args, outdir: Path) -> dict:
    lo, hi = scenario.bounds
    if args.map:
        raw = _map_from_csv(args.map)
        topo = {k: TopologyCoordinate(*v) for k, v in raw.items()}
    else:
        topo = {
            n.id: TopologyCoordinate(n.position.x, n.position.y)
            for n in scenario.nodes
        }
    mid_y = (lo[1] + hi[1]) / 2

    def script(t):
        return (lo[0] + 2.0 + 1.5 * t, mid_y)

    duration = (hi[0] - lo[0] - 4.0) / 1.5
    start = TopologyCoordinate(
        lo[0] + 0.75 * (hi[0] - lo[0]), lo[1] + 0.75 * (hi[1] - lo[1])
    )
    trace = run_search(
        scenario, topo, script, duration=duration, robot_start=start, robot_speed=2.0
    )
    export_trace_csv(trace, outdir / "trace.csv")
    errs = [r[7] for r in trace.rows if not math.isnan(r[7])]
    return {
        "parameters": {"scenario_seed": scenario.rng_seed, "robot_speed": 2.0},
        "captured": trace.captured,
        "capture_time": trace.capture_time,
        "mean_prediction_error": float(np.mean(errs)) if errs else None,
    }


def _run_extremum(scenario, args, outdir: Path) -> dict:
    lo, hi = scenario.bounds
    w, h = hi[0] - lo[0], hi[1] - lo[1]
    source = (lo[0] + 0.63 * w, lo[1] + 0.58 * h)
    field = FieldModel(
        [FieldSource(source, 10.0, (min(w, h) / 3.2) ** 2, removable=False)]
    )
    params = NavigationParams()
    trace = run_seek(
        scenario, field, params,
        duration=6.0 * max(w, h), start=(lo[0] + 0.15 * w, lo[1] + 0.85 * h, 0.0),
    )
    export_seek_csv(trace, outdir / "trace.csv")
    return {
        "parameters": {
            "scenario_seed": scenario.rng_seed,
            "target_level": params.target_level,
            "speed": params.speed,
        },
        "reached_level_at": trace.reached_level_at,
        "arc_to_level": trace.arc_to_level,
    }


_PIPELINES = {
    "mltm": _run_mltm,
    "mmtm": _run_mmtm,
    "dmmtm-ss": lambda s, a, o: _run_dmmtm(s, a, o, "ss"),
    "dmmtm-hs": lambda s, a, o: _run_dmmtm(s, a, o, "hs"),
    "detarsk": _run_detarsk,
    "extremum": _run_extremum,
}


def cmd_run(args) -> int:
    try:
        scenario = _load_scenario(args.scenario, args.seed)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        doc = _PIPELINES[args.pipeline](scenario, args, outdir)
    except TopomapError as err:
        print(f"error[{type(err).__name__}]: {err}", file=sys.stderr)
        return 1
    doc.setdefault("parameters", {})
    doc["parameters"]["pipeline"] = args.pipeline
    doc["parameters"]["scenario_file"] = os.path.basename(args.scenario)
    doc["parameters"]["flags"] = {
        k: v
        for k, v in vars(args).items()
        if k not in ("func", "pipeline", "scenario", "out") and v is not None
    }
    _write(Path(args.out) / "metrics.json", _json_text(doc))
    print(f"wrote {args.out}/metrics.json")
    return 0


def cmd_metrics(args) -> int:
    if args.physical.endswith(".json"):
        with open(args.physical) as fh:
            phys = _physical_map(scenario_from_json(fh.read()))
        with open(args.physical) as fh:
            comm_radius = scenario_from_json(fh.read()).environment.comm_radius
    else:
        phys = _map_from_csv(args.physical)
        comm_radius = args.big_r or 10.0
    est = _map_from_csv(args.estimated)

    missing = sorted(set(est) - set(phys))
    if missing:
        print(f"error: estimated map has unknown node ids: {missing}", file=sys.stderr)
        return EXIT_ID_MISMATCH

    common = {k: phys[k] for k in est}
    mean_err, var_err, cdf = distance_error_stats(common, est, align=args.align)
    doc = {
        "parameters": {
            "physical": os.path.basename(args.physical),
            "estimated": os.path.basename(args.estimated),
            "align": bool(args.align),
            "sectors": args.sectors or 8,
            "comm_radius": comm_radius,
        },
        "distance_error": {
            "mean": mean_err,
            "variance": var_err,
            "cdf": [round(float(v), 6) for v in cdf],
        },
    }
    if len(est) >= 4:
        conn = one_hop_connectivity_error(common, est, comm_radius)
        doc["one_hop_connectivity_error_percent"] = conn.total_percent
        doc["sector_displacement_histogram"] = sector_displacement(
            common, est, args.sectors or 8, comm_radius
        )
        X = np.array([est[k][:2] for k in sorted(est)])
        Y = np.array([common[k][:2] for k in sorted(est)])
        t = procrustes_fit(X, Y)
        doc["alignment"] = {
            "scale": t.scale,
            "rotation": t.rotation.tolist(),
            "shift": t.shift.tolist(),
        }
    text = _json_text(doc)
    if args.out:
        _write(Path(args.out), text)
    else:
        print(text, end="")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topomap",
        description="Topology mapping simulator and applications",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build a scenario file from a template")
    g.add_argument("--template", required=True)
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--anchor-ratio", type=float, default=None)
    g.add_argument("--sectors", type=int, default=None, help="node sector count")
    g.add_argument("--out", "-o", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run a pipeline on a scenario file")
    r.add_argument("pipeline", choices=sorted(_PIPELINES))
    r.add_argument("--scenario", "-s", required=True)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", "-o", required=True)
    r.add_argument("--sectors", type=int, default=None, help="robot sector count")
    r.add_argument("--antenna", choices=("vaa", "vbs", "3d"), default="3d")
    r.add_argument("--anchor-ratio", type=float, default=None)
    r.add_argument("--p0", type=float, default=None)
    r.add_argument("--big-r", type=float, default=None)
    r.add_argument("--little-r", type=float, default=None)
    r.add_argument("--grid-step", type=float, default=None)
    r.add_argument("--np", type=int, default=5, help="required receptions per node")
    r.add_argument("--map", default=None, help="estimated map CSV for the search")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("metrics", help="score an estimated map against truth")
    m.add_argument("--physical", required=True, help="scenario JSON or map CSV")
    m.add_argument("--estimated", required=True, help="map CSV")
    m.add_argument("--align", action="store_true")
    m.add_argument("--sectors", type=int, default=None)
    m.add_argument("--big-r", type=float, default=None, help="comm radius for CSV truth")
    m.add_argument("--out", "-o", default=None)
    m.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
