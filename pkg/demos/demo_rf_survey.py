"""Survey a circular deployment with the serpentine robot and map it.

Builds a circular field of nodes with three obstacles, drives the online
serpentine planner until every node has been heard five times, estimates
every node by likelihood grid search, and scores the map with the one-hop
connectivity error and distance statistics. Writes the map and trajectory
as CSV next to this script.

Run:  python3 demos/demo_rf_survey.py  (takes ~1 minute)
"""

from pathlib import Path

from topomap.core import ScenarioSpec, generate_scenario
from topomap.metrics import distance_error_stats, one_hop_connectivity_error
from topomap.mltm import default_reception_fn, estimate_map, gather_evidence, map_to_csv
from topomap.trajectory import export_trajectory_csv, plan_s_shape

HERE = Path(__file__).parent


def main():
    scenario = generate_scenario(ScenarioSpec("circular", 300, seed=7))
    fn = default_reception_fn(scenario.environment)
    print(f"{len(scenario.nodes)} nodes, {len(scenario.obstacles)} obstacles, "
          f"reception curve p0={fn.p0} r={fn.r:.1f} R={fn.R:.1f}")

    planner = plan_s_shape(scenario, packets_required=5)
    matrix = gather_evidence(scenario, planner)
    print(f"survey finished after {len(matrix.robot_poses)} dwells")

    topo = estimate_map(matrix, fn, grid_step=0.5, workers=4)
    print(f"located {len(topo.coordinates)} nodes, {len(topo.unlocatable)} unlocatable")

    phys = {n.id: n.position.as_array() for n in scenario.nodes}
    est = {k: v.as_array() for k, v in topo.coordinates.items()}
    conn = one_hop_connectivity_error(
        {k: phys[k] for k in est}, est, scenario.environment.comm_radius
    )
    mean_err, var_err, _ = distance_error_stats({k: phys[k] for k in est}, est)
    print(f"one-hop connectivity error: {conn.total_percent:.1f}%")
    print(f"distance error: mean {mean_err:.2f} m, variance {var_err:.2f}")

    (HERE / "rf_survey_map.csv").write_text(map_to_csv(topo))
    export_trajectory_csv(matrix.robot_poses, HERE / "rf_survey_trajectory.csv")
    print("wrote rf_survey_map.csv and rf_survey_trajectory.csv")


if __name__ == "__main__":
    main()
