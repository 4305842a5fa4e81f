"""Steer a unicycle robot onto a field level using network readings.

Sensors sample a two-source radial field. The robot forms power-weighted
estimates of the field at its position, applies the bang-bang turn law on
the level error, reaches the desired level around the first source, removes
it, waits out the residue, and repeats for the second source. Writes the
trace and a field snapshot for plotting.

Run:  python3 demos/demo_level_seeking.py
"""

from pathlib import Path

from topomap.core import EnvironmentProfile, ScenarioSpec, generate_scenario
from topomap.extremum import (
    FieldModel,
    FieldSource,
    NavigationParams,
    export_field_csv,
    export_seek_csv,
    run_seek,
)

HERE = Path(__file__).parent


def main():
    env = EnvironmentProfile("rf_log_shadow", 2.7, 2.0, -90.0, comm_radius=10.0)
    scenario = generate_scenario(
        ScenarioSpec("random", 700, seed=33, size=(30.0, 30.0),
                     environment=env, min_spacing=0.8)
    )
    field = FieldModel(
        [
            FieldSource((21.0, 20.0), 10.0, 100.0),
            FieldSource((8.0, 9.0), 10.0, 150.0),
        ],
        fade_time=10.0,
    )
    params = NavigationParams(speed=1.0, omega_max=1.0, target_level=9.0)
    trace = run_seek(scenario, field, params, duration=250.0, start=(5.0, 26.0, 0.0))

    print(f"reached the level first at t={trace.reached_level_at}")
    for t, idx in trace.removals:
        print(f"removed source {idx} at t={t}")
    export_seek_csv(trace, HERE / "level_seek_trace.csv")
    export_field_csv(field, scenario.bounds, HERE / "level_seek_field.csv", step=1.0)
    print("wrote level_seek_trace.csv and level_seek_field.csv")


if __name__ == "__main__":
    main()
