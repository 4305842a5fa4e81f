"""Centralized millimeter-wave topology mapping.

The survey robot carries a sectored antenna and runs a sector-sweep exchange
at every dwell: it broadcasts an initiator sweep from each of its sectors,
each node picks the sector it heard best and echoes that sector id back from
all of its own sectors, and the robot (listening wide) records both the
reception and the echoed sector id. Estimation then combines the distance
factors with a 0/1 beam-window factor per reception: the node must lie inside
the reported sector's beam, widened by one grid step of angular slack.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    MMWAVE_TX_POWER_DBM,
    NetworkScenario,
    SectorConfig,
    SensorNode,
    seeded_rng,
    wrap_angle,
    worker_count,
)
from .errors import InfeasibleEvidenceError
from .likelihood import (
    GridSpec,
    ReceptionProbabilityFn,
    SectorRecord,
    beam_window_margin,
    ml_search,
)
from .mltm import PacketReceptionMatrix, TopologyMap, _prune_outlier_receptions
from .propagation import mmwave_received_power
from .trajectory import (
    PlanarSectorAntenna,
    TrajectoryPlan,
    VerticalArrayAntenna,
    VerticalSweepAntenna,
)

__all__ = [
    "SectorIdMatrix",
    "robot_sector_directions",
    "sls_exchange",
    "gather_mm_evidence",
    "estimate_mm_map",
    "best_sector_table",
]

DEFAULT_ROBOT_SECTORS = 16


@dataclass(frozen=True)
class SectorIdMatrix:
    """Echoed best-sector ids, aligned with a packet reception matrix.

    Entry (i, k) is 0 when node i sent nothing at dwell k, otherwise the
    robot sector id (1-based) the node heard best.
    """

    sector_ids: np.ndarray  # (N, n) int
    node_ids: tuple[int, ...]

    def __post_init__(self):
        if self.sector_ids.shape[0] != len(self.node_ids):
            raise ValueError("one row per node id required")
        if (self.sector_ids < 0).any():
            raise ValueError("sector ids must be >= 0")


def robot_sector_directions(
    robot_cfg: SectorConfig, setup
) -> dict[int, tuple[float, float, float]]:
    """Map robot sector id -> (azimuth, elevation, vertical width).

    Stacked arrays contribute one full azimuth ring per elevation; a vertical
    sweep widens every sector's vertical window to the swept band; the flat
    setup pins every sector to zero elevation.
    """
    n = robot_cfg.num_sectors
    table: dict[int, tuple[float, float, float]] = {}
    if isinstance(setup, VerticalArrayAntenna):
        for a, elev in enumerate(setup.elevations):
            for k in range(n):
                table[a * n + k + 1] = (
                    robot_cfg.sector_azimuths[k], elev, robot_cfg.vertical_beamwidth
                )
    elif isinstance(setup, VerticalSweepAntenna):
        mid = (setup.sweep_min + setup.sweep_max) / 2.0
        span = (setup.sweep_max - setup.sweep_min) + robot_cfg.vertical_beamwidth
        for k in range(n):
            table[k + 1] = (robot_cfg.sector_azimuths[k], mid, span)
    elif isinstance(setup, PlanarSectorAntenna):
        for k in range(n):
            table[k + 1] = (
                robot_cfg.sector_azimuths[k], 0.0, robot_cfg.vertical_beamwidth
            )
    else:
        raise ValueError(f"antenna setup {setup!r} has no sector table")
    return table


def _beam_covers(
    origin: np.ndarray, target: np.ndarray,
    azimuth: float, elevation: float, hbw: float, vbw: float,
) -> bool:
    d = target - origin
    az = math.atan2(d[1], d[0])
    el = math.atan2(d[2], math.hypot(d[0], d[1]))
    off = (az - azimuth) % (2 * math.pi)
    in_az = hbw >= 2 * math.pi - 1e-12 or off < hbw / 2 or off >= 2 * math.pi - hbw / 2
    in_el = vbw >= 2 * math.pi - 1e-12 or abs(wrap_angle(el - elevation)) <= vbw / 2
    return bool(in_az and in_el)


def _link_received(tx_pos, rx_pos, tx_power, env, obstacles, rng) -> tuple[bool, float]:
    s = mmwave_received_power(tx_pos, rx_pos, tx_power, env, obstacles, rng)
    ok = s.received and s.distance <= env.comm_radius
    return ok, s.rx_power


def sls_exchange(
    robot_pose,
    robot_cfg: SectorConfig,
    setup,
    node: SensorNode,
    env,
    obstacles=(),
    rng: np.random.Generator | None = None,
    robot_tx_power: float = MMWAVE_TX_POWER_DBM,
) -> int | None:
    """One sector-sweep exchange between the robot and a node.

    The robot sweeps an initiator packet through every sector; the node
    (listening wide) keeps the sector delivered with the highest power and
    echoes it from all of its own sectors; the robot (listening wide) hears
    the echo when any node sector covers it and the link passes. Returns the
    echoed robot sector id, or None for no reception. With a vertical-sweep
    setup a kept packet additionally needs the sweep-alignment draw to pass.
    """
    robot_pos = (
        robot_pose.position.as_array() if hasattr(robot_pose, "position")
        else np.asarray(robot_pose, dtype=float)
    )
    node_pos = node.position.as_array()
    table = robot_sector_directions(robot_cfg, setup)

    best_id = None
    best_power = -math.inf
    for sector_id in sorted(table):
        az, el, vbw = table[sector_id]
        if not _beam_covers(robot_pos, node_pos, az, el, robot_cfg.horizontal_beamwidth, vbw):
            continue
        ok, power = _link_received(robot_pos, node_pos, robot_tx_power, env, obstacles, rng)
        if ok and power > best_power:
            best_power = power
            best_id = sector_id
    if best_id is None:
        return None

    cfg = node.sector_config
    heard_back = False
    if cfg is None:
        heard_back, _ = _link_received(node_pos, robot_pos, node.transmit_power, env, obstacles, rng)
    else:
        for k in range(cfg.num_sectors):
            if not _beam_covers(
                node_pos, robot_pos,
                cfg.sector_azimuths[k], cfg.sector_elevations[k],
                cfg.horizontal_beamwidth, cfg.vertical_beamwidth,
            ):
                continue
            ok, _ = _link_received(node_pos, robot_pos, node.transmit_power, env, obstacles, rng)
            if ok:
                heard_back = True
                break
    if not heard_back:
        return None

    if isinstance(setup, VerticalSweepAntenna):
        if rng is None or not (rng.uniform() > setup.keep_constant):
            return None
    return best_id


def gather_mm_evidence(
    scenario: NetworkScenario,
    planner,
    setup,
    robot_cfg: SectorConfig | None = None,
    rng: np.random.Generator | None = None,
    robot_tx_power: float = MMWAVE_TX_POWER_DBM,
) -> tuple[PacketReceptionMatrix, SectorIdMatrix]:
    """Drive a planner, running the sector-sweep exchange at every dwell.

    Fills the reception matrix and the sector-id matrix coherently: ids are
    nonzero exactly where receptions are 1.
    """
    if robot_cfg is None:
        robot_cfg = SectorConfig.uniform(DEFAULT_ROBOT_SECTORS, math.pi / 4)
    if rng is None:
        rng = seeded_rng(scenario.rng_seed, "gather")
    if isinstance(planner, TrajectoryPlan):
        planner = planner.as_planner()

    nodes = scenario.nodes
    node_pos = scenario.positions()
    reach = scenario.environment.comm_radius
    poses = []
    m_cols = []
    a_cols = []
    pose = planner.start()
    while pose is not None:
        m_col = np.zeros(len(nodes), dtype=np.uint8)
        a_col = np.zeros(len(nodes), dtype=np.int64)
        rx = pose.position.as_array()
        in_range = np.nonzero(np.linalg.norm(node_pos - rx, axis=1) <= reach)[0]
        for i in in_range:
            sector = sls_exchange(
                pose, robot_cfg, setup, nodes[i], scenario.environment,
                scenario.obstacles, rng, robot_tx_power,
            )
            if sector is not None:
                m_col[i] = 1
                a_col[i] = sector
        poses.append(pose)
        m_cols.append(m_col)
        a_cols.append(a_col)
        pose = planner.advance(set(np.nonzero(m_col)[0].tolist()))

    receptions = np.stack(m_cols, axis=1) if m_cols else np.zeros((len(nodes), 0), np.uint8)
    sector_ids = np.stack(a_cols, axis=1) if a_cols else np.zeros((len(nodes), 0), np.int64)
    node_ids = tuple(n.id for n in nodes)
    return (
        PacketReceptionMatrix(receptions, tuple(poses), node_ids),
        SectorIdMatrix(sector_ids, node_ids),
    )


def estimate_mm_map(
    m: PacketReceptionMatrix,
    a: SectorIdMatrix,
    fn: ReceptionProbabilityFn,
    robot_cfg: SectorConfig,
    setup,
    grid: GridSpec | None = None,
    grid_step: float | None = None,
    workers: int | None = None,
) -> TopologyMap:
    """Per-node grid search over distance and beam-window factors in 3D."""
    if m.node_ids != a.node_ids or m.receptions.shape != a.sector_ids.shape:
        raise ValueError("reception and sector matrices are not aligned")
    if ((m.receptions == 1) != (a.sector_ids != 0)).any():
        raise ValueError("sector ids must be nonzero exactly where receptions are 1")
    poses = m.pose_array()
    if grid_step is None:
        grid_step = grid.step if grid is not None else fn.R / 10.0
    margin = beam_window_margin(grid_step, fn.R)
    table = robot_sector_directions(robot_cfg, setup)
    hbw = robot_cfg.horizontal_beamwidth

    def sector_records(row_ids) -> list[SectorRecord | None]:
        recs: list[SectorRecord | None] = []
        for sid in row_ids:
            if sid == 0:
                recs.append(None)
            else:
                az, el, vbw = table[int(sid)]
                recs.append(SectorRecord(az, el, hbw, vbw))
        return recs

    coordinates = {}
    peaks = {}
    unlocatable = []
    jobs = []
    for i, node_id in enumerate(m.node_ids):
        row = m.receptions[i]
        if not row.any():
            unlocatable.append(node_id)
        else:
            jobs.append((node_id, row.copy(), a.sector_ids[i].copy()))

    def run(job):
        node_id, row, ids = job
        while True:
            rec_mask = row.astype(bool)
            g = grid or GridSpec.around_points(poses[rec_mask], fn.R, grid_step, 3)
            try:
                field = ml_search(
                    poses, rec_mask, fn, g,
                    sectors=sector_records(ids), window_margin=margin, node_id=node_id,
                )
                return node_id, field
            except InfeasibleEvidenceError:
                if int(row.sum()) <= 1:
                    # directional windows can zero even a single reception on
                    # a coarse grid; retreat to the distance factor alone
                    field = ml_search(poses, rec_mask, fn, g, node_id=node_id)
                    return node_id, field
                row = _prune_outlier_receptions(row, poses)
                ids = np.where(row, ids, 0)

    n_workers = worker_count(workers)
    if n_workers == 1 or len(jobs) <= 1:
        results = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run, jobs))
    for node_id, field in results:
        coordinates[node_id] = field.argmax_vertex
        peaks[node_id] = field.peak

    if grid is None:
        lo = poses.min(axis=0) - fn.R
        hi = poses.max(axis=0) + fn.R
        report_grid = GridSpec.from_region(lo, hi, grid_step, 3)
    else:
        report_grid = grid
    return TopologyMap(coordinates, peaks, report_grid, tuple(unlocatable))


def best_sector_table(m: PacketReceptionMatrix, a: SectorIdMatrix) -> dict[int, int]:
    """Most frequently echoed robot sector per node (0 when never heard)."""
    out = {}
    for i, node_id in enumerate(a.node_ids):
        ids = a.sector_ids[i][a.sector_ids[i] != 0]
        out[node_id] = int(Counter(ids.tolist()).most_common(1)[0][0]) if ids.size else 0
    return out
