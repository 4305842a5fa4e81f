"""Distributed topology mapping with anchor nodes.

Anchors know where they are but not where their antenna sectors point, so
they first estimate their per-sector boresights by exchanging sweeps with
neighboring anchors and averaging the coordinate-derived bearings. Each
anchor then beacons its location and per-sector direction from every sector;
a sensor collects the beacons it hears and grid-searches the product of
distance factors restricted to the reported beams. Localized sensors are
then filtered by how consistently their neighbors' estimates land within
communication range: confident ones are promoted to anchors (propagating
coverage), good ones are kept, and poor ones re-estimate against the grown
anchor set until none remain or the iteration cap is hit.

The hybrid variant prepends a mobile anchor that roams the network
broadcasting compass-true sector directions. With one sector per node and a
full-circle vertical width the beams constrain nothing and the estimator
degenerates to the plain RF distance-factor search.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    NetworkScenario,
    PhysicalPoint,
    SectorConfig,
    SensorNode,
    TopologyCoordinate,
    seeded_rng,
    worker_count,
)
from .errors import InfeasibleEvidenceError, InsufficientAnchorsError
from .likelihood import GridSpec, ReceptionProbabilityFn, SectorRecord, ml_search
from .mltm import TopologyMap, default_reception_fn
from .mmtm import _beam_covers, _link_received
from .trajectory import TrajectoryPlan

__all__ = [
    "AnchorRecord",
    "FiltrationParams",
    "BeaconRecord",
    "estimate_anchor_directions",
    "gather_from_anchors",
    "map_sensor",
    "filtrate_and_promote",
    "run_dmmtm",
]


@dataclass(frozen=True)
class AnchorRecord:
    """An anchor as the network knows it: the coordinate it advertises and
    its estimated per-sector boresights. Generation 0 anchors advertise their
    true deployed location; promoted anchors advertise their estimate."""

    node_id: int
    location: np.ndarray
    sector_azimuths: tuple[float, ...]
    sector_elevations: tuple[float, ...]
    generation: int = 0

    def __post_init__(self):
        if len(self.sector_azimuths) != len(self.sector_elevations):
            raise ValueError("need matching azimuth/elevation lists")


@dataclass(frozen=True)
class FiltrationParams:
    """Thresholds for the neighbor-scattering filter."""

    tau1: float = 0.1
    tau2: float = 0.2
    max_iterations: int = 5

    def __post_init__(self):
        if not (0.0 <= self.tau1 < self.tau2 <= 1.0):
            raise ValueError("need 0 <= tau1 < tau2 <= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class BeaconRecord:
    """One heard beacon: the advertised coordinate and beam direction."""

    location: np.ndarray
    azimuth: float
    elevation: float


def _node_cfg(node: SensorNode) -> SectorConfig:
    # omnidirectional nodes behave like a single full-circle sector
    return node.sector_config or SectorConfig.uniform(1, 2 * math.pi)


def _sweep_hears(
    scenario: NetworkScenario, tx: SensorNode, rx_pos: np.ndarray, rng
) -> list[int]:
    """Sector indices of ``tx`` whose transmission reaches ``rx_pos``."""
    cfg = _node_cfg(tx)
    tx_pos = tx.position.as_array()
    heard = []
    for k in range(cfg.num_sectors):
        if not _beam_covers(
            tx_pos, rx_pos,
            cfg.sector_azimuths[k], cfg.sector_elevations[k],
            cfg.horizontal_beamwidth, cfg.vertical_beamwidth,
        ):
            continue
        ok, _ = _link_received(
            tx_pos, rx_pos, tx.transmit_power, scenario.environment,
            scenario.obstacles, rng,
        )
        if ok:
            heard.append(k)
    return heard


def _best_own_sector(
    scenario: NetworkScenario, me: SensorNode, peer_pos: np.ndarray, rng
) -> int | None:
    """My sector delivering the strongest sweep packet to the peer."""
    cfg = _node_cfg(me)
    my_pos = me.position.as_array()
    best = None
    best_power = -math.inf
    for k in range(cfg.num_sectors):
        if not _beam_covers(
            my_pos, peer_pos,
            cfg.sector_azimuths[k], cfg.sector_elevations[k],
            cfg.horizontal_beamwidth, cfg.vertical_beamwidth,
        ):
            continue
        ok, power = _link_received(
            my_pos, peer_pos, me.transmit_power, scenario.environment,
            scenario.obstacles, rng,
        )
        if ok and power > best_power:
            best_power = power
            best = k
    return best


def _circular_mean(angles) -> float:
    s = sum(math.sin(a) for a in angles)
    c = sum(math.cos(a) for a in angles)
    mean = math.atan2(s, c) % (2 * math.pi)
    return 0.0 if mean >= 2 * math.pi - 1e-12 else mean


def estimate_anchor_directions(
    scenario: NetworkScenario,
    anchor_claims: dict[int, np.ndarray],
    rng: np.random.Generator,
    generation: int = 0,
    peer_records: "dict[int, AnchorRecord] | None" = None,
) -> tuple[dict[int, AnchorRecord], list[int]]:
    """Estimate per-sector boresights for anchors from mutual exchanges.

    For every neighbor an anchor pairs with, the bearing computed from the
    two advertised coordinates initializes the boresight of the sector that
    carried the exchange; the other sectors follow at whole-beamwidth
    offsets. Per-sector azimuths are the circular mean over neighbors.
    Elevations average the neighbor-derived elevations seen through each
    sector, falling back to the anchor-wide mean. Anchors that pair with
    nobody are reported undirected and excluded from beaconing.
    """
    peer_claims = dict(anchor_claims)
    if peer_records:
        for r in peer_records.values():
            peer_claims.setdefault(r.node_id, np.asarray(r.location, dtype=float))

    records: dict[int, AnchorRecord] = {}
    undirected: list[int] = []
    for a_id in sorted(anchor_claims):
        me = scenario.node_by_id(a_id)
        cfg = _node_cfg(me)
        n_s = cfg.num_sectors
        hbw = cfg.horizontal_beamwidth
        neighbor_bearings: list[tuple[int, float, float]] = []  # (own sector, az, el)
        for k_id in sorted(peer_claims):
            if k_id == a_id:
                continue
            peer = scenario.node_by_id(k_id)
            own = _best_own_sector(scenario, me, peer.position.as_array(), rng)
            if own is None:
                continue
            if not _sweep_hears(scenario, peer, me.position.as_array(), rng):
                continue
            delta = peer_claims[k_id] - anchor_claims[a_id]
            az = math.atan2(delta[1], delta[0]) % (2 * math.pi)
            el = math.atan2(delta[2], math.hypot(delta[0], delta[1]))
            neighbor_bearings.append((own, az, el))
        if not neighbor_bearings:
            undirected.append(a_id)
            continue
        azimuths = []
        elevations = []
        all_els = [el for _, _, el in neighbor_bearings]
        for p in range(n_s):
            samples = [
                az + hbw * ((p - h) % n_s) for h, az, _ in neighbor_bearings
            ]
            azimuths.append(_circular_mean(samples))
            through = [el for h, _, el in neighbor_bearings if h == p]
            elevations.append(
                float(np.mean(through)) if through else float(np.mean(all_els))
            )
        records[a_id] = AnchorRecord(
            node_id=a_id,
            location=np.asarray(anchor_claims[a_id], dtype=float),
            sector_azimuths=tuple(azimuths),
            sector_elevations=tuple(elevations),
            generation=generation,
        )
    return records, undirected


def gather_from_anchors(
    scenario: NetworkScenario,
    sensor: SensorNode,
    records: dict[int, AnchorRecord],
    rng: np.random.Generator,
) -> list[BeaconRecord]:
    """Beacons the sensor hears while anchors sweep all their sectors.

    Each heard beacon contributes the anchor's advertised location and the
    advertised direction of the sector that carried it.
    """
    out: list[BeaconRecord] = []
    sensor_pos = sensor.position.as_array()
    for a_id in sorted(records):
        if a_id == sensor.id:
            continue  # a promoted sensor does not hear its own beacons
        rec = records[a_id]
        anchor_node = scenario.node_by_id(a_id)
        for k in _sweep_hears(scenario, anchor_node, sensor_pos, rng):
            out.append(
                BeaconRecord(
                    location=np.asarray(rec.location, dtype=float),
                    azimuth=rec.sector_azimuths[k],
                    elevation=rec.sector_elevations[k],
                )
            )
    return out


def map_sensor(
    beacons: list[BeaconRecord],
    fn: ReceptionProbabilityFn,
    hbw: float,
    vbw: float,
    grid_step: float,
    dimensionality: int = 3,
    grid: GridSpec | None = None,
    node_id: int | None = None,
) -> tuple[TopologyCoordinate, float]:
    """Grid argmax of the distance-factor product inside the reported beams.

    Every heard beacon contributes S(distance) inside the beam window (the
    advertised direction widened to half the beamwidths) and zero outside.
    When the windows conflict outright (bad direction estimates), the search
    falls back to the distance factors alone.
    """
    if not beacons:
        raise InsufficientAnchorsError(f"sensor {node_id} heard no anchors")
    kept = list(beacons)
    while True:
        poses = np.array([b.location for b in kept])
        received = np.ones(len(kept), dtype=bool)
        sectors = [SectorRecord(b.azimuth, b.elevation, hbw, vbw) for b in kept]
        g = grid or GridSpec.around_points(poses, fn.R, grid_step, dimensionality)
        try:
            fld = ml_search(poses, received, fn, g, sectors=sectors, node_id=node_id)
            return fld.argmax_vertex, fld.peak
        except InfeasibleEvidenceError:
            pass
        try:
            fld = ml_search(poses, received, fn, g, node_id=node_id)
            return fld.argmax_vertex, fld.peak
        except InfeasibleEvidenceError:
            if len(kept) == 1:
                raise
            # thin ball intersections can miss every vertex; drop the most
            # isolated beacon and retry
            d = np.linalg.norm(poses[:, None, :] - poses[None, :, :], axis=-1)
            medoid = int(np.argmin(d.sum(axis=1)))
            kept.pop(int(np.argmax(d[medoid])))


def _heard_neighbor_ids(
    scenario: NetworkScenario, listener: SensorNode, speaker_ids, rng
) -> list[int]:
    pos = listener.position.as_array()
    heard = []
    for t_id in speaker_ids:
        if t_id == listener.id:
            continue
        if _sweep_hears(scenario, scenario.node_by_id(t_id), pos, rng):
            heard.append(t_id)
    return heard


def filtrate_and_promote(
    scenario: NetworkScenario,
    estimates: dict[int, TopologyCoordinate],
    known_coords: dict[int, np.ndarray],
    params: FiltrationParams,
    rng: np.random.Generator,
) -> tuple[list[int], list[int], list[int]]:
    """Classify localized sensors by the error of neighbor scattering.

    For each sensor, the scattering ratio is the fraction of heard
    coordinate-bearing neighbors whose coordinates land farther than the
    communication radius from this sensor's estimate. At most tau1 makes a
    new-anchor candidate, at most tau2 a keeper, beyond that a re-estimate.
    """
    rc = scenario.environment.comm_radius
    speaker_ids = sorted(set(estimates) | set(known_coords))
    new_anchors, good, bad = [], [], []
    for s_id in sorted(estimates):
        me = scenario.node_by_id(s_id)
        my_est = estimates[s_id].as_array()
        heard = _heard_neighbor_ids(scenario, me, speaker_ids, rng)
        scattered = 0
        for t_id in heard:
            coord = (
                known_coords[t_id]
                if t_id in known_coords
                else estimates[t_id].as_array()
            )
            if np.linalg.norm(coord - my_est) > rc:
                scattered += 1
        ratio = scattered / len(heard) if heard else 0.0
        if ratio <= params.tau1:
            new_anchors.append(s_id)
        elif ratio <= params.tau2:
            good.append(s_id)
        else:
            bad.append(s_id)
    return new_anchors, good, bad


def _gather_mobile(
    scenario: NetworkScenario,
    sensors,
    plan: TrajectoryPlan,
    robot_cfg: SectorConfig,
    robot_tx_power: float,
    rng,
) -> dict[int, list[BeaconRecord]]:
    """Mobile-anchor pass: at each broadcast point the sensor keeps the best
    heard sweep sector; the mobile anchor knows its directions exactly."""
    out: dict[int, list[BeaconRecord]] = {s.id: [] for s in sensors}
    for pose in plan.waypoints:
        robot_pos = pose.position.as_array()
        for s in sensors:
            best = None
            best_power = -math.inf
            for k in range(robot_cfg.num_sectors):
                if not _beam_covers(
                    robot_pos, s.position.as_array(),
                    robot_cfg.sector_azimuths[k], robot_cfg.sector_elevations[k],
                    robot_cfg.horizontal_beamwidth, robot_cfg.vertical_beamwidth,
                ):
                    continue
                ok, power = _link_received(
                    robot_pos, s.position.as_array(), robot_tx_power,
                    scenario.environment, scenario.obstacles, rng,
                )
                if ok and power > best_power:
                    best_power = power
                    best = k
            if best is not None:
                out[s.id].append(
                    BeaconRecord(
                        location=robot_pos,
                        azimuth=robot_cfg.sector_azimuths[best],
                        elevation=robot_cfg.sector_elevations[best],
                    )
                )
    return out


def run_dmmtm(
    scenario: NetworkScenario,
    variant: str = "ss",
    fn: ReceptionProbabilityFn | None = None,
    params: FiltrationParams | None = None,
    grid_step: float | None = None,
    mobile_plan: TrajectoryPlan | None = None,
    mobile_cfg: SectorConfig | None = None,
    mobile_tx_power: float = 20.0,
    workers: int | None = None,
) -> tuple[TopologyMap, dict]:
    """Run the distributed mapping pipeline.

    ``variant`` "ss" uses static anchors only; "hs" prepends a mobile-anchor
    pass over ``mobile_plan``. Returns the map plus diagnostics (per-round
    categories, anchor growth, undirected anchors).
    """
    if variant not in ("ss", "hs"):
        raise ValueError("variant must be 'ss' or 'hs'")
    if fn is None:
        fn = default_reception_fn(scenario.environment)
    if params is None:
        params = FiltrationParams()
    if grid_step is None:
        grid_step = fn.R / 10.0
    rng = seeded_rng(scenario.rng_seed, "dmmtm")

    anchors = [n for n in scenario.nodes if n.is_anchor]
    sensors = [n for n in scenario.nodes if not n.is_anchor]
    if not anchors:
        raise InsufficientAnchorsError("scenario has no anchor nodes")
    dims = 2 if scenario.is_planar else 3

    sample = _node_cfg(scenario.nodes[0])
    hbw = sample.horizontal_beamwidth
    vbw = sample.vertical_beamwidth

    claims = {a.id: a.position.as_array() for a in anchors}
    records, undirected = estimate_anchor_directions(scenario, claims, rng)

    beacons: dict[int, list[BeaconRecord]] = {s.id: [] for s in sensors}
    if variant == "hs":
        if mobile_plan is None:
            raise ValueError("hybrid variant needs a mobile anchor plan")
        if mobile_cfg is None:
            mobile_cfg = SectorConfig.uniform(8, math.pi / 2)
        mobile = _gather_mobile(scenario, sensors, mobile_plan, mobile_cfg, mobile_tx_power, rng)
        for s_id, recs in mobile.items():
            beacons[s_id].extend(recs)
    for s in sensors:
        beacons[s.id].extend(gather_from_anchors(scenario, s, records, rng))

    estimates: dict[int, TopologyCoordinate] = {}
    peaks: dict[int, float] = {}
    used_beacons: dict[int, tuple[BeaconRecord, ...]] = {}

    def map_ids(ids):
        jobs = [i for i in ids if beacons[i]]

        def run(s_id):
            evidence = tuple(beacons[s_id])
            coord, peak = map_sensor(
                evidence, fn, hbw, vbw, grid_step, dims, node_id=s_id
            )
            return s_id, evidence, coord, peak

        n_workers = worker_count(workers)
        if n_workers == 1 or len(jobs) <= 1:
            results = [run(i) for i in jobs]
        else:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                results = list(pool.map(run, jobs))
        for s_id, evidence, coord, peak in results:
            estimates[s_id] = coord
            peaks[s_id] = peak
            used_beacons[s_id] = evidence

    map_ids([s.id for s in sensors])

    history = []
    anchor_counts = [len(records)]
    for _ in range(params.max_iterations):
        known = {a_id: records[a_id].location for a_id in records}
        known.update({a.id: a.position.as_array() for a in anchors})
        ca, cg, cb = filtrate_and_promote(scenario, estimates, known, params, rng)
        history.append({"new_anchors": ca, "good": cg, "bad": cb})

        fresh_ids = [i for i in ca if i not in records]
        if fresh_ids:
            fresh_claims = {i: estimates[i].as_array() for i in fresh_ids}
            gen = max((r.generation for r in records.values()), default=0) + 1
            fresh_records, _ = estimate_anchor_directions(
                scenario, fresh_claims, rng, generation=gen, peer_records=records
            )
            for s in sensors:
                beacons[s.id].extend(gather_from_anchors(scenario, s, fresh_records, rng))
            records.update(fresh_records)
        anchor_counts.append(len(records))

        if not cb:
            break
        retry = set(cb) | {s.id for s in sensors if s.id not in estimates}
        map_ids(sorted(retry))

    coordinates = dict(estimates)
    for a in anchors:
        coordinates[a.id] = TopologyCoordinate(*a.position.as_array())
        peaks[a.id] = 1.0
    unlocatable = tuple(sorted(s.id for s in sensors if s.id not in estimates))
    lo = np.array([n.position.as_array() for n in scenario.nodes]).min(axis=0) - fn.R
    hi = np.array([n.position.as_array() for n in scenario.nodes]).max(axis=0) + fn.R
    report_grid = GridSpec.from_region(lo, hi, grid_step, dims)
    topo = TopologyMap(coordinates, peaks, report_grid, unlocatable)
    diagnostics = {
        "category_history": history,
        "anchor_counts": anchor_counts,
        "undirected_anchors": undirected,
        "iterations": len(history),
        "beacons": used_beacons,
    }
    return topo, diagnostics
