"""Link-level models: given a transmitter, a receiver location, and an
environment, decide whether a packet gets through.

Two physical channels are provided. The RF channel is log-distance path loss
with log-normal shadowing; obstacles in the line of sight attenuate the
signal in proportion to the traversed thickness. The millimeter-wave channel
is the close-in free-space-reference model at the carrier frequency;
obstacles block those links outright. A third, idealized channel draws
receptions directly from a reception-probability curve, which is what the
estimators assume; it is useful for worked examples and model-matched tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    EnvironmentProfile,
    NetworkScenario,
    SectorConfig,
    SensorNode,
    azimuth_elevation,
    obstacle_traversals,
    segment_crosses_box,
    wrap_angle,
)

__all__ = [
    "LinkSample",
    "rf_received_power",
    "mmwave_received_power",
    "free_space_reference_loss",
    "sector_gain_applies",
    "covering_sectors",
    "RfChannel",
    "CiChannel",
    "ProbabilityChannel",
    "make_channel",
    "field_noise_sigma",
    "field_measurement",
    "measure_field",
]

SPEED_OF_LIGHT = 299_792_458.0
LOG10_E = math.log10(math.e)


@dataclass(frozen=True)
class LinkSample:
    """Outcome of one link evaluation."""

    tx_power: float  # dBm
    rx_power: float  # dBm
    distance: float  # meters
    blocked: bool
    received: bool
    clamped: bool = False  # distance was below the model's reference distance


def rf_received_power(
    tx: np.ndarray,
    rx: np.ndarray,
    tx_power: float,
    env: EnvironmentProfile,
    obstacles=(),
    rng: np.random.Generator | None = None,
) -> LinkSample:
    """Evaluate one RF link.

    rx_power = tx_power - 10*eps*log10(d) - sum_k 10*alpha_k*d_o_k*log10(e)
               + X_sigma,
    where the sum runs over obstacles intersected by the line of sight with
    traversed thickness d_o, and X_sigma is a fresh zero-mean normal draw.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    d = float(np.linalg.norm(rx - tx))
    if d <= 0.0:
        raise ValueError("rf link distance must be positive")
    loss_ob = sum(
        10.0 * ob.absorption_coefficient * thickness * LOG10_E
        for ob, thickness in obstacle_traversals(tx, rx, obstacles)
    )
    shadow = 0.0
    if rng is not None:
        shadow = float(rng.normal(0.0, env.shadow_sigma))
    rx_power = tx_power - 10.0 * env.path_loss_exponent * math.log10(d) - loss_ob + shadow
    return LinkSample(
        tx_power=tx_power,
        rx_power=rx_power,
        distance=d,
        blocked=False,
        received=rx_power >= env.receive_sensitivity,
    )


def free_space_reference_loss(frequency: float, d0: float = 1.0) -> float:
    """Free-space path loss at the reference distance, dB."""
    return 20.0 * math.log10(4.0 * math.pi * d0 * frequency / SPEED_OF_LIGHT)


def power_range(env: EnvironmentProfile, tx_power: float) -> float:
    """Distance where the shadowing-free received power hits sensitivity,
    capped at the protocol communication radius."""
    margin = tx_power - env.receive_sensitivity
    if env.model_kind == "mmwave_ci":
        margin -= free_space_reference_loss(env.frequency)
    if margin <= 0:
        return min(1.0, env.comm_radius)
    d = 10.0 ** (margin / (10.0 * env.path_loss_exponent))
    return min(d, env.comm_radius)


def mmwave_received_power(
    tx: np.ndarray,
    rx: np.ndarray,
    tx_power: float,
    env: EnvironmentProfile,
    obstacles=(),
    rng: np.random.Generator | None = None,
) -> LinkSample:
    """Evaluate one millimeter-wave link under the close-in reference model.

    PL(f, d) = FSPL(f, 1m) + 10*eps*log10(d) + X_sigma for d >= 1 m; closer
    distances are clamped to 1 m and flagged. A link crossing any opaque
    obstacle is blocked regardless of power.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    d = float(np.linalg.norm(rx - tx))
    if d <= 0.0:
        raise ValueError("mmwave link distance must be positive")
    clamped = d < 1.0
    d_eff = max(d, 1.0)
    shadow = 0.0
    if rng is not None:
        shadow = float(rng.normal(0.0, env.shadow_sigma))
    pl = (
        free_space_reference_loss(env.frequency)
        + 10.0 * env.path_loss_exponent * math.log10(d_eff)
        + shadow
    )
    rx_power = tx_power - pl
    blocked = any(
        ob.mmwave_opaque and segment_crosses_box(tx, rx, ob) for ob in obstacles
    )
    return LinkSample(
        tx_power=tx_power,
        rx_power=rx_power,
        distance=d,
        blocked=blocked,
        received=(not blocked) and rx_power >= env.receive_sensitivity,
        clamped=clamped,
    )


def sector_gain_applies(
    tx_position: np.ndarray,
    sector: int,
    rx: np.ndarray,
    cfg: SectorConfig,
) -> bool:
    """Whether a sector's beam covers the receiver direction.

    Azimuth membership is half-open (the upper edge belongs to the next
    sector), so equal-width sectors with matching elevations partition the
    azimuth plane: every direction belongs to exactly one sector.
    """
    if sector >= cfg.num_sectors:
        raise IndexError(f"sector {sector} out of range")
    az, el = azimuth_elevation(np.asarray(tx_position), np.asarray(rx))
    half_h = cfg.horizontal_beamwidth / 2.0
    offset = (az - cfg.sector_azimuths[sector]) % (2.0 * math.pi)
    in_azimuth = offset < half_h or offset >= 2.0 * math.pi - half_h
    half_v = cfg.vertical_beamwidth / 2.0
    in_elevation = abs(wrap_angle(el - cfg.sector_elevations[sector])) <= half_v
    return bool(in_azimuth and in_elevation)


def covering_sectors(tx_position: np.ndarray, rx: np.ndarray, cfg: SectorConfig) -> list[int]:
    """All sector indices whose beam covers the receiver direction."""
    return [
        s for s in range(cfg.num_sectors) if sector_gain_applies(tx_position, s, rx, cfg)
    ]


# --------------------------------------------------------------------------
# channels: a uniform "does this packet arrive" interface over the models


def _cap_range(sample: LinkSample, comm_radius: float) -> LinkSample:
    # The radio's protocol range caps a link even when a lucky shadowing draw
    # leaves the power above sensitivity.
    if sample.received and sample.distance > comm_radius:
        return LinkSample(
            sample.tx_power, sample.rx_power, sample.distance,
            sample.blocked, False, sample.clamped,
        )
    return sample


class RfChannel:
    """Physical RF channel bound to an environment and its obstacles.

    Reception requires the power threshold and the link to be within the
    environment's communication radius.
    """

    def __init__(self, env: EnvironmentProfile, obstacles=()):
        self.env = env
        self.obstacles = tuple(obstacles)
        self.max_range = env.comm_radius

    def sample(self, node: SensorNode, rx_pos: np.ndarray, rng) -> LinkSample:
        s = rf_received_power(
            node.position.as_array(), rx_pos, node.transmit_power, self.env,
            self.obstacles, rng,
        )
        return _cap_range(s, self.env.comm_radius)


class CiChannel:
    """Physical millimeter-wave channel (close-in reference model)."""

    def __init__(self, env: EnvironmentProfile, obstacles=()):
        self.env = env
        self.obstacles = tuple(obstacles)
        self.max_range = env.comm_radius

    def sample(self, node: SensorNode, rx_pos: np.ndarray, rng) -> LinkSample:
        s = mmwave_received_power(
            node.position.as_array(), rx_pos, node.transmit_power, self.env,
            self.obstacles, rng,
        )
        return _cap_range(s, self.env.comm_radius)


class ProbabilityChannel:
    """Idealized channel: reception is a Bernoulli draw on a distance-to-
    probability curve. This is the reception model the estimators assume.

    ``max_range`` (taken from the curve's cutoff when available) lets
    simulation loops skip nodes that cannot possibly be heard.
    """

    def __init__(self, prob_of_distance, max_range: float | None = None):
        self.prob_of_distance = prob_of_distance
        if max_range is None:
            max_range = getattr(prob_of_distance, "R", None)
        self.max_range = max_range

    def sample(self, node: SensorNode, rx_pos: np.ndarray, rng) -> LinkSample:
        d = float(np.linalg.norm(node.position.as_array() - np.asarray(rx_pos, dtype=float)))
        p = float(self.prob_of_distance(d))
        received = bool(rng.uniform() < p) if p > 0.0 else False
        return LinkSample(
            tx_power=node.transmit_power,
            rx_power=math.nan,
            distance=d,
            blocked=False,
            received=received,
        )


def make_channel(scenario: NetworkScenario):
    """The physical channel matching the scenario's environment."""
    if scenario.environment.model_kind == "mmwave_ci":
        return CiChannel(scenario.environment, scenario.obstacles)
    return RfChannel(scenario.environment, scenario.obstacles)


# --------------------------------------------------------------------------
# field sensors (extremum-seeking scenarios)


def field_noise_sigma(field, positions: np.ndarray, snr_db: float) -> float:
    """Noise standard deviation that realizes the requested sensor SNR.

    The SNR is defined against the mean signal power of the field sampled at
    the node positions: 10*log10(mean(D^2) / sigma^2) = snr_db.
    """
    if math.isinf(snr_db):
        return 0.0
    values = np.asarray([field.value(p[0], p[1]) for p in np.asarray(positions)])
    mean_power = float(np.mean(values**2))
    return math.sqrt(mean_power * 10.0 ** (-snr_db / 10.0))


def field_measurement(
    node: SensorNode,
    field,
    snr_db: float,
    rng: np.random.Generator | None,
    noise_sigma: float | None = None,
) -> float:
    """One sensor reading: the field at the node plus a normal offset.

    ``noise_sigma`` may be precomputed for a node ensemble via
    :func:`field_noise_sigma`; with an infinite SNR the reading is exact.
    """
    value = field.value(node.position.x, node.position.y)
    if math.isinf(snr_db) or rng is None:
        return float(value)
    if noise_sigma is None:
        noise_sigma = field_noise_sigma(field, [node.position.as_array()], snr_db)
    return float(value + rng.normal(0.0, noise_sigma))


def measure_field(
    scenario: NetworkScenario, field, snr_db: float, rng: np.random.Generator
) -> dict[int, float]:
    """Readings for every node, with the noise level set by the ensemble SNR."""
    sigma = field_noise_sigma(field, scenario.positions(), snr_db)
    out = {}
    for n in scenario.nodes:
        offset = 0.0 if sigma == 0.0 else float(rng.normal(0.0, sigma))
        out[n.id] = float(field.value(n.position.x, n.position.y) + offset)
    return out
