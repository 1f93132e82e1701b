"""Link budget: log-distance pathloss, Rayleigh fading, shadowing, and SINR.

Two pathloss laws coexist on purpose: the urban-micro LOS/NLOS coefficient
pairs drive the simulator, while a plain distance-power exponent (alpha)
backs the closed-form outage analysis. Both live in ChannelModel so the two
paths never get silently mixed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import Point, UrbanMap, segment_wall_stats, wall_crossings


def noise_power_w(density_dbm_hz: float = -162.0, bandwidth_hz: float = 20e6) -> float:
    """Total noise power in watts from a spectral density (dBm/Hz) and bandwidth."""
    total_dbm = density_dbm_hz + 10.0 * math.log10(bandwidth_hz)
    return 10.0 ** ((total_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class PathlossCoeffs:
    """Log-distance law: slope*log10(d_m) + intercept + freq_slope*log10(f_GHz)."""

    slope: float
    intercept: float
    freq_slope: float

    def __post_init__(self):
        if self.slope <= 0:
            raise ValueError(f"pathloss slope must be > 0, got {self.slope}")

    def loss_db(self, distance_m, freq_ghz: float):
        return (
            self.slope * np.log10(distance_m)
            + self.intercept
            + self.freq_slope * np.log10(freq_ghz)
        )


# Urban-micro street-canyon defaults at 2.1 GHz; overridable via config.
UMI_LOS = PathlossCoeffs(slope=22.0, intercept=28.0, freq_slope=20.0)
UMI_NLOS = PathlossCoeffs(slope=36.7, intercept=22.7, freq_slope=26.0)


@dataclass(frozen=True)
class ChannelModel:
    carrier_ghz: float = 2.1
    los: PathlossCoeffs = UMI_LOS
    nlos: PathlossCoeffs = UMI_NLOS
    alpha_analytic: float = 4.0
    shadow_sigma_db: float = 6.0
    noise_w: float = field(default_factory=noise_power_w)

    def __post_init__(self):
        if self.alpha_analytic <= 2:
            raise ValueError(f"alpha must be > 2, got {self.alpha_analytic}")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow sigma must be >= 0")
        if self.noise_w < 0:
            raise ValueError("noise power must be >= 0")


@dataclass(frozen=True)
class PathlossResult:
    loss_db: float
    los: bool
    wall_loss_db: float


def pathloss_db(tx: Point, rx: Point, urban_map: UrbanMap, model: ChannelModel) -> PathlossResult:
    """Distance law plus wall penetration for one link; LOS means zero crossings."""
    d = tx.distance_to(rx)
    if d == 0.0:
        raise ValueError("pathloss undefined at zero distance")
    walls = wall_crossings(tx, rx, urban_map)
    los = walls.count == 0
    coeffs = model.los if los else model.nlos
    loss = float(coeffs.loss_db(d, model.carrier_ghz)) + walls.total_db
    return PathlossResult(loss_db=loss, los=los, wall_loss_db=walls.total_db)


def pathloss_db_bulk(
    tx_xy: np.ndarray, rx_xy: np.ndarray, urban_map: UrbanMap, model: ChannelModel
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized pathloss for K links: returns (loss_db, los, wall_db) arrays."""
    tx = np.asarray(tx_xy, dtype=float)
    rx = np.asarray(rx_xy, dtype=float)
    d = np.hypot(rx[:, 0] - tx[:, 0], rx[:, 1] - tx[:, 1])
    if np.any(d == 0.0):
        raise ValueError("pathloss undefined at zero distance")
    counts, wall_db = segment_wall_stats(tx, rx, urban_map)
    los = counts == 0
    loss = np.where(
        los,
        model.los.loss_db(d, model.carrier_ghz),
        model.nlos.loss_db(d, model.carrier_ghz),
    ) + wall_db
    return loss, los, wall_db


def draw_fading(rng: np.random.Generator, size=None):
    """Rayleigh amplitude fading as a unit-mean exponential power gain."""
    return rng.exponential(1.0, size)


def draw_shadowing(rng: np.random.Generator, sigma_db: float, size=None):
    """Zero-mean normal shadowing offset in dB."""
    if sigma_db < 0:
        raise ValueError("sigma must be >= 0")
    if sigma_db == 0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, sigma_db, size)


@dataclass(frozen=True)
class LinkSample:
    """One realized link: geometry plus the drawn fading/shadowing state."""

    tx: Point
    rx: Point
    tx_power_w: float
    fading_gain: float = 1.0
    shadow_db: float = 0.0
    wall_loss_db: float = 0.0
    los: bool = True

    def __post_init__(self):
        if self.tx_power_w <= 0:
            raise ValueError("tx power must be > 0")
        if self.fading_gain < 0:
            raise ValueError("fading gain must be >= 0")


@dataclass(frozen=True)
class SinrQuery:
    """A desired link and the interferers arriving at the same receiver."""

    signal: LinkSample
    interferers: tuple[LinkSample, ...] = ()
    noise_w: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "interferers", tuple(self.interferers))
        for i, itf in enumerate(self.interferers):
            if itf.rx != self.signal.rx:
                raise ValueError(f"interferer {i} rx differs from signal rx")


def received_power_w(link: LinkSample, model: ChannelModel) -> float:
    """tx_power * fading / linear(distance law + shadow + walls)."""
    d = link.tx.distance_to(link.rx)
    if d == 0.0:
        raise ValueError("received power undefined at zero distance")
    coeffs = model.los if link.los else model.nlos
    loss_db = float(coeffs.loss_db(d, model.carrier_ghz)) + link.shadow_db + link.wall_loss_db
    return link.tx_power_w * link.fading_gain * 10.0 ** (-loss_db / 10.0)


def sinr(query: SinrQuery, model: ChannelModel) -> float:
    """Instantaneous SINR: signal power over noise plus summed interference.

    Returns math.inf when the denominator is exactly zero (no noise, no
    interferers) rather than raising.
    """
    s = received_power_w(query.signal, model)
    denom = query.noise_w + sum(received_power_w(i, model) for i in query.interferers)
    if denom == 0.0:
        return math.inf
    return s / denom
