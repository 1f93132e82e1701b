"""Scenario configuration: sectioned key-value files with env-var overrides.

Shipped defaults follow the experiment's parameter table (20 MHz at 2.1 GHz,
-6 dB threshold, 40 W sites, 0.1 W device power, 6 dB shadowing). Any key can
be overridden by an environment variable D2DRELAY_<SECTION>__<KEY>.
"""
from __future__ import annotations

import configparser
import os
from typing import Mapping

from .channel import ChannelModel, PathlossCoeffs, noise_power_w
from .env import ManhattanSpec
from .sim import Scenario, SweepSpec

ENV_PREFIX = "D2DRELAY_"

DEFAULT_CONFIG = """
[map]
source = manhattan
file =
width_m = 920
height_m = 550
block_m = 45
street_m = 30
fill = 1.0
jitter_m = 15
wall_loss_db = 10
map_seed = 1

[bs]
rings = 1
isd_m = 500
power_w = 40.0
cc_ue_power_w = 0.2

[channel]
carrier_ghz = 2.1
los_slope = 22.0
los_intercept = 28.0
los_freq_slope = 20.0
nlos_slope = 36.7
nlos_intercept = 22.7
nlos_freq_slope = 26.0
alpha_analytic = 4.0
shadow_sigma_db = 6.0
noise_dbm_hz = -162
bandwidth_mhz = 20

[d2d]
power_w = 0.1
density_per_km2 = 400
pair_distance = 0.7
band = DL
strategy = SPR
threshold_db = -6
p_admit = 0.5
fading_samples = 16
max_link_range_m = 500
boundary_tolerance_m = 110
probe_positions = 8
probe_fading = 16

[sweep]
axis = ue_density
grid = 0 100 200 300 400
strategies = SPR IAR
trials = 500

[seed]
master = 1
"""


class ConfigError(ValueError):
    """Bad or missing configuration; message names the section and key."""


def load_config(path: str | None = None, env: Mapping[str, str] | None = None) -> configparser.ConfigParser:
    """Defaults, then the user's file, then D2DRELAY_SECTION__KEY env overrides."""
    cfg = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cfg.read_string(DEFAULT_CONFIG)
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as fh:
                cfg.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"config file {path}: {exc}") from exc
    env = os.environ if env is None else env
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):]
        if "__" not in rest:
            continue
        section, key = rest.split("__", 1)
        section, key = section.lower(), key.lower()
        if not cfg.has_section(section):
            cfg.add_section(section)
        cfg.set(section, key, value)
    return cfg


def _get(cfg, section: str, key: str, conv, what: str):
    try:
        raw = cfg.get(section, key)
    except (configparser.NoSectionError, configparser.NoOptionError) as exc:
        raise ConfigError(f"section [{section}], key {key}: missing") from exc
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(
            f"section [{section}], key {key}: invalid {what} {raw!r}"
        ) from exc


def _get_float(cfg, section, key) -> float:
    return _get(cfg, section, key, float, "number")


def _get_int(cfg, section, key) -> int:
    return _get(cfg, section, key, int, "integer")


def _get_str(cfg, section, key) -> str:
    return _get(cfg, section, key, str, "string").strip()


def _get_floats(cfg, section, key) -> tuple[float, ...]:
    raw = _get_str(cfg, section, key)
    try:
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"section [{section}], key {key}: invalid number list {raw!r}") from exc


def manhattan_from_config(cfg) -> ManhattanSpec:
    try:
        return ManhattanSpec(
            width=_get_float(cfg, "map", "width_m"),
            height=_get_float(cfg, "map", "height_m"),
            block_size=_get_float(cfg, "map", "block_m"),
            street_width=_get_float(cfg, "map", "street_m"),
            building_fill_ratio=_get_float(cfg, "map", "fill"),
            jitter=_get_float(cfg, "map", "jitter_m"),
        )
    except ValueError as exc:
        raise ConfigError(f"section [map]: {exc}") from exc


def channel_from_config(cfg) -> ChannelModel:
    try:
        return ChannelModel(
            carrier_ghz=_get_float(cfg, "channel", "carrier_ghz"),
            los=PathlossCoeffs(
                slope=_get_float(cfg, "channel", "los_slope"),
                intercept=_get_float(cfg, "channel", "los_intercept"),
                freq_slope=_get_float(cfg, "channel", "los_freq_slope"),
            ),
            nlos=PathlossCoeffs(
                slope=_get_float(cfg, "channel", "nlos_slope"),
                intercept=_get_float(cfg, "channel", "nlos_intercept"),
                freq_slope=_get_float(cfg, "channel", "nlos_freq_slope"),
            ),
            alpha_analytic=_get_float(cfg, "channel", "alpha_analytic"),
            shadow_sigma_db=_get_float(cfg, "channel", "shadow_sigma_db"),
            noise_w=noise_power_w(
                _get_float(cfg, "channel", "noise_dbm_hz"),
                _get_float(cfg, "channel", "bandwidth_mhz") * 1e6,
            ),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"section [channel]: {exc}") from exc


def scenario_from_config(cfg, *, seed_override: int | None = None,
                         trials_override: int | None = None) -> Scenario:
    source = _get_str(cfg, "map", "source").lower()
    map_file = _get_str(cfg, "map", "file") or None
    if source == "file" and not map_file:
        raise ConfigError("section [map], key file: required when source = file")
    if source not in ("manhattan", "file"):
        raise ConfigError(f"section [map], key source: must be manhattan or file, got {source!r}")
    try:
        return Scenario(
            map_spec=manhattan_from_config(cfg),
            map_file=map_file if source == "file" else None,
            map_seed=_get_int(cfg, "map", "map_seed"),
            wall_loss_db=_get_float(cfg, "map", "wall_loss_db"),
            bs_rings=_get_int(cfg, "bs", "rings"),
            isd_m=_get_float(cfg, "bs", "isd_m"),
            bs_power_w=_get_float(cfg, "bs", "power_w"),
            cc_ue_power_w=_get_float(cfg, "bs", "cc_ue_power_w"),
            d2d_power_w=_get_float(cfg, "d2d", "power_w"),
            d2d_density_km2=_get_float(cfg, "d2d", "density_per_km2"),
            pair_distance=_get_float(cfg, "d2d", "pair_distance"),
            band=_get_str(cfg, "d2d", "band").upper(),
            strategy=_get_str(cfg, "d2d", "strategy").upper(),
            threshold_db=_get_float(cfg, "d2d", "threshold_db"),
            trials=trials_override if trials_override is not None else _get_int(cfg, "sweep", "trials"),
            master_seed=seed_override if seed_override is not None else _get_int(cfg, "seed", "master"),
            channel=channel_from_config(cfg),
            p_admit=_get_float(cfg, "d2d", "p_admit"),
            fading_samples=_get_int(cfg, "d2d", "fading_samples"),
            max_link_range_m=_get_float(cfg, "d2d", "max_link_range_m"),
            boundary_tolerance_m=_get_float(cfg, "d2d", "boundary_tolerance_m"),
            probe_positions=_get_int(cfg, "d2d", "probe_positions"),
            probe_fading=_get_int(cfg, "d2d", "probe_fading"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def sweep_from_config(cfg, *, trials_override: int | None = None) -> SweepSpec:
    try:
        return SweepSpec(
            axis=_get_str(cfg, "sweep", "axis"),
            grid=_get_floats(cfg, "sweep", "grid"),
            strategies=tuple(_get_str(cfg, "sweep", "strategies").upper().split()),
            trials_per_point=(
                trials_override if trials_override is not None else _get_int(cfg, "sweep", "trials")
            ),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"section [sweep]: {exc}") from exc


def resolved_config_dict(cfg) -> dict:
    """Flatten the parser to a plain dict for the run manifest."""
    return {section: dict(cfg.items(section)) for section in cfg.sections()}
