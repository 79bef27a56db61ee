"""Scenario and sweep configuration, loaded from flat TOML files."""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


SCHEMES = ("dual", "single")
DEFAULT_DENSITIES = (1000.0, 2000.0, 4000.0, 6000.0)
DEFAULT_FILE_SIZES = (100_000, 1_000_000, 10_000_000, 100_000_000, 200_000_000)

Point = tuple[float, float]


@dataclass(frozen=True)
class ScenarioConfig:
    # run control
    scheme: str = "dual"
    seed: int = 1
    duration_s: float = 60.0

    # radio (SN = mmWave, MN = LTE)
    tx_power_dbm: float = 30.0
    sn_bandwidth_hz: float = 1e9
    bs_antenna_elements: int = 64
    ue_antenna_elements: int = 16
    g_side_db: float = 0.0
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 5.0
    mn_tx_power_dbm: float = 46.0
    lte_bandwidth_hz: float = 20e6
    lte_carrier_hz: float = 2.1e9
    los_alpha: float = 61.4
    los_beta: float = 2.0
    los_sigma_db: float = 5.8
    nlos_alpha: float = 72.0
    nlos_beta: float = 2.92
    nlos_sigma_db: float = 8.7
    decorrelation_distance_m: float = 10.0
    min_distance_m: float = 1.0
    all_bs_interference: bool = False
    outage_threshold_db: float = -5.0
    eta: float = 0.6
    se_max: float = 7.4

    # topology and mobility
    area_width_m: float = 100.0
    area_height_m: float = 100.0
    inter_bs_distance_m: float = 50.0
    sn_positions: tuple[Point, ...] = ()
    mn_position: Point | None = None
    street_waypoints: tuple[Point, ...] = ((50.0, 0.0), (50.0, 100.0))
    ue_start_fraction: float = 0.5
    ue_speed_mps: float = 10.0
    mobility_step_s: float = 1e-3

    # blockages
    blockage_density_per_km2: float = 4000.0
    blockage_size_min_m: float = 1.0
    blockage_size_max_m: float = 2.0
    blockage_random_orientation: bool = False
    blockage_fixed_count: bool = False

    # mobility management
    sinr_th_db: float = 20.0
    ttt_s: float = 0.020
    srs_period_s: float = 0.005
    hysteresis_db: float = 3.0
    rrc_delay_s: float = 0.010
    x2_delay_s: float = 0.001
    forward_on_switch: bool = True

    # data plane
    rlc_buffer_bytes: int = 100_000_000
    file_size_bytes: int = 1_000_000
    file_interval_s: float = 0.120
    delay_constraint_s: float = 0.120
    pdu_size_bytes: int = 1400
    pdcp_reordering: bool = True
    reorder_window_s: float = 0.050
    abort_on_deadline: bool = False
    count_inflight_as_failures: bool = False

    def __post_init__(self) -> None:
        validate(self)

    @property
    def g_main_db(self) -> float:
        return 10 * math.log10(self.bs_antenna_elements * self.ue_antenna_elements)

    def replace(self, **changes: Any) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)


_POSITIVE = (
    "duration_s", "sn_bandwidth_hz", "bs_antenna_elements", "ue_antenna_elements",
    "lte_bandwidth_hz", "lte_carrier_hz", "los_beta", "nlos_beta", "decorrelation_distance_m",
    "min_distance_m", "eta", "se_max", "area_width_m", "area_height_m", "inter_bs_distance_m",
    "ue_speed_mps", "mobility_step_s", "blockage_size_min_m", "blockage_size_max_m",
    "srs_period_s", "rlc_buffer_bytes", "file_size_bytes", "file_interval_s",
    "delay_constraint_s", "pdu_size_bytes", "reorder_window_s",
)
_NON_NEGATIVE = (
    "los_sigma_db", "nlos_sigma_db", "noise_figure_db", "blockage_density_per_km2",
    "ttt_s", "hysteresis_db", "rrc_delay_s", "x2_delay_s",
)
_INTEGER = ("seed", "bs_antenna_elements", "ue_antenna_elements", "rlc_buffer_bytes",
            "file_size_bytes", "pdu_size_bytes")


def validate(cfg: ScenarioConfig) -> None:
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f.name, "must be finite")
    for name in _INTEGER:
        v = getattr(cfg, name)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(name, f"must be an integer, got {v!r}")
    for name in _POSITIVE:
        if not getattr(cfg, name) > 0:
            raise ConfigError(name, f"must be positive, got {getattr(cfg, name)!r}")
    for name in _NON_NEGATIVE:
        if not getattr(cfg, name) >= 0:
            raise ConfigError(name, f"must be non-negative, got {getattr(cfg, name)!r}")
    if cfg.scheme not in SCHEMES:
        raise ConfigError("scheme", f"must be one of {SCHEMES}, got {cfg.scheme!r}")
    if cfg.blockage_size_max_m < cfg.blockage_size_min_m:
        raise ConfigError("blockage_size_max_m", "must be >= blockage_size_min_m")
    if cfg.g_side_db > cfg.g_main_db:
        raise ConfigError("g_side_db", "must not exceed the aligned beam gain")
    if not 0.0 <= cfg.ue_start_fraction <= 1.0:
        raise ConfigError("ue_start_fraction", "must lie in [0, 1]")
    if len(cfg.street_waypoints) < 2:
        raise ConfigError("street_waypoints", "needs at least two points")
    if cfg.sn_positions and len(cfg.sn_positions) < 2:
        raise ConfigError("sn_positions", "needs at least two SNs")
    for name in ("sn_positions", "street_waypoints"):
        for p in getattr(cfg, name):
            if len(p) != 2:
                raise ConfigError(name, f"points must be (x, y) pairs, got {p!r}")


_FIELD_TYPES = {f.name: f for f in fields(ScenarioConfig)}


def _coerce(name: str, value: Any) -> Any:
    default = _FIELD_TYPES[name].default
    if name in ("sn_positions", "street_waypoints"):
        if not isinstance(value, list):
            raise ConfigError(name, "must be a list of [x, y] pairs")
        try:
            return tuple((float(p[0]), float(p[1])) if len(p) == 2 else tuple(p) for p in value)
        except (TypeError, ValueError, IndexError):
            raise ConfigError(name, "must be a list of [x, y] pairs") from None
    if name == "mn_position":
        if not isinstance(value, list) or len(value) != 2:
            raise ConfigError(name, "must be an [x, y] pair")
        return (float(value[0]), float(value[1]))
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(name, f"must be true or false, got {value!r}")
        return value
    if name in _INTEGER:
        if isinstance(value, float) and value.is_integer():
            return int(value)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"must be a number, got {value!r}")
        return float(value)
    return value


def config_from_dict(data: dict[str, Any], **overrides: Any) -> ScenarioConfig:
    merged = {**data, **overrides}
    unknown = sorted(set(merged) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    kwargs = {k: _coerce(k, v) for k, v in merged.items()}
    return ScenarioConfig(**kwargs)


def load_config(path: str | Path, **overrides: Any) -> ScenarioConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data, **overrides)


def config_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if f.name in ("sn_positions", "street_waypoints"):
            v = [list(p) for p in v]
        elif f.name == "mn_position":
            v = list(v)
        out[f.name] = v
    return out


def dump_config(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


@dataclass(frozen=True)
class SweepSpec:
    schemes: tuple[str, ...] = SCHEMES
    densities: tuple[float, ...] = DEFAULT_DENSITIES
    file_sizes: tuple[int, ...] = (1_000_000,)
    seeds: tuple[int, ...] = tuple(range(20))
    global_seed: int = 2024
    output_dir: str = "out"
    jobs: int = 1
    base: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError("schemes", f"unknown scheme {s!r}")
        if not (self.schemes and self.densities and self.file_sizes and self.seeds):
            raise ConfigError("schemes", "every sweep axis needs at least one value")
        if self.jobs < 1:
            raise ConfigError("jobs", "must be >= 1")
        config_from_dict(self.base)  # validates overrides early

    def base_config(self) -> ScenarioConfig:
        return config_from_dict(self.base)


_SWEEP_KEYS = {f.name for f in fields(SweepSpec)}


def load_sweep(path: str | Path) -> SweepSpec:
    data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    unknown = sorted(set(data) - _SWEEP_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown sweep key")
    seeds = data.get("seeds", 20)
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    return SweepSpec(
        schemes=tuple(data.get("schemes", SCHEMES)),
        densities=tuple(float(d) for d in data.get("densities", DEFAULT_DENSITIES)),
        file_sizes=tuple(int(s) for s in data.get("file_sizes", [1_000_000])),
        seeds=tuple(int(s) for s in seeds),
        global_seed=int(data.get("global_seed", 2024)),
        output_dir=str(data.get("output_dir", "out")),
        jobs=int(data.get("jobs", 1)),
        base=dict(data.get("base", {})),
    )
