"""Log-distance pathloss with correlated shadowing, SINR and link classes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import BlockageField, SegmentFan


class LinkClass(str, Enum):
    LOS = "LOS"
    NLOS = "NLOS"
    OUTAGE = "OUTAGE"


@dataclass(frozen=True)
class PathlossParams:
    alpha: float
    beta: float
    sigma: float

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


# 28 GHz fits from the mmWave measurement campaign the scheme was evaluated with.
LOS_28GHZ = PathlossParams(alpha=61.4, beta=2.0, sigma=5.8)
NLOS_28GHZ = PathlossParams(alpha=72.0, beta=2.92, sigma=8.7)


@dataclass(frozen=True)
class RadioParams:
    tx_power_dbm: float = 30.0
    bandwidth_hz: float = 1e9
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 5.0
    g_main_db: float = 10 * math.log10(64 * 16)
    g_side_db: float = 0.0

    def __post_init__(self) -> None:
        if self.g_main_db < self.g_side_db:
            raise ValueError("g_main_db must be >= g_side_db")

    @property
    def noise_dbm(self) -> float:
        return self.noise_psd_dbm_hz + 10 * math.log10(self.bandwidth_hz) + self.noise_figure_db


@dataclass(frozen=True)
class LinkReport:
    sn_id: int
    sinr_db: float
    link_class: LinkClass
    report_time: float

    @property
    def connectable(self) -> bool:
        return self.link_class is not LinkClass.OUTAGE


def pathloss_db(d: float, params: PathlossParams, xi: float = 0.0) -> float:
    if d <= 0:
        raise ValueError("distance must be positive")
    return params.alpha + params.beta * 10 * math.log10(d) + xi


def mn_pathloss_db(d: float) -> float:
    """Macro-cell model used for the wide-area anchor link; ``d`` in meters."""
    return 128.1 + 37.6 * math.log10(max(d, 1.0) / 1000.0)


@dataclass
class ShadowingState:
    xi: float
    sigma: float
    last_pos: tuple[float, float]
    decorrelation_distance: float = 10.0


def update_shadowing(
    state: ShadowingState, new_pos: tuple[float, float], rng: np.random.Generator
) -> float:
    """Advance a spatially correlated AR(1) shadowing sample to ``new_pos``."""
    dd = math.hypot(new_pos[0] - state.last_pos[0], new_pos[1] - state.last_pos[1])
    rho = math.exp(-dd / state.decorrelation_distance)
    state.xi = rho * state.xi + math.sqrt(1.0 - rho * rho) * rng.normal(0.0, state.sigma)
    state.last_pos = new_pos
    return state.xi


def classify(sinr: float, los: bool, outage_threshold: float = -5.0) -> LinkClass:
    if sinr < outage_threshold:
        return LinkClass.OUTAGE
    return LinkClass.LOS if los else LinkClass.NLOS


def _dbm_to_mw(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


class ChannelModel:
    """Evaluates SINR for every SN toward the UE at one instant.

    Shadowing is carried per link as a unit-variance value ``z`` and scaled by
    the sigma of the link's current LOS/NLOS condition, so a link keeps its
    shadowing history across condition changes.
    """

    def __init__(
        self,
        positions: np.ndarray,
        channels: np.ndarray,
        field: BlockageField,
        radio: RadioParams,
        los: PathlossParams = LOS_28GHZ,
        nlos: PathlossParams = NLOS_28GHZ,
        min_distance: float = 1.0,
        all_bs_interference: bool = False,
    ) -> None:
        self.positions = np.asarray(positions, dtype=float)
        self.channels = np.asarray(channels, dtype=int)
        self.field = field
        self._fan = SegmentFan(field, self.positions)
        self.radio = radio
        self.los = los
        self.nlos = nlos
        self.min_distance = min_distance
        n = len(self.positions)
        if all_bs_interference:
            mask = ~np.eye(n, dtype=bool)
        else:
            mask = (self.channels[:, None] == self.channels[None, :]) & ~np.eye(n, dtype=bool)
        self.interferer_mask = mask.astype(float)
        self.noise_mw = float(_dbm_to_mw(radio.noise_dbm))

    def link_state(self, ue_pos, shadow_z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-SN (pathloss dB, LOS flag) including shadowing."""
        ue = np.asarray(ue_pos, dtype=float)
        d = np.hypot(self.positions[:, 0] - ue[0], self.positions[:, 1] - ue[1])
        d = np.maximum(d, self.min_distance)
        los = ~self._fan.blocked(ue)
        alpha = np.where(los, self.los.alpha, self.nlos.alpha)
        beta = np.where(los, self.los.beta, self.nlos.beta)
        sigma = np.where(los, self.los.sigma, self.nlos.sigma)
        pl = alpha + beta * 10 * np.log10(d) + sigma * shadow_z
        return pl, los

    def sinr_all(self, ue_pos, shadow_z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """SINR (dB) each SN would deliver as the aligned serving cell, plus LOS flags."""
        pl, los = self.link_state(ue_pos, shadow_z)
        r = self.radio
        signal = _dbm_to_mw(r.tx_power_dbm + r.g_main_db - pl)
        side = _dbm_to_mw(r.tx_power_dbm + r.g_side_db - pl)
        interference = self.interferer_mask @ side
        sinr = 10 * np.log10(signal / (interference + self.noise_mw))
        return sinr, los


def sinr_db(
    serving: int,
    ue_pos,
    bs_positions,
    field: BlockageField,
    shadowing,
    radio: RadioParams,
    channels=None,
    los: PathlossParams = LOS_28GHZ,
    nlos: PathlossParams = NLOS_28GHZ,
    all_bs_interference: bool = False,
    min_distance: float = 1.0,
) -> float:
    """SINR of ``serving`` at ``ue_pos`` with co-channel interference.

    ``shadowing`` holds per-BS unit-variance shadowing values (or None for
    zero shadowing); ``channels`` defaults to a single shared carrier.
    """
    positions = np.asarray(bs_positions, dtype=float)
    n = len(positions)
    if not 0 <= serving < n:
        raise IndexError(f"no BS {serving}")
    if channels is None:
        channels = np.zeros(n, dtype=int)
    z = np.zeros(n) if shadowing is None else np.asarray(shadowing, dtype=float)
    model = ChannelModel(positions, channels, field, radio, los, nlos, min_distance,
                         all_bs_interference)
    sinr, _ = model.sinr_all(ue_pos, z)
    return float(sinr[serving])
