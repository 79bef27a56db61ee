"""Discrete-event simulator for mmWave dual-connection mobility management."""

from __future__ import annotations

from .config import ScenarioConfig, SweepSpec, load_config, load_sweep
from .metrics import RunMetrics
from .sim import Simulation, run_scenario

__all__ = [
    "RunMetrics",
    "ScenarioConfig",
    "Simulation",
    "SweepSpec",
    "load_config",
    "load_sweep",
    "run_scenario",
]
__version__ = "0.1.0"
