"""Cycle-level simulator for a wireless-mesh network-on-chip and its
wireless MAC schemes (token, predictive and dynamic slot allocation)."""
from __future__ import annotations

from ._accel import backend
from .config import ConfigError, ExperimentConfig, load_config
from .sim import RunResult, simulate

__all__ = ["ConfigError", "ExperimentConfig", "RunResult", "backend", "load_config", "simulate"]
__version__ = "0.1.0"
