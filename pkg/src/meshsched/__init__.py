"""Slotted simulator and learning scheduler for deadline-constrained flows in wireless mesh networks."""
from .config import SimConfig, config_from_dict, load_config
from .engine import MetricsLog, Simulation, run
from .pgds import PGDSAgent, PGDSParams

__version__ = "0.1.0"

__all__ = ["SimConfig", "config_from_dict", "load_config", "MetricsLog", "Simulation", "run",
           "PGDSAgent", "PGDSParams"]
