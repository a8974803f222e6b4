"""Configuration, batch runs and CSV output for the command-line tool."""
from .config import ConfigError, RunConfig, SimulationSettings, SweepSpec, load_config, parse_config

__all__ = ["ConfigError", "RunConfig", "SimulationSettings", "SweepSpec", "load_config",
           "parse_config"]
