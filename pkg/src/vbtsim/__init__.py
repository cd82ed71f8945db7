"""Simulation, perception and cost modelling for 3D-printed vision-based tactile sensors."""
from ._backend import BACKEND
from .core import Mechanism, SensorConfig, Variant, preset, validate_config

__version__ = "0.1.0"

__all__ = ["BACKEND", "Mechanism", "SensorConfig", "Variant", "preset", "validate_config", "__version__"]
