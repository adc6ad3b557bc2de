"""Design checks for multi-sensor research-vehicle rigs."""

from .model import (
    RigParseError,
    RigSpec,
    Sensor,
    load_bundled,
    load_rig,
    parse_rig,
    validate_rig,
    export_twin,
)

__all__ = [
    "RigParseError",
    "RigSpec",
    "Sensor",
    "export_twin",
    "load_bundled",
    "load_rig",
    "parse_rig",
    "validate_rig",
]
__version__ = "0.1.0"
