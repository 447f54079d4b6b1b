"""Truncated-Fock-basis simulation of continuous-variable teleportation with laser light."""

__version__ = "0.1.0"

from .fock import (
    DensityOperator,
    Ensemble,
    ModeSystem,
    NotPositiveSemidefiniteError,
    PureState,
    ResourceLimitError,
    TruncationWarning,
)
from .optics import BeamSplitterSpec, QuadratureGrid
from .protocol import (
    ProtocolConfig,
    TeleportationRecord,
    TeleportationResult,
    ideal_cvqt_run,
    pef_equivalence_test,
    phase_averaged_resource_run,
    shared_laser_cvqt_run,
)
from .sources import LaserSpec, SqueezeSpec

__all__ = [
    "BeamSplitterSpec",
    "DensityOperator",
    "Ensemble",
    "LaserSpec",
    "ModeSystem",
    "NotPositiveSemidefiniteError",
    "ProtocolConfig",
    "PureState",
    "QuadratureGrid",
    "ResourceLimitError",
    "SqueezeSpec",
    "TeleportationRecord",
    "TeleportationResult",
    "TruncationWarning",
    "ideal_cvqt_run",
    "pef_equivalence_test",
    "phase_averaged_resource_run",
    "shared_laser_cvqt_run",
]
