"""Source depth estimation from a single vertical-array snapshot.

Modes and wavenumbers are estimated from the water column alone by an
orthogonality-constrained sparse search; a depth-sign search over the
estimated modes then yields the source depth.
"""

from .dss import DepthResult, estimate_depth
from .envarray import ArrayGeometry, DepthGrid, Environment, Halfspace, Scenario, SoundSpeedProfile, SourceSpec, yellow_sea_scenario
from .fieldsynth import PressureSnapshot, add_noise, mode_amplitudes, synthesize_pressure
from .modesolver import ModeSet, candidate_mode_set, reference_mode_set
from .ocms import ModeEstimate, SolverConfig, epsilon_from_noise, estimate_modes

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "DepthGrid",
    "DepthResult",
    "Environment",
    "Halfspace",
    "ModeEstimate",
    "ModeSet",
    "PressureSnapshot",
    "Scenario",
    "SolverConfig",
    "SoundSpeedProfile",
    "SourceSpec",
    "add_noise",
    "candidate_mode_set",
    "epsilon_from_noise",
    "estimate_depth",
    "estimate_modes",
    "mode_amplitudes",
    "reference_mode_set",
    "synthesize_pressure",
    "yellow_sea_scenario",
]
