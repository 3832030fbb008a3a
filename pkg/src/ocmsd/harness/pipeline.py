"""Forward simulation and the full inversion chain for one snapshot."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..dss import DepthResult, estimate_depth
from ..envarray import DepthGrid, Environment, Scenario
from ..fieldsynth import PressureSnapshot, add_noise, mode_amplitudes, synthesize_pressure
from ..modesolver import ModeSet, reference_mode_set
from ..ocms import ModeEstimate, SolverConfig, epsilon_from_noise, estimate_modes

# The water-column dictionary cannot reproduce a halfspace field exactly;
# this fraction of ||p|| is added to the noise bound in quadrature.
DEFAULT_MODEL_MISMATCH = 2e-3


@dataclass(frozen=True)
class PipelineOptions:
    epsilon_mode: str = "known"
    model_mismatch: float = DEFAULT_MODEL_MISMATCH
    coarse_grid_points: int = 2000
    refine_tolerance: float = 1e-6
    sign_step: float = 0.1
    band: Optional[tuple] = None


@dataclass(frozen=True, eq=False)
class Truth:
    modes: ModeSet
    amplitudes: np.ndarray
    clean: PressureSnapshot


@functools.lru_cache(maxsize=64)
def _reference_modes(env: Environment, grid: DepthGrid, f: float) -> ModeSet:
    return reference_mode_set(env, grid, f)


def truth_field(scenario: Scenario, frequency: Optional[float] = None) -> Truth:
    """Reference modes, source amplitudes and the clean array pressure."""
    f = float(frequency or scenario.source.frequency)
    grid = scenario.grid(f)
    modes = _reference_modes(scenario.env, grid, f)
    src = scenario.source if f == scenario.source.frequency else type(scenario.source)(f, scenario.source.depth, scenario.source.range)
    amps = mode_amplitudes(modes, src)
    return Truth(modes, amps, synthesize_pressure(modes, amps, scenario.array, f))


def simulate_snapshot(scenario: Scenario, snr_db: float, seed: int) -> PressureSnapshot:
    """Clean truth field plus white noise at the array SNR ``snr_db``."""
    return add_noise(truth_field(scenario).clean, snr_db, seed)


def solver_config(snapshot: PressureSnapshot, scenario: Scenario, opts: PipelineOptions) -> SolverConfig:
    """Solver settings for one snapshot.

    ``epsilon_n = hypot(noise bound, model_mismatch * ||p||)``: the residual
    of the best candidate set holds both the noise and the part of the
    field the water-column dictionary cannot represent.
    """
    noise = epsilon_from_noise(snapshot, opts.epsilon_mode)
    eps = math.hypot(noise, opts.model_mismatch * float(np.linalg.norm(snapshot.pressure)))
    band = opts.band or scenario.search_band(snapshot.frequency)
    return SolverConfig(eps, tuple(band), opts.coarse_grid_points, opts.refine_tolerance)


def invert(snapshot: PressureSnapshot, scenario: Scenario, opts: PipelineOptions = PipelineOptions()):
    """Mode estimation followed by depth-sign search.

    Returns ``(ModeEstimate, DepthResult)``.
    """
    cfg = solver_config(snapshot, scenario, opts)
    grid = scenario.grid(snapshot.frequency)
    est: ModeEstimate = estimate_modes(snapshot, scenario.env, cfg, grid)
    depth: DepthResult = estimate_depth(est, sign_step=opts.sign_step)
    return est, depth


def window_noise_std(clean_pressure, snr_db: float, sample_rate: float, ref_window: float = 1.0) -> float:
    """Per-sample noise std giving array SNR ``snr_db`` in a ``ref_window`` s DFT bin.

    The exact-bin coefficient of the tone is ``K p`` and the bin noise std is
    ``sqrt(K) s`` for ``K`` samples, hence ``s = sqrt(K) ||p|| / (N 10^(snr/20))``.
    """
    p = np.asarray(clean_pressure)
    K = ref_window * sample_rate
    if math.isinf(snr_db):
        return 0.0
    return float(math.sqrt(K) * np.linalg.norm(p) / (p.size * 10.0 ** (snr_db / 20.0)))
