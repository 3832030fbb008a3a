"""Forward model: modal amplitudes, VLA pressure and additive noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .envarray import ArrayGeometry, SourceSpec
from .modesolver import ModeSet, sample_at_depths
from .special import hankel1_0


@dataclass(frozen=True, eq=False)
class PressureSnapshot:
    """Complex pressure on the array at one frequency.

    ``noise_sigma`` is the per-element complex noise standard deviation
    (0 for a clean synthetic field, None when unknown, e.g. measured data).
    ``aux_bins`` holds signal-free neighbouring frequency bins when the
    snapshot was cut from a time series.
    """

    frequency: float
    depths: np.ndarray
    pressure: np.ndarray
    noise_sigma: Optional[float] = 0.0
    seed: Optional[int] = None
    snr_db: float = math.inf
    aux_bins: Optional[np.ndarray] = None

    def __post_init__(self):
        depths = np.asarray(self.depths, dtype=float)
        p = np.asarray(self.pressure, dtype=complex)
        if depths.shape != p.shape or depths.ndim != 1:
            raise ValueError("pressure and depth vectors must have equal length")
        object.__setattr__(self, "depths", depths)
        object.__setattr__(self, "pressure", p)

    @property
    def N(self) -> int:
        return len(self.depths)


def mode_amplitudes(modes: ModeSet, source: SourceSpec) -> np.ndarray:
    """Complex modal amplitudes a_m = (i/4) S phi_m(z_s) H0^(1)(k_m r)."""
    if modes.M == 0:
        raise ValueError("no modes to excite")
    phi_s = sample_at_depths(modes, [source.depth])[0]
    return 0.25j * source.spectrum * phi_s * hankel1_0(modes.wavenumbers * source.range)


def synthesize_pressure(modes: ModeSet, amps, array: ArrayGeometry, frequency: float = math.nan) -> PressureSnapshot:
    """Noise-free pressure p(z_n) = sum_m a_m phi_m(z_n) on the array."""
    amps = np.asarray(amps, dtype=complex)
    if amps.shape != (modes.M,):
        raise ValueError(f"expected {modes.M} amplitudes, got {amps.shape}")
    phi = sample_at_depths(modes, array.depths)
    return PressureSnapshot(frequency, array.depths, phi @ amps, noise_sigma=0.0)


def sigma_for_snr(pressure, snr_db: float) -> float:
    """Noise std giving SNR = 20 log10(||p||_2 / (N sigma))."""
    p = np.asarray(pressure)
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return float(np.linalg.norm(p) / (p.size * 10.0 ** (snr_db / 20.0)))


def measured_snr_db(pressure, sigma: float) -> float:
    p = np.asarray(pressure)
    if sigma == 0:
        return math.inf
    return 20.0 * math.log10(np.linalg.norm(p) / (p.size * sigma))


def per_element_snr_db(snr_db: float, n_elements: int) -> float:
    """Convert to the conventional ``20 log10(||p|| / (sqrt(N) sigma))``.

    The array SNR used throughout divides by N rather than sqrt(N), so it
    sits ``10 log10(N)`` dB below the per-element figure.
    """
    return snr_db + 10.0 * math.log10(n_elements)


def complex_noise(n: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Circular complex Gaussian samples with E|n|^2 = sigma^2."""
    s = sigma / math.sqrt(2.0)
    return s * rng.standard_normal(n) + 1j * s * rng.standard_normal(n)


def add_noise(snapshot: PressureSnapshot, snr_db: float, seed: int) -> PressureSnapshot:
    """Add white complex Gaussian noise at the requested array SNR.

    ``snr_db = inf`` returns the input unchanged with sigma 0. The generator
    is created from ``seed`` on every call, so equal seeds give bit-identical
    output.
    """
    sigma = sigma_for_snr(snapshot.pressure, snr_db)
    if sigma == 0.0:
        return replace(snapshot, noise_sigma=0.0, seed=seed, snr_db=math.inf)
    rng = np.random.default_rng(seed)
    noisy = snapshot.pressure + complex_noise(snapshot.N, sigma, rng)
    return replace(snapshot, pressure=noisy, noise_sigma=sigma, seed=seed, snr_db=float(snr_db))
