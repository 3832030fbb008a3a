"""Narrowband snapshot extraction from multichannel time series."""

from __future__ import annotations

import math

import numpy as np

from ..fieldsynth import PressureSnapshot

AUX_OFFSETS = (-3, -2, 2, 3)


def extract_snapshot(time_series, sample_rate: float, f: float, window_T: float, start: float = 0.0, depths=None) -> PressureSnapshot:
    """Fourier coefficient at the bin nearest ``f`` for every channel.

    Parameters
    ----------
    time_series : array (N, K)
        One row of real samples per element, ordered by depth.
    sample_rate : float
        Samples per second.
    f : float
        Tone frequency (Hz).
    window_T : float
        Window length in seconds; rectangular window ``[start, start + T)``.
    depths : sequence of float, optional
        Element depths; defaults to 1..N.

    Returns
    -------
    PressureSnapshot
        Unnormalised DFT coefficients ``sum_k x[k] exp(-2 pi i k b / K)``.
        ``frequency`` is the bin frequency; bins at offsets -3, -2, +2, +3
        are attached as ``aux_bins`` for off-bin noise estimation.
    """
    x = np.atleast_2d(np.asarray(time_series, dtype=float))
    if f >= sample_rate / 2:
        raise ValueError("tone frequency at or above Nyquist")
    i0 = int(round(start * sample_rate))
    K = int(round(window_T * sample_rate))
    if K < 8:
        raise ValueError("window shorter than 8 samples")
    if i0 < 0 or i0 + K > x.shape[1]:
        raise ValueError("window runs past the end of the time series")
    seg = x[:, i0 : i0 + K]
    b = int(round(f * K / sample_rate))
    bins = np.array([b] + [b + o for o in AUX_OFFSETS])
    if bins.min() < 1 or bins.max() >= K // 2:
        raise ValueError("signal bin too close to DC or Nyquist for off-bin noise estimate")
    k = np.arange(K)
    kernel = np.exp(-2j * math.pi * np.outer(bins, k) / K)
    coeffs = kernel @ seg.T
    if depths is None:
        depths = np.arange(1, x.shape[0] + 1, dtype=float)
    return PressureSnapshot(
        frequency=b * sample_rate / K,
        depths=np.asarray(depths, dtype=float),
        pressure=coeffs[0],
        noise_sigma=None,
        aux_bins=coeffs[1:],
    )


def synthesize_time_series(pressure, f: float, sample_rate: float, duration: float, noise_std: float, seed: int):
    """Real multichannel record ``Re(p_n exp(2 pi i f t)) * 2 + white noise``.

    The factor 2 makes the exact-bin DFT coefficient equal ``K * p_n``.
    """
    p = np.asarray(pressure, dtype=complex)
    K = int(round(duration * sample_rate))
    t = np.arange(K) / sample_rate
    tone = 2.0 * np.real(p[:, None] * np.exp(2j * math.pi * f * t)[None, :])
    rng = np.random.default_rng(seed)
    return tone + noise_std * rng.standard_normal(tone.shape)


def measured_snr_db(snapshot: PressureSnapshot) -> float:
    """Array SNR 20 log10(||p|| / (N sigma_hat)) with sigma_hat from the aux bins."""
    if snapshot.aux_bins is None:
        raise ValueError("snapshot carries no auxiliary bins")
    sigma = math.sqrt(float(np.mean(np.abs(snapshot.aux_bins) ** 2)))
    return 20.0 * math.log10(np.linalg.norm(snapshot.pressure) / (snapshot.N * sigma))
