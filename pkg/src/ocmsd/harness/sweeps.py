"""Seeded Monte-Carlo sweeps over SNR, array layout, frequency and window length."""

from __future__ import annotations

import dataclasses
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..envarray import ArrayGeometry, Scenario, SourceSpec
from .ingest import extract_snapshot, synthesize_time_series
from .metrics import align_modes, amplitude_error, mode_function_error
from .pipeline import PipelineOptions, invert, truth_field, window_noise_std
from ..fieldsynth import add_noise

KINDS = ("snr", "aperture", "elements", "frequency", "window")


@dataclass(frozen=True)
class SweepSpec:
    """One sweep axis, optionally crossed with a list of SNRs.

    ``values`` are SNRs (dB), apertures (m), element counts, frequencies
    (Hz) or window lengths as ``10 log10(T / 1 s)`` depending on ``kind``.
    ``snr_values`` crosses a non-SNR sweep with several SNRs (heatmaps);
    otherwise ``snr_db`` is used throughout.
    """

    kind: str
    values: tuple
    trials: int = 50
    master_seed: int = 0
    snr_db: float = 30.0
    snr_values: Optional[tuple] = None
    anchor: str = "surface"
    sample_rate: float = 2048.0
    options: PipelineOptions = PipelineOptions()

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.lower())
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.snr_values is not None:
            object.__setattr__(self, "snr_values", tuple(float(v) for v in self.snr_values))
        if self.kind not in KINDS:
            raise ValueError(f"sweep kind must be one of {KINDS}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.anchor not in ("surface", "bottom"):
            raise ValueError("anchor must be 'surface' or 'bottom'")
        if self.kind == "snr" and self.snr_values is not None:
            raise ValueError("an SNR sweep cannot be crossed with snr_values")

    def cells(self):
        """(cell index, sweep value, snr) in deterministic order."""
        snrs = self.snr_values if self.snr_values is not None else (self.snr_db,)
        out = []
        for v in self.values:
            for s in snrs:
                out.append((len(out), v, v if self.kind == "snr" else s))
        return out


@dataclass
class TrialRecord:
    sweep_value: float
    snr_db: float
    trial_index: int
    seed: int
    status: str = "ok"
    message: str = ""
    true_depth_m: float = math.nan
    estimated_depth_m: float = math.nan
    ae_m: float = math.nan
    n_modes_ref: int = 0
    n_modes_est: int = 0
    wavenumbers: list = field(default_factory=list)
    wavenumber_errors: list = field(default_factory=list)
    amplitude_error: float = math.nan
    mode_function_errors: list = field(default_factory=list)
    runtime_s: float = 0.0


def trial_seed(master_seed: int, cell_index: int, trial_index: int) -> int:
    """64-bit seed mixed from (master seed, sweep cell, trial)."""
    ss = np.random.SeedSequence([int(master_seed) & (2**63 - 1), int(cell_index), int(trial_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def scenario_for(base: Scenario, spec: SweepSpec, value: float) -> Scenario:
    """The base scenario with the swept parameter set to ``value``."""
    arr = base.array.depths
    if spec.kind == "aperture":
        n = len(arr)
        if spec.anchor == "surface":
            first = arr[0]
        else:
            first = arr[-1] - value
        array = ArrayGeometry.uniform(first, value / (n - 1), n)
        array.check_inside(base.env.water_depth)
        return dataclasses.replace(base, array=array)
    if spec.kind == "elements":
        n = int(round(value))
        aperture = arr[-1] - arr[0]
        array = ArrayGeometry.uniform(arr[0], aperture / (n - 1), n)
        return dataclasses.replace(base, array=array)
    if spec.kind == "frequency":
        src = SourceSpec(value, base.source.depth, base.source.range, base.source.spectrum)
        return dataclasses.replace(base, source=src, band=None)
    return base


def run_trial(base: Scenario, spec: SweepSpec, value: float, snr: float, j: int, seed: int) -> TrialRecord:
    """One Monte-Carlo trial; any failure is caught and recorded."""
    rec = TrialRecord(value, snr, j, seed, true_depth_m=base.source.depth)
    t0 = time.perf_counter()
    try:
        sc = scenario_for(base, spec, value)
        truth = truth_field(sc)
        rec.n_modes_ref = truth.modes.M
        opts = spec.options
        if spec.kind == "window":
            T = 10.0 ** (value / 10.0)
            s = window_noise_std(truth.clean.pressure, snr, spec.sample_rate)
            x = synthesize_time_series(truth.clean.pressure, sc.source.frequency, spec.sample_rate, T, s, seed)
            snap = extract_snapshot(x, spec.sample_rate, sc.source.frequency, T, 0.0, sc.array.depths)
            if opts.epsilon_mode == "known":
                opts = dataclasses.replace(opts, epsilon_mode="offbin")
        else:
            snap = add_noise(truth.clean, snr, seed)
        est, depth = invert(snap, sc, opts)

        rec.estimated_depth_m = depth.estimated_depth
        rec.ae_m = abs(sc.source.depth - depth.estimated_depth)
        rec.n_modes_est = est.modes.M
        match = align_modes(est.wavenumbers, truth.modes.wavenumbers)
        k_hat = np.array([est.wavenumbers[e] if e >= 0 else math.nan for e in match])
        rec.wavenumbers = k_hat.tolist()
        rec.wavenumber_errors = np.abs(k_hat - truth.modes.wavenumbers).tolist()
        rec.mode_function_errors = mode_function_error(est.modes, truth.modes, match).tolist()
        a_hat = np.array([est.amplitudes[e] if e >= 0 else 0.0 for e in match], dtype=complex)
        if np.any(a_hat != 0):
            rec.amplitude_error = amplitude_error(a_hat, truth.amplitudes)
    except Exception as exc:  # recorded, never propagated
        rec.status = "failed"
        rec.message = f"{type(exc).__name__}: {exc}"
    rec.runtime_s = time.perf_counter() - t0
    return rec


def _run_task(args):
    return run_trial(*args)


@dataclass
class SweepResult:
    spec: SweepSpec
    trials: list
    aggregates: list
    wall_time_s: float


def aggregate(spec: SweepSpec, trials: Sequence[TrialRecord]) -> list:
    """Per-cell MAE and AE standard deviation over the successful trials."""
    rows = []
    for _, v, s in spec.cells():
        cell = [t for t in trials if t.sweep_value == v and t.snr_db == s]
        ok = [t for t in cell if t.status == "ok"]
        ae = np.array([t.ae_m for t in ok])
        row = {
            "sweep_value": v,
            "snr_db": s,
            "n_trials": len(cell),
            "n_failed": len(cell) - len(ok),
            "mae_m": float(ae.mean()) if ok else math.nan,
            "std_ae_m": float(ae.std()) if ok else math.nan,
            "n_modes_ref": cell[0].n_modes_ref if cell else 0,
            "mean_amplitude_error": _nanmean([t.amplitude_error for t in ok]),
            "mean_wavenumber_errors": _colmean([t.wavenumber_errors for t in ok]),
            "mean_mode_function_errors": _colmean([t.mode_function_errors for t in ok]),
            "mean_runtime_s": float(np.mean([t.runtime_s for t in cell])) if cell else math.nan,
        }
        rows.append(row)
    return rows


def _nanmean(xs):
    xs = np.asarray(xs, dtype=float)
    xs = xs[np.isfinite(xs)]
    return float(xs.mean()) if xs.size else math.nan


def _colmean(lists):
    if not lists:
        return []
    width = max(len(x) for x in lists)
    arr = np.full((len(lists), width), np.nan)
    for i, x in enumerate(lists):
        arr[i, : len(x)] = x
    with np.errstate(all="ignore"):
        out = []
        for col in arr.T:
            col = col[np.isfinite(col)]
            out.append(float(col.mean()) if col.size else math.nan)
    return out


def run_sweep(base: Scenario, spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Run every (cell, trial) pair; output is independent of ``workers``."""
    tasks = []
    for cell, v, s in spec.cells():
        for j in range(spec.trials):
            tasks.append((base, spec, v, s, j, trial_seed(spec.master_seed, cell, j)))
    t0 = time.perf_counter()
    if workers <= 1:
        trials = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return SweepResult(spec, trials, aggregate(spec, trials), time.perf_counter() - t0)
