"""SVG figures for sweeps, ambiguity functions and mode estimates."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

AXIS_LABELS = {
    "snr": "SNR (dB)",
    "aperture": "Array aperture (m)",
    "elements": "Number of elements",
    "frequency": "Frequency (Hz)",
    "window": "10 log10 T (dB)",
}


def _save(fig, path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return Path(path)


def _matrix(rows, key):
    width = max((len(r[key]) for r in rows), default=0)
    out = np.full((len(rows), width), np.nan)
    for i, r in enumerate(rows):
        out[i, : len(r[key])] = r[key]
    return out


def plot_sweep(result, outdir) -> list:
    """Line plots (one SNR) or heatmaps (crossed SNRs) of the sweep aggregates."""
    outdir = Path(outdir)
    spec = result.spec
    rows = result.aggregates
    xlabel = AXIS_LABELS[spec.kind]
    written = []

    if spec.snr_values is not None:
        xs = np.array(spec.values)
        ys = np.array(spec.snr_values)
        mae = np.array([r["mae_m"] for r in rows]).reshape(len(xs), len(ys)).T
        fig, ax = plt.subplots(figsize=(6, 4.5))
        im = ax.pcolormesh(xs, ys, mae, shading="nearest", cmap="viridis")
        fig.colorbar(im, ax=ax, label="MAE (m)")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("SNR (dB)")
        written.append(_save(fig, outdir / f"{spec.kind}_mae_heatmap.svg"))
        return written

    x = np.array([r["sweep_value"] for r in rows])
    mae = np.array([r["mae_m"] for r in rows])
    sd = np.array([r["std_ae_m"] for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, mae, "o-", label="MAE")
    ax.fill_between(x, mae - sd, mae + sd, alpha=0.25, label="+/- 1 std")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("Depth MAE (m)")
    ax.legend()
    written.append(_save(fig, outdir / f"{spec.kind}_mae.svg"))

    kerr = _matrix(rows, "mean_wavenumber_errors")
    if kerr.size:
        fig, ax = plt.subplots(figsize=(6, 4))
        for m in range(kerr.shape[1]):
            ax.semilogy(x, kerr[:, m], ".-", label=f"mode {m + 1}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("Mean |k_hat - k| (1/m)")
        ax.legend(fontsize="x-small", ncol=2)
        written.append(_save(fig, outdir / f"{spec.kind}_wavenumber_error.svg"))

    ferr = _matrix(rows, "mean_mode_function_errors")
    if ferr.size:
        fig, ax = plt.subplots(figsize=(6, 5))
        for m in range(ferr.shape[1]):
            ax.plot(x, ferr[:, m] + m + 1, ".-")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("Mode function error + mode order")
        written.append(_save(fig, outdir / f"{spec.kind}_mode_function_error.svg"))

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, [r["mean_amplitude_error"] for r in rows], "o-")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("Mean amplitude error")
    written.append(_save(fig, outdir / f"{spec.kind}_amplitude_error.svg"))

    if spec.kind == "frequency":
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.step(x, [r["n_modes_ref"] for r in rows], where="mid")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("Number of trapped modes")
        written.append(_save(fig, outdir / "frequency_mode_count.svg"))
    return written


def plot_ambiguity(result, path, true_depth=None) -> Path:
    """D(z, q0) and the KL trace over the sign-grid depths."""
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 4))
    a1.plot(result.ambiguity, result.depths)
    a1.axhline(result.estimated_depth, color="C1", ls="--", label=f"estimate {result.estimated_depth:.2f} m")
    if true_depth is not None:
        a1.axhline(true_depth, color="k", ls=":", label=f"true {true_depth:.2f} m")
    a1.invert_yaxis()
    a1.set_xlabel("D(z, q0)")
    a1.set_ylabel("Depth (m)")
    a1.legend(fontsize="small")
    a2.plot(result.kl_trace, result.sign_depths)
    a2.axhline(result.z_q0, color="C1", ls="--")
    a2.invert_yaxis()
    a2.set_xlabel("KL(q)")
    a2.set_ylabel("Sign-hypothesis depth z_q (m)")
    return _save(fig, path)


def plot_mode_estimate(est, path, reference=None) -> Path:
    """Estimated mode functions (offset by order), optionally over a reference set."""
    fig, ax = plt.subplots(figsize=(7, 5))
    z = est.modes.grid.depths
    scale = 0.4 / max(np.abs(est.modes.functions).max(), 1e-300)
    for m in range(est.modes.M):
        ax.plot(m + 1 + scale * est.modes.functions[m], z, "C0")
    if reference is not None:
        zr = reference.grid.depths
        for m in range(reference.M):
            ax.plot(m + 1 + scale * reference.functions[m], zr, "k:", lw=0.8)
    ax.invert_yaxis()
    ax.set_xlabel("Mode order (functions offset)")
    ax.set_ylabel("Depth (m)")
    return _save(fig, path)
