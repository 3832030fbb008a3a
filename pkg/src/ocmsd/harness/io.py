"""Text file formats: snapshots, time series, mode estimates and sweep tables.

All floats are written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import platform
import sys
from pathlib import Path

import numpy as np

from ..envarray import DepthGrid
from ..fieldsynth import PressureSnapshot
from ..modesolver import ModeSet
from ..ocms import ModeEstimate


def _f(x) -> str:
    return repr(float(x))


def _read_header(path):
    meta, rows = {}, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
                continue
            rows.append(line)
    return meta, rows


def _opt_float(s):
    return None if s in (None, "", "None", "unknown") else float(s)


# -- snapshots ---------------------------------------------------------------


def write_snapshot(path, snap: PressureSnapshot) -> None:
    """``# freq_hz=``, ``# snr_db=``, ``# seed=`` header, then ``depth_m,re,im`` rows."""
    with open(path, "w") as fh:
        fh.write(f"# freq_hz={_f(snap.frequency)}\n")
        fh.write(f"# snr_db={_f(snap.snr_db)}\n")
        fh.write(f"# seed={snap.seed}\n")
        fh.write(f"# noise_sigma={'unknown' if snap.noise_sigma is None else _f(snap.noise_sigma)}\n")
        if snap.aux_bins is not None:
            fh.write(f"# aux_bins={len(snap.aux_bins)}\n")
        cols = ["depth_m", "re", "im"]
        if snap.aux_bins is not None:
            for i in range(len(snap.aux_bins)):
                cols += [f"aux{i}_re", f"aux{i}_im"]
        fh.write(",".join(cols) + "\n")
        for n in range(snap.N):
            vals = [snap.depths[n], snap.pressure[n].real, snap.pressure[n].imag]
            if snap.aux_bins is not None:
                for b in snap.aux_bins:
                    vals += [b[n].real, b[n].imag]
            fh.write(",".join(_f(v) for v in vals) + "\n")


def read_snapshot(path) -> PressureSnapshot:
    meta, rows = _read_header(path)
    data = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
    aux = None
    n_aux = int(meta.get("aux_bins", 0))
    if n_aux:
        aux = np.array([data[:, 3 + 2 * i] + 1j * data[:, 4 + 2 * i] for i in range(n_aux)])
    seed = meta.get("seed")
    return PressureSnapshot(
        frequency=float(meta["freq_hz"]),
        depths=data[:, 0],
        pressure=data[:, 1] + 1j * data[:, 2],
        noise_sigma=_opt_float(meta.get("noise_sigma", "unknown")),
        seed=None if seed in (None, "None") else int(seed),
        snr_db=float(meta.get("snr_db", "inf")),
        aux_bins=aux,
    )


# -- time series -------------------------------------------------------------


def write_time_series(path, x, sample_rate: float, depths) -> None:
    """``# sample_rate_hz=`` header, a depths line, then one column per element."""
    x = np.atleast_2d(x)
    with open(path, "w") as fh:
        fh.write(f"# sample_rate_hz={_f(sample_rate)}\n")
        fh.write("# depths_m=" + ",".join(_f(d) for d in depths) + "\n")
        for row in x.T:
            fh.write(",".join(_f(v) for v in row) + "\n")


def read_time_series(path):
    """Returns ``(x with shape (N, K), sample_rate, depths)``."""
    meta, rows = _read_header(path)
    if "sample_rate_hz" not in meta or "depths_m" not in meta:
        raise ValueError("time series needs '# sample_rate_hz=' and '# depths_m=' header lines")
    depths = np.array([float(v) for v in meta["depths_m"].split(",")])
    x = np.loadtxt(rows, delimiter=",", ndmin=2).T
    if x.shape[0] != len(depths):
        raise ValueError("column count does not match the depths header")
    return x, float(meta["sample_rate_hz"]), depths


# -- mode estimates ----------------------------------------------------------


def write_mode_estimate(path, est: ModeEstimate) -> Path:
    """Mode table at ``path`` plus the depth functions in ``<stem>_functions.csv``."""
    path = Path(path)
    fpath = path.with_name(path.stem + "_functions.csv")
    g = est.modes.grid
    with open(path, "w") as fh:
        fh.write(f"# grid_h={_f(g.h)}\n# grid_L={g.L}\n")
        fh.write(f"# anchor_xi={_f(est.anchor_xi)}\n# epsilon_n={_f(est.epsilon_n)}\n")
        fh.write(f"# l1_norm={_f(est.l1_norm)}\n# residual_l2={_f(est.residual_l2)}\n")
        fh.write(f"# functions={fpath.name}\n")
        fh.write("mode,order,xi_per_m,amp_re,amp_im\n")
        orders = est.modes.orders
        for m in range(est.modes.M):
            a = est.amplitudes[m]
            fh.write(f"{m + 1},{orders[m]},{_f(est.wavenumbers[m])},{_f(a.real)},{_f(a.imag)}\n")
    with open(fpath, "w") as fh:
        fh.write("depth_m," + ",".join(f"psi{m + 1}" for m in range(est.modes.M)) + "\n")
        for i, z in enumerate(g.depths):
            fh.write(_f(z) + "," + ",".join(_f(v) for v in est.modes.functions[:, i]) + "\n")
    return fpath


def read_mode_estimate(path) -> ModeEstimate:
    path = Path(path)
    meta, rows = _read_header(path)
    tab = np.array([[float(x) for x in r.split(",")] for r in rows[1:]], ndmin=2)
    grid = DepthGrid(float(meta["grid_h"]), int(meta["grid_L"]))
    fn = np.loadtxt(path.with_name(meta["functions"]), delimiter=",", skiprows=1, ndmin=2)
    modes = ModeSet(grid, tab[:, 2], fn[:, 1:].T.copy(), anchor_xi=float(meta["anchor_xi"]))
    return ModeEstimate(
        modes,
        tab[:, 3] + 1j * tab[:, 4],
        float(meta["l1_norm"]),
        float(meta["residual_l2"]),
        float(meta["anchor_xi"]),
        float(meta["epsilon_n"]),
    )


# -- generic tables ----------------------------------------------------------


def _cell(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_f(x) for x in v)
    if isinstance(v, (float, np.floating)):
        return _f(v)
    return str(v)


def write_table(path, rows) -> None:
    """Flat CSV from a list of dicts; list values are ';'-joined."""
    rows = list(rows)
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        keys = list(rows[0].keys())
        w.writerow(keys)
        for r in rows:
            w.writerow([_cell(r[k]) for k in keys])


def read_table(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_curve(path, columns: dict) -> None:
    keys = list(columns)
    n = len(columns[keys[0]])
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for i in range(n):
            fh.write(",".join(_f(columns[k][i]) for k in keys) + "\n")


def write_manifest(path, **fields) -> None:
    from .. import __version__

    doc = {
        "package_version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
    }
    doc.update(fields)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_json_default, allow_nan=True)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    if hasattr(o, "__dataclass_fields__"):
        import dataclasses

        return dataclasses.asdict(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)

