"""Command-line entry point: ``ocmsd <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
import time
from pathlib import Path


from ..dss import estimate_depth
from ..envarray import load_scenario, scenario_to_dict, yellow_sea_scenario
from ..ocms import EstimationError, estimate_modes
from . import io, plots
from .ingest import extract_snapshot, measured_snr_db, synthesize_time_series
from .pipeline import DEFAULT_MODEL_MISMATCH, PipelineOptions, simulate_snapshot, solver_config, truth_field, window_noise_std
from .sweeps import KINDS, SweepSpec, run_sweep

log = logging.getLogger("ocmsd")

DEFAULT_VALUES = {
    "snr": "-20:40:2.5",
    "aperture": "4:29:5",
    "elements": "5:30:5",
    "frequency": "50:1000:50",
    "window": "6:-10:-2",
}


def parse_values(text: str) -> list:
    """``a:b:step`` (inclusive of b when it lands on the grid) or ``v1,v2,...``."""
    if ":" in text:
        a, b, step = (float(x) for x in text.split(":"))
        if step == 0 or (b - a) * step < 0:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        return [a + i * step for i in range(n)]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_band(text: str) -> tuple:
    lo, hi = (float(x) for x in text.split(","))
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError("band must be xi_min,xi_max with 0 < xi_min < xi_max")
    return lo, hi


def _scenario(args):
    return load_scenario(args.config) if args.config else yellow_sea_scenario()


def _options(args) -> PipelineOptions:
    return PipelineOptions(
        epsilon_mode=args.epsilon_mode,
        model_mismatch=args.model_mismatch,
        coarse_grid_points=args.grid_points,
        band=args.band,
    )


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands -------------------------------------------------------------


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    out = _out(args)
    snr = args.snr if args.snr is not None else float(sc.extra.get("snr_db", 30.0))
    if args.time_series:
        truth = truth_field(sc)
        s = window_noise_std(truth.clean.pressure, snr, args.sample_rate)
        x = synthesize_time_series(truth.clean.pressure, sc.source.frequency, args.sample_rate, args.time_series, s, args.seed)
        io.write_time_series(out / "timeseries.csv", x, args.sample_rate, sc.array.depths)
        written = "timeseries.csv"
    else:
        snap = simulate_snapshot(sc, snr, args.seed)
        io.write_snapshot(out / "snapshot.csv", snap)
        written = "snapshot.csv"
    io.write_manifest(out / "manifest.json", command="simulate", config=scenario_to_dict(sc), snr_db=snr, seed=args.seed, output=written)
    print(out / written)
    return 0


def _estimate(args, snap, sc, out):
    opts = _options(args)
    cfg = solver_config(snap, sc, opts)
    t0 = time.perf_counter()
    est = estimate_modes(snap, sc.env, cfg, sc.grid(snap.frequency))
    elapsed = time.perf_counter() - t0
    io.write_mode_estimate(out / "modes.csv", est)
    xs, js = zip(*est.objective_trace) if est.objective_trace else ((), ())
    io.write_curve(out / "objective.csv", {"xi_per_m": xs, "l1_norm": js})
    return est, cfg, elapsed


def cmd_estimate_modes(args) -> int:
    sc = _scenario(args)
    out = _out(args)
    snap = io.read_snapshot(args.snapshot)
    est, cfg, elapsed = _estimate(args, snap, sc, out)
    plots.plot_mode_estimate(est, out / "modes.svg")
    io.write_manifest(out / "manifest.json", command="estimate-modes", snapshot=str(args.snapshot), epsilon_n=cfg.epsilon_n, band=cfg.band, runtime_s=elapsed, n_modes=est.modes.M)
    print(f"{est.modes.M} modes, anchor {est.anchor_xi:.6f} 1/m, written to {out / 'modes.csv'}")
    return 0


def _write_depth(out, res, true_depth=None):
    io.write_table(
        out / "depth.csv",
        [{"estimated_depth_m": res.estimated_depth, "q0": res.selected_q0, "z_q0_m": res.z_q0, "signs": res.selected_signs}],
    )
    io.write_curve(out / "ambiguity.csv", {"depth_m": res.depths, "D": res.ambiguity})
    io.write_curve(out / "kl.csv", {"z_q_m": res.sign_depths, "kl": res.kl_trace})
    plots.plot_ambiguity(res, out / "ambiguity.svg", true_depth)


def cmd_estimate_depth(args) -> int:
    out = _out(args)
    est = io.read_mode_estimate(args.modes)
    res = estimate_depth(est, sign_step=args.sign_step)
    _write_depth(out, res)
    print(f"estimated depth {res.estimated_depth:.2f} m (q0 = {res.selected_q0})")
    return 0


def cmd_ambiguity(args) -> int:
    sc = _scenario(args)
    out = _out(args)
    if args.snapshot:
        snap = io.read_snapshot(args.snapshot)
        true_depth = None
    else:
        snr = args.snr if args.snr is not None else float(sc.extra.get("snr_db", 30.0))
        snap = simulate_snapshot(sc, snr, args.seed)
        io.write_snapshot(out / "snapshot.csv", snap)
        true_depth = sc.source.depth
    est, cfg, elapsed = _estimate(args, snap, sc, out)
    res = estimate_depth(est, sign_step=args.sign_step)
    _write_depth(out, res, true_depth)
    io.write_manifest(out / "manifest.json", command="ambiguity", config=scenario_to_dict(sc), epsilon_n=cfg.epsilon_n, runtime_s=elapsed, estimated_depth_m=res.estimated_depth)
    print(f"estimated depth {res.estimated_depth:.2f} m")
    return 0


def cmd_extract(args) -> int:
    out = _out(args)
    x, fs, depths = io.read_time_series(args.input)
    snap = extract_snapshot(x, fs, args.freq, args.window, args.start, depths)
    snap = dataclasses.replace(snap, snr_db=measured_snr_db(snap))
    io.write_snapshot(out / "snapshot.csv", snap)
    print(f"bin {snap.frequency!r} Hz, measured SNR {snap.snr_db:.2f} dB -> {out / 'snapshot.csv'}")
    return 0


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    out = _out(args)
    opts = _options(args)
    spec = SweepSpec(
        kind=args.kind,
        values=tuple(parse_values(args.values or DEFAULT_VALUES[args.kind])),
        trials=args.trials,
        master_seed=args.seed,
        snr_db=args.snr if args.snr is not None else 30.0,
        snr_values=tuple(parse_values(args.snr_values)) if args.snr_values else None,
        anchor=args.anchor,
        sample_rate=args.sample_rate,
        options=opts,
    )
    res = run_sweep(sc, spec, workers=args.workers)
    io.write_table(out / f"{spec.kind}_trials.csv", [dataclasses.asdict(t) for t in res.trials])
    io.write_table(out / f"{spec.kind}_aggregate.csv", res.aggregates)
    figs = plots.plot_sweep(res, out)
    io.write_manifest(
        out / "manifest.json",
        command=f"sweep {spec.kind}",
        config=scenario_to_dict(sc),
        sweep=dataclasses.asdict(spec),
        workers=args.workers,
        wall_time_s=res.wall_time_s,
        failed_trials=sum(t.status != "ok" for t in res.trials),
        figures=[p.name for p in figs],
    )
    for r in res.aggregates:
        label = f"{spec.kind}={r['sweep_value']:g}" + ("" if spec.kind == "snr" else f" snr={r['snr_db']:g}")
        print(f"{label}: MAE {r['mae_m']:.3f} m (std {r['std_ae_m']:.3f}, failed {r['n_failed']})")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ocmsd", description="Source depth estimation from a single VLA snapshot.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, solver=True):
        sp.add_argument("--config", help="scenario YAML; default is the built-in shallow-water case")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="out")
        if solver:
            sp.add_argument("--band", type=parse_band, help="xi_min,xi_max in 1/m")
            sp.add_argument("--epsilon-mode", choices=("known", "offbin"), default="known")
            sp.add_argument("--model-mismatch", type=float, default=DEFAULT_MODEL_MISMATCH, help="fraction of ||p|| added to epsilon_n in quadrature")
            sp.add_argument("--grid-points", type=int, default=2000, help="coarse anchor grid size")
            sp.add_argument("--sign-step", type=float, default=0.1)

    sp = sub.add_parser("simulate", help="synthesize a noisy snapshot (or time series)")
    common(sp, solver=False)
    sp.add_argument("--snr", type=float)
    sp.add_argument("--time-series", type=float, metavar="SECONDS", help="emit a multichannel time series instead")
    sp.add_argument("--sample-rate", type=float, default=2048.0)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate-modes", help="estimate wavenumbers, mode functions and amplitudes")
    common(sp)
    sp.add_argument("--snapshot", required=True)
    sp.set_defaults(func=cmd_estimate_modes)

    sp = sub.add_parser("estimate-depth", help="depth-sign search on a mode-estimate file")
    sp.add_argument("--modes", required=True)
    sp.add_argument("--out", default="out")
    sp.add_argument("--sign-step", type=float, default=0.1)
    sp.set_defaults(func=cmd_estimate_depth)

    sp = sub.add_parser("ambiguity", help="full chain; emits the D(z) curve")
    common(sp)
    sp.add_argument("--snapshot", help="snapshot file; simulated from the config when omitted")
    sp.add_argument("--snr", type=float)
    sp.set_defaults(func=cmd_ambiguity)

    sp = sub.add_parser("extract", help="time series -> narrowband snapshot")
    sp.add_argument("--input", required=True)
    sp.add_argument("--freq", type=float, required=True)
    sp.add_argument("--window", type=float, required=True, help="window length T (s)")
    sp.add_argument("--start", type=float, default=0.0)
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("sweep", help="Monte-Carlo sweep")
    sp.add_argument("kind", choices=KINDS)
    common(sp)
    sp.add_argument("--values", help="a:b:step or comma list")
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--snr", type=float, help="SNR for non-SNR sweeps (default 30 dB)")
    sp.add_argument("--snr-values", help="cross the sweep with these SNRs (heatmap)")
    sp.add_argument("--anchor", choices=("surface", "bottom"), default="surface")
    sp.add_argument("--sample-rate", type=float, default=2048.0)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (EstimationError, ValueError, OSError) as exc:
        print(f"ocmsd: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
