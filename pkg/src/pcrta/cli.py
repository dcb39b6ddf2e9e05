"""Command line entry point: ``pcrta <verb> <config> [options]``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io, metrics, oracle
from .config import ConfigError, RunConfig, load_config
from .multiscale import MultiscaleConfig
from .scenario import calibrate_background, calibration_point
from .solver import PcrtaModel, SimulationAborted, run

log = logging.getLogger("pcrta")


def _model(cfg: RunConfig, multiscale="config") -> PcrtaModel:
    ms = cfg.multiscale if multiscale == "config" else multiscale
    return PcrtaModel(cfg.coil, cfg.elements_per_width, cfg.scenario, multiscale=ms,
                      base_dt=cfg.solver.dt)


def _simulate(cfg: RunConfig, out_dir: Path, multiscale="config", snapshots=None, cadence=None):
    model = _model(cfg, multiscale)
    snaps = cfg.snapshots if snapshots is None else snapshots
    try:
        rec = run(model, cfg.solver, cadence=cadence if cadence is not None else cfg.cadence,
                  snapshots=snaps, dump_path=out_dir / f"{cfg.name}_abort.bin")
    except SimulationAborted as exc:
        log.error("%s (state dumped to %s)", exc, exc.dump_path)
        raise
    return model, rec


def cmd_run(cfg: RunConfig, args) -> int:
    out = Path(args.output_dir)
    model, rec = _simulate(cfg, out, snapshots=args.snapshots, cadence=args.cadence)
    path = io.write_csv(rec, out / f"{cfg.name}.csv")
    if rec.snapshots:
        io.write_record_snapshots(rec, out / f"{cfg.name}_snapshots")
    losses = metrics.integrate_losses(rec)
    print(f"wrote {path} ({len(rec.t)} rows, {rec.info['steps']} steps)")
    print("losses [J]: " + ", ".join(f"{k}={v:.6g}" for k, v in losses.items()))
    print(f"max Kirchhoff residual: {np.max(rec['kirchhoff_max']):.3e} A")
    return 0


def cmd_compare(cfg: RunConfig, args) -> int:
    """Solver against the lumped network on the same step size."""
    out = Path(args.output_dir)
    dt = cfg.solver.dt
    _, rec = _simulate(cfg, out, multiscale=None, snapshots=False, cadence=dt)
    net = oracle.build_network(cfg.coil)
    ref = oracle.transient_solve(net, cfg.scenario.profile, cfg.scenario.end_time, dt,
                                 cfg.scenario.closed_loop)
    t = rec.t
    cols = {"t [s]": t}
    summary = []
    n_p = cfg.coil.n_parallel
    for side, arr in (("in", ref.I_in), ("out", ref.I_out)):
        for k in range(n_p):
            a = rec[f"I_{side}_{k + 1}"]
            b = np.interp(t, ref.t, arr[:, k])
            cols[f"I_{side}_{k + 1}_solver [A]"] = a
            cols[f"I_{side}_{k + 1}_oracle [A]"] = b
            d = a - b
            summary.append((f"I_{side}_{k + 1}", float(np.max(np.abs(d))), float(np.sqrt(np.mean(d**2)))))
    path = out / f"{cfg.name}_compare.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(cols))
        for row in zip(*cols.values()):
            w.writerow([f"{v:.17g}" for v in row])
    print(f"wrote {path}")
    print(f"{'quantity':<12}{'max dev [A]':>14}{'rms dev [A]':>14}")
    for name, mx, rms in summary:
        print(f"{name:<12}{mx:>14.6g}{rms:>14.6g}")
    print(f"effective inductance: {net.effective_inductance * 1e6:.2f} uH (network)")
    return 0


def cmd_multiscale_check(cfg: RunConfig, args) -> int:
    out = Path(args.output_dir)
    ms = cfg.multiscale or MultiscaleConfig()
    _, full = _simulate(cfg, out, multiscale=None, snapshots=True)
    m_ms, reduced = _simulate(cfg, out, multiscale=ms, snapshots=True)
    m_full = _model(cfg, None)
    J_ref = np.array(full.snapshots)
    J_ms = np.array([metrics.map_to_mesh(J, m_ms.mesh, m_full.mesh) for J in reduced.snapshots])
    e_full = metrics.integrate_losses(full)["total"]
    e_ms = metrics.integrate_losses(reduced)["total"]
    rows = {
        "analyzed_turns": len(reduced.info["analyzed_turns"]),
        "loss_full_J": e_full,
        "loss_multiscale_J": e_ms,
        "loss_relative_error": abs(e_ms - e_full) / abs(e_full) if e_full else 0.0,
        "r_squared": metrics.compute_r_squared(J_ref, J_ms),
        "wall_full_s": full.info["wall_time"],
        "wall_multiscale_s": reduced.info["wall_time"],
        "speedup": full.info["wall_time"] / reduced.info["wall_time"],
    }
    path = out / f"{cfg.name}_multiscale.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for k, v in rows.items():
            w.writerow([k, f"{v:.17g}" if isinstance(v, float) else v])
            print(f"{k:<22}{v:.6g}" if isinstance(v, float) else f"{k:<22}{v}")
    return 0


def cmd_calibrate_bg(cfg: RunConfig, args) -> int:
    bg = cfg.scenario.background
    if bg is None:
        raise ConfigError("calibrate-bg needs a [background] section")
    bg = calibrate_background(bg, cfg.coil, args.target)
    r, z = calibration_point(cfg.coil)
    br, _ = bg.field_per_amp(np.array([r]), np.array([z]))
    print(f"turns = {bg.turns:.10g}")
    print(f"B_r at (r={r:.6g} m, z={z:.6g} m) for {bg.amplitude:g} A: "
          f"{abs(float(br[0])) * bg.amplitude * 1e3:.6g} mT")
    return 0


VERBS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "multiscale-check": cmd_multiscale_check,
    "calibrate-bg": cmd_calibrate_bg,
}


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcrta", description=__doc__)
    p.add_argument("verb", choices=sorted(VERBS))
    p.add_argument("config", help="config file, or the name of a bundled config")
    p.add_argument("--output-dir", default="out")
    p.add_argument("--cadence", type=float, default=None, help="output interval [s]")
    p.add_argument("--snapshots", type=_on_off, default=None, help="on|off")
    p.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
    p.add_argument("--seed", type=int, default=None,
                   help="accepted for interface stability; the solver is deterministic")
    p.add_argument("--target", type=float, default=16.7e-3,
                   help="calibrate-bg: target |B_r| [T] at the excitation amplitude")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=True)
    mode.add_argument("--lenient", dest="strict", action="store_false")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, strict=args.strict)
        if args.cadence is not None:
            cfg = replace(cfg, cadence=args.cadence)
        with threadpool_limits(limits=args.threads):
            return VERBS[args.verb](cfg, args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SimulationAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
