"""Command-line front end: ``qudit-cdd {eigen,compile,spectroscopy,ramsey,noise-preview}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import TWO_PI, ConfigError, RunConfig
from .control import GateRequest, calibrate_pulse, compile_single_qudit, tone_table
from .dressing import dressed_basis, hierarchy_check
from .experiments import SpectroscopyConfig, run_ramsey, run_spectroscopy
from .noise import sample_trace

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header: list[str], rows, digest: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def _out(args, cfg: RunConfig) -> Path:
    return Path(args.out if args.out is not None else cfg.out_dir)


def _digest(args, cfg: RunConfig) -> str:
    return cfg.digest(command=args.command, seed=args.seed, shots=args.shots, **getattr(args, "gate", {}))


def cmd_eigen(args, cfg: RunConfig) -> int:
    scheme, params, dressing = cfg.scheme, cfg.params, cfg.dressing
    rows = []
    if dressing is None or (dressing.kind == "bichromatic" and dressing.omega1 == dressing.omega2 == 0):
        # bare interaction-picture energies of the V levels
        for lab in ("m-1", "m0", "m+1"):
            comp = [1.0 if lab == other else 0.0 for other in ("m-1", "m0", "m+1")]
            rows.append([lab, 0.0] + comp * 2)
    else:
        basis = dressed_basis(dressing)
        for k, lab in enumerate(basis.labels):
            v = basis.vectors[:, k]
            rows.append([lab, basis.energies[k] / TWO_PI] + list(v.real) + list(v.imag))
        print(f"# hierarchy: {hierarchy_check(dressing, params)}")
    header = ["state", "energy_hz", "re_m-1", "re_m0", "re_m+1", "im_m-1", "im_m0", "im_m+1"]
    print(",".join(header))
    for r in rows:
        print(",".join(_fmt(x) for x in r))
    write_csv(_out(args, cfg) / "eigen.csv", header, rows, _digest(args, cfg))
    return 0


def _gate_request(args, cfg: RunConfig):
    c = cfg.section("compile")
    target = args.target or c.get("target", "g_tilde_zero")
    level = args.level if args.level is not None else c.get("level")
    angle = args.angle if args.angle is not None else float(c.get("angle_rad", math.pi))
    phase = args.axis_phase if args.axis_phase is not None else float(c.get("axis_phase_rad", 0.0))
    omega_s = TWO_PI * (args.omega_s_hz if args.omega_s_hz is not None else float(c.get("omega_s_hz", 41.7e3)))
    args.gate = {"target": target, "level": level, "angle": angle, "axis_phase": phase, "omega_s": omega_s}
    try:
        return GateRequest(target, angle, phase, level), omega_s, bool(c.get("calibrate", False))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_compile(args, cfg: RunConfig) -> int:
    req, omega_s, calibrate = _gate_request(args, cfg)
    try:
        pulse = compile_single_qudit(req, cfg.dressing, omega_s, cfg.scheme, cfg.params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if calibrate:
        pulse, _ = calibrate_pulse(pulse, cfg.dressing, cfg.scheme, cfg.params)
    rows = [
        [r["coupling"], r["frequency_offset_hz"], r["relative_amplitude"], r["phase_rad"], r["duration_s"]]
        for r in tone_table(pulse)
    ]
    header = ["coupling", "frequency_offset_hz", "relative_amplitude", "phase_rad", "duration_s"]
    path = write_csv(_out(args, cfg) / "tone_table.csv", header, rows, _digest(args, cfg))
    print(f"{len(rows)} tone(s) for {req.target} -> {path}")
    return 0


def cmd_spectroscopy(args, cfg: RunConfig) -> int:
    s = cfg.section("spectroscopy")
    dressing = cfg.dressing
    try:
        step = float(s.get("step_hz", 50.0))
        grid = TWO_PI * np.arange(float(s.get("start_hz", -4e3)), float(s.get("stop_hz", 4e3)) + step / 2, step)
        kw = {"probe_levels": tuple(s.get("probe_levels", ["m+1"])), "shots": int(args.shots or s.get("shots", 50))}
        if "probe_rabi_hz" in s:
            omega = TWO_PI * float(s["probe_rabi_hz"])
            duration = float(s.get("duration_s", math.pi / omega if omega > 0 else 1e-3))
            scfg = SpectroscopyConfig(grid, omega, duration, **kw)
        else:
            scfg = SpectroscopyConfig.weak(grid, dressing, **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[spectroscopy]: {exc}") from exc
    res = run_spectroscopy(scfg, dressing, cfg.noise, args.seed, cfg.scheme, cfg.params, workers=args.workers)
    labels = list(res.populations)
    header = ["detuning_hz", "excitation"] + [f"population_{lab}" for lab in labels]
    rows = [
        [x / TWO_PI, res.excitation[i]] + [res.populations[lab][i] for lab in labels]
        for i, x in enumerate(res.detunings)
    ]
    path = write_csv(_out(args, cfg) / "spectroscopy.csv", header, rows, _digest(args, cfg))
    print(f"peaks (Hz): {[round(p / TWO_PI, 3) for p in res.peaks()]} -> {path}")
    return 0


def cmd_ramsey(args, cfg: RunConfig) -> int:
    rcfg = cfg.ramsey(args.shots)
    try:
        curve = run_ramsey(rcfg, cfg.dressing, cfg.noise, args.seed, cfg.scheme, cfg.params, workers=args.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    fit = curve.fit
    out, digest = _out(args, cfg), _digest(args, cfg)
    rows = []
    for k, d in enumerate(curve.delays):
        overlay = float(fit.model(d)) if fit is not None else math.nan
        rows.append([d, curve.contrast[k], overlay, int(curve.valid[k])])
    write_csv(out / "ramsey.csv", ["delay_s", "contrast", "fit_contrast", "valid"], rows, digest)
    summary = [[curve.label, fit.a, fit.tau, fit.residual]] if fit is not None else []
    path = write_csv(out / "fit_summary.csv", ["state", "a", "tau_s", "residual"], summary, digest)
    if fit is None:
        print("fewer than three valid delays; no fit", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{curve.label}: a={fit.a:.4f} tau={fit.tau * 1e3:.3f} ms -> {path}")
    return 0


def cmd_noise_preview(args, cfg: RunConfig) -> int:
    p = cfg.section("noise_preview")
    model = cfg.noise
    try:
        duration = float(p.get("duration_s", 20e-3))
        dt = float(p.get("dt_s", min(model.max_step(), duration / 1000)))
        trace = sample_trace(model, duration, dt, args.seed)
    except ValueError as exc:
        raise ConfigError(f"[noise_preview]: {exc}") from exc
    rows = zip(trace.times, trace.delta_b, trace.laser_detuning / TWO_PI, trace.drive_amp_factor)
    header = ["time_s", "delta_b_gauss", "laser_detuning_hz", "drive_amp_factor"]
    path = write_csv(_out(args, cfg) / "noise_preview.csv", header, rows, _digest(args, cfg))
    print(f"{len(trace)} samples -> {path}")
    return 0


COMMANDS = {
    "eigen": cmd_eigen,
    "compile": cmd_compile,
    "spectroscopy": cmd_spectroscopy,
    "ramsey": cmd_ramsey,
    "noise-preview": cmd_noise_preview,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML run configuration")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--shots", type=int, default=None, help="Monte Carlo shots per point")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", default=None, help="output directory for CSV files")
    parser = argparse.ArgumentParser(prog="qudit-cdd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "compile":
            sp.add_argument("--target", default=None)
            sp.add_argument("--level", type=int, default=None, help="m for target g_bare")
            sp.add_argument("--angle", type=float, default=None, help="rad")
            sp.add_argument("--axis-phase", type=float, default=None, help="rad")
            sp.add_argument("--omega-s-hz", type=float, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is None:
            args.seed = cfg.seed
        if args.shots is not None and args.shots < 1:
            raise ConfigError("--shots must be >= 1")
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
