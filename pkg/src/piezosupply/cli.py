"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, SystemConfig, load_config
from .dataio import emit_curve, emit_trace, parse_sweep_csv
from .errors import DataError, NumericError
from .fitting import (
    FitOptions,
    FitProblem,
    FitTarget,
    TargetKind,
    default_bounds,
    fit_params,
)
from .harvester import (
    GRAM,
    DriveSpec,
    InfeasibleError,
    DegenerateInputError,
    LoadSpec,
    natural_frequency,
    optimal_load,
    solve_phasor,
)
from .sweeps import (
    AbscissaKind,
    ValueKind,
    find_resonance,
    frequency_sweep,
    load_sweep,
    mass_frequency_curve,
    tip_mass_study,
)
from .transient import SimConfigError, energy_audit, run_transient, steady_state_metrics

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

PROVENANCE = {"generated_by": f"piezosupply {__version__}"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="piezosupply",
                     description="Piezoelectric cantilever power-supply simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "svg"), default="csv")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    sub.add_parser("sweep-freq", parents=[common], help="voltage/power versus frequency")
    sub.add_parser("sweep-load", parents=[common], help="power versus load resistance")
    sub.add_parser("mass-study", parents=[common], help="resonance versus tip mass")
    sub.add_parser("transient", parents=[common], help="time-domain run with energy audit")
    fit = sub.add_parser("fit", parents=[common], help="fit lumped parameters to data")
    fit.add_argument("--data", type=Path, action="append", required=True,
                     help="measured sweep CSV (repeatable)")
    fit.add_argument("--free", required=True,
                     help="comma-separated free parameters, e.g. m_eff,k_eff")
    fit.add_argument("--seed", type=int, default=None,
                     help="randomise the start point inside the bounds")
    sub.add_parser("report", parents=[common], help="plain-text summary of the configured device")
    return parser


def _load(args) -> SystemConfig:
    if args.config is None:
        return load_config("")
    try:
        text = args.config.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
    return load_config(text)


def _write(args, document: str, stdout):
    if args.out is None:
        stdout.write(document)
    else:
        args.out.write_text(document)


def _sweep_freq(args, cfg, stdout):
    s = cfg.sweep
    curve = frequency_sweep(cfg.params, cfg.accel_amplitude, s.f_min, s.f_max, s.f_step, cfg.load)
    _write(args, emit_curve(curve, args.format, PROVENANCE), stdout)
    if args.out is not None:
        res = find_resonance(curve)
        flag = " (at sweep boundary)" if res.at_boundary else ""
        stdout.write(f"resonance: {res.frequency:.6g} Hz{flag}, peak {res.value:.6g}\n")


def _sweep_load(args, cfg, stdout):
    drive = cfg.drive()
    curve = load_sweep(cfg.params, drive, cfg.sweep.resistances)
    _write(args, emit_curve(curve, args.format, PROVENANCE), stdout)
    if args.out is not None:
        r_opt = optimal_load(cfg.params, drive.frequency)
        stdout.write(f"optimal load at {drive.frequency:.6g} Hz: {r_opt:.6g} ohm\n")


def _mass_study(args, cfg, stdout):
    rows = tip_mass_study(cfg.params, cfg.sweep.tip_masses, cfg.accel_amplitude)
    _write(args, emit_curve(mass_frequency_curve(rows), args.format, PROVENANCE), stdout)
    if args.out is not None:
        stdout.write("tip_mass_g,frequency_hz,peak_voltage_v\n")
        for row in rows:
            stdout.write(f"{row.tip_mass / GRAM:.6g},{row.resonant_freq:.6g},{row.peak_voltage:.6g}\n")


def _transient(args, cfg, stdout):
    drive = cfg.drive()
    chain = cfg.power_chain() if cfg.storage is not None else cfg.load
    trace = run_transient(cfg.params, chain, drive, cfg.sim.sim_config(drive.frequency))
    _write(args, emit_trace(trace, args.format, PROVENANCE), stdout)
    if args.out is not None:
        audit = energy_audit(trace)
        periods = (trace.t[-1] - trace.t[0]) * drive.frequency
        n_cycles = max(1, min(20, int(periods // 2)))
        ss = steady_state_metrics(trace, n_cycles, drive.frequency)
        stdout.write(f"steady state over {n_cycles} cycles: v_rms={ss.v_rms:.6g} V, "
                     f"p_avg={ss.p_avg:.6g} W\n")
        stdout.write(f"energy audit: input={audit.input_work:.6g} J, "
                     f"residual={audit.residual:.3g} J ({audit.relative_residual:.3g} relative)\n")


def _targets_from(sweep, cfg):
    curve = sweep.curve
    if curve.abscissa_kind is AbscissaKind.TIP_MASS_KG:
        return [FitTarget(TargetKind.RESONANT_FREQ_AT_MASS, f, tip_mass=m)
                for m, f in curve.points]
    tip = sweep.tip_mass if sweep.tip_mass is not None else cfg.params.tip_mass
    if curve.value_kind is ValueKind.VOLT_AMPLITUDE:
        return [FitTarget(TargetKind.PEAK_VOLTAGE_AT_MASS, float(np.max(curve.values)),
                          tip_mass=tip)]
    if curve.abscissa_kind is AbscissaKind.RESISTANCE_OHM:
        freq = sweep.metadata.get("frequency_hz")
        freq = float(freq) if freq is not None else cfg.drive_frequency
        return [FitTarget(TargetKind.POWER_AT_LOAD, p, tip_mass=tip, resistance=r, frequency=freq)
                for r, p in curve.points]
    raise DataError("power-versus-frequency curves cannot be used as fit targets")


def _fit(args, cfg, stdout):
    targets = []
    for path in args.data:
        try:
            with open(path) as fh:
                sweep = parse_sweep_csv(fh)
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc.strerror}") from None
        targets.extend(_targets_from(sweep, cfg))
    free = [name.strip() for name in args.free.split(",") if name.strip()]
    bounds = default_bounds(cfg.params, cfg.accel_amplitude)
    bounds.update(cfg.fit_bounds)
    try:
        problem = FitProblem(targets, free, bounds, cfg.accel_amplitude)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    init = cfg.params
    if args.seed is not None:
        rng = np.random.default_rng(args.seed)
        values = {}
        for name in free:
            lo, hi = bounds[name]
            values[name] = math.exp(rng.uniform(math.log(lo), math.log(hi))) if lo > 0 \
                else rng.uniform(lo, hi)
        accel = values.pop("accel_amplitude", None)
        init = replace(init, **values)
        if accel is not None:
            problem = FitProblem(targets, free, bounds, accel)
    result = fit_params(problem, init, FitOptions(xtol=cfg.fit_xtol,
                                                  max_evaluations=cfg.fit_max_evaluations))
    p = result.params
    lines = [
        f"# {k}: {v}" for k, v in PROVENANCE.items()
    ] + [
        f"model.m_eff_g = {p.m_eff / GRAM:.9g}",
        f"model.k_eff_n_per_m = {p.k_eff:.9g}",
        f"model.zeta = {p.zeta:.9g}",
        f"model.theta_n_per_v = {p.theta:.9g}",
        f"model.c_p_nf = {p.c_p / 1e-9:.9g}",
        f"model.tip_mass_g = {p.tip_mass / GRAM:.9g}",
        f"drive.accel_m_s2 = {result.accel_amplitude:.9g}",
    ]
    _write(args, "\n".join(lines) + "\n", stdout)
    stdout.write(f"fit: m_eff={p.m_eff / GRAM:.6g} g, k_eff={p.k_eff:.6g} N/m, "
                 f"residual={result.residual:.3g}, evaluations={result.evaluations}, "
                 f"converged={result.converged}\n")
    if not result.converged:
        raise NumericError(f"fit did not converge within {result.evaluations} evaluations")


def _report(args, cfg, stdout):
    p = cfg.params
    f_n = natural_frequency(p)
    drive = DriveSpec(cfg.accel_amplitude, f_n)
    oc = solve_phasor(p, drive, LoadSpec())
    r_opt = optimal_load(p, f_n)
    matched = solve_phasor(p, drive, LoadSpec(r_opt))
    curve = frequency_sweep(p, cfg.accel_amplitude, cfg.sweep.f_min, cfg.sweep.f_max,
                            cfg.sweep.f_step)
    res = find_resonance(curve)
    out = [
        f"piezosupply report ({PROVENANCE['generated_by']})",
        f"device: {cfg.preset or 'custom beam'}",
        f"m_eff = {p.m_eff / GRAM:.6g} g, k_eff = {p.k_eff:.6g} N/m, zeta = {p.zeta:.6g}",
        f"theta = {p.theta:.6g} N/V, C_p = {p.c_p / 1e-9:.6g} nF, tip mass = {p.tip_mass / GRAM:.6g} g",
        f"drive: {cfg.accel_amplitude:.6g} m/s^2",
        f"natural frequency: {f_n:.6g} Hz",
        f"swept resonance ({cfg.sweep.f_min:g}-{cfg.sweep.f_max:g} Hz, step {cfg.sweep.f_step:g}): "
        f"{res.frequency:.6g} Hz, {res.value:.6g} V open circuit",
        f"open-circuit amplitude at f_n: {oc.volt_amplitude:.6g} V",
        f"optimal load at f_n: {r_opt:.6g} ohm -> {matched.avg_power:.6g} W",
        "",
        "tip_mass_g  frequency_hz  peak_voltage_v",
    ]
    for row in tip_mass_study(p, cfg.sweep.tip_masses, cfg.accel_amplitude):
        out.append(f"{row.tip_mass / GRAM:10.4g}  {row.resonant_freq:12.6g}  {row.peak_voltage:14.6g}")
    _write(args, "\n".join(out) + "\n", stdout)


COMMANDS = {
    "sweep-freq": _sweep_freq,
    "sweep-load": _sweep_load,
    "mass-study": _mass_study,
    "transient": _transient,
    "fit": _fit,
    "report": _report,
}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        try:
            args = build_parser().parse_args(argv)
        except SystemExit as exc:  # --help / --version
            return int(exc.code or 0)
        cfg = _load(args)
        COMMANDS[args.command](args, cfg, stdout)
    except UsageError as exc:
        stderr.write(f"piezosupply: usage error: {exc}\n")
        return EXIT_USAGE
    except (DataError, SimConfigError) as exc:
        stderr.write(f"piezosupply: data error: {exc}\n")
        return EXIT_DATA
    except (NumericError, InfeasibleError, DegenerateInputError, FloatingPointError) as exc:
        stderr.write(f"piezosupply: numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except ValueError as exc:
        stderr.write(f"piezosupply: data error: {exc}\n")
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
