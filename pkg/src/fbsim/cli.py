"""Command-line front end: simulate, oracle-check, figures.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure,
3 oracle tolerance breach.  Interrupted runs leave partially written files
with a .partial suffix (completed files are renamed atomically).
"""

from __future__ import annotations

import argparse
import cmath
import dataclasses
import math
import os
import sys
from typing import Optional

import numpy as np
import scipy

from .errors import (
    ConfigError,
    FbsimError,
    OracleMismatchError,
    StateFormatError,
)
from .fock import DensityOp, Ket, build_basis, save_state, single_excitation_basis
from .hamiltonians import Drive, SystemSpec, build_classical_pump_hamiltonian
from .dynamics import (
    LindbladConfig,
    WeiNormanCoefficients,
    closed_form_fock_start,
    evolve_exact,
    wei_norman_evolve,
)
from .protocols import (
    PRESET_NAMES,
    PulseSchedule,
    PulseSegment,
    load_schedule,
    run_preset,
    run_schedule,
)
from .analysis import emit, probability_trace, single_photon_patterns
from . import __version__

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

DEFAULT_G = 2.0 * math.pi * 15e3  # rad/s
DEFAULT_SEED = 1234
ORACLE_TOL = 1e-8
FOCK_ORACLE_TOL = 1e-6
TRACE_SAMPLES = 401

_WINDOWS = {"w-standard", "w-perfect", "w-lasers-on"}


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit 2 by default; the contract is 1."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _version_string() -> str:
    py = ".".join(str(v) for v in sys.version_info[:3])
    return (f"fbsim {__version__} (python {py}, numpy {np.__version__}, "
            f"scipy {scipy.__version__})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fbsim",
        description="Forward-Brillouin optomechanics: W-state synthesis, "
                    "frequency translation, heralding, and loss modeling.",
    )
    parser.add_argument("--version", action="version", version=_version_string())
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    sim = sub.add_parser(
        "simulate",
        help="run a preset or schedule; write state, report, and trace files",
    )
    sim.add_argument("--config", help="TOML run config; flags override its values")
    sim.add_argument("--preset", choices=PRESET_NAMES,
                     help="named protocol (overrides any schedule in the config)")
    sim.add_argument("--n", type=int, help="number of pump/Stokes pairs")
    sim.add_argument("--alpha-max", type=float,
                     help="collective drive amplitude sqrt(eta)")
    sim.add_argument("--gamma-over-g", type=float,
                     help="optical loss rate in units of g")
    sim.add_argument("--seed", type=int, help="recorded for reproducibility")
    sim.add_argument("--out", help="output directory (default out)")
    sim.add_argument("--format", dest="formats",
                     help="comma-separated trace formats: csv,svg")
    sim.set_defaults(func=cmd_simulate)

    oracle = sub.add_parser(
        "oracle-check",
        help="randomized factored-vs-exact propagator comparison",
    )
    oracle.add_argument("--seed", type=int, default=DEFAULT_SEED)
    oracle.add_argument("--trials", type=int, default=20,
                        help="random (drive, time) pairs per mode count")
    oracle.add_argument("--self-corrupt", type=float, default=None,
                        help=argparse.SUPPRESS)
    oracle.set_defaults(func=cmd_oracle_check)

    figures = sub.add_parser(
        "figures",
        help="regenerate the probability-trace figures (CSV + SVG)",
    )
    figures.add_argument("--out", default="out")
    figures.add_argument("--format", dest="formats", default="csv,svg")
    figures.add_argument("--samples", type=int, default=TRACE_SAMPLES)
    figures.set_defaults(func=cmd_figures)
    return parser


def _parse_formats(text: Optional[str]) -> tuple[str, ...]:
    if not text:
        return ("csv", "svg")
    formats = tuple(x.strip() for x in text.split(",") if x.strip())
    for fmt in formats:
        if fmt not in ("csv", "svg"):
            raise ConfigError(f"unknown format {fmt!r}; expected csv or svg")
    if not formats:
        raise ConfigError("--format needs at least one of csv,svg")
    return formats


def _load_run_config(path) -> dict:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    allowed = {"system", "protocol", "loss", "output", "seed"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown table(s): {', '.join(sorted(unknown))}")
    for table in ("system", "protocol", "loss", "output"):
        if table in data and not isinstance(data[table], dict):
            raise ConfigError(f"{path}: [{table}] must be a table")
    protocol = dict(data.get("protocol", {}))
    if "preset" in protocol and "schedule" in protocol:
        raise ConfigError(f"{path}: [protocol] preset and schedule are "
                          "mutually exclusive")
    if "preset" in protocol and protocol["preset"] not in PRESET_NAMES:
        raise ConfigError(
            f"{path}: unknown preset {protocol['preset']!r}; expected one of "
            + ", ".join(PRESET_NAMES)
        )
    loss = dict(data.get("loss", {}))
    unknown = set(loss) - {"gamma_over_g", "dt", "method"}
    if unknown:
        raise ConfigError(f"{path}: unknown [loss] key(s): "
                          + ", ".join(sorted(unknown)))
    output = dict(data.get("output", {}))
    unknown = set(output) - {"dir", "formats"}
    if unknown:
        raise ConfigError(f"{path}: unknown [output] key(s): "
                          + ", ".join(sorted(unknown)))
    formats_raw = output.get("formats")
    if formats_raw is not None:
        if isinstance(formats_raw, list) and all(
                isinstance(x, str) for x in formats_raw):
            output["formats"] = ",".join(formats_raw)
        elif not isinstance(formats_raw, str):
            raise ConfigError(f"{path}: [output] formats must be a string "
                              "like \"csv,svg\" or an array of strings")
    return {
        "system": (SystemSpec.from_mapping(data["system"])
                   if "system" in data else None),
        "protocol": protocol,
        "loss": loss,
        "output": output,
        "seed": data.get("seed"),
    }


def _atomic_text(path, text: str):
    tmp = f"{path}.partial"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_final_state(state, out_dir) -> str:
    if isinstance(state, Ket):
        path = os.path.join(out_dir, "final_state.txt")
        tmp = f"{path}.partial"
        save_state(tmp, state)
        os.replace(tmp, path)
        return path
    path = os.path.join(out_dir, "final_populations.txt")
    lines = [f"# fock-populations modes={state.basis.mode_count}"]
    for i, pop in enumerate(state.populations()):
        occ = state.basis.occupation(i)
        lines.append(",".join(str(n) for n in occ) + f"\t{pop:.16e}")
    _atomic_text(path, "\n".join(lines) + "\n")
    return path


def _format_timing(name: str, entry) -> str:
    seconds = entry.get("seconds")
    sec_text = f" = {seconds:.6e} s" if seconds is not None else ""
    return f"timing {name}: gt {entry['gt']:.6e}{sec_text}"


def _report_text(source: str, result, g: float, gamma: float,
                 seed: Optional[int], outputs: list) -> str:
    lines = [f"{_version_string()} simulate", f"source: {source}"]
    lines.append(f"g: {g:.6e} rad/s (seconds per unit gt: {1.0 / g:.6e})")
    lines.append(f"gamma_over_g: {gamma:g}")
    if seed is not None:
        lines.append(f"seed: {seed}")
    if result.fidelity is not None:
        label = result.details.get("target_label", "target")
        lines.append(f"fidelity: {result.fidelity:.6f} to {label}")
    if result.global_phase is not None:
        phase = complex(result.global_phase)
        lines.append(
            f"global phase: {phase.real:+.6f}{phase.imag:+.6f}j "
            f"(arg {cmath.phase(phase):+.6f} rad)"
        )
    if result.success_probability is not None:
        lines.append(f"success probability: {result.success_probability:.6f}")
    for name, entry in result.timings.items():
        lines.append(_format_timing(name, entry))
    for key in ("variant", "ratio", "level_phases", "expected_phase"):
        if key in result.details:
            lines.append(f"{key}: {result.details[key]}")
    if outputs:
        lines.append("outputs: " + ", ".join(outputs))
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    cfg = _load_run_config(args.config) if args.config else {
        "system": None, "protocol": {}, "loss": {}, "output": {}, "seed": None,
    }
    protocol = dict(cfg["protocol"])
    preset = args.preset or protocol.pop("preset", None)
    if args.preset is not None:
        protocol.pop("schedule", None)
    schedule_path = protocol.pop("schedule", None)
    if preset is None and schedule_path is None:
        raise ConfigError("nothing to run: give --preset or a config with "
                          "[protocol] preset or schedule")
    loss_cfg = dict(cfg["loss"])
    if args.gamma_over_g is not None:
        loss_cfg["gamma_over_g"] = args.gamma_over_g
    gamma = float(loss_cfg.get("gamma_over_g", 0.0))
    system = cfg["system"]
    g = system.g if system is not None else DEFAULT_G
    seed = args.seed if args.seed is not None else cfg["seed"]
    out_dir = args.out or cfg["output"].get("dir", "out")
    formats = _parse_formats(
        args.formats if args.formats is not None
        else cfg["output"].get("formats")
    )
    os.makedirs(out_dir, exist_ok=True)
    loss = None
    if gamma > 0:
        loss = LindbladConfig(
            gamma_over_g=gamma,
            dt=loss_cfg.get("dt"),
            method=loss_cfg.get("method", "rk4"),
        )

    if preset is not None:
        params = dict(protocol)
        if args.n is not None:
            params["n"] = args.n
        if args.alpha_max is not None:
            params["alpha_max"] = args.alpha_max
        params["g"] = g
        if gamma > 0:
            params["gamma_over_g"] = gamma
        if loss_cfg.get("dt") is not None or \
                loss_cfg.get("method", "rk4") != "rk4":
            raise ConfigError(
                "preset runs support only [loss] gamma_over_g; use a "
                "schedule for custom integrator settings"
            )
        result = run_preset(preset, params)
        source = f"preset {preset}"
    else:
        schedule, _herald = load_schedule(schedule_path)
        result = run_schedule(schedule, loss=loss, g=g)
        source = f"schedule {schedule_path}"

    outputs = []
    if result.schedule is not None:
        patterns = single_photon_patterns(result.schedule.n_modes - 1)
        trace = probability_trace(
            result.schedule, patterns, TRACE_SAMPLES,
            loss=loss, include_w_sum=(preset in _WINDOWS),
        )
        trace.metadata["seed"] = seed
        for fmt in formats:
            path = os.path.join(out_dir, f"trace.{fmt}")
            emit(trace, fmt, path)
            outputs.append(path)
    outputs.append(_write_final_state(result.final_state, out_dir))
    report_path = os.path.join(out_dir, "report.txt")
    report = _report_text(source, result, g, gamma, seed, outputs + [report_path])
    _atomic_text(report_path, report)
    sys.stdout.write(report)
    return 0


def _safe_theta(rng) -> float:
    """Random evolution angle clear of the factorization singularity."""
    while True:
        theta = float(rng.uniform(0.05, 3.09))
        if abs(theta - math.pi / 2) > 0.08:
            return theta


def cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.trials < 1:
        raise ConfigError(f"--trials must be >= 1, got {args.trials}")
    max_err = 0.0
    worst = None
    for n in (1, 2, 3, 4):
        basis = single_excitation_basis(n)
        for trial in range(args.trials):
            r = rng.uniform(0.2, 2.0, size=n)
            phi = rng.uniform(-math.pi, math.pi, size=n)
            drive = Drive.from_polar(r, phi)
            theta = _safe_theta(rng)
            gt = theta / math.sqrt(drive.eta)
            raw = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
            psi = Ket(basis, raw / np.linalg.norm(raw))
            coeffs = WeiNormanCoefficients.evaluate(gt, drive.eta)
            if args.self_corrupt:
                coeffs = dataclasses.replace(
                    coeffs, X=coeffs.X * (1.0 + args.self_corrupt))
            approx = wei_norman_evolve(drive, psi, gt, coefficients=coeffs)
            h = build_classical_pump_hamiltonian(drive, basis)
            exact = evolve_exact(h, psi, gt)
            err = float(np.linalg.norm(approx.amplitudes - exact.amplitudes))
            if err > max_err:
                max_err = err
                worst = (n, trial, tuple(r.tolist()), tuple(phi.tolist()), gt)
    fock_max = 0.0
    fock_worst = None
    for n in (1, 2, 3):
        fock_basis = build_basis(n + 1, per_mode_cutoff=2, total_cap=2)
        for trial in range(max(args.trials // 4, 1)):
            r = rng.uniform(0.2, 2.0, size=n)
            phi = rng.uniform(-math.pi, math.pi, size=n)
            drive = Drive.from_polar(r, phi)
            gt = float(rng.uniform(0.05, 3.0)) / math.sqrt(drive.eta)
            start = Ket.from_occupation(fock_basis, (0,) * n + (2,))
            h = build_classical_pump_hamiltonian(drive, fock_basis)
            exact = evolve_exact(h, start, gt)
            form = closed_form_fock_start(drive, 2, gt, fock_basis)
            err = float(np.linalg.norm(form.amplitudes - exact.amplitudes))
            if err > fock_max:
                fock_max = err
                fock_worst = (n, trial, tuple(r.tolist()), tuple(phi.tolist()), gt)
    print(f"oracle-check seed={args.seed} trials={args.trials} per N in 1..4")
    print(f"max |factored - exact| (single excitation) = {max_err:.3e} "
          f"(tolerance {ORACLE_TOL:.0e})")
    print(f"max |closed form - exact| (two phonons)    = {fock_max:.3e} "
          f"(tolerance {FOCK_ORACLE_TOL:.0e})")
    if max_err > ORACLE_TOL or fock_max > FOCK_ORACLE_TOL:
        offender = worst if max_err > ORACLE_TOL else fock_worst
        n, trial, r, phi, gt = offender
        print(f"BREACH at N={n} trial={trial} gt={gt!r} r={r!r} phi={phi!r}",
              file=sys.stderr)
        return 3
    print("ok")
    return 0


_FIGURES = (
    ("fig4a", "w-standard", {"n": 3, "alpha": 2424.0}),
    ("fig4b", "w-perfect", {"n": 3, "alpha": 2100.0}),
    ("fig6a", "w-lasers-on", {"n": 3, "alpha": 2637.0, "variant": "standard_plus"}),
    ("fig6b", "w-lasers-on", {"n": 3, "alpha": 1365.0, "variant": "standard_minus"}),
)


def cmd_figures(args) -> int:
    formats = _parse_formats(args.formats)
    if args.samples < 2:
        raise ConfigError(f"--samples must be >= 2, got {args.samples}")
    os.makedirs(args.out, exist_ok=True)
    written = []
    for name, preset, params in _FIGURES:
        result = run_preset(preset, dict(params))
        base = result.schedule
        timing = result.timings.get("t_W") or result.timings["t_Wp"]
        gt_mark = timing["gt"]
        drive = base.segments[-1].drive
        window = PulseSchedule(
            segments=(PulseSegment(drive, 4.0 * gt_mark),),
            initial_occupation=base.initial_occupation,
        )
        n = window.n_modes - 1
        trace = probability_trace(window, single_photon_patterns(n),
                                  args.samples, include_w_sum=True)
        trace.metadata["markers"] = [
            {"x": m * gt_mark, "label": f"{m} t_W"} for m in (1, 3)
        ]
        trace.metadata["title"] = name
        for fmt in formats:
            path = os.path.join(args.out, f"{name}.{fmt}")
            emit(trace, fmt, path)
            written.append(path)
        print(f"{name}: {preset} {params} -> t_W gt = {gt_mark:.6e}")
    print("wrote " + ", ".join(written))
    return 0


def _exit_code_for(exc: BaseException) -> Optional[int]:
    if isinstance(exc, OracleMismatchError):
        return 3
    if isinstance(exc, (ConfigError, StateFormatError)):
        return 1
    if isinstance(exc, FbsimError):
        return 2
    if isinstance(exc, (ValueError, TypeError, OSError)):
        return 1
    if isinstance(exc, (ArithmeticError, np.linalg.LinAlgError)):
        return 2
    return None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("interrupted; partial outputs keep the .partial suffix",
              file=sys.stderr)
        return 130
    except BaseException as exc:
        code = _exit_code_for(exc)
        if code is None:
            raise
        print(f"fbsim: error: {exc}", file=sys.stderr)
        return code


def console_entry():
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
