"""Fidelity metrics, probability traces, parameter sweeps, CSV/SVG emission.

Traces hold sampled series over dimensionless gt (or over a sweep parameter,
named in metadata['x_label']).  Emission is deliberately dependency-free:
CSV uses 17-significant-digit floats that round-trip bit-exactly, SVG is
static 1.1 markup.
"""

from __future__ import annotations

import dataclasses
import html
import math
import os
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import ConfigError, OracleMismatchError
from .fock import Basis, DensityOp, Ket, partial_probability
from .hamiltonians import build_classical_pump_hamiltonian
from .dynamics import (
    LindbladConfig,
    closed_form_fock_start,
    closed_form_phonon_start,
    closed_form_photon_start,
    lindblad_evolve,
)
from .protocols import PulseSchedule, _project, _schedule_basis, run_preset

_BOUND_SLACK = 1e-12


@dataclasses.dataclass(frozen=True)
class Trace:
    """Sampled series sharing one x grid.

    metadata keys understood by emit: x_label, y_label, dashed (labels drawn
    with a dash pattern), markers (list of {'x', 'label'} vertical lines),
    unbounded (skip the probability range check).
    """

    times: tuple[float, ...]
    series: Mapping[str, tuple[float, ...]]
    metadata: Mapping[str, object] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        series = {str(k): tuple(float(x) for x in v) for k, v in self.series.items()}
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "series", series)
        object.__setattr__(self, "metadata", dict(self.metadata))
        for label, values in series.items():
            if len(values) != len(times):
                raise ValueError(
                    f"series {label!r} has {len(values)} samples for "
                    f"{len(times)} x values"
                )
        if not self.metadata.get("unbounded"):
            for label, values in series.items():
                for x in values:
                    if not -_BOUND_SLACK <= x <= 1 + _BOUND_SLACK:
                        raise ValueError(
                            f"series {label!r} value {x!r} outside [0, 1]"
                        )


def fidelity(state, target: Ket) -> float:
    """|<target|psi>|^2 for kets, <target|rho|target> for density matrices."""
    if not isinstance(state, (Ket, DensityOp)):
        raise TypeError(f"state must be Ket or DensityOp, got {type(state).__name__}")
    target.basis.require_same(state.basis)
    if isinstance(state, Ket):
        return min(float(abs(target.inner(state)) ** 2), 1.0)
    amps = target.amplitudes
    val = float(np.real(np.vdot(amps, state.matrix @ amps)))
    return min(max(val, 0.0), 1.0)


def single_photon_patterns(n_pairs: int) -> dict:
    """Exact-state patterns P1..PN and P_ph on an N-pump + phonon basis."""
    patterns = {}
    for k in range(n_pairs):
        occ = {m: (1 if m == k else 0) for m in range(n_pairs + 1)}
        patterns[f"P{k + 1}"] = occ
    patterns["P_ph"] = {m: (1 if m == n_pairs else 0) for m in range(n_pairs + 1)}
    return patterns


def _sample_grid(total: float, samples: int) -> np.ndarray:
    if samples < 2:
        raise ConfigError(f"samples must be >= 2, got {samples}")
    return np.linspace(0.0, total, samples)


def _record(state, patterns: Mapping, w_modes: Optional[Sequence[Mapping]],
            out: dict):
    for label, pattern in patterns.items():
        out[label].append(partial_probability(state, pattern))
    if w_modes is not None:
        out["W"].append(sum(partial_probability(state, p) for p in w_modes))


def _trace_exact(schedule: PulseSchedule, basis: Basis, times: np.ndarray,
                 patterns: Mapping, w_modes) -> dict:
    """Eigendecompose each segment once, then rotate to every sample inside it."""
    out: dict = {label: [] for label in patterns}
    if w_modes is not None:
        out["W"] = []
    psi = Ket.from_occupation(basis, schedule.initial_occupation).amplitudes
    eps = 1e-12 * max(schedule.total_gt, 1.0)
    t0 = 0.0
    i = 0
    for k, seg in enumerate(schedule.segments):
        h = build_classical_pump_hamiltonian(seg.drive, basis).to_dense()
        lam, vec = scipy.linalg.eigh(h)
        coef = vec.conj().T @ psi
        t1 = t0 + seg.duration_gt
        while i < len(times) and times[i] <= t1 + eps:
            dt = max(times[i] - t0, 0.0)
            amps = vec @ (np.exp(-1j * lam * dt) * coef)
            _record(Ket(basis, amps), patterns, w_modes, out)
            i += 1
        psi = vec @ (np.exp(-1j * lam * seg.duration_gt) * coef)
        state = Ket(basis, psi)
        for meas in schedule.measurements:
            if meas.after_segment == k:
                state, _ = _project(state, basis, meas.mode, meas.outcome)
        psi = state.amplitudes
        t0 = t1
    return out


def _closed_form_dispatch(schedule: PulseSchedule, basis: Basis):
    """Pick the analytic evaluator matching the schedule's initial state."""
    if len(schedule.segments) != 1 or schedule.measurements:
        raise ConfigError(
            "closed-form tracing supports a single unconditioned segment"
        )
    occ = schedule.initial_occupation
    drive = schedule.segments[0].drive
    n = len(occ) - 1
    pumps, phonon = occ[:n], occ[n]
    if all(x == 0 for x in pumps) and phonon >= 1:
        if phonon == 1:
            return lambda gt: closed_form_phonon_start(drive, gt, basis)
        return lambda gt: closed_form_fock_start(drive, phonon, gt, basis)
    if phonon == 0 and sum(pumps) == 1:
        mode = int(np.argmax(pumps))
        return lambda gt: closed_form_photon_start(drive, gt, basis, pump_mode=mode)
    raise ConfigError(
        "closed-form tracing needs a phonon Fock start or a single injected "
        f"photon; got occupation {occ}"
    )


def _trace_lossy(schedule: PulseSchedule, basis: Basis, times: np.ndarray,
                 patterns: Mapping, w_modes, loss: LindbladConfig) -> dict:
    out: dict = {label: [] for label in patterns}
    if w_modes is not None:
        out["W"] = []
    state = DensityOp.from_ket(Ket.from_occupation(basis, schedule.initial_occupation))
    eps = 1e-12 * max(schedule.total_gt, 1.0)
    t0 = 0.0
    i = 0
    for k, seg in enumerate(schedule.segments):
        h = build_classical_pump_hamiltonian(seg.drive, basis)
        t1 = t0 + seg.duration_gt
        cursor = t0
        while i < len(times) and times[i] <= t1 + eps:
            step = max(times[i] - cursor, 0.0)
            if step > 0:
                state = lindblad_evolve(h, state, loss, step)
            cursor = max(times[i], cursor)
            _record(state, patterns, w_modes, out)
            i += 1
        if t1 > cursor:
            state = lindblad_evolve(h, state, loss, t1 - cursor)
        for meas in schedule.measurements:
            if meas.after_segment == k:
                state, _ = _project(state, basis, meas.mode, meas.outcome)
        t0 = t1
    return out


def probability_trace(schedule: PulseSchedule, patterns: Mapping, samples: int,
                      engine: str = "exact", loss: Optional[LindbladConfig] = None,
                      include_w_sum: bool = False,
                      basis: Optional[Basis] = None) -> Trace:
    """Sample pattern probabilities at uniform gt points over a schedule.

    engine='exact' diagonalizes each segment Hamiltonian; 'closed-form' uses
    the analytic wavefunctions (single-segment schedules only) and must agree
    with 'exact' pointwise.  A loss config switches to master-equation
    stepping.  include_w_sum adds the derived 'W' series, the summed
    single-photon pump probabilities, drawn dashed.
    """
    if engine not in ("exact", "closed-form"):
        raise ConfigError(f"unknown engine {engine!r}")
    if basis is None:
        basis = _schedule_basis(schedule)
    times = _sample_grid(schedule.total_gt, samples)
    patterns = dict(patterns)
    if "W" in patterns and include_w_sum:
        raise ConfigError("pattern label 'W' collides with the derived W series")
    n = schedule.n_modes - 1
    w_modes = None
    if include_w_sum:
        w_modes = [{m: (1 if m == k else 0) for m in range(n + 1)}
                   for k in range(n)]
    if loss is not None:
        out = _trace_lossy(schedule, basis, times, patterns, w_modes, loss)
    elif engine == "exact":
        out = _trace_exact(schedule, basis, times, patterns, w_modes)
    else:
        form = _closed_form_dispatch(schedule, basis)
        out = {label: [] for label in patterns}
        if w_modes is not None:
            out["W"] = []
        for t in times:
            _record(form(float(t)), patterns, w_modes, out)
    metadata = {"x_label": "gt", "y_label": "probability"}
    if include_w_sum:
        metadata["dashed"] = ["W"]
    return Trace(times=tuple(times.tolist()), series=out, metadata=metadata)


@dataclasses.dataclass(frozen=True)
class SweepSpec:
    """One-parameter scan of a preset protocol.

    parameter is the run_preset key to vary; base holds the fixed keys.
    metric picks the ProtocolResult field to record.
    """

    parameter: str
    values: tuple[float, ...]
    protocol: str
    base: Mapping = dataclasses.field(default_factory=dict)
    metric: str = "fidelity"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "base", dict(self.base))
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.metric not in ("fidelity", "success_probability"):
            raise ConfigError(f"unknown metric {self.metric!r}")


def fidelity_sweep(spec: SweepSpec) -> Trace:
    """Evaluate the metric at each parameter value.

    When sweeping gamma_over_g on the fidelity metric, the results must be
    monotone non-increasing (loss never helps); a violation beyond 1e-9
    raises, since it means an integrator or protocol defect.
    """
    results = []
    for value in spec.values:
        params = dict(spec.base)
        params[spec.parameter] = value
        outcome = run_preset(spec.protocol, params)
        metric = getattr(outcome, spec.metric)
        if metric is None:
            raise ConfigError(
                f"preset {spec.protocol} reports no {spec.metric}"
            )
        results.append(float(metric))
    if spec.parameter == "gamma_over_g" and spec.metric == "fidelity":
        ordered = sorted(range(len(spec.values)), key=lambda i: spec.values[i])
        for a, b in zip(ordered, ordered[1:]):
            if results[b] > results[a] + 1e-9:
                raise OracleMismatchError(
                    f"fidelity rose from {results[a]!r} to {results[b]!r} as "
                    f"gamma_over_g grew from {spec.values[a]!r} to "
                    f"{spec.values[b]!r}"
                )
    return Trace(
        times=spec.values, series={spec.metric: tuple(results)},
        metadata={"x_label": spec.parameter, "y_label": spec.metric,
                  "protocol": spec.protocol, "base": dict(spec.base)},
    )


def _format_sig17(x: float) -> str:
    return f"{x:.16e}"


def _atomic_write(path, text: str):
    tmp = f"{path}.partial"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit_csv(trace: Trace, path):
    x_label = str(trace.metadata.get("x_label", "gt"))
    labels = list(trace.series)
    lines = [",".join([x_label] + labels)]
    columns = [trace.series[label] for label in labels]
    for i, t in enumerate(trace.times):
        row = [_format_sig17(t)] + [_format_sig17(col[i]) for col in columns]
        lines.append(",".join(row))
    _atomic_write(path, "\n".join(lines) + "\n")


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
            "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")

_SVG_W, _SVG_H = 720, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 72, 150, 24, 56


def _ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, count)


def _emit_svg(trace: Trace, path):
    x_label = html.escape(str(trace.metadata.get("x_label", "gt")))
    y_label = html.escape(str(trace.metadata.get("y_label", "probability")))
    dashed = set(trace.metadata.get("dashed", ()))
    markers = trace.metadata.get("markers", ())
    x_lo, x_hi = min(trace.times), max(trace.times)
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    y_lo = min(0.0, min(min(v) for v in trace.series.values()))
    y_hi = max(1.0, max(max(v) for v in trace.series.values()))
    plot_w = _SVG_W - _MARGIN_L - _MARGIN_R
    plot_h = _SVG_H - _MARGIN_T - _MARGIN_B

    def sx(x):
        return _MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return _MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="black"/>',
    ]
    for xt in _ticks(x_lo, x_hi):
        px = sx(xt)
        parts.append(f'<line x1="{px:.2f}" y1="{_MARGIN_T + plot_h}" '
                     f'x2="{px:.2f}" y2="{_MARGIN_T + plot_h + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.2f}" y="{_MARGIN_T + plot_h + 20}" '
                     f'font-size="12" text-anchor="middle">{xt:.3g}</text>')
    for yt in _ticks(y_lo, y_hi):
        py = sy(yt)
        parts.append(f'<line x1="{_MARGIN_L - 5}" y1="{py:.2f}" '
                     f'x2="{_MARGIN_L}" y2="{py:.2f}" stroke="black"/>')
        parts.append(f'<text x="{_MARGIN_L - 9}" y="{py + 4:.2f}" '
                     f'font-size="12" text-anchor="end">{yt:.3g}</text>')
    parts.append(f'<text x="{_MARGIN_L + plot_w / 2:.2f}" y="{_SVG_H - 14}" '
                 f'font-size="14" text-anchor="middle">{x_label}</text>')
    parts.append(f'<text x="18" y="{_MARGIN_T + plot_h / 2:.2f}" font-size="14" '
                 f'text-anchor="middle" transform="rotate(-90 18 '
                 f'{_MARGIN_T + plot_h / 2:.2f})">{y_label}</text>')
    for marker in markers:
        px = sx(float(marker["x"]))
        parts.append(f'<line x1="{px:.2f}" y1="{_MARGIN_T}" x2="{px:.2f}" '
                     f'y2="{_MARGIN_T + plot_h}" stroke="#999999" '
                     f'stroke-dasharray="2 4"/>')
        label = html.escape(str(marker.get("label", "")))
        if label:
            parts.append(f'<text x="{px + 3:.2f}" y="{_MARGIN_T + 14}" '
                         f'font-size="11" fill="#555555">{label}</text>')
    legend_y = _MARGIN_T + 12
    for idx, (label, values) in enumerate(trace.series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        dash = ' stroke-dasharray="6 4"' if label in dashed else ""
        points = " ".join(f"{sx(t):.2f},{sy(v):.2f}"
                          for t, v in zip(trace.times, values))
        parts.append(f'<polyline fill="none" stroke="{color}" '
                     f'stroke-width="1.5"{dash} points="{points}"/>')
        lx = _MARGIN_L + plot_w + 12
        parts.append(f'<line x1="{lx}" y1="{legend_y - 4}" x2="{lx + 22}" '
                     f'y2="{legend_y - 4}" stroke="{color}" '
                     f'stroke-width="1.5"{dash}/>')
        parts.append(f'<text x="{lx + 28}" y="{legend_y}" '
                     f'font-size="12">{html.escape(label)}</text>')
        legend_y += 18
    parts.append("</svg>")
    _atomic_write(path, "\n".join(parts) + "\n")


def emit(trace: Trace, format: str, path) -> None:
    """Write a trace as CSV or SVG; the write is atomic (tmp then rename)."""
    if not trace.series:
        raise ValueError("no series")
    if format == "csv":
        _emit_csv(trace, path)
    elif format == "svg":
        _emit_svg(trace, path)
    else:
        raise ConfigError(f"unknown format {format!r}; expected csv or svg")


def read_trace_csv(path) -> Trace:
    """Parse a CSV written by emit back into a Trace."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"{path}: empty trace file")
    header = lines[0].split(",")
    if len(header) < 2:
        raise ValueError(f"{path}: header needs an x column and one series")
    times = []
    columns: list[list[float]] = [[] for _ in header[1:]]
    for ln, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise ValueError(
                f"{path}:{ln}: expected {len(header)} cells, got {len(cells)}"
            )
        times.append(float(cells[0]))
        for col, cell in zip(columns, cells[1:]):
            col.append(float(cell))
    series = {label: tuple(col) for label, col in zip(header[1:], columns)}
    return Trace(times=tuple(times), series=series,
                 metadata={"x_label": header[0], "unbounded": True})
