"""Executable pulse schedules: heralding, swaps, W synthesis, translation.

A schedule is a list of piecewise-constant drive segments applied to an
initial occupation, optionally conditioned on measurement outcomes.
Execution is pure: (schedule, loss config) -> ProtocolResult.  Targets are
compared by fidelity with the global phase factored out and reported.
"""

from __future__ import annotations

import cmath
import dataclasses
import math
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, FbsimError, TruncationBudgetError
from .fock import Basis, DensityOp, Ket, build_basis, save_state, single_excitation_basis
from .hamiltonians import Drive, build_classical_pump_hamiltonian, build_squeezer_generator
from .dynamics import LindbladConfig, evolve_exact, lindblad_evolve

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

PRESET_NAMES = ("w-standard", "w-perfect", "w-lasers-on", "qft", "herald", "pi-pulse")


@dataclasses.dataclass(frozen=True)
class PulseSegment:
    """One constant-drive interval of duration_gt (dimensionless)."""

    drive: Drive
    duration_gt: float

    def __post_init__(self):
        if not (self.duration_gt > 0 and math.isfinite(self.duration_gt)):
            raise ConfigError(
                f"segment duration must be positive, got {self.duration_gt}"
            )


@dataclasses.dataclass(frozen=True)
class Measurement:
    """Projective occupation measurement conditioning later segments."""

    after_segment: int
    mode: int
    outcome: int


@dataclasses.dataclass(frozen=True)
class PulseSchedule:
    """Ordered drive segments on pumps 0..N-1 plus the phonon (last mode)."""

    segments: tuple[PulseSegment, ...]
    initial_occupation: tuple[int, ...]
    measurements: tuple[Measurement, ...] = ()

    def __post_init__(self):
        segments = tuple(self.segments)
        occupation = tuple(int(n) for n in self.initial_occupation)
        measurements = tuple(self.measurements)
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "initial_occupation", occupation)
        object.__setattr__(self, "measurements", measurements)
        if not segments:
            raise ConfigError("schedule needs at least one segment")
        n_modes = len(occupation)
        if n_modes < 2:
            raise ConfigError("schedule needs at least one pump mode plus the phonon")
        if any(n < 0 for n in occupation):
            raise ConfigError("initial occupation numbers must be >= 0")
        for k, seg in enumerate(segments):
            if seg.drive.n_pairs != n_modes - 1:
                raise ConfigError(
                    f"segment {k} drives {seg.drive.n_pairs} pairs; the schedule "
                    f"has {n_modes - 1} pump modes"
                )
        for m in measurements:
            if not 0 <= m.after_segment < len(segments):
                raise ConfigError(
                    f"measurement references segment {m.after_segment}; "
                    f"schedule has {len(segments)}"
                )
            if not 0 <= m.mode < n_modes:
                raise ConfigError(f"measurement mode {m.mode} out of range")
            if m.outcome < 0:
                raise ConfigError(f"measurement outcome must be >= 0, got {m.outcome}")

    @property
    def n_modes(self) -> int:
        return len(self.initial_occupation)

    @property
    def total_gt(self) -> float:
        return float(sum(seg.duration_gt for seg in self.segments))


@dataclasses.dataclass(frozen=True)
class ProtocolResult:
    """Outcome bundle: final state, target, fidelity, phase, and timings.

    timings maps a duration name to {'gt': float, 'seconds': float|None};
    global_phase is the realized phase of the overlap with the target (the
    fidelity already has it factored out).
    """

    final_state: object
    target_state: Optional[Ket]
    fidelity: Optional[float]
    global_phase: Optional[complex]
    timings: Mapping[str, Mapping[str, Optional[float]]]
    success_probability: Optional[float]
    schedule: Optional[PulseSchedule]
    details: Mapping[str, object]

    def __post_init__(self):
        if self.fidelity is not None and not -1e-12 <= self.fidelity <= 1 + 1e-12:
            raise ValueError(f"fidelity {self.fidelity!r} outside [0, 1]")


def _timing(gt: float, g: Optional[float]) -> dict:
    return {"gt": gt, "seconds": (gt / g) if g else None}


def _fidelity_and_phase(state, target: Ket):
    """(|<t|s>|^2, phase) for a ket, (<t|rho|t>, None) for a density matrix."""
    if isinstance(state, Ket):
        overlap = target.inner(state)
        fid = float(abs(overlap) ** 2)
        phase = overlap / abs(overlap) if abs(overlap) > 1e-12 else None
        return min(fid, 1.0), phase
    amps = target.amplitudes
    fid = float(np.real(np.vdot(amps, state.matrix @ amps)))
    return min(max(fid, 0.0), 1.0), None


def _project(state, basis: Basis, mode: int, outcome: int):
    """Condition on an occupation measurement; returns (state, probability)."""
    keep = np.array([basis.occupation(i)[mode] == outcome
                     for i in range(basis.dim)])
    if isinstance(state, Ket):
        amps = np.where(keep, state.amplitudes, 0.0)
        p = float(np.vdot(amps, amps).real)
        if p <= 0.0:
            raise FbsimError(
                f"measurement outcome {outcome} on mode {mode} has zero probability"
            )
        return Ket(basis, amps / math.sqrt(p)), p
    mask = keep.astype(float)
    projected = state.matrix * np.outer(mask, mask)
    p = float(np.real(np.trace(projected)))
    if p <= 0.0:
        raise FbsimError(
            f"measurement outcome {outcome} on mode {mode} has zero probability"
        )
    return DensityOp(basis, projected / p), p


def _execute(schedule: PulseSchedule, basis: Basis, state,
             loss: Optional[LindbladConfig]):
    """Run all segments and conditioning events; returns (state, success)."""
    success = None
    for k, seg in enumerate(schedule.segments):
        h = build_classical_pump_hamiltonian(seg.drive, basis)
        if loss is None:
            state = evolve_exact(h, state, seg.duration_gt)
        else:
            state = lindblad_evolve(h, state, loss, seg.duration_gt)
        for meas in schedule.measurements:
            if meas.after_segment == k:
                state, p = _project(state, basis, meas.mode, meas.outcome)
                success = p if success is None else success * p
    return state, success


def _schedule_basis(schedule: PulseSchedule) -> Basis:
    cap = max(sum(schedule.initial_occupation), 1)
    if cap == 1:
        return single_excitation_basis(schedule.n_modes - 1)
    return build_basis(schedule.n_modes, per_mode_cutoff=cap, total_cap=cap)


def run_schedule(schedule: PulseSchedule, loss: Optional[LindbladConfig] = None,
                 basis: Optional[Basis] = None,
                 g: Optional[float] = None) -> ProtocolResult:
    """Execute a schedule with no preset target.

    The basis defaults to the smallest one holding the initial excitation
    count; pass a larger one to study truncation headroom.
    """
    if basis is None:
        basis = _schedule_basis(schedule)
    elif basis.mode_count != schedule.n_modes:
        raise ConfigError(
            f"basis has {basis.mode_count} modes; schedule needs {schedule.n_modes}"
        )
    state = Ket.from_occupation(basis, schedule.initial_occupation)
    final, success = _execute(schedule, basis, state, loss)
    return ProtocolResult(
        final_state=final, target_state=None, fidelity=None, global_phase=None,
        timings={"total": _timing(schedule.total_gt, g)},
        success_probability=success, schedule=schedule, details={},
    )


def herald_phonon(xi: complex, cutoff: int = 8,
                  p_edge_tol: float = 1e-6) -> ProtocolResult:
    """Prepare a single phonon by two-mode squeezing plus Stokes detection.

    Applies exp(xi a_s^dag b^dag - conj(xi) a_s b) to the two-mode vacuum on a
    cutoff-limited basis, then conditions on exactly one Stokes photon.  The
    squeezed-vacuum photon-number tail is geometric with ratio tanh^2|xi|, so
    the truncation budget P(n >= cutoff-1) = tanh(|xi|)^(2(cutoff-1)) must
    stay below p_edge_tol.

    xi = 0 is a documented zero-probability result (success 0, vacuum kept),
    not an error.
    """
    xi = complex(xi)
    r = abs(xi)
    if cutoff < 2:
        raise ConfigError(f"cutoff must be >= 2, got {cutoff}")
    tail = math.tanh(r) ** (2 * (cutoff - 1))
    if tail >= p_edge_tol:
        raise TruncationBudgetError(
            f"P(n >= {cutoff - 1}) = {tail:.3e} exceeds {p_edge_tol:.1e}; "
            "raise the cutoff or reduce |xi|"
        )
    basis = build_basis(2, per_mode_cutoff=cutoff)
    phonon_basis = build_basis(1, per_mode_cutoff=cutoff)
    target = Ket.from_occupation(phonon_basis, (1,))
    if r == 0.0:
        return ProtocolResult(
            final_state=Ket.vacuum(phonon_basis), target_state=target,
            fidelity=0.0, global_phase=None, timings={},
            success_probability=0.0, schedule=None,
            details={"xi": xi, "cutoff": cutoff, "tail_bound": tail,
                 "target_label": "|1_ph>"},
        )
    generator = build_squeezer_generator(basis, xi)
    squeezed = evolve_exact(1j * generator, Ket.vacuum(basis), 1.0)
    # condition on one Stokes photon, then drop the measured mode
    heralded = np.array([squeezed.amplitude((1, n)) for n in range(cutoff + 1)])
    success = float(np.vdot(heralded, heralded).real)
    phonon_state = Ket(phonon_basis, heralded / math.sqrt(success))
    fid, phase = _fidelity_and_phase(phonon_state, target)
    return ProtocolResult(
        final_state=phonon_state, target_state=target, fidelity=fid,
        global_phase=phase, timings={}, success_probability=success,
        schedule=None, details={"xi": xi, "cutoff": cutoff, "tail_bound": tail,
                 "target_label": "|1_ph>"},
    )


def _single_pair_drive(n_pairs: int, pair: int, r: float, phi: float) -> Drive:
    mags = [0.0] * n_pairs
    phases = [0.0] * n_pairs
    mags[pair] = r
    phases[pair] = phi
    return Drive.from_polar(mags, phases)


def pi_pulse_swap(pair: int, r: float, phi: float = 0.0,
                  n_pairs: Optional[int] = None,
                  direction: str = "photon_to_phonon",
                  g: Optional[float] = None,
                  loss: Optional[LindbladConfig] = None) -> ProtocolResult:
    """Swap a single excitation between one pump mode and the phonon.

    One segment of duration gt = pi/(2r).  The realized swap phase is
    -i e^{-i phi} for photon -> phonon and -i e^{+i phi} for the reverse;
    both are recorded in details as expected_phase.
    """
    if n_pairs is None:
        n_pairs = pair + 1
    if not 0 <= pair < n_pairs:
        raise ConfigError(f"pair {pair} out of range for {n_pairs} pairs")
    if not r > 0:
        raise ConfigError(f"pulse amplitude r must be > 0, got {r}")
    if direction not in ("photon_to_phonon", "phonon_to_photon"):
        raise ConfigError(f"unknown direction {direction!r}")
    gt = math.pi / (2.0 * r)
    drive = _single_pair_drive(n_pairs, pair, r, phi)
    start = [0] * (n_pairs + 1)
    target_occ = [0] * (n_pairs + 1)
    if direction == "photon_to_phonon":
        start[pair] = 1
        target_occ[-1] = 1
        expected_phase = -1j * cmath.exp(-1j * phi)
    else:
        start[-1] = 1
        target_occ[pair] = 1
        expected_phase = -1j * cmath.exp(1j * phi)
    schedule = PulseSchedule(segments=(PulseSegment(drive, gt),),
                             initial_occupation=tuple(start))
    basis = _schedule_basis(schedule)
    state, _ = _execute(schedule, basis, Ket.from_occupation(basis, start), loss)
    target = Ket.from_occupation(basis, tuple(target_occ))
    fid, phase = _fidelity_and_phase(state, target)
    return ProtocolResult(
        final_state=state, target_state=target, fidelity=fid, global_phase=phase,
        timings={"t_pi": _timing(gt, g), "total": _timing(gt, g)},
        success_probability=None, schedule=schedule,
        details={"pair": pair, "direction": direction,
                 "expected_phase": expected_phase,
                 "target_label": ("|1_ph>" if direction == "photon_to_phonon"
                                  else f"|1_({pair + 1})>")},
    )


def _w_target(basis: Basis, weights: Sequence[complex]) -> Ket:
    n = len(weights)
    amps = np.zeros(basis.dim, dtype=complex)
    for k, w in enumerate(weights):
        occ = [0] * basis.mode_count
        occ[k] = 1
        amps[basis.index_of(tuple(occ))] = w
    return Ket(basis, amps)


def _synthesize_swap(n: int, drive: Drive, target_weights: Sequence[complex],
                     start: str, inject_pair: int, g: Optional[float],
                     loss: Optional[LindbladConfig],
                     herald_xi: Optional[complex], herald_cutoff: int,
                     timing_label: str, target_label: str) -> ProtocolResult:
    """Shared body of the standard and perfect W synthesis protocols."""
    if start not in ("heralded", "injected"):
        raise ConfigError(f"unknown start {start!r}")
    if not 0 <= inject_pair < n:
        raise ConfigError(f"inject_pair {inject_pair} out of range for {n} pairs")
    eta = drive.eta
    alpha_max = math.sqrt(eta)
    gt_w = math.pi / (2.0 * alpha_max)
    details: dict = {"start": start, "alpha_max": alpha_max,
                     "target_label": target_label}
    timings = {timing_label: _timing(gt_w, g)}
    segments = []
    if start == "heralded":
        occ = (0,) * n + (1,)
        expected_phase = -1j
        if herald_xi is not None:
            herald = herald_phonon(herald_xi, herald_cutoff)
            details["herald"] = herald
            success = herald.success_probability
        else:
            success = None
    else:
        # swap the injected photon onto the phonon first; running the swap at
        # alpha_max makes both segments last tau(alpha_max)
        occ = tuple(1 if k == inject_pair else 0 for k in range(n)) + (0,)
        segments.append(PulseSegment(
            _single_pair_drive(n, inject_pair, alpha_max, 0.0), gt_w))
        timings["t_pi"] = _timing(gt_w, g)
        expected_phase = (-1j) * (-1j)
        success = None
    segments.append(PulseSegment(drive, gt_w))
    schedule = PulseSchedule(segments=tuple(segments), initial_occupation=occ)
    timings["total"] = _timing(schedule.total_gt, g)
    basis = _schedule_basis(schedule)
    state, _ = _execute(schedule, basis, Ket.from_occupation(basis, occ), loss)
    target = _w_target(basis, target_weights)
    fid, phase = _fidelity_and_phase(state, target)
    details["expected_phase"] = expected_phase
    return ProtocolResult(
        final_state=state, target_state=target, fidelity=fid, global_phase=phase,
        timings=timings, success_probability=success, schedule=schedule,
        details=details,
    )


def synthesize_w_standard(n: int, alpha: float, start: str = "heralded",
                          inject_pair: int = 0, g: Optional[float] = None,
                          loss: Optional[LindbladConfig] = None,
                          herald_xi: Optional[complex] = None,
                          herald_cutoff: int = 8) -> ProtocolResult:
    """Spread one phonon evenly over N pump frequencies.

    Equal drives r_n = alpha give the equal-weight single-photon target; the
    swap completes at gt = pi/(2 alpha sqrt(N)).  start='heralded' begins
    from a single phonon (prepared externally, or by herald_phonon when
    herald_xi is given, with its success probability reported separately);
    start='injected' begins from a photon in inject_pair and prepends a
    swap segment.
    """
    if n < 2:
        raise ConfigError(f"W synthesis needs n >= 2, got {n}")
    if not alpha > 0:
        raise ConfigError(f"alpha must be > 0, got {alpha}")
    drive = Drive.from_polar([alpha] * n)
    weights = [1.0 / math.sqrt(n)] * n
    return _synthesize_swap(n, drive, weights, start, inject_pair, g, loss,
                            herald_xi, herald_cutoff, "t_W", f"|W_{n}>")


def synthesize_w_perfect(n: int, alpha: float, start: str = "heralded",
                         inject_pair: int = 0, g: Optional[float] = None,
                         loss: Optional[LindbladConfig] = None,
                         herald_xi: Optional[complex] = None,
                         herald_cutoff: int = 8) -> ProtocolResult:
    """Spread one phonon with weight 1/2 on pair 1 and 1/(2(N-1)) elsewhere.

    The first drive runs at r_1 = alpha*sqrt(N-1); the swap completes at
    gt = pi/(2 alpha sqrt(2(N-1))).
    """
    if n < 2:
        raise ConfigError(f"W synthesis needs n >= 2, got {n}")
    if not alpha > 0:
        raise ConfigError(f"alpha must be > 0, got {alpha}")
    mags = [alpha * math.sqrt(n - 1)] + [alpha] * (n - 1)
    drive = Drive.from_polar(mags)
    weights = [1.0 / math.sqrt(2.0)] + [1.0 / math.sqrt(2.0 * (n - 1))] * (n - 1)
    return _synthesize_swap(n, drive, weights, start, inject_pair, g, loss,
                            herald_xi, herald_cutoff, "t_Wp", f"|W_p,{n}>")


_LASERS_ON_VARIANTS = ("standard_plus", "standard_minus",
                       "perfect_plus", "perfect_minus")


def lasers_on_ratio(n: int, variant: str) -> float:
    """First-pair amplitude ratio r_1/alpha for the always-on protocol."""
    if variant == "standard_plus":
        return (n - 1) / (math.sqrt(n) + 1.0)
    if variant == "standard_minus":
        return (n - 1) / (math.sqrt(n) - 1.0)
    root8 = math.sqrt(8.0)
    if variant == "perfect_plus":
        return math.sqrt((n - 1) / (3.0 + root8))
    if variant == "perfect_minus":
        return math.sqrt((n - 1) / (3.0 - root8))
    raise ConfigError(f"unknown variant {variant!r}; expected one of "
                      + ", ".join(_LASERS_ON_VARIANTS))


def synthesize_w_lasers_on(n: int, alpha: float, variant: str = "standard_plus",
                           g: Optional[float] = None,
                           loss: Optional[LindbladConfig] = None) -> ProtocolResult:
    """W synthesis with all drives on from the start and a photon in pair 1.

    Tuning r_1/alpha makes the stationary (non-collective) remainder of the
    injected photon interfere with the returning collective wave so the pump
    probabilities reach the W pattern at gt = pi/sqrt(eta).  The plus
    branches flip signs relative to pair 1; the minus branches land on the
    usual W target with an overall minus.
    """
    if n < 2:
        raise ConfigError(f"W synthesis needs n >= 2, got {n}")
    if not alpha > 0:
        raise ConfigError(f"alpha must be > 0, got {alpha}")
    ratio = lasers_on_ratio(n, variant)
    r1 = alpha * ratio
    drive = Drive.from_polar([r1] + [alpha] * (n - 1))
    eta = drive.eta
    gt_w = math.pi / math.sqrt(eta)
    if variant == "standard_plus":
        weights = [1.0 / math.sqrt(n)] + [-1.0 / math.sqrt(n)] * (n - 1)
    elif variant == "standard_minus":
        weights = [1.0 / math.sqrt(n)] * n
    elif variant == "perfect_plus":
        weights = ([1.0 / math.sqrt(2.0)]
                   + [-1.0 / math.sqrt(2.0 * (n - 1))] * (n - 1))
    else:
        weights = ([1.0 / math.sqrt(2.0)]
                   + [1.0 / math.sqrt(2.0 * (n - 1))] * (n - 1))
    occ = (1,) + (0,) * n
    schedule = PulseSchedule(segments=(PulseSegment(drive, gt_w),),
                             initial_occupation=occ)
    basis = _schedule_basis(schedule)
    state, _ = _execute(schedule, basis, Ket.from_occupation(basis, occ), loss)
    target = _w_target(basis, weights)
    fid, phase = _fidelity_and_phase(state, target)
    expected_phase = -1.0 if variant.endswith("minus") else 1.0
    return ProtocolResult(
        final_state=state, target_state=target, fidelity=fid, global_phase=phase,
        timings={"t_W": _timing(gt_w, g), "total": _timing(gt_w, g)},
        success_probability=None, schedule=schedule,
        details={"variant": variant, "ratio": ratio, "eta": eta,
                 "expected_phase": expected_phase,
                 "target_label": f"|W_{n}> pattern ({variant})"},
    )


def frequency_translate(pair_from: int, pair_to: int, r_from: float,
                        r_to: float, phi_from: float = 0.0, phi_to: float = 0.0,
                        input_amplitudes: Sequence[complex] = (0.0, 1.0),
                        n_pairs: Optional[int] = None,
                        cutoff: Optional[int] = None,
                        g: Optional[float] = None,
                        loss: Optional[LindbladConfig] = None) -> ProtocolResult:
    """Move a photonic state between pump frequencies through the phonon.

    Two sequential swap pulses: pair_from -> phonon, then phonon -> pair_to.
    Fock level k of the input picks up the phase (-1)^k e^{ik(phi_to -
    phi_from)}; the target state includes those phases, so the lossless
    fidelity is 1 and details['level_phases'] records the contract.
    """
    if pair_from == pair_to:
        raise ConfigError("translation needs two distinct pairs")
    if n_pairs is None:
        n_pairs = max(pair_from, pair_to) + 1
    for name, pair in (("pair_from", pair_from), ("pair_to", pair_to)):
        if not 0 <= pair < n_pairs:
            raise ConfigError(f"{name} {pair} out of range for {n_pairs} pairs")
    if not (r_from > 0 and r_to > 0):
        raise ConfigError("swap amplitudes must be > 0")
    amps_in = np.asarray(input_amplitudes, dtype=complex)
    if amps_in.ndim != 1 or amps_in.size < 1:
        raise ConfigError("input_amplitudes must be a 1-d Fock-level list")
    norm = np.linalg.norm(amps_in)
    if norm == 0:
        raise ConfigError("input state has zero norm")
    amps_in = amps_in / norm
    levels = int(amps_in.size - 1)
    if cutoff is None:
        cutoff = max(levels, 1)
    if cutoff < levels:
        raise TruncationBudgetError(
            f"cutoff {cutoff} cannot hold a level-{levels} input"
        )
    basis = build_basis(n_pairs + 1, per_mode_cutoff=cutoff, total_cap=cutoff)
    start = np.zeros(basis.dim, dtype=complex)
    target_amps = np.zeros(basis.dim, dtype=complex)
    phase_step = -cmath.exp(1j * (phi_to - phi_from))
    level_phases = []
    for k in range(levels + 1):
        occ_in = [0] * (n_pairs + 1)
        occ_in[pair_from] = k
        start[basis.index_of(tuple(occ_in))] = amps_in[k]
        occ_out = [0] * (n_pairs + 1)
        occ_out[pair_to] = k
        phase = phase_step ** k
        level_phases.append(phase)
        target_amps[basis.index_of(tuple(occ_out))] = amps_in[k] * phase
    gt_from = math.pi / (2.0 * r_from)
    gt_to = math.pi / (2.0 * r_to)
    schedule = PulseSchedule(
        segments=(
            PulseSegment(_single_pair_drive(n_pairs, pair_from, r_from, phi_from),
                         gt_from),
            PulseSegment(_single_pair_drive(n_pairs, pair_to, r_to, phi_to),
                         gt_to),
        ),
        initial_occupation=tuple([0] * (n_pairs + 1)),
    )
    state, _ = _execute(schedule, basis, Ket(basis, start), loss)
    target = Ket(basis, target_amps)
    fid, phase = _fidelity_and_phase(state, target)
    gt_qft = gt_from + gt_to
    return ProtocolResult(
        final_state=state, target_state=target, fidelity=fid, global_phase=phase,
        timings={"t_qft": _timing(gt_qft, g),
                 "t_pi_from": _timing(gt_from, g),
                 "t_pi_to": _timing(gt_to, g),
                 "total": _timing(gt_qft, g)},
        success_probability=None, schedule=schedule,
        details={"level_phases": tuple(level_phases),
                 "input_amplitudes": tuple(amps_in.tolist()),
                 "target_label": f"pair-{pair_to + 1} translated input"},
    )


def super_pi_time(n: int, drive: Drive, kind: str = "alpha_max",
                  g: Optional[float] = None) -> dict:
    """Swap duration pi/(2 sqrt(eta)) with a structure check on the drive.

    kind='standard' requires N equal amplitudes, 'perfect' the
    sqrt(N-1) : 1 : ... : 1 pattern, 'alpha_max' any non-zero drive.  Returns
    {'gt': ..., 'seconds': ...} (seconds None without g).
    """
    eta = drive.eta
    if eta == 0.0:
        raise ConfigError("super_pi_time needs a non-zero drive")
    r = drive.r
    if kind == "standard":
        if drive.n_pairs != n:
            raise ConfigError(f"drive has {drive.n_pairs} pairs, expected {n}")
        if any(abs(x - r[0]) > 1e-9 * r[0] for x in r):
            raise ConfigError("standard timing requires equal drive amplitudes")
    elif kind == "perfect":
        if drive.n_pairs != n or n < 2:
            raise ConfigError(f"drive has {drive.n_pairs} pairs, expected {n} >= 2")
        base = r[1]
        if any(abs(x - base) > 1e-9 * base for x in r[1:]):
            raise ConfigError("perfect timing requires equal amplitudes past pair 1")
        if abs(r[0] - base * math.sqrt(n - 1)) > 1e-9 * r[0]:
            raise ConfigError(
                "perfect timing requires r_1 = alpha*sqrt(N-1), got "
                f"r_1/alpha = {r[0] / base!r}"
            )
    elif kind != "alpha_max":
        raise ConfigError(f"unknown kind {kind!r}")
    return _timing(math.pi / (2.0 * math.sqrt(eta)), g)


def _preset_loss(params: dict) -> Optional[LindbladConfig]:
    gamma = float(params.pop("gamma_over_g", 0.0))
    if gamma == 0.0:
        return None
    return LindbladConfig(gamma_over_g=gamma)


def run_preset(name: str, params: Optional[Mapping] = None) -> ProtocolResult:
    """Run a named protocol from a flat parameter mapping.

    Common keys: g, gamma_over_g, and either alpha (per-mode) or alpha_max
    (collective sqrt(eta), split per protocol so the swap time is
    pi/(2 g alpha_max) regardless of N).  Unknown keys are rejected.
    """
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; expected one of "
                          + ", ".join(PRESET_NAMES))
    p = dict(params or {})
    g = p.pop("g", None)
    g = float(g) if g is not None else None
    loss = _preset_loss(p)

    def resolve_alpha(eta_per_alpha: float, default_max: float = 4200.0) -> float:
        # eta = eta_per_alpha * alpha^2, so alpha = alpha_max/sqrt(eta_per_alpha)
        if "alpha" in p:
            if "alpha_max" in p:
                raise ConfigError("give either alpha or alpha_max, not both")
            return float(p.pop("alpha"))
        return float(p.pop("alpha_max", default_max)) / math.sqrt(eta_per_alpha)

    if name == "w-standard":
        n = int(p.pop("n", 3))
        if n < 2:
            raise ConfigError(f"W synthesis needs n >= 2, got {n}")
        alpha = resolve_alpha(n)
        result = synthesize_w_standard(
            n, alpha, start=p.pop("start", "heralded"),
            inject_pair=int(p.pop("inject_pair", 0)), g=g, loss=loss,
            herald_xi=p.pop("herald_xi", None),
            herald_cutoff=int(p.pop("herald_cutoff", 8)))
    elif name == "w-perfect":
        n = int(p.pop("n", 3))
        if n < 2:
            raise ConfigError(f"W synthesis needs n >= 2, got {n}")
        alpha = resolve_alpha(2.0 * (n - 1))
        result = synthesize_w_perfect(
            n, alpha, start=p.pop("start", "heralded"),
            inject_pair=int(p.pop("inject_pair", 0)), g=g, loss=loss,
            herald_xi=p.pop("herald_xi", None),
            herald_cutoff=int(p.pop("herald_cutoff", 8)))
    elif name == "w-lasers-on":
        n = int(p.pop("n", 3))
        if n < 2:
            raise ConfigError(f"W synthesis needs n >= 2, got {n}")
        variant = str(p.pop("variant", "standard_plus"))
        alpha = resolve_alpha(lasers_on_ratio(n, variant) ** 2 + (n - 1))
        result = synthesize_w_lasers_on(n, alpha, variant, g=g, loss=loss)
    elif name == "qft":
        pair_from = int(p.pop("pair_from", 0))
        pair_to = int(p.pop("pair_to", 1))
        if "alpha" in p and "alpha_max" in p:
            raise ConfigError("give either alpha or alpha_max, not both")
        base = float(p.pop("alpha", p.pop("alpha_max", 4200.0)))
        result = frequency_translate(
            pair_from, pair_to,
            r_from=float(p.pop("r_from", base)), r_to=float(p.pop("r_to", base)),
            phi_from=float(p.pop("phi_from", 0.0)),
            phi_to=float(p.pop("phi_to", 0.0)),
            input_amplitudes=p.pop("input_amplitudes", (0.0, 1.0)),
            n_pairs=(int(p.pop("n")) if "n" in p else None),
            cutoff=(int(p.pop("cutoff")) if "cutoff" in p else None),
            g=g, loss=loss)
    elif name == "herald":
        xi_r = float(p.pop("r", 0.3))
        xi_phi = float(p.pop("phi", 0.0))
        result = herald_phonon(xi_r * cmath.exp(1j * xi_phi),
                               cutoff=int(p.pop("cutoff", 8)))
    else:
        given = [k for k in ("r", "alpha", "alpha_max") if k in p]
        if len(given) > 1:
            raise ConfigError(
                "give exactly one of r, alpha, alpha_max; got " + ", ".join(given)
            )
        r = float(p.pop(given[0])) if given else 4200.0
        result = pi_pulse_swap(
            pair=int(p.pop("pair", 0)), r=r, phi=float(p.pop("phi", 0.0)),
            n_pairs=(int(p.pop("n")) if "n" in p else None),
            direction=p.pop("direction", "photon_to_phonon"), g=g, loss=loss)
    if p:
        raise ConfigError(
            f"unknown parameter(s) for preset {name}: {', '.join(sorted(p))}"
        )
    return result


def save_schedule(schedule: PulseSchedule, path,
                  herald: Optional[Mapping] = None) -> None:
    """Write a schedule as TOML; floats use repr so they round-trip exactly."""
    lines = []
    occ = ", ".join(str(n) for n in schedule.initial_occupation)
    lines.append(f"initial_state = [{occ}]")
    if herald is not None:
        lines.append("")
        lines.append("[herald]")
        for key in ("r", "phi", "cutoff"):
            if key in herald:
                lines.append(f"{key} = {herald[key]!r}")
    for seg in schedule.segments:
        lines.append("")
        lines.append("[[segment]]")
        lines.append("r = [" + ", ".join(repr(x) for x in seg.drive.r) + "]")
        lines.append("phi = [" + ", ".join(repr(x) for x in seg.drive.phi) + "]")
        lines.append(f"duration_gt = {seg.duration_gt!r}")
    for meas in schedule.measurements:
        lines.append("")
        lines.append("[[measurement]]")
        lines.append(f"after_segment = {meas.after_segment}")
        lines.append(f"mode = {meas.mode}")
        lines.append(f"outcome = {meas.outcome}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_schedule(path) -> tuple[PulseSchedule, Optional[dict]]:
    """Parse a TOML schedule; returns (schedule, herald block or None)."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    allowed = {"initial_state", "segment", "measurement", "herald"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s): {', '.join(sorted(unknown))}")
    if "initial_state" not in data:
        raise ConfigError(f"{path}: missing initial_state")
    if "segment" not in data or not data["segment"]:
        raise ConfigError(f"{path}: needs at least one [[segment]]")
    segments = []
    for k, seg in enumerate(data["segment"]):
        unknown = set(seg) - {"r", "phi", "duration_gt"}
        if unknown:
            raise ConfigError(
                f"{path}: segment {k} has unknown key(s): "
                + ", ".join(sorted(unknown))
            )
        if "r" not in seg or "duration_gt" not in seg:
            raise ConfigError(f"{path}: segment {k} needs r and duration_gt")
        segments.append(PulseSegment(Drive.from_polar(seg["r"], seg.get("phi")),
                                     float(seg["duration_gt"])))
    measurements = []
    for k, m in enumerate(data.get("measurement", ())):
        unknown = set(m) - {"after_segment", "mode", "outcome"}
        if unknown:
            raise ConfigError(
                f"{path}: measurement {k} has unknown key(s): "
                + ", ".join(sorted(unknown))
            )
        measurements.append(Measurement(int(m["after_segment"]), int(m["mode"]),
                                        int(m["outcome"])))
    herald = data.get("herald")
    if herald is not None:
        unknown = set(herald) - {"r", "phi", "cutoff"}
        if unknown:
            raise ConfigError(
                f"{path}: herald has unknown key(s): " + ", ".join(sorted(unknown))
            )
        herald = dict(herald)
    schedule = PulseSchedule(
        segments=tuple(segments),
        initial_occupation=tuple(int(x) for x in data["initial_state"]),
        measurements=tuple(measurements),
    )
    return schedule, herald
