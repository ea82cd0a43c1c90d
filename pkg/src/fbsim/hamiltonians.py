"""Hamiltonian builders and physical-parameter containers.

Every builder returns the Hamiltonian divided by hbar*g, i.e. a dimensionless
operator whose natural evolution parameter is gt.  Phase matching
(omega_pump - omega_stokes = omega_phonon per pair) is validated on
construction, not simulated; the free part H0 commutes with the interaction
when it holds and is therefore excluded unless explicitly requested.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .fock import Basis, SparseOp, ladder_product, number_op

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

HBAR = 1.054571817e-34  # J s
SPEED_OF_LIGHT = 299792458.0  # m/s

PHASE_MATCH_RTOL = 1e-9


@dataclasses.dataclass(frozen=True)
class SystemSpec:
    """Physical parameters of the pump/Stokes comb coupled to one phonon mode.

    Frequencies are angular (rad/s).  g is the single-photon optomechanical
    coupling rate and gamma the optical amplitude decay rate; both enter the
    dynamics only through gt and gamma/g.
    """

    n_pairs: int
    g: float
    omega_phonon: float
    omega_pump: tuple[float, ...]
    omega_stokes: tuple[float, ...]
    gamma: float = 0.0

    def __post_init__(self):
        if self.n_pairs < 1:
            raise ConfigError(f"n_pairs must be >= 1, got {self.n_pairs}")
        if not (self.g > 0.0 and math.isfinite(self.g)):
            raise ConfigError(f"g must be positive and finite, got {self.g}")
        if self.gamma < 0.0 or not math.isfinite(self.gamma):
            raise ConfigError(f"gamma must be >= 0 and finite, got {self.gamma}")
        if self.omega_phonon <= 0.0:
            raise ConfigError(f"omega_phonon must be positive, got {self.omega_phonon}")
        for name, seq in (("omega_pump", self.omega_pump),
                          ("omega_stokes", self.omega_stokes)):
            if len(seq) != self.n_pairs:
                raise ConfigError(
                    f"{name} has {len(seq)} entries for n_pairs={self.n_pairs}"
                )
        for n, (wp, ws) in enumerate(zip(self.omega_pump, self.omega_stokes)):
            if abs((wp - ws) - self.omega_phonon) > PHASE_MATCH_RTOL * self.omega_phonon:
                raise ConfigError(
                    f"pair {n} violates phase matching: omega_pump - omega_stokes "
                    f"= {wp - ws!r}, omega_phonon = {self.omega_phonon!r}"
                )

    @classmethod
    def phase_matched(cls, n_pairs: int, g: float, omega_phonon: float,
                      gamma: float = 0.0, omega_base: float = 1.2e15) -> "SystemSpec":
        """Build a spec with pairs on a comb: every third optical slot skipped
        so each Stokes line has a unique pump partner one phonon quantum above it.
        """
        stokes = tuple(omega_base + 3 * n * omega_phonon for n in range(n_pairs))
        pump = tuple(w + omega_phonon for w in stokes)
        return cls(n_pairs=n_pairs, g=g, gamma=gamma, omega_phonon=omega_phonon,
                   omega_pump=pump, omega_stokes=stokes)

    _FIELDS = ("n_pairs", "g_rad_per_s", "gamma_rad_per_s", "omega_phonon_rad_per_s",
               "omega_pump_rad_per_s", "omega_stokes_rad_per_s")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "SystemSpec":
        unknown = set(data) - set(cls._FIELDS)
        if unknown:
            raise ConfigError(f"unknown system key(s): {', '.join(sorted(unknown))}")
        for key in ("n_pairs", "g_rad_per_s", "omega_phonon_rad_per_s"):
            if key not in data:
                raise ConfigError(f"system section is missing required key {key!r}")
        n_pairs = int(data["n_pairs"])
        omega_phonon = float(data["omega_phonon_rad_per_s"])
        if "omega_stokes_rad_per_s" in data:
            stokes = tuple(float(w) for w in data["omega_stokes_rad_per_s"])
            if "omega_pump_rad_per_s" in data:
                pump = tuple(float(w) for w in data["omega_pump_rad_per_s"])
            else:
                pump = tuple(w + omega_phonon for w in stokes)
        elif "omega_pump_rad_per_s" in data:
            pump = tuple(float(w) for w in data["omega_pump_rad_per_s"])
            stokes = tuple(w - omega_phonon for w in pump)
        else:
            stokes = tuple(1.2e15 + 3 * n * omega_phonon for n in range(n_pairs))
            pump = tuple(w + omega_phonon for w in stokes)
        return cls(n_pairs=n_pairs, g=float(data["g_rad_per_s"]),
                   gamma=float(data.get("gamma_rad_per_s", 0.0)),
                   omega_phonon=omega_phonon, omega_pump=pump, omega_stokes=stokes)

    @property
    def gamma_over_g(self) -> float:
        return self.gamma / self.g

    def seconds(self, gt: float) -> float:
        """Convert a dimensionless gt duration to seconds."""
        return gt / self.g


@dataclasses.dataclass(frozen=True)
class Drive:
    """Classical Stokes drive amplitudes alpha_n = r_n exp(i phi_n), one per pair."""

    amplitudes: tuple[complex, ...]

    def __post_init__(self):
        if len(self.amplitudes) < 1:
            raise ConfigError("drive needs at least one amplitude")
        amps = tuple(complex(a) for a in self.amplitudes)
        if any(not (math.isfinite(a.real) and math.isfinite(a.imag)) for a in amps):
            raise ConfigError("drive amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_polar(cls, r: Sequence[float], phi: Sequence[float] = None) -> "Drive":
        r = [float(x) for x in r]
        if phi is None:
            phi = [0.0] * len(r)
        phi = [float(x) for x in phi]
        if len(phi) != len(r):
            raise ConfigError(f"drive has {len(r)} r values but {len(phi)} phi values")
        if any(x < 0 for x in r):
            raise ConfigError("drive magnitudes r must be >= 0")
        return cls(tuple(x * complex(math.cos(p), math.sin(p)) for x, p in zip(r, phi)))

    @classmethod
    def from_mapping(cls, data: Mapping) -> "Drive":
        unknown = set(data) - {"r", "phi"}
        if unknown:
            raise ConfigError(f"unknown drive key(s): {', '.join(sorted(unknown))}")
        if "r" not in data:
            raise ConfigError("drive section is missing required key 'r'")
        return cls.from_polar(data["r"], data.get("phi"))

    @property
    def n_pairs(self) -> int:
        return len(self.amplitudes)

    @property
    def eta(self) -> float:
        """Sum of squared magnitudes; the collective Rabi rate is g*sqrt(eta)."""
        return float(sum(abs(a) ** 2 for a in self.amplitudes))

    @property
    def r(self) -> tuple[float, ...]:
        return tuple(abs(a) for a in self.amplitudes)

    @property
    def phi(self) -> tuple[float, ...]:
        return tuple(math.atan2(a.imag, a.real) for a in self.amplitudes)


@dataclasses.dataclass(frozen=True)
class PowerBudget:
    """Waveguide parameters tying optical power to intracavity photon number.

    alpha**2 = P * length / (hbar * omega_optical * group_velocity): the photon
    number inside a waveguide of the given length carrying power P.
    """

    omega_optical: float   # rad/s
    group_velocity: float  # m/s
    length: float          # m

    def __post_init__(self):
        for name in ("omega_optical", "group_velocity", "length"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive and finite, got {v}")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "PowerBudget":
        fields = {"omega_optical_rad_per_s", "group_velocity_m_per_s", "length_m"}
        unknown = set(data) - fields
        if unknown:
            raise ConfigError(f"unknown power key(s): {', '.join(sorted(unknown))}")
        missing = fields - set(data)
        if missing:
            raise ConfigError(f"power section is missing {', '.join(sorted(missing))}")
        return cls(omega_optical=float(data["omega_optical_rad_per_s"]),
                   group_velocity=float(data["group_velocity_m_per_s"]),
                   length=float(data["length_m"]))


def alpha_from_power(budget: PowerBudget, power_watts: float) -> float:
    if power_watts < 0:
        raise ConfigError(f"power must be >= 0, got {power_watts}")
    n_cav = power_watts * budget.length / (
        HBAR * budget.omega_optical * budget.group_velocity)
    return math.sqrt(n_cav)


def power_from_alpha(budget: PowerBudget, alpha: float) -> float:
    return (HBAR * budget.omega_optical * budget.group_velocity
            * alpha ** 2 / budget.length)


def reference_budget() -> PowerBudget:
    """Budget whose 50 mW, 4 mm working point gives alpha_max close to 4.2e3.

    1550 nm light (omega = 2 pi c / lambda) at group velocity 8.85e7 m/s, i.e.
    group index about 3.4 as in silicon waveguides.  With the often-quoted
    silica-like group velocity 2.0e8 m/s the same power gives alpha_max about
    2.8e3 instead; the slow-light value is what reproduces 4.2e3.
    """
    return PowerBudget(omega_optical=2 * math.pi * SPEED_OF_LIGHT / 1.55e-6,
                       group_velocity=8.85e7, length=4.0e-3)


def build_ladder_hamiltonian(basis: Basis, window: int) -> SparseOp:
    """Interaction over a frequency ladder of 2*window+1 optical modes + phonon.

    Basis modes 0..2*window are optical, ordered by ascending frequency, and
    the last mode is the phonon.  Each term scatters a photon one rung down
    while creating a phonon (plus the Hermitian conjugate): in units of
    hbar*g, sum_m a_m adag_{m-1} bdag + h.c.
    """
    n_opt = 2 * window + 1
    if basis.mode_count != n_opt + 1:
        raise ValueError(
            f"basis has {basis.mode_count} modes; window {window} needs {n_opt + 1}"
        )
    ph = n_opt
    h = SparseOp.zero(basis)
    for m in range(1, n_opt):
        term = ladder_product(
            basis, [(m, "lower"), (m - 1, "raise"), (ph, "raise")]
        )
        h = h + term + term.dagger()
    return h


def build_truncated_hamiltonian(spec: SystemSpec, basis: Basis,
                                include_free: bool = False) -> SparseOp:
    """Pairwise pump/Stokes/phonon interaction on the reduced mode set.

    Basis modes: pumps 0..N-1, Stokes N..2N-1, phonon last.  In units of
    hbar*g the interaction is sum_n a_pn adag_sn bdag + h.c.; with
    include_free the diagonal (omega/g) * n terms are added, which commute
    with the interaction when phase matching holds.
    """
    n = spec.n_pairs
    if basis.mode_count != 2 * n + 1:
        raise ValueError(
            f"basis has {basis.mode_count} modes; n_pairs={n} needs {2 * n + 1}"
        )
    ph = 2 * n
    h = SparseOp.zero(basis)
    for k in range(n):
        term = ladder_product(
            basis, [(k, "lower"), (n + k, "raise"), (ph, "raise")]
        )
        h = h + term + term.dagger()
    if include_free:
        for k in range(n):
            h = h + (spec.omega_pump[k] / spec.g) * number_op(basis, k)
            h = h + (spec.omega_stokes[k] / spec.g) * number_op(basis, n + k)
        h = h + (spec.omega_phonon / spec.g) * number_op(basis, ph)
    return h


def classical_pump_parts(drive: Drive, basis: Basis) -> tuple[SparseOp, SparseOp]:
    """(A bdag, Adag b) with A = sum_n conj(alpha_n) a_n, built atomically.

    Basis modes: pumps 0..N-1, phonon last.  The two parts are mutual
    adjoints; their sum is the classical-pump Hamiltonian.
    """
    n = drive.n_pairs
    if basis.mode_count != n + 1:
        raise ValueError(
            f"basis has {basis.mode_count} modes; drive with {n} pairs needs {n + 1}"
        )
    ph = n
    swap_out = SparseOp.zero(basis)  # A bdag: photon out, phonon in
    for k, alpha in enumerate(drive.amplitudes):
        swap_out = swap_out + np.conj(alpha) * ladder_product(
            basis, [(k, "lower"), (ph, "raise")]
        )
    return swap_out, swap_out.dagger()


def build_classical_pump_hamiltonian(drive: Drive, basis: Basis) -> SparseOp:
    """Strong-drive Hamiltonian A bdag + Adag b in units of hbar*g."""
    swap_out, swap_in = classical_pump_parts(drive, basis)
    return swap_out + swap_in


def collective_lowering(drive: Drive, basis: Basis) -> SparseOp:
    """A = sum_n conj(alpha_n) a_n on a pumps+phonon basis."""
    n = drive.n_pairs
    if basis.mode_count != n + 1:
        raise ValueError(
            f"basis has {basis.mode_count} modes; drive with {n} pairs needs {n + 1}"
        )
    op = SparseOp.zero(basis)
    for k, alpha in enumerate(drive.amplitudes):
        op = op + np.conj(alpha) * ladder_product(basis, [(k, "lower")])
    return op


def build_squeezer_generator(basis: Basis, xi: complex) -> SparseOp:
    """Two-mode squeeze generator xi adag bdag - conj(xi) a b.

    Basis mode 0 is the optical (Stokes) mode, mode 1 the phonon.  The
    generator is anti-Hermitian; expm of it is the squeeze operator.
    """
    if basis.mode_count != 2:
        raise ValueError(f"squeezer basis needs exactly 2 modes, got {basis.mode_count}")
    xi = complex(xi)
    up = ladder_product(basis, [(0, "raise"), (1, "raise")])
    down = ladder_product(basis, [(0, "lower"), (1, "lower")])
    return xi * up - np.conj(xi) * down


def build_beamsplitter_generator(basis: Basis, mu: complex,
                                 pump_mode: int = 0) -> SparseOp:
    """Photon-phonon beamsplitter generator mu adag b - conj(mu) a bdag.

    The phonon is the last basis mode.  Under the classical-pump Hamiltonian
    a pulse of duration gt on a single pair realizes expm of this generator
    with mu = -i * gt * alpha.
    """
    ph = basis.mode_count - 1
    if not 0 <= pump_mode < ph:
        raise ValueError(f"pump_mode {pump_mode} out of range for {ph} optical modes")
    mu = complex(mu)
    up = ladder_product(basis, [(pump_mode, "raise"), (ph, "lower")])
    down = ladder_product(basis, [(pump_mode, "lower"), (ph, "raise")])
    return mu * up - np.conj(mu) * down


def load_config_toml(path) -> dict:
    """Parse a TOML config with [system], optional [drive] and [power] tables.

    Returns {'system': SystemSpec, 'drive': Drive|None, 'power': PowerBudget|None,
    'extras': dict of any other top-level tables} without interpreting extras.
    """
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if "system" not in data:
        raise ConfigError(f"{path}: missing [system] table")
    system = SystemSpec.from_mapping(data["system"])
    drive = Drive.from_mapping(data["drive"]) if "drive" in data else None
    power = PowerBudget.from_mapping(data["power"]) if "power" in data else None
    extras = {k: v for k, v in data.items() if k not in ("system", "drive", "power")}
    return {"system": system, "drive": drive, "power": power, "extras": extras}
