"""Propagators: exact matrix exponentials, the factored closed form, and loss.

All evolution is parameterized by the dimensionless gt.  Closed-form results
for the classical-pump Hamiltonian use theta = gt*sqrt(eta) with eta the
summed squared drive magnitudes.
"""

from __future__ import annotations

import cmath
import dataclasses
import math
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    NonHermitianError,
    SeriesDivergenceError,
    SingularTimeError,
    TraceDriftError,
)
from .fock import Basis, DensityOp, Ket, SparseOp, ladder, number_op, single_excitation_basis
from .hamiltonians import Drive, classical_pump_parts

SINGULARITY_GUARD = 1e-6


@dataclasses.dataclass(frozen=True)
class WeiNormanCoefficients:
    """Scalar coefficients (X, Y, Z) of the factored propagator.

    exp(-i gt (P + Q)) = exp(X P) exp(Y C) exp(Z Q) with P the photon->phonon
    swap, Q its adjoint, and C = [P, Q].  X = Z = -i tan(theta)/sqrt(eta) and
    Y = -log(cos theta)/eta, so the factorization blows up at odd multiples
    of theta = pi/2 where cos vanishes; past pi/2 the log picks up an
    imaginary part and Y is genuinely complex.
    """

    gt: float
    eta: float
    X: complex
    Y: complex
    Z: complex

    @classmethod
    def evaluate(cls, gt: float, eta: float,
                 guard: float = SINGULARITY_GUARD) -> "WeiNormanCoefficients":
        if eta < 0:
            raise ValueError(f"eta must be >= 0, got {eta}")
        if eta == 0.0:
            # zero drive: P = Q = 0, any finite coefficients reproduce identity
            return cls(gt=gt, eta=0.0, X=-1j * gt, Y=gt * gt / 2.0, Z=-1j * gt)
        root = math.sqrt(eta)
        theta = gt * root
        # distance to the nearest odd multiple of pi/2
        k = round((theta - math.pi / 2) / math.pi)
        nearest = math.pi / 2 + k * math.pi
        if abs(theta - nearest) < guard:
            raise SingularTimeError(
                f"theta = gt*sqrt(eta) = {theta!r} is within {guard} of the "
                f"factorization singularity at {nearest!r}"
            )
        x = -1j * math.tan(theta) / root
        y = -cmath.log(complex(math.cos(theta), 0.0)) / eta
        return cls(gt=gt, eta=eta, X=x, Y=y, Z=x)


def _as_amplitudes(state: Ket) -> np.ndarray:
    return state.amplitudes


def evolve_exact(h: SparseOp, state: Ket, gt: float, method: str = "auto",
                 dense_limit: int = 2000, herm_tol: float = 1e-10) -> Ket:
    """Apply exp(-i * gt * H) to a ket.

    'dense' exponentiates the full matrix; 'krylov' uses a Lanczos
    approximation suited to large sparse bases; 'auto' picks by dimension.
    H must be Hermitian within herm_tol relative to its norm.
    """
    h.basis.require_same(state.basis)
    scale = max(1.0, h.norm_inf())
    defect = h.hermiticity_defect()
    if defect > herm_tol * scale:
        raise NonHermitianError(
            f"Hamiltonian hermiticity defect {defect:.3e} exceeds "
            f"{herm_tol:.1e} * {scale:.3e}"
        )
    if method not in ("auto", "dense", "krylov"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "dense" if h.basis.dim <= dense_limit else "krylov"
    amps = state.amplitudes.astype(complex)
    if method == "dense":
        u = scipy.linalg.expm(-1j * gt * h.to_dense())
        out = u @ amps
    else:
        out = _expm_multiply_hermitian(h, amps, -gt)
    return Ket(state.basis, out)


def _expm_multiply_hermitian(h: SparseOp, vec: np.ndarray, t: float,
                             tol: float = 1e-12, max_krylov: int = 80) -> np.ndarray:
    """exp(i * t * H) @ vec for Hermitian H, by Lanczos with full reorthogonalization."""
    if t == 0.0 or np.linalg.norm(vec) == 0.0:
        return vec.copy()
    hnorm = max(h.norm_inf(), 1e-300)
    n_sub = max(1, int(math.ceil(abs(t) * hnorm / 10.0)))
    cur = vec.astype(complex)
    while True:
        dt = t / n_sub
        out = cur
        ok = True
        for _ in range(n_sub):
            out, ok = _lanczos_step(h, out, dt, tol, max_krylov)
            if not ok:
                break
        if ok:
            return out
        n_sub *= 2
        if n_sub > 1_000_000:
            raise SeriesDivergenceError(
                "Krylov propagator failed to converge even with "
                f"{n_sub} substeps"
            )


def _lanczos_step(h: SparseOp, vec: np.ndarray, dt: float, tol: float,
                  max_krylov: int) -> tuple[np.ndarray, bool]:
    csr = h.matrix
    dim = csr.shape[0]
    beta0 = np.linalg.norm(vec)
    m_cap = min(dim, max_krylov)
    basis_vecs = np.empty((m_cap, dim), dtype=complex)
    basis_vecs[0] = vec / beta0
    alphas: list[float] = []
    betas: list[float] = []
    w = csr @ basis_vecs[0]
    alphas.append(float(np.real(np.vdot(basis_vecs[0], w))))
    w = w - alphas[0] * basis_vecs[0]
    m = 1
    while True:
        coeffs = basis_vecs[:m].conj() @ w
        w = w - basis_vecs[:m].T @ coeffs
        beta = float(np.linalg.norm(w))
        lam, s = scipy.linalg.eigh_tridiagonal(alphas, betas)
        y = s @ (np.exp(1j * dt * lam) * s[0, :]) * beta0
        if beta < 1e-14 * beta0:
            # invariant subspace: the projected result is exact
            return basis_vecs[:m].T @ y, True
        err = abs(beta * y[-1])
        if err < tol * beta0:
            return basis_vecs[:m].T @ y, True
        if m == m_cap:
            return vec, False
        betas.append(beta)
        basis_vecs[m] = w / beta
        w = csr @ basis_vecs[m]
        alphas.append(float(np.real(np.vdot(basis_vecs[m], w))))
        w = w - alphas[m] * basis_vecs[m] - betas[m - 1] * basis_vecs[m - 1]
        m += 1


def _apply_exp_series(op: SparseOp, coeff: complex, amps: np.ndarray,
                      max_terms: int, tol: float) -> np.ndarray:
    """exp(coeff * op) @ amps by Taylor series.

    The swap operators are nilpotent on capped bases so the series usually
    terminates exactly; for the diagonal-like commutator it converges
    geometrically once k exceeds |coeff|*||op||.
    """
    csr = op.matrix
    total = amps.astype(complex)
    term = total.copy()
    for k in range(1, max_terms + 1):
        term = (coeff / k) * (csr @ term)
        tnorm = np.linalg.norm(term)
        if tnorm == 0.0:
            return total
        total = total + term
        if tnorm <= tol * max(1.0, float(np.linalg.norm(total))):
            return total
    raise SeriesDivergenceError(
        f"operator exponential series did not converge in {max_terms} terms "
        f"(last term norm {tnorm:.3e}); the factorization is likely being "
        "evaluated too close to its singularity"
    )


def wei_norman_evolve(drive: Drive, state: Ket, gt: float,
                      coefficients: Optional[WeiNormanCoefficients] = None,
                      max_terms: int = 400, tol: float = 1e-15) -> Ket:
    """Propagate under the classical-pump Hamiltonian via the factored form.

    Equivalent to evolve_exact with build_classical_pump_hamiltonian away
    from the singular times; coefficients may be supplied explicitly to
    study perturbed factorizations.
    """
    basis = state.basis
    if basis.mode_count != drive.n_pairs + 1:
        raise ValueError(
            f"state basis has {basis.mode_count} modes; drive with "
            f"{drive.n_pairs} pairs needs {drive.n_pairs + 1}"
        )
    if coefficients is None:
        coefficients = WeiNormanCoefficients.evaluate(gt, drive.eta)
    swap_out, swap_in = classical_pump_parts(drive, basis)
    comm = swap_out @ swap_in - swap_in @ swap_out
    amps = state.amplitudes
    amps = _apply_exp_series(swap_in, coefficients.Z, amps, max_terms, tol)
    amps = _apply_exp_series(comm, coefficients.Y, amps, max_terms, tol)
    amps = _apply_exp_series(swap_out, coefficients.X, amps, max_terms, tol)
    return Ket(basis, amps)


def _default_single_basis(drive: Drive, basis: Optional[Basis]) -> Basis:
    if basis is None:
        return single_excitation_basis(drive.n_pairs)
    if basis.mode_count != drive.n_pairs + 1:
        raise ValueError(
            f"basis has {basis.mode_count} modes; drive with "
            f"{drive.n_pairs} pairs needs {drive.n_pairs + 1}"
        )
    return basis


def closed_form_phonon_start(drive: Drive, gt: float,
                             basis: Optional[Basis] = None) -> Ket:
    """State reached from one phonon and optical vacuum.

    cos(theta) keeps the phonon; -i sin(theta) transfers it into the
    normalized collective photon mode sum_n (alpha_n/sqrt(eta)) |1_n>.
    """
    basis = _default_single_basis(drive, basis)
    eta = drive.eta
    if eta == 0.0:
        raise ValueError("closed form requires a non-zero drive")
    theta = gt * math.sqrt(eta)
    n = drive.n_pairs
    ket = np.zeros(basis.dim, dtype=complex)
    ket[basis.index_of((0,) * n + (1,))] = math.cos(theta)
    coef = -1j * math.sin(theta) / math.sqrt(eta)
    for m, alpha in enumerate(drive.amplitudes):
        occ = [0] * (n + 1)
        occ[m] = 1
        ket[basis.index_of(tuple(occ))] = coef * alpha
    return Ket(basis, ket)


def closed_form_fock_start(drive: Drive, k: int, gt: float,
                           basis: Optional[Basis] = None) -> Ket:
    """State reached from k phonons and optical vacuum.

    Multinomial spread of k quanta between the phonon and the collective
    photon mode; each transferred quantum carries -i sin(theta) and an
    alpha_l/sqrt(eta) branch weight.
    """
    from .fock import build_basis

    if k < 0:
        raise ValueError(f"phonon number must be >= 0, got {k}")
    n = drive.n_pairs
    if basis is None:
        basis = build_basis(n + 1, per_mode_cutoff=k, total_cap=k)
    elif basis.mode_count != n + 1:
        raise ValueError(
            f"basis has {basis.mode_count} modes; drive with {n} pairs "
            f"needs {n + 1}"
        )
    eta = drive.eta
    if eta == 0.0:
        raise ValueError("closed form requires a non-zero drive")
    theta = gt * math.sqrt(eta)
    sin_t, cos_t = math.sin(theta), math.cos(theta)
    weights = [a / math.sqrt(eta) for a in drive.amplitudes]
    amps = np.zeros(basis.dim, dtype=complex)
    for idx in range(basis.dim):
        occ = basis.occupation(idx)
        moved = int(sum(occ[:n]))
        if moved + occ[n] != k:
            continue
        coeff = math.sqrt(math.factorial(k) / math.factorial(k - moved))
        coeff_c = complex(coeff)
        for m_l, w_l in zip(occ[:n], weights):
            coeff_c *= w_l ** m_l / math.sqrt(math.factorial(m_l))
        amps[idx] = coeff_c * (-1j * sin_t) ** moved * cos_t ** (k - moved)
    return Ket(basis, amps)


def closed_form_photon_start(drive: Drive, gt: float,
                             basis: Optional[Basis] = None,
                             pump_mode: int = 0) -> Ket:
    """State reached from a single photon in one pump mode, no phonon.

    Only the collective-mode component of the photon couples; it Rabi-flops
    into the phonon while the orthogonal remainder is stationary.
    """
    basis = _default_single_basis(drive, basis)
    n = drive.n_pairs
    if not 0 <= pump_mode < n:
        raise ValueError(f"pump_mode {pump_mode} out of range for {n} pairs")
    eta = drive.eta
    if eta == 0.0:
        raise ValueError("closed form requires a non-zero drive")
    theta = gt * math.sqrt(eta)
    overlap = np.conj(drive.amplitudes[pump_mode])
    amps = np.zeros(basis.dim, dtype=complex)
    for m, alpha in enumerate(drive.amplitudes):
        occ = [0] * (n + 1)
        occ[m] = 1
        amps[basis.index_of(tuple(occ))] = (
            overlap * alpha / eta * (math.cos(theta) - 1.0)
        )
    start = [0] * (n + 1)
    start[pump_mode] = 1
    amps[basis.index_of(tuple(start))] += 1.0
    amps[basis.index_of((0,) * n + (1,))] = (
        -1j * overlap / math.sqrt(eta) * math.sin(theta)
    )
    return Ket(basis, amps)


@dataclasses.dataclass(frozen=True)
class LindbladConfig:
    """Photon-loss channel parameters for the master equation.

    gamma_over_g is the amplitude decay rate of each lossy optical mode in
    units of g; collapse_modes defaults to every mode except the last
    (phonon).  The fixed-step integrator picks dt = step_safety over the
    fastest rate unless dt is given.
    """

    gamma_over_g: float
    collapse_modes: Optional[tuple[int, ...]] = None
    dt: Optional[float] = None
    method: str = "rk4"
    step_safety: float = 0.05
    trace_tol: float = 1e-4

    def __post_init__(self):
        if self.gamma_over_g < 0 or not math.isfinite(self.gamma_over_g):
            raise ValueError(f"gamma_over_g must be >= 0, got {self.gamma_over_g}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.method not in ("rk4", "adaptive"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.collapse_modes is not None:
            object.__setattr__(self, "collapse_modes",
                               tuple(int(m) for m in self.collapse_modes))


def _lindblad_rhs_builder(h: SparseOp, config: LindbladConfig):
    basis = h.basis
    modes = config.collapse_modes
    if modes is None:
        modes = tuple(range(basis.mode_count - 1))
    for m in modes:
        if not 0 <= m < basis.mode_count:
            raise ValueError(f"collapse mode {m} out of range")
    h_dense = h.to_dense()
    gamma = config.gamma_over_g
    lowers = [ladder(basis, m, "lower").to_dense() for m in modes]
    numbers = [number_op(basis, m).to_dense() for m in modes]
    n_total = sum(numbers) if numbers else np.zeros_like(h_dense)

    def rhs(rho: np.ndarray) -> np.ndarray:
        out = -1j * (h_dense @ rho - rho @ h_dense)
        if gamma > 0 and lowers:
            acc = np.zeros_like(rho)
            for a in lowers:
                acc += a @ rho @ a.conj().T
            out += gamma * acc
            half = 0.5 * gamma
            out -= half * (n_total @ rho + rho @ n_total)
        return out

    return rhs


def lindblad_evolve(h: SparseOp, state, config: LindbladConfig,
                    gt: float) -> DensityOp:
    """Integrate the photon-loss master equation for a duration gt.

    Accepts a Ket or DensityOp start; returns the final DensityOp.  The
    generator is trace-free, so trace drift beyond config.trace_tol means
    the step size failed and raises instead of returning garbage.
    """
    basis = h.basis
    if isinstance(state, Ket):
        rho = DensityOp.from_ket(state).matrix.copy()
        basis.require_same(state.basis)
    elif isinstance(state, DensityOp):
        basis.require_same(state.basis)
        rho = state.matrix.astype(complex).copy()
    else:
        raise TypeError(f"state must be Ket or DensityOp, got {type(state).__name__}")
    if gt < 0:
        raise ValueError(f"duration gt must be >= 0, got {gt}")
    rhs = _lindblad_rhs_builder(h, config)
    if gt == 0:
        return DensityOp(basis, rho)
    trace0 = float(np.real(np.trace(rho)))
    rate = max(config.gamma_over_g, h.norm_inf(), 1e-300)
    dt = config.dt if config.dt is not None else config.step_safety / rate

    if config.method == "rk4":
        steps = max(1, int(math.ceil(gt / dt)))
        step = gt / steps
        for _ in range(steps):
            rho = _rk4_step(rhs, rho, step)
            rho = 0.5 * (rho + rho.conj().T)
        _check_trace(rho, trace0, config.trace_tol)
    else:
        rho = _adaptive_integrate(rhs, rho, gt, dt, trace0, config.trace_tol)
    return DensityOp(basis, rho)


def _rk4_step(rhs, rho: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(rho)
    k2 = rhs(rho + 0.5 * h * k1)
    k3 = rhs(rho + 0.5 * h * k2)
    k4 = rhs(rho + h * k3)
    return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_trace(rho: np.ndarray, trace0: float, tol: float):
    tr = np.trace(rho)
    if not np.isfinite(rho).all():
        raise TraceDriftError("density matrix left the finite range")
    if abs(tr - trace0) > tol:
        raise TraceDriftError(
            f"trace drifted from {trace0!r} to {tr!r}; reduce the step size"
        )


def _adaptive_integrate(rhs, rho: np.ndarray, gt: float, h0: float,
                        trace0: float, trace_tol: float,
                        rtol: float = 1e-9) -> np.ndarray:
    t = 0.0
    h = min(h0, gt)
    while t < gt:
        h = min(h, gt - t)
        full = _rk4_step(rhs, rho, h)
        mid = _rk4_step(rhs, rho, 0.5 * h)
        half = _rk4_step(rhs, mid, 0.5 * h)
        err = float(np.linalg.norm(full - half)) / 15.0
        scale = rtol * max(1.0, float(np.linalg.norm(half)))
        if err <= scale or h <= 1e-12 * gt:
            rho = half + (half - full) / 15.0
            rho = 0.5 * (rho + rho.conj().T)
            t += h
            _check_trace(rho, trace0, trace_tol)
        grow = 0.9 * (scale / err) ** 0.2 if err > 0 else 4.0
        h = h * min(4.0, max(0.1, grow))
    return rho
