"""Shared brute-force reference implementations.

Everything here is built from itertools and dense numpy/scipy only, with no
reliance on the package's operator plumbing, so tests compare two
independently derived answers.
"""

import itertools
import math

import numpy as np
import scipy.linalg


def brute_states(n_modes, cutoffs, total_cap=None):
    """All occupation tuples within the cutoffs, in lexicographic order."""
    if isinstance(cutoffs, int):
        cutoffs = (cutoffs,) * n_modes
    out = []
    for occ in itertools.product(*(range(c + 1) for c in cutoffs)):
        if total_cap is None or sum(occ) <= total_cap:
            out.append(occ)
    out.sort()
    return out


def brute_pump_hamiltonian(amplitudes, states):
    """Dense A b^dag + A^dag b with A = sum conj(alpha_m) a_m, phonon last.

    Matrix elements come straight from the sqrt(n) ladder algebra applied to
    occupation tuples; amplitudes that would leave the state list are
    dropped, matching a projector-truncated operator.
    """
    idx = {occ: i for i, occ in enumerate(states)}
    dim = len(states)
    ph = len(states[0]) - 1
    h = np.zeros((dim, dim), dtype=complex)
    for occ in states:
        j = idx[occ]
        for m, alpha in enumerate(amplitudes):
            if occ[m] >= 1:
                new = list(occ)
                new[m] -= 1
                new[ph] += 1
                t = tuple(new)
                if t in idx:
                    amp = np.conj(alpha) * math.sqrt(occ[m]) * math.sqrt(occ[ph] + 1)
                    h[idx[t], j] += amp
    return h + h.conj().T


def brute_ladder_hamiltonian(window, states):
    """Dense sum_m a_m a_{m-1}^dag b^dag + h.c. over 2*window+1 optical modes."""
    idx = {occ: i for i, occ in enumerate(states)}
    dim = len(states)
    n_opt = 2 * window + 1
    ph = n_opt
    h = np.zeros((dim, dim), dtype=complex)
    for occ in states:
        j = idx[occ]
        for m in range(1, n_opt):
            if occ[m] >= 1:
                new = list(occ)
                new[m] -= 1
                new[m - 1] += 1
                new[ph] += 1
                t = tuple(new)
                if t in idx:
                    amp = (math.sqrt(occ[m]) * math.sqrt(occ[m - 1] + 1)
                           * math.sqrt(occ[ph] + 1))
                    h[idx[t], j] += amp
    return h + h.conj().T


def brute_evolve(h, psi, gt):
    """exp(-1j*gt*h) @ psi by dense scaling-and-squaring."""
    return scipy.linalg.expm(-1j * gt * h) @ psi


def brute_lowering(states, mode):
    """Dense annihilation operator for one mode over an occupation-tuple list."""
    idx = {occ: i for i, occ in enumerate(states)}
    dim = len(states)
    a = np.zeros((dim, dim), dtype=complex)
    for occ in states:
        if occ[mode] >= 1:
            new = list(occ)
            new[mode] -= 1
            t = tuple(new)
            if t in idx:
                a[idx[t], idx[occ]] = math.sqrt(occ[mode])
    return a


def brute_lindblad_final(h, gamma, lower_ops, rho0, gt):
    """Exact master-equation propagation by exponentiating the superoperator.

    Row-major vectorization: vec(A rho B) = (A kron B.T) vec(rho).
    """
    dim = h.shape[0]
    eye = np.eye(dim)
    lindblad = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for a in lower_ops:
        n_op = a.conj().T @ a
        lindblad += gamma * np.kron(a, a.conj())
        lindblad -= 0.5 * gamma * (np.kron(n_op, eye) + np.kron(eye, n_op.T))
    vec = scipy.linalg.expm(gt * lindblad) @ rho0.reshape(-1)
    return vec.reshape(dim, dim)


def brute_squeezed_vacuum(xi, cutoff):
    """exp(xi a^dag b^dag - conj(xi) a b) |0,0> on a two-mode cutoff basis."""
    states = brute_states(2, cutoff)
    idx = {occ: i for i, occ in enumerate(states)}
    dim = len(states)
    gen = np.zeros((dim, dim), dtype=complex)
    for occ in states:
        j = idx[occ]
        up = (occ[0] + 1, occ[1] + 1)
        if up in idx:
            gen[idx[up], j] += xi * math.sqrt(occ[0] + 1) * math.sqrt(occ[1] + 1)
        if occ[0] >= 1 and occ[1] >= 1:
            down = (occ[0] - 1, occ[1] - 1)
            gen[idx[down], j] -= np.conj(xi) * math.sqrt(occ[0]) * math.sqrt(occ[1])
    vac = np.zeros(dim, dtype=complex)
    vac[idx[(0, 0)]] = 1.0
    return states, scipy.linalg.expm(gen) @ vac


def random_drive_arrays(rng, n):
    r = rng.uniform(0.2, 2.0, size=n)
    phi = rng.uniform(-math.pi, math.pi, size=n)
    return r, phi


def random_ket_array(rng, dim):
    raw = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return raw / np.linalg.norm(raw)


def safe_theta(rng, lo=0.05, hi=3.09, guard=0.08):
    """Random rotation angle away from the factored-propagator singularity."""
    while True:
        theta = float(rng.uniform(lo, hi))
        if abs(theta - math.pi / 2) > guard:
            return theta
