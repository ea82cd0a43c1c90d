"""Truncated multimode bosonic Fock space with sparse operators.

Basis states are occupation vectors enumerated in lexicographic order.  By
convention the phonon mode, where one is present, is the last mode of the
vector; optical modes come first.  All operators are projector-truncated:
matrix elements whose target occupation falls outside the basis are dropped.
"""

from __future__ import annotations

import re
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import BasisMismatchError, BasisSizeError, StateFormatError

DEFAULT_MAX_DIM = 2_000_000


def _normalize_cutoffs(mode_count: int, per_mode_cutoff) -> tuple[int, ...]:
    if mode_count < 1:
        raise ValueError(f"mode_count must be >= 1, got {mode_count}")
    if isinstance(per_mode_cutoff, (int, np.integer)):
        cutoffs = (int(per_mode_cutoff),) * mode_count
    else:
        cutoffs = tuple(int(c) for c in per_mode_cutoff)
    if len(cutoffs) != mode_count:
        raise ValueError(
            f"per_mode_cutoff has {len(cutoffs)} entries for {mode_count} modes"
        )
    if any(c < 0 for c in cutoffs):
        raise ValueError(f"cutoffs must be >= 0, got {cutoffs}")
    return cutoffs


def _count_states(cutoffs: Sequence[int], total_cap) -> int:
    if total_cap is None:
        n = 1
        for c in cutoffs:
            n *= c + 1
        return n
    # ways[t] = number of partial vectors with running total t
    cap = int(total_cap)
    ways = [0] * (cap + 1)
    ways[0] = 1
    for c in cutoffs:
        nxt = [0] * (cap + 1)
        for t, w in enumerate(ways):
            if not w:
                continue
            for n in range(min(c, cap - t) + 1):
                nxt[t + n] += w
        ways = nxt
    return sum(ways)


def _iter_occupations(cutoffs: Sequence[int], total_cap) -> Iterator[tuple[int, ...]]:
    nmodes = len(cutoffs)
    occ = [0] * nmodes
    total = 0
    while True:
        yield tuple(occ)
        k = nmodes - 1
        while k >= 0:
            if occ[k] < cutoffs[k] and (total_cap is None or total < total_cap):
                occ[k] += 1
                total += 1
                break
            total -= occ[k]
            occ[k] = 0
            k -= 1
        if k < 0:
            return


class Basis:
    """Ordered, indexed set of occupation vectors.

    Attributes
    ----------
    cutoffs : tuple of int
        Inclusive per-mode occupation limits.
    total_cap : int or None
        Optional cap on the total occupation across all modes.
    states : ndarray, shape (dim, mode_count)
        Occupation vectors in lexicographic order.
    """

    def __init__(self, cutoffs: Sequence[int], total_cap=None,
                 max_dim: int = DEFAULT_MAX_DIM):
        self.cutoffs = tuple(int(c) for c in cutoffs)
        self.total_cap = None if total_cap is None else int(total_cap)
        if self.total_cap is not None and self.total_cap < 0:
            raise ValueError(f"total_cap must be >= 0, got {self.total_cap}")
        dim = _count_states(self.cutoffs, self.total_cap)
        if dim > max_dim:
            raise BasisSizeError(
                f"basis would hold {dim} states, above the limit of {max_dim}"
            )
        self.states = np.array(
            list(_iter_occupations(self.cutoffs, self.total_cap)), dtype=np.int64
        )
        self.states.setflags(write=False)
        self._index = {tuple(row): i for i, row in enumerate(self.states.tolist())}

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def mode_count(self) -> int:
        return len(self.cutoffs)

    def index_of(self, occupation: Sequence[int]) -> int:
        key = tuple(int(n) for n in occupation)
        try:
            return self._index[key]
        except KeyError:
            raise ValueError(f"occupation {key} is not in this basis") from None

    def contains(self, occupation: Sequence[int]) -> bool:
        return tuple(int(n) for n in occupation) in self._index

    def occupation(self, i: int) -> tuple[int, ...]:
        return tuple(self.states[i].tolist())

    def same_as(self, other: "Basis") -> bool:
        return (
            isinstance(other, Basis)
            and self.cutoffs == other.cutoffs
            and self.total_cap == other.total_cap
        )

    def require_same(self, other: "Basis") -> None:
        if not self.same_as(other):
            raise BasisMismatchError(
                f"basis mismatch: cutoffs {self.cutoffs} cap {self.total_cap} "
                f"vs cutoffs {other.cutoffs} cap {other.total_cap}"
            )

    def __repr__(self) -> str:
        return f"Basis(cutoffs={self.cutoffs}, total_cap={self.total_cap}, dim={self.dim})"


def build_basis(mode_count: int, per_mode_cutoff, total_cap=None,
                max_dim: int = DEFAULT_MAX_DIM) -> Basis:
    """Enumerate the truncated Fock basis for `mode_count` modes.

    `per_mode_cutoff` is an int applied to every mode or a sequence of
    per-mode limits; `total_cap` optionally bounds the summed occupation.
    Raises BasisSizeError when the state count would exceed `max_dim`.
    """
    return Basis(_normalize_cutoffs(mode_count, per_mode_cutoff), total_cap, max_dim)


def single_excitation_basis(n_pumps: int) -> Basis:
    """Basis holding the vacuum plus one excitation among n_pumps pumps + phonon."""
    return build_basis(n_pumps + 1, 1, total_cap=1)


Pattern = Union[Callable[[tuple[int, ...]], bool], Mapping[int, int]]


def _pattern_mask(basis: Basis, pattern: Pattern) -> np.ndarray:
    if callable(pattern):
        return np.fromiter(
            (bool(pattern(tuple(row))) for row in basis.states.tolist()),
            dtype=bool,
            count=basis.dim,
        )
    mask = np.ones(basis.dim, dtype=bool)
    for mode, occ in pattern.items():
        mode = int(mode)
        if not 0 <= mode < basis.mode_count:
            raise ValueError(f"pattern refers to mode {mode} of {basis.mode_count}")
        mask &= basis.states[:, mode] == int(occ)
    return mask


class Ket:
    """State vector over a Basis, complex128 amplitudes."""

    def __init__(self, basis: Basis, amplitudes):
        amps = np.asarray(amplitudes, dtype=np.complex128)
        if amps.shape != (basis.dim,):
            raise ValueError(f"amplitudes shape {amps.shape} != ({basis.dim},)")
        self.basis = basis
        self.amplitudes = amps

    @classmethod
    def vacuum(cls, basis: Basis) -> "Ket":
        return cls.from_occupation(basis, (0,) * basis.mode_count)

    @classmethod
    def from_occupation(cls, basis: Basis, occupation, amplitude=1.0) -> "Ket":
        amps = np.zeros(basis.dim, dtype=np.complex128)
        amps[basis.index_of(occupation)] = amplitude
        return cls(basis, amps)

    @classmethod
    def from_components(cls, basis: Basis, components: Mapping) -> "Ket":
        """Build from a mapping of occupation tuple -> amplitude."""
        amps = np.zeros(basis.dim, dtype=np.complex128)
        for occ, amp in components.items():
            amps[basis.index_of(occ)] += amp
        return cls(basis, amps)

    def copy(self) -> "Ket":
        return Ket(self.basis, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "Ket":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return Ket(self.basis, self.amplitudes / n)

    def inner(self, other: "Ket") -> complex:
        """<self|other>."""
        self.basis.require_same(other.basis)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def amplitude(self, occupation) -> complex:
        return complex(self.amplitudes[self.basis.index_of(occupation)])

    def __repr__(self) -> str:
        return f"Ket(dim={self.basis.dim}, norm={self.norm():.6g})"


class DensityOp:
    """Density operator over a Basis, dense complex128 matrix."""

    def __init__(self, basis: Basis, matrix):
        mat = np.asarray(matrix, dtype=np.complex128)
        if mat.shape != (basis.dim, basis.dim):
            raise ValueError(f"matrix shape {mat.shape} != square dim {basis.dim}")
        self.basis = basis
        self.matrix = mat

    @classmethod
    def from_ket(cls, ket: Ket) -> "DensityOp":
        return cls(ket.basis, np.outer(ket.amplitudes, ket.amplitudes.conj()))

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    def __repr__(self) -> str:
        return f"DensityOp(dim={self.basis.dim}, trace={self.trace():.6g})"


State = Union[Ket, DensityOp]


class SparseOp:
    """Sparse operator on a Basis (CSR storage).

    Duplicate (row, col) entries given at construction are summed.
    """

    def __init__(self, basis: Basis, matrix):
        if sp.issparse(matrix):
            mat = matrix.tocsr().astype(np.complex128)
        else:
            mat = sp.csr_matrix(np.asarray(matrix, dtype=np.complex128))
        if mat.shape != (basis.dim, basis.dim):
            raise ValueError(f"matrix shape {mat.shape} != square dim {basis.dim}")
        mat.sum_duplicates()
        self.basis = basis
        self.matrix = mat

    @classmethod
    def from_triplets(cls, basis: Basis,
                      triplets: Iterable[tuple[int, int, complex]]) -> "SparseOp":
        rows, cols, vals = [], [], []
        for r, c, v in triplets:
            rows.append(r)
            cols.append(c)
            vals.append(v)
        mat = sp.coo_matrix(
            (np.asarray(vals, dtype=np.complex128), (rows, cols)),
            shape=(basis.dim, basis.dim),
        )
        return cls(basis, mat.tocsr())

    @classmethod
    def zero(cls, basis: Basis) -> "SparseOp":
        return cls(basis, sp.csr_matrix((basis.dim, basis.dim), dtype=np.complex128))

    @classmethod
    def identity(cls, basis: Basis) -> "SparseOp":
        return cls(basis, sp.identity(basis.dim, dtype=np.complex128, format="csr"))

    def dagger(self) -> "SparseOp":
        return SparseOp(self.basis, self.matrix.conj().T.tocsr())

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def entries(self) -> list[tuple[int, int, complex]]:
        coo = self.matrix.tocoo()
        return [
            (int(r), int(c), complex(v))
            for r, c, v in zip(coo.row, coo.col, coo.data)
        ]

    def hermiticity_defect(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return 0.0 if d.nnz == 0 else float(np.abs(d.data).max())

    def norm_inf(self) -> float:
        """Maximum absolute row sum; upper bound on the spectral radius."""
        if self.matrix.nnz == 0:
            return 0.0
        return float(np.abs(self.matrix).sum(axis=1).max())

    def _wrap(self, mat) -> "SparseOp":
        return SparseOp(self.basis, mat)

    def __add__(self, other: "SparseOp") -> "SparseOp":
        self.basis.require_same(other.basis)
        return self._wrap(self.matrix + other.matrix)

    def __sub__(self, other: "SparseOp") -> "SparseOp":
        self.basis.require_same(other.basis)
        return self._wrap(self.matrix - other.matrix)

    def __mul__(self, scalar) -> "SparseOp":
        return self._wrap(self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SparseOp":
        return self._wrap(-self.matrix)

    def __matmul__(self, other: "SparseOp") -> "SparseOp":
        self.basis.require_same(other.basis)
        return self._wrap((self.matrix @ other.matrix).tocsr())

    def __repr__(self) -> str:
        return f"SparseOp(dim={self.basis.dim}, nnz={self.matrix.nnz})"


def ladder(basis: Basis, mode: int, kind: str) -> SparseOp:
    """Single-mode raising or lowering operator, projector-truncated.

    kind is 'raise' or 'lower'.  Elements whose target state lies outside the
    basis (above a cutoff or the total cap) are dropped; use `leakage_weight`
    to bound the norm such truncation can remove from a given state.
    """
    return ladder_product(basis, [(mode, kind)])


def ladder_product(basis: Basis, factors: Sequence[tuple[int, str]]) -> SparseOp:
    """Product of ladder operators applied as one atomic transition.

    `factors` lists (mode, 'raise'|'lower') in operator order: the rightmost
    factor acts first.  Building multi-mode terms this way matters on capped
    bases, where multiplying separately truncated factor matrices would drop
    paths whose intermediate occupation leaves the basis even though the net
    transition stays inside it.
    """
    nmodes = basis.mode_count
    for mode, kind in factors:
        if not 0 <= mode < nmodes:
            raise ValueError(f"mode {mode} out of range for {nmodes} modes")
        if kind not in ("raise", "lower"):
            raise ValueError(f"kind must be 'raise' or 'lower', got {kind!r}")
    rows, cols, vals = [], [], []
    for i, occ in enumerate(basis.states.tolist()):
        cur = list(occ)
        amp = 1.0
        dead = False
        for mode, kind in reversed(factors):
            n = cur[mode]
            if kind == "lower":
                if n == 0:
                    dead = True
                    break
                amp *= np.sqrt(n)
                cur[mode] = n - 1
            else:
                amp *= np.sqrt(n + 1)
                cur[mode] = n + 1
        if dead:
            continue
        j = basis._index.get(tuple(cur))
        if j is None:
            continue  # projector truncation
        rows.append(j)
        cols.append(i)
        vals.append(amp)
    mat = sp.coo_matrix(
        (np.asarray(vals, dtype=np.complex128), (rows, cols)),
        shape=(basis.dim, basis.dim),
    )
    return SparseOp(basis, mat.tocsr())


def number_op(basis: Basis, mode: int) -> SparseOp:
    if not 0 <= mode < basis.mode_count:
        raise ValueError(f"mode {mode} out of range for {basis.mode_count} modes")
    diag = basis.states[:, mode].astype(np.complex128)
    return SparseOp(basis, sp.diags(diag, format="csr"))


def apply(op: SparseOp, state: Ket) -> Ket:
    op.basis.require_same(state.basis)
    return Ket(state.basis, op.matrix @ state.amplitudes)


def expect(op: SparseOp, state: State) -> complex:
    op.basis.require_same(state.basis)
    if isinstance(state, Ket):
        return complex(np.vdot(state.amplitudes, op.matrix @ state.amplitudes))
    return complex(np.trace(op.matrix @ state.matrix))


def partial_probability(state: State, pattern: Pattern) -> float:
    """Total probability of basis states matching `pattern`.

    `pattern` is either a mapping {mode: occupation} matched exactly on the
    listed modes, or a callable taking an occupation tuple and returning bool.
    """
    mask = _pattern_mask(state.basis, pattern)
    if isinstance(state, Ket):
        return float(np.sum(np.abs(state.amplitudes[mask]) ** 2))
    return float(np.sum(np.real(np.diag(state.matrix))[mask]))


def leakage_weight(state: State, margin: int = 0) -> float:
    """Probability mass within `margin` of a truncation boundary.

    A state counts as at the boundary when some mode occupation is within
    `margin` of its cutoff, or the total occupation is within `margin` of the
    total cap.  This bounds the norm that one more raising application could
    push outside the basis, which is the per-step leakage of any
    projector-truncated operator.
    """
    basis = state.basis
    cut = np.asarray(basis.cutoffs)
    mask = (basis.states >= cut - margin).any(axis=1)
    if basis.total_cap is not None:
        mask |= basis.states.sum(axis=1) >= basis.total_cap - margin
    if isinstance(state, Ket):
        return float(np.sum(np.abs(state.amplitudes[mask]) ** 2))
    return float(np.sum(np.real(np.diag(state.matrix))[mask]))


_HEADER_RE = re.compile(
    r"#\s*fock-state\s+modes=(\d+)\s+cutoffs=([0-9,]+)\s+total_cap=(\S+)\s*$"
)


def save_state(path, ket: Ket) -> None:
    """Write a Ket as plain text, one nonzero amplitude per line.

    Line format: comma-joined occupation vector, TAB, real part, TAB,
    imaginary part, floats at 17 significant digits so the round trip is
    bit-exact for doubles.
    """
    basis = ket.basis
    cap = "none" if basis.total_cap is None else str(basis.total_cap)
    lines = [
        f"# fock-state modes={basis.mode_count} "
        f"cutoffs={','.join(str(c) for c in basis.cutoffs)} total_cap={cap}"
    ]
    for i in np.nonzero(ket.amplitudes)[0]:
        occ = ",".join(str(n) for n in basis.states[i].tolist())
        amp = ket.amplitudes[i]
        lines.append(f"{occ}\t{amp.real:.16e}\t{amp.imag:.16e}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_state(path) -> Ket:
    """Read a state file written by `save_state`."""
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise StateFormatError(f"{path}: empty state file")
    m = _HEADER_RE.match(raw[0])
    if not m:
        raise StateFormatError(f"{path}: bad header line {raw[0]!r}")
    modes = int(m.group(1))
    cutoffs = tuple(int(c) for c in m.group(2).split(","))
    if len(cutoffs) != modes:
        raise StateFormatError(
            f"{path}: header lists {len(cutoffs)} cutoffs for {modes} modes"
        )
    cap = None if m.group(3) == "none" else int(m.group(3))
    basis = build_basis(modes, cutoffs, cap)
    amps = np.zeros(basis.dim, dtype=np.complex128)
    for lineno, line in enumerate(raw[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise StateFormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
        try:
            occ = tuple(int(n) for n in parts[0].split(","))
            re_part = float(parts[1])
            im_part = float(parts[2])
        except ValueError as exc:
            raise StateFormatError(f"{path}:{lineno}: {exc}") from None
        try:
            idx = basis.index_of(occ)
        except ValueError as exc:
            raise StateFormatError(f"{path}:{lineno}: {exc}") from None
        amps[idx] = complex(re_part, im_part)
    return Ket(basis, amps)
