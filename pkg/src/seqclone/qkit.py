"""Multi-qubit state-space helpers.

Bit vectors index Pauli error patterns. Qubit 0 is the leftmost tensor
factor, so the integer index of a computational basis state is big-endian in
qubit order. The same convention is used for the ``m`` and ``n`` indices of
amplitude tables.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

ATOL = 1e-12

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# X^m Z^n, with X^1 Z^1 = -i sigma_y
_PAULI = {
    (0, 0): _I,
    (1, 0): _X,
    (0, 1): _Z,
    (1, 1): _X @ _Z,
}


def to_bits(k: int, n: int) -> tuple[int, ...]:
    """Bits of ``k`` as an ``n``-tuple, qubit 0 first."""
    if not 0 <= k < 2**n:
        raise ValueError(f"index {k} out of range for {n} bits")
    return tuple((k >> (n - 1 - i)) & 1 for i in range(n))


def from_bits(bits) -> int:
    k = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"bit values must be 0 or 1, got {b!r}")
        k = (k << 1) | int(b)
    return k


def dot_parity(j: int, k: int) -> int:
    """Bitwise scalar product of two indices, mod 2."""
    return bin(j & k).count("1") & 1


@dataclass(frozen=True)
class PauliLabel:
    """Error pattern (m, n): qubit i gets X^{m_i} Z^{n_i}."""

    m: tuple[int, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        m, n = tuple(int(b) for b in self.m), tuple(int(b) for b in self.n)
        if len(m) != len(n) or len(m) == 0:
            raise ValueError("m and n must be non-empty and of equal length")
        if any(b not in (0, 1) for b in m + n):
            raise ValueError("Pauli label bits must be 0 or 1")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_ints(cls, m: int, n: int, n_qubits: int) -> "PauliLabel":
        return cls(to_bits(m, n_qubits), to_bits(n, n_qubits))

    @property
    def n_qubits(self) -> int:
        return len(self.m)

    @property
    def m_int(self) -> int:
        return from_bits(self.m)

    @property
    def n_int(self) -> int:
        return from_bits(self.n)

    def is_identity(self) -> bool:
        return not any(self.m) and not any(self.n)


def n_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if n < 1 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two >= 2")
    return n


@lru_cache(maxsize=None)
def _pauli_matrix_cached(m: int, n: int, n_qubits: int) -> np.ndarray:
    op = np.ones((1, 1), dtype=complex)
    for mi, ni in zip(to_bits(m, n_qubits), to_bits(n, n_qubits)):
        op = np.kron(op, _PAULI[(mi, ni)])
    op.setflags(write=False)
    return op


def pauli_matrix(label: PauliLabel) -> np.ndarray:
    """Dense matrix of U_{m,n} = ⊗_i X^{m_i} Z^{n_i}."""
    return _pauli_matrix_cached(label.m_int, label.n_int, label.n_qubits)


def apply_pauli(label: PauliLabel, state) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.shape != (2**label.n_qubits,):
        raise ValueError(
            f"state of shape {state.shape} does not match a {label.n_qubits}-qubit label"
        )
    return pauli_matrix(label) @ state


def bell_state(label: PauliLabel) -> np.ndarray:
    """Generalized Bell state |B_{m,n}> on two 2^N-dimensional systems.

    ``2^{-N/2} sum_k (-1)^{k.n} |k>|k xor m>``; the first system is the
    leftmost factor of the returned vector.
    """
    d = 2**label.n_qubits
    m, n = label.m_int, label.n_int
    out = np.zeros(d * d, dtype=complex)
    for k in range(d):
        out[k * d + (k ^ m)] = -1.0 if dot_parity(k, n) else 1.0
    return out / np.sqrt(d)


class Basis(str, enum.Enum):
    Z = "Z"
    X = "X"
    Y = "Y"

    def passes(self, m, n):
        """Whether X^m Z^n leaves eigenstates of this basis unchanged up to phase.

        Works elementwise on integer arrays.
        """
        if self is Basis.Z:
            return m == 0
        if self is Basis.X:
            return n == 0
        return m == n


_EIGEN = {
    Basis.Z: (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)),
    Basis.X: (np.array([1, 1], dtype=complex) / np.sqrt(2), np.array([1, -1], dtype=complex) / np.sqrt(2)),
    Basis.Y: (np.array([1, 1j], dtype=complex) / np.sqrt(2), np.array([1, -1j], dtype=complex) / np.sqrt(2)),
}


def mub_eigenstates(basis) -> list[np.ndarray]:
    """The two eigenstates of a single-qubit basis; index 0 encodes bit 0."""
    return [v.copy() for v in _EIGEN[Basis(basis)]]


class Protocol(str, enum.Enum):
    BB84 = "bb84"
    SIX_STATE = "six-state"

    @property
    def bases(self) -> tuple[Basis, ...]:
        if self is Protocol.BB84:
            return (Basis.Z, Basis.X)
        return (Basis.Z, Basis.X, Basis.Y)


class Mode(str, enum.Enum):
    INDEPENDENT = "independent"
    CORRELATED = "correlated"


@dataclass(frozen=True)
class EnsembleEntry:
    state: np.ndarray
    bases: tuple[Basis, ...]
    bits: tuple[int, ...]


@dataclass(frozen=True)
class InputEnsemble:
    protocol: Protocol
    n_qubits: int
    mode: Mode
    entries: tuple[EnsembleEntry, ...]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def basis_patterns(protocol, n_qubits: int, mode) -> list[tuple[Basis, ...]]:
    """Per-qubit basis assignments an eavesdropper has to expect."""
    protocol, mode = Protocol(protocol), Mode(mode)
    if n_qubits < 1:
        raise ValueError("sequence length must be >= 1")
    if mode is Mode.CORRELATED:
        return [(b,) * n_qubits for b in protocol.bases]
    return list(itertools.product(protocol.bases, repeat=n_qubits))


def product_state(bases, bits) -> np.ndarray:
    state = np.ones(1, dtype=complex)
    for b, k in zip(bases, bits):
        state = np.kron(state, _EIGEN[Basis(b)][k])
    return state


def enumerate_ensemble(protocol, n_qubits: int, mode) -> InputEnsemble:
    protocol, mode = Protocol(protocol), Mode(mode)
    entries = []
    for bases in basis_patterns(protocol, n_qubits, mode):
        for bits in itertools.product((0, 1), repeat=n_qubits):
            entries.append(EnsembleEntry(product_state(bases, bits), bases, bits))
    _check_distinct(entries)
    return InputEnsemble(protocol, n_qubits, mode, tuple(entries))


def _check_distinct(entries):
    if len(entries) > 4096:
        return
    states = np.array([e.state for e in entries])
    overlaps = np.abs(states.conj() @ states.T)
    np.fill_diagonal(overlaps, 0.0)
    if np.any(overlaps > 1 - 1e-9):
        raise RuntimeError("ensemble contains duplicate states")


def product_bits(state, bases) -> tuple[int, ...]:
    """Recover the eigenstate bits of a product state, or raise ValueError."""
    state = np.asarray(state, dtype=complex)
    for bits in itertools.product((0, 1), repeat=len(bases)):
        if abs(abs(np.vdot(product_state(bases, bits), state)) - 1.0) < 1e-9:
            return bits
    raise ValueError("state is not a product of eigenstates of the given bases")


def density(state) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return np.outer(state, state.conj())


def is_density_matrix(rho, atol: float = ATOL) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not np.allclose(rho, rho.conj().T, atol=atol, rtol=0):
        return False
    if abs(np.trace(rho) - 1) > atol:
        return False
    return bool(np.linalg.eigvalsh(rho).min() >= -1e-10)


def partial_trace(rho, keep) -> np.ndarray:
    """Reduced density matrix on the qubits in ``keep`` (an index or a list).

    Kept qubits stay in their original order.
    """
    rho = np.asarray(rho, dtype=complex)
    n = n_qubits_of(rho.shape[0])
    keep = [keep] if np.ndim(keep) == 0 else list(keep)
    if not keep or any(not 0 <= int(q) < n for q in keep) or len(set(keep)) != len(keep):
        raise ValueError(f"invalid qubit selection {keep} for {n} qubits")
    keep = sorted(int(q) for q in keep)
    t = rho.reshape((2,) * (2 * n))
    ket = list(range(n))
    bra = [n + q if q in keep else q for q in range(n)]
    out = [q for q in keep] + [n + q for q in keep]
    reduced = np.einsum(t, ket + bra, out)
    d = 2 ** len(keep)
    return reduced.reshape(d, d)


def same_up_to_phase(u, v, atol: float = 1e-10) -> bool:
    u, v = np.asarray(u), np.asarray(v)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    return abs(nu - nv) < atol and abs(abs(np.vdot(u, v)) - nu * nv) < atol
