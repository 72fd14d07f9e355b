"""Pauli-error cloning machines described by an amplitude table a_{m,n}.

The joint output for input |psi> is ``sum a_{m,n} U_{m,n}|psi>_E |B_{m,n}>_{BC}``.
Eve's clone sees the Pauli channel with weights |a|^2 and Bob's clone the one
with weights |b|^2, where ``b`` is the sign-kernel Fourier dual of ``a``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import hadamard

from .qkit import (
    Basis,
    EnsembleEntry,
    InputEnsemble,
    PauliLabel,
    Protocol,
    basis_patterns,
    bell_state,
    n_qubits_of,
    pauli_matrix,
    product_bits,
)

NORM_TOL = 1e-10
EQUAL_FIDELITY_TOL = 1e-9


class Clone(str, enum.Enum):
    E = "E"
    B = "B"


@dataclass(frozen=True, eq=False)
class AmplitudeMatrix:
    """Amplitude table indexed ``[m, n]`` with big-endian bit vectors."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"amplitude table must be square, got shape {a.shape}")
        n_qubits_of(a.shape[0])
        norm = float(np.sum(np.abs(a) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"amplitudes are not normalized (sum |a|^2 = {norm!r})")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @classmethod
    def identity(cls, n_qubits: int) -> "AmplitudeMatrix":
        """The trivial cloner that hands the input to Eve untouched."""
        a = np.zeros((2**n_qubits, 2**n_qubits))
        a[0, 0] = 1.0
        return cls(a)

    @property
    def n_qubits(self) -> int:
        return n_qubits_of(self.entries.shape[0])

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def weights(self) -> np.ndarray:
        return np.abs(self.entries) ** 2

    def dual(self) -> "AmplitudeMatrix":
        return fourier_dual(self)

    def __eq__(self, other):
        if not isinstance(other, AmplitudeMatrix):
            return NotImplemented
        return self.entries.shape == other.entries.shape and np.array_equal(self.entries, other.entries)

    __hash__ = None


def _sylvester(n_qubits: int) -> np.ndarray:
    # hadamard(2^N)[j, k] = (-1)^{j.k} with the big-endian bit order used here
    return hadamard(2**n_qubits).astype(float)


def fourier_dual(a: AmplitudeMatrix) -> AmplitudeMatrix:
    """b_{m,n} = 2^{-N} sum_{x,y} (-1)^{n.x - m.y} a_{x,y}."""
    h = _sylvester(a.n_qubits)
    b = (h @ a.entries @ h).T / a.dim
    return AmplitudeMatrix(b)


def clone_weights(a: AmplitudeMatrix, which) -> np.ndarray:
    """Pauli-channel weights of one clone: |a|^2 for Eve, |b|^2 for Bob."""
    if Clone(which) is Clone.E:
        return a.weights()
    return fourier_dual(a).weights()


def tensor_power(single, n_qubits: int) -> AmplitudeMatrix:
    single = np.asarray(single, dtype=complex)
    if single.shape != (2, 2):
        raise ValueError("single-qubit amplitude table must be 2x2")
    if n_qubits < 1:
        raise ValueError("sequence length must be >= 1")
    out = np.ones((1, 1), dtype=complex)
    for _ in range(n_qubits):
        out = np.kron(out, single)
    return AmplitudeMatrix(out)


def _check_psi(a: AmplitudeMatrix, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (a.dim,):
        raise ValueError(f"state of shape {psi.shape} does not match a {a.n_qubits}-qubit cloner")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-12:
        raise ValueError("input state is not normalized")
    return psi


def joint_output_state(a: AmplitudeMatrix, psi, expansion: str = "a") -> np.ndarray:
    """Joint state of Eve's clone, Bob's clone and the machine, ordered E, B, C.

    ``expansion="a"`` builds ``sum a U|psi>_E |B>_{BC}``; ``expansion="b"``
    builds the dual form ``sum b U|psi>_B |B>_{EC}`` from ``b = fourier_dual(a)``.
    Both describe the same vector.
    """
    if expansion not in ("a", "b"):
        raise ValueError("expansion must be 'a' or 'b'")
    psi = _check_psi(a, psi)
    n, d = a.n_qubits, a.dim
    coeffs = a.entries if expansion == "a" else fourier_dual(a).entries
    out = np.zeros((d, d, d), dtype=complex)
    for m in range(d):
        for k in range(d):
            c = coeffs[m, k]
            if c == 0:
                continue
            label = PauliLabel.from_ints(m, k, n)
            clone = pauli_matrix(label) @ psi
            pair = bell_state(label).reshape(d, d)
            term = np.einsum("i,jk->ijk", clone, pair)
            if expansion == "b":
                term = term.transpose(1, 0, 2)
            out += c * term
    return out.reshape(-1)


def clone_density(a: AmplitudeMatrix, psi, which) -> np.ndarray:
    psi = _check_psi(a, psi)
    w = clone_weights(a, which)
    n, d = a.n_qubits, a.dim
    rho = np.zeros((d, d), dtype=complex)
    for m, k in zip(*np.nonzero(w)):
        v = pauli_matrix(PauliLabel.from_ints(int(m), int(k), n)) @ psi
        rho += w[m, k] * np.outer(v, v.conj())
    return rho


def fidelity_full(a: AmplitudeMatrix, psi, which) -> float:
    """Full 2^N-dimensional fidelity <psi|rho|psi> of one clone."""
    psi = _check_psi(a, psi)
    w = clone_weights(a, which)
    n = a.n_qubits
    total = 0.0
    for m, k in zip(*np.nonzero(w)):
        overlap = np.vdot(psi, pauli_matrix(PauliLabel.from_ints(int(m), int(k), n)) @ psi)
        total += w[m, k] * abs(overlap) ** 2
    return float(total)


@lru_cache(maxsize=None)
def _pass_mask_cached(n_qubits: int, qubit: int, basis: Basis) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    bit = (idx >> (n_qubits - 1 - qubit)) & 1
    m_bit, n_bit = np.meshgrid(bit, bit, indexing="ij")
    mask = basis.passes(m_bit, n_bit).astype(float)
    mask.setflags(write=False)
    return mask


def qubit_pass_mask(n_qubits: int, qubit: int, basis) -> np.ndarray:
    """0/1 table over (m, n): 1 where qubit ``qubit`` in ``basis`` is left intact."""
    if not 0 <= qubit < n_qubits:
        raise ValueError(f"qubit {qubit} out of range for {n_qubits} qubits")
    return _pass_mask_cached(n_qubits, qubit, Basis(basis))


def qubit_fidelity(a: AmplitudeMatrix, entry, qubit: int, which) -> float:
    """Single-qubit fidelity of ``qubit`` for a product-state input.

    ``entry`` is an :class:`EnsembleEntry` or a ``(state, bases)`` pair; the
    state must be a product of eigenstates of the listed bases.
    """
    if isinstance(entry, EnsembleEntry):
        state, bases = entry.state, entry.bases
    else:
        state, bases = entry
    bases = tuple(Basis(b) for b in bases)
    if len(bases) != a.n_qubits:
        raise ValueError("basis list does not match the cloner size")
    product_bits(_check_psi(a, state), bases)
    w = clone_weights(a, which)
    return float(np.sum(w * qubit_pass_mask(a.n_qubits, qubit, bases[qubit])))


@dataclass(frozen=True)
class FidelityReport:
    full_fidelity: float
    per_qubit_fidelity: tuple[float, ...]
    per_qubit_disturbance: tuple[float, ...]
    average_fidelity: float


@dataclass(frozen=True)
class EnsembleFidelity:
    reports: tuple[FidelityReport, ...]
    average_fidelity: float
    spread: float
    equal_fidelity: bool
    tolerance: float


def pattern_report(weights: np.ndarray, bases, convention: str = "identity") -> FidelityReport:
    """Fidelities for an input whose qubit i is an eigenstate of ``bases[i]``.

    ``convention="identity"`` counts in D^i the patterns that leave qubit i
    intact while hitting some other qubit, so F^i = F_full + D^i.
    ``convention="printed"`` counts the patterns that hit qubit i and leave all
    others intact; it does not satisfy that identity and exists for comparison.
    """
    n = n_qubits_of(weights.shape[0])
    masks = [qubit_pass_mask(n, i, b) for i, b in enumerate(bases)]
    all_pass = np.prod(masks, axis=0)
    full = float(np.sum(weights * all_pass))
    per_qubit, disturbance = [], []
    for i, mask in enumerate(masks):
        per_qubit.append(float(np.sum(weights * mask)))
        if convention == "identity":
            d = float(np.sum(weights * mask * (1 - all_pass)))
        elif convention == "printed":
            others = np.prod([masks[j] for j in range(n) if j != i], axis=0) if n > 1 else 1.0
            d = float(np.sum(weights * (1 - mask) * others))
        else:
            raise ValueError(f"unknown disturbance convention {convention!r}")
        disturbance.append(d)
    avg = full + float(np.mean(disturbance))
    return FidelityReport(full, tuple(per_qubit), tuple(disturbance), avg)


def fidelity_report(
    a: AmplitudeMatrix,
    ensemble: InputEnsemble,
    which,
    tol: float = EQUAL_FIDELITY_TOL,
    convention: str = "identity",
) -> EnsembleFidelity:
    if ensemble.n_qubits != a.n_qubits:
        raise ValueError("ensemble and cloner disagree on the sequence length")
    w = clone_weights(a, which)
    cache: dict = {}
    reports = []
    for entry in ensemble:
        if entry.bases not in cache:
            cache[entry.bases] = pattern_report(w, entry.bases, convention)
        reports.append(cache[entry.bases])
    singles = [f for r in reports for f in r.per_qubit_fidelity]
    spread = max(singles) - min(singles)
    avg = float(np.mean([r.average_fidelity for r in reports]))
    return EnsembleFidelity(tuple(reports), avg, spread, spread <= tol, tol)


def qubit_basis_counts(protocol, n_qubits: int, mode) -> dict:
    """How often each (qubit, basis) pair occurs across the input ensemble's basis patterns."""
    protocol = Protocol(protocol)
    counts: dict = {}
    for bases in basis_patterns(protocol, n_qubits, mode):
        for i, b in enumerate(bases):
            counts[(i, b)] = counts.get((i, b), 0) + 1
    return dict(sorted(counts.items(), key=lambda kv: (kv[0][0], protocol.bases.index(kv[0][1]))))


def average_qubit_fidelity(a: AmplitudeMatrix, protocol, mode, which) -> float:
    """Ensemble-averaged single-qubit fidelity without building the input states."""
    w = clone_weights(a, which)
    counts = qubit_basis_counts(protocol, a.n_qubits, mode)
    total = sum(counts.values())
    return float(sum(c * np.sum(w * qubit_pass_mask(a.n_qubits, i, b)) for (i, b), c in counts.items()) / total)


def bb84_coefficients(fb: float) -> tuple[float, float, float]:
    """(v, x, y) of the optimal BB84 single-qubit cloner at Bob fidelity ``fb``."""
    if not 0.5 <= fb <= 1.0:
        raise ValueError(f"BB84 Bob fidelity must lie in [1/2, 1], got {fb}")
    s = np.sqrt(fb * (1.0 - fb))
    return 0.5 + s, fb - 0.5, 0.5 - s


def sixstate_coefficients(fidelity: float) -> tuple[float, float]:
    """(v, x) of the table [[v, x], [x, x]] whose own clone has ``fidelity``."""
    if not 1.0 / 3.0 <= fidelity <= 1.0:
        raise ValueError(f"six-state fidelity must lie in [1/3, 1], got {fidelity}")
    return np.sqrt((3.0 * fidelity - 1.0) / 2.0), np.sqrt((1.0 - fidelity) / 2.0)


def bb84_product_ansatz(fb: float, n_qubits: int) -> AmplitudeMatrix:
    v, x, y = bb84_coefficients(fb)
    return tensor_power([[v, x], [x, y]], n_qubits)


def sixstate_product_ansatz(fb: float, n_qubits: int) -> AmplitudeMatrix:
    """Eve's table for the six-state tensor-power cloner with Bob fidelity ``fb``.

    Bob's table is [[v, x], [x, x]]^{⊗N} from :func:`sixstate_coefficients`;
    Eve's is its Fourier dual (the transform is an involution).
    """
    v, x = sixstate_coefficients(fb)
    bob = tensor_power([[v, x], [x, x]], n_qubits)
    return fourier_dual(bob)


def product_ansatz(protocol, fb: float, n_qubits: int) -> AmplitudeMatrix:
    if Protocol(protocol) is Protocol.BB84:
        return bb84_product_ansatz(fb, n_qubits)
    return sixstate_product_ansatz(fb, n_qubits)
