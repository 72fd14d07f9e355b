import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqclone.cloner import (
    AmplitudeMatrix,
    average_qubit_fidelity,
    bb84_coefficients,
    bb84_product_ansatz,
    clone_density,
    clone_weights,
    fidelity_full,
    fidelity_report,
    fourier_dual,
    joint_output_state,
    pattern_report,
    qubit_fidelity,
    sixstate_coefficients,
    sixstate_product_ansatz,
    tensor_power,
)
from seqclone.qkit import (
    Basis,
    PauliLabel,
    density,
    dot_parity,
    enumerate_ensemble,
    mub_eigenstates,
    partial_trace,
    pauli_matrix,
)

# six-state F_E(F_B) values computed with mpmath at 50 digits
F6_090 = 0.756155281280883
F6_085 = 0.816091269024824


def random_cloner(rng, n, real=False):
    d = 2**n
    raw = rng.normal(size=(d, d))
    if not real:
        raw = raw + 1j * rng.normal(size=(d, d))
    return AmplitudeMatrix(raw / np.linalg.norm(raw))


def random_state(rng, n):
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return psi / np.linalg.norm(psi)


def dual_by_sum(a):
    """b_{m,n} = 2^-N sum_{x,y} (-1)^{n.x + m.y} a_{x,y}, written out."""
    d = a.shape[0]
    b = np.zeros_like(a, dtype=complex)
    for m, k, x, y in itertools.product(range(d), repeat=4):
        sign = -1 if (dot_parity(k, x) + dot_parity(m, y)) % 2 else 1
        b[m, k] += sign * a[x, y]
    return b / d


def test_amplitude_matrix_validation():
    with pytest.raises(ValueError):
        AmplitudeMatrix(np.ones((2, 2)))
    with pytest.raises(ValueError):
        AmplitudeMatrix(np.ones((3, 3)) / 3)
    a = AmplitudeMatrix.identity(2)
    assert a.n_qubits == 2 and a.dim == 4
    with pytest.raises(ValueError):
        a.entries[0, 0] = 0


def test_dual_single_qubit_examples():
    ident = fourier_dual(AmplitudeMatrix.identity(1)).entries
    assert np.allclose(ident, 0.5)
    # a delta on X maps to the Z-row sign pattern
    x_only = fourier_dual(AmplitudeMatrix([[0, 0], [1, 0]])).entries
    assert np.allclose(x_only, [[0.5, -0.5], [0.5, -0.5]])
    uniform = fourier_dual(AmplitudeMatrix(np.full((2, 2), 0.5))).entries
    assert np.allclose(uniform, [[1, 0], [0, 0]])


@pytest.mark.parametrize("n", [1, 2])
def test_dual_matches_explicit_sum(n):
    rng = np.random.default_rng(n)
    for _ in range(5):
        a = random_cloner(rng, n)
        assert np.abs(fourier_dual(a).entries - dual_by_sum(a.entries)).max() < 1e-13


@pytest.mark.parametrize("n", [1, 2, 3])
def test_dual_is_involution(n):
    rng = np.random.default_rng(10 + n)
    for _ in range(100):
        a = random_cloner(rng, n)
        assert np.abs(fourier_dual(fourier_dual(a)).entries - a.entries).max() < 1e-12


@pytest.mark.parametrize("n", [1, 2])
def test_dual_expansion_equality(n):
    rng = np.random.default_rng(20 + n)
    for _ in range(100):
        a = random_cloner(rng, n)
        psi = random_state(rng, n)
        diff = joint_output_state(a, psi, "a") - joint_output_state(a, psi, "b")
        assert np.abs(diff).max() < 1e-10


@pytest.mark.parametrize("n", [1, 2])
def test_joint_state_normalized_and_marginals(n):
    rng = np.random.default_rng(30 + n)
    d = 2**n
    for _ in range(10):
        a = random_cloner(rng, n)
        psi = random_state(rng, n)
        joint = joint_output_state(a, psi)
        assert abs(np.linalg.norm(joint) - 1) < 1e-12
        t = joint.reshape(d, d * d)
        rho_e = t @ t.conj().T
        t = joint.reshape(d, d, d).transpose(1, 0, 2).reshape(d, d * d)
        rho_b = t @ t.conj().T
        assert np.abs(rho_e - clone_density(a, psi, "E")).max() < 1e-12
        assert np.abs(rho_b - clone_density(a, psi, "B")).max() < 1e-12


def test_clone_density_as_pauli_mixture():
    a = bb84_product_ansatz(0.85, 1)
    psi = np.array([1, 1]) / np.sqrt(2)
    rho = clone_density(a, psi, "B")
    w = clone_weights(a, "B")
    mix = sum(
        w[m, k] * density(pauli_matrix(PauliLabel((m,), (k,))) @ psi) for m in (0, 1) for k in (0, 1)
    )
    assert np.allclose(rho, mix)


def test_identity_cloner_fidelities():
    a = AmplitudeMatrix.identity(1)
    for e in enumerate_ensemble("six-state", 1, "independent"):
        assert fidelity_full(a, e.state, "E") == pytest.approx(1.0, abs=1e-15)
        assert fidelity_full(a, e.state, "B") == pytest.approx(0.5, abs=1e-15)


def test_fidelity_examples_bb84_ansatz():
    a = bb84_product_ansatz(0.85, 1)
    ens = enumerate_ensemble("bb84", 1, "independent")
    for e in ens:
        assert fidelity_full(a, e.state, "B") == pytest.approx(0.85, abs=1e-12)
        assert fidelity_full(a, e.state, "E") == pytest.approx(0.5 + math.sqrt(0.85 * 0.15), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_qubit_fidelity_matches_reduced_density(n):
    rng = np.random.default_rng(40 + n)
    a = random_cloner(rng, n)
    for e in enumerate_ensemble("six-state", n, "independent"):
        for which in ("E", "B"):
            rho = clone_density(a, e.state, which)
            for q in range(n):
                single = mub_eigenstates(e.bases[q])[e.bits[q]]
                expected = np.vdot(single, partial_trace(rho, q) @ single).real
                assert qubit_fidelity(a, e, q, which) == pytest.approx(expected, abs=1e-12)


def test_qubit_fidelity_rejects_non_product():
    a = AmplitudeMatrix.identity(1)
    with pytest.raises(ValueError):
        qubit_fidelity(a, (np.array([1, 1j]) / np.sqrt(2), (Basis.Z,)), 0, "E")


@given(st.integers(0, 2**32), st.sampled_from(["bb84", "six-state"]), st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_disturbance_identity(seed, protocol, n):
    rng = np.random.default_rng(seed)
    a = random_cloner(rng, n)
    for mode in ("independent", "correlated"):
        ens = enumerate_ensemble(protocol, n, mode)
        for which in ("E", "B"):
            for rep in fidelity_report(a, ens, which).reports:
                for f, dist in zip(rep.per_qubit_fidelity, rep.per_qubit_disturbance):
                    assert abs(f - (rep.full_fidelity + dist)) < 1e-12


def test_full_fidelity_matches_pattern_report():
    rng = np.random.default_rng(5)
    a = random_cloner(rng, 2)
    ens = enumerate_ensemble("six-state", 2, "independent")
    rep = fidelity_report(a, ens, "E")
    for e, r in zip(ens, rep.reports):
        assert r.full_fidelity == pytest.approx(fidelity_full(a, e.state, "E"), abs=1e-12)


def test_printed_disturbance_convention_differs():
    # the conventions coincide on qubit-symmetric tables, so use a random one
    a = random_cloner(np.random.default_rng(3), 2)
    w = clone_weights(a, "E")
    ident = pattern_report(w, (Basis.Z, Basis.Z))
    printed = pattern_report(w, (Basis.Z, Basis.Z), convention="printed")
    assert ident.full_fidelity == printed.full_fidelity
    gap = max(abs(f - (printed.full_fidelity + d)) for f, d in
              zip(printed.per_qubit_fidelity, printed.per_qubit_disturbance))
    assert gap > 1e-3
    with pytest.raises(ValueError):
        pattern_report(w, (Basis.Z, Basis.Z), convention="other")


def test_bb84_coefficients_boundaries():
    assert bb84_coefficients(0.5) == pytest.approx((1.0, 0.0, 0.0))
    assert bb84_coefficients(1.0) == pytest.approx((0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        bb84_coefficients(0.4)


def test_bb84_ansatz_at_full_bob_fidelity_is_uniform():
    a = bb84_product_ansatz(1.0, 1)
    assert np.allclose(a.entries, 0.5)
    assert np.allclose(fourier_dual(a).entries, [[1, 0], [0, 0]])


def test_sixstate_coefficients_boundaries():
    assert sixstate_coefficients(1.0) == pytest.approx((1.0, 0.0))
    assert sixstate_coefficients(1 / 3) == pytest.approx((0.0, 1 / math.sqrt(3)))
    v, x = sixstate_coefficients(0.8)
    assert v**2 + 3 * x**2 == pytest.approx(1.0)
    with pytest.raises(ValueError):
        sixstate_coefficients(0.3)


@pytest.mark.parametrize("fb,fe", [(0.9, F6_090), (0.85, F6_085), (1.0, 0.5), (1 / 3, 5 / 6)])
def test_sixstate_ansatz_fidelities(fb, fe):
    for n in (1, 2):
        a = sixstate_product_ansatz(fb, n)
        assert average_qubit_fidelity(a, "six-state", "independent", "B") == pytest.approx(fb, abs=1e-12)
        assert average_qubit_fidelity(a, "six-state", "independent", "E") == pytest.approx(fe, abs=1e-12)


@pytest.mark.parametrize("fb", [0.7, 0.8536, 0.95])
def test_equal_fidelity_over_ensembles(fb):
    for protocol, builder in (("bb84", bb84_product_ansatz), ("six-state", sixstate_product_ansatz)):
        for n in (1, 2):
            a = builder(fb, n)
            for mode in ("independent", "correlated"):
                ens = enumerate_ensemble(protocol, n, mode)
                for which in ("E", "B"):
                    assert fidelity_report(a, ens, which).equal_fidelity


def test_sixstate_equal_fidelity_36_states():
    a = sixstate_product_ansatz(0.85, 2)
    ens = enumerate_ensemble("six-state", 2, "independent")
    singles = [qubit_fidelity(a, e, q, "E") for e in ens for q in range(2)]
    assert len(ens) == 36
    assert max(singles) - min(singles) < 1e-12
    assert singles[0] == pytest.approx(F6_085, abs=1e-12)


def test_tensor_power_validation():
    with pytest.raises(ValueError):
        tensor_power(np.eye(3), 2)
    with pytest.raises(ValueError):
        tensor_power(np.eye(2) / np.sqrt(2), 0)
    assert tensor_power([[1, 0], [0, 0]], 3).n_qubits == 3


def test_average_fidelity_matches_report():
    rng = np.random.default_rng(8)
    a = random_cloner(rng, 2)
    for protocol in ("bb84", "six-state"):
        for mode in ("independent", "correlated"):
            ens = enumerate_ensemble(protocol, 2, mode)
            for which in ("E", "B"):
                rep = fidelity_report(a, ens, which)
                assert average_qubit_fidelity(a, protocol, mode, which) == pytest.approx(
                    rep.average_fidelity, abs=1e-12
                )
