import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqclone.cloner import AmplitudeMatrix, average_qubit_fidelity, fourier_dual, product_ansatz, tensor_power
from seqclone.optimizer import (
    FidelityModel,
    InfeasibleTargetError,
    OptimizationProblem,
    Parameterization,
    bb84_optimal_fe,
    fidelity_domain,
    kkt_residual,
    lagrangian_residual,
    lagrangian_terms,
    optimize,
    perturb_entry,
    perturbed_ansatz,
    single_qubit_factor,
    sixstate_optimal_fe,
    verify_tensor_optimality,
)

F6_090 = 0.756155281280883


def test_closed_form_boundaries():
    assert bb84_optimal_fe(1.0) == 0.5
    assert bb84_optimal_fe(0.5) == 1.0
    assert abs(sixstate_optimal_fe(1.0) - 0.5) < 1e-12
    assert abs(sixstate_optimal_fe(1 / 3) - 5 / 6) < 1e-12


def test_closed_form_symmetric_points():
    sym = 0.5 + 1 / math.sqrt(8)
    assert bb84_optimal_fe(sym) == pytest.approx(sym, abs=1e-12)
    assert sixstate_optimal_fe(5 / 6) == pytest.approx(5 / 6, abs=1e-12)
    assert sixstate_optimal_fe(0.9) == pytest.approx(F6_090, abs=1e-12)


@given(st.floats(0.5, 1.0), st.floats(0.5, 1.0))
def test_closed_forms_decreasing(f1, f2):
    lo, hi = sorted((f1, f2))
    assert bb84_optimal_fe(hi) <= bb84_optimal_fe(lo) + 1e-15
    assert sixstate_optimal_fe(hi) <= sixstate_optimal_fe(lo) + 1e-15


def test_domain_errors():
    assert fidelity_domain("bb84") == (0.5, 1.0)
    with pytest.raises(InfeasibleTargetError):
        bb84_optimal_fe(0.4)
    with pytest.raises(InfeasibleTargetError):
        sixstate_optimal_fe(0.3)
    with pytest.raises(InfeasibleTargetError):
        OptimizationProblem("bb84", 2, "independent", 0.2)


def test_problem_validation():
    with pytest.raises(ValueError):
        OptimizationProblem("bb84", 4, "independent", 0.8)
    with pytest.raises(ValueError):
        OptimizationProblem("bb84", 2, "independent", 0.8, restarts=0)
    OptimizationProblem("bb84", 6, "independent", 0.8, parameterization="tensor")


@pytest.mark.parametrize("n", [1, 2, 5])
def test_model_dual_matches_fourier_dual(n):
    rng = np.random.default_rng(n)
    d = 2**n
    a = rng.normal(size=(d, d))
    a /= np.linalg.norm(a)
    model = FidelityModel("six-state", n, "independent")
    assert np.allclose(model.dual(a.ravel()), fourier_dual(AmplitudeMatrix(a)).entries.real.ravel(), atol=1e-13)


@pytest.mark.parametrize("protocol", ["bb84", "six-state"])
@pytest.mark.parametrize("mode", ["independent", "correlated"])
def test_model_fidelities_match_cloner(protocol, mode):
    rng = np.random.default_rng(2)
    a = rng.random((4, 4))
    a /= np.linalg.norm(a)
    model = FidelityModel(protocol, 2, mode)
    amp = AmplitudeMatrix(a)
    assert model.fe(a.ravel()) == pytest.approx(average_qubit_fidelity(amp, protocol, mode, "E"), abs=1e-13)
    assert model.fb(a.ravel()) == pytest.approx(average_qubit_fidelity(amp, protocol, mode, "B"), abs=1e-13)


def test_constraint_jacobian_finite_difference():
    rng = np.random.default_rng(3)
    a = rng.random(16)
    a /= np.linalg.norm(a)
    model = FidelityModel("six-state", 2, "independent")
    c0, jac = model.constraints(a, 0.8)
    h = 1e-7
    for j in range(16):
        step = np.zeros(16)
        step[j] = h
        cp, _ = model.constraints(a + step, 0.8)
        cm, _ = model.constraints(a - step, 0.8)
        assert np.allclose((cp - cm) / (2 * h), jac[:, j], atol=1e-7)


def _single_qubit_fidelities(t):
    """Per-basis fidelities of a real 2x2 table, written out from the Pauli pass rules."""
    a = t.reshape(-1, 2, 2)
    b = np.empty_like(a)
    # b[m,n] = 1/2 sum_{x,y} (-1)^{n x + m y} a[x,y]
    for m, k in itertools.product((0, 1), repeat=2):
        b[:, m, k] = sum((-1) ** (k * x + m * y) * a[:, x, y] for x in (0, 1) for y in (0, 1)) / 2
    def per_basis(w):
        return {"Z": w[:, 0, 0] + w[:, 0, 1], "X": w[:, 0, 0] + w[:, 1, 0], "Y": w[:, 0, 0] + w[:, 1, 1]}
    return per_basis(a * a), per_basis(b * b)


def test_single_qubit_bb84_mesh_oracle():
    # brute-force search over nonnegative unit 2x2 tables on an angular mesh
    k = 90
    th = np.linspace(0, np.pi / 2, k)
    t1, t2, t3 = np.meshgrid(th, th, th, indexing="ij")
    pts = np.stack(
        (np.cos(t1), np.sin(t1) * np.cos(t2), np.sin(t1) * np.sin(t2) * np.cos(t3),
         np.sin(t1) * np.sin(t2) * np.sin(t3)), axis=-1
    ).reshape(-1, 4)
    eve, bob = _single_qubit_fidelities(pts)
    target = 0.85
    fb = (bob["Z"] + bob["X"]) / 2
    fe = (eve["Z"] + eve["X"]) / 2
    ok = (np.abs(fb - target) < 3e-3) & (np.abs(eve["Z"] - eve["X"]) < 3e-3) & (np.abs(bob["Z"] - bob["X"]) < 3e-3)
    mesh_best = fe[ok].max()
    res = optimize(OptimizationProblem("bb84", 1, "independent", target, restarts=8))
    assert res.converged
    assert res.fe >= mesh_best - 5e-3
    assert abs(res.fe - bb84_optimal_fe(target)) < 1e-7
    assert mesh_best == pytest.approx(bb84_optimal_fe(target), abs=1e-2)


def test_optimize_bb84_single_qubit_amplitudes():
    res = optimize(OptimizationProblem("bb84", 1, "independent", 0.8536, restarts=8))
    v = 0.5 + math.sqrt(0.8536 * 0.1464)
    x = 0.8536 - 0.5
    y = 0.5 - math.sqrt(0.8536 * 0.1464)
    assert res.converged
    assert res.fe == pytest.approx(0.8535067750411581, abs=1e-8)
    assert np.allclose(res.a.entries.real, [[v, x], [x, y]], atol=1e-5)
    assert res.max_residual < 1e-8


def test_optimize_sixstate_two_qubits():
    res = optimize(OptimizationProblem("six-state", 2, "independent", 0.9, restarts=16))
    assert res.converged
    assert abs(res.fe - F6_090) < 1e-6
    assert abs(res.fb_achieved - 0.9) < 1e-8


def test_optimize_bb84_correlated_two_qubits():
    res = optimize(OptimizationProblem("bb84", 2, "correlated", 0.85, restarts=16))
    assert abs(res.fe - bb84_optimal_fe(0.85)) < 1e-6


def test_optimize_is_deterministic():
    p = OptimizationProblem("bb84", 1, "independent", 0.8, restarts=4, seed=11)
    assert optimize(p).fe == optimize(p).fe


@pytest.mark.parametrize("protocol", ["bb84", "six-state"])
def test_tensor_search_not_better_than_general(protocol):
    tens = optimize(OptimizationProblem(protocol, 2, "independent", 0.82, parameterization="tensor", restarts=8))
    gen = optimize(OptimizationProblem(protocol, 2, "independent", 0.82, restarts=16))
    assert tens.converged and gen.converged
    assert tens.fe <= gen.fe + 1e-9
    single_qubit_factor(tens.a)


def test_tensor_search_longer_sequence():
    res = optimize(OptimizationProblem("bb84", 4, "independent", 0.9, parameterization=Parameterization.TENSOR_POWER,
                                       restarts=4))
    assert res.converged
    assert abs(res.fe - bb84_optimal_fe(0.9)) < 1e-7


def test_single_qubit_factor():
    s = np.array([[0.8, 0.3], [0.3, 0.1]])
    s /= np.linalg.norm(s)
    assert np.allclose(single_qubit_factor(tensor_power(s, 3)), s)
    rng = np.random.default_rng(0)
    raw = rng.random((4, 4))
    with pytest.raises(ValueError):
        single_qubit_factor(AmplitudeMatrix(raw / np.linalg.norm(raw)))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_lagrangian_terms_match_model(n):
    for fb in (0.7, 0.9):
        a = product_ansatz("bb84", fb, n)
        s = single_qubit_factor(a)
        fe_poly, fb_poly, norm = lagrangian_terms((s[0, 0], s[0, 1], s[1, 1]), "bb84", n)
        assert fe_poly == pytest.approx(bb84_optimal_fe(fb), abs=1e-12)
        assert fb_poly == pytest.approx(fb, abs=1e-12)
        assert abs(norm) < 1e-12


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("fb", [0.8, 0.8536, 0.9])
def test_lagrangian_stationary_at_ansatz(n, fb):
    assert lagrangian_residual(product_ansatz("bb84", fb, n), "bb84") <= 1e-8
    assert lagrangian_residual(perturbed_ansatz("bb84", fb, n), "bb84") >= 1e-3


@pytest.mark.parametrize("protocol", ["bb84", "six-state"])
@pytest.mark.parametrize("n", [2, 3])
def test_kkt_stationary_at_ansatz(protocol, n):
    for fb in (0.8, 0.9):
        a = product_ansatz(protocol, fb, n)
        assert kkt_residual(a, protocol) <= 1e-8
        assert kkt_residual(perturb_entry(a), protocol) >= 1e-3


def test_lagrangian_with_given_multipliers():
    a = product_ansatz("bb84", 0.9, 2)
    assert lagrangian_residual(a, "bb84", lambdas=(0.0, 0.0)) > 1e-2


@settings(max_examples=15, deadline=None)
@given(st.floats(0.55, 0.98))
def test_ansatz_feasible_for_model(fb):
    for protocol in ("bb84", "six-state"):
        a = product_ansatz(protocol, fb, 2).entries.real.ravel()
        model = FidelityModel(protocol, 2, "independent")
        c, _ = model.constraints(a, fb)
        assert np.abs(c).max() < 1e-12


@pytest.mark.slow
def test_verify_tensor_optimality_short_grid():
    rep = verify_tensor_optimality("six-state", 2, fb_grid=[0.8, 0.9], restarts=8)
    assert rep.all_converged
    assert rep.max_deviation < 1e-6
    assert rep.mode_disagreement < 1e-8
