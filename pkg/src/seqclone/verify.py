"""Self-checks run by ``seqclone verify``.

Each suite returns a list of :class:`Check` rows. ``tamper=True`` swaps the
tensor-power cloners for perturbed ones so the suites can be shown to fail.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloner import (
    AmplitudeMatrix,
    average_qubit_fidelity,
    fidelity_report,
    joint_output_state,
    product_ansatz,
)
from .qkit import Mode, Protocol, enumerate_ensemble
from .optimizer import (
    MAX_QUBITS_GENERAL,
    kkt_residual,
    lagrangian_residual,
    optimal_fe,
    perturb_entry,
    perturbed_ansatz,
    verify_tensor_optimality,
)

SUITES = ("ansatz", "lagrangian", "optimality")
STATIONARY_TOL = 1e-8
POWER_MIN = 1e-3
FIDELITY_TOL = 1e-10
SEARCH_TOL = 1e-5
MODE_TOL = 1e-8
LAGRANGIAN_FB = (0.8, 0.8536, 0.9)
SEARCH_FB = (0.8, 0.85, 0.9)
TAMPER_SCALE = 0.05


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    limit: float
    upper: bool = True  # value must be <= limit; otherwise >= limit

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.value):
            return False
        return self.value <= self.limit if self.upper else self.value >= self.limit

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _cloner(protocol, fb, n, tamper):
    if tamper:
        return perturbed_ansatz(protocol, fb, n, TAMPER_SCALE)
    return product_ansatz(protocol, fb, n)


def ansatz_suite(n_values=(1, 2, 3), tamper=False) -> list[Check]:
    """Tensor-power cloners hit F_B, reach the closed-form F_E and have equal fidelities."""
    checks = []
    for protocol in Protocol:
        for n in n_values:
            ensembles = {mode: enumerate_ensemble(protocol, n, mode) for mode in Mode} if n <= 3 else {}
            for fb in (0.75, 0.8536, 0.95):
                a = _cloner(protocol, fb, n, tamper)
                tag = f"{protocol.value} N={n} F_B={fb}"
                fe = average_qubit_fidelity(a, protocol, Mode.INDEPENDENT, "E")
                fbb = average_qubit_fidelity(a, protocol, Mode.INDEPENDENT, "B")
                checks.append(Check("ansatz", f"{tag} |F_B - target|", abs(fbb - fb), FIDELITY_TOL))
                checks.append(
                    Check("ansatz", f"{tag} |F_E - closed form|", abs(fe - optimal_fe(protocol, fb)), FIDELITY_TOL)
                )
                for mode, ens in ensembles.items():
                    spread = max(fidelity_report(a, ens, c).spread for c in ("E", "B"))
                    checks.append(Check("ansatz", f"{tag} {mode.value} fidelity spread", spread, FIDELITY_TOL))
    rng = np.random.default_rng(0)
    for n in (1, 2):
        worst = 0.0
        for _ in range(20):
            raw = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
            a = AmplitudeMatrix(raw / np.linalg.norm(raw))
            psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
            psi /= np.linalg.norm(psi)
            diff = joint_output_state(a, psi, "a") - joint_output_state(a, psi, "b")
            worst = max(worst, float(np.abs(diff).max()))
        checks.append(Check("ansatz", f"N={n} dual expansion mismatch", worst, FIDELITY_TOL))
    return checks


def lagrangian_suite(n_values=(2, 3), tamper=False) -> list[Check]:
    """Stationarity of the ansatz, with perturbed points as power checks."""
    checks = []
    for n in n_values:
        for fb in LAGRANGIAN_FB:
            a = _cloner(Protocol.BB84, fb, n, tamper)
            checks.append(
                Check("lagrangian", f"bb84 N={n} F_B={fb} Lagrangian residual",
                      lagrangian_residual(a, Protocol.BB84), STATIONARY_TOL)
            )
            off = perturbed_ansatz(Protocol.BB84, fb, n, TAMPER_SCALE)
            checks.append(
                Check("lagrangian", f"bb84 N={n} F_B={fb} perturbed Lagrangian residual",
                      lagrangian_residual(off, Protocol.BB84), POWER_MIN, upper=False)
            )
        if n > MAX_QUBITS_GENERAL:
            continue
        for protocol in Protocol:
            for fb in LAGRANGIAN_FB:
                a = product_ansatz(protocol, fb, n)
                if tamper:
                    a = perturb_entry(a, scale=TAMPER_SCALE)
                tag = f"{protocol.value} N={n} F_B={fb}"
                checks.append(Check("lagrangian", f"{tag} KKT residual", kkt_residual(a, protocol), STATIONARY_TOL))
                off = perturb_entry(product_ansatz(protocol, fb, n), scale=TAMPER_SCALE)
                checks.append(
                    Check("lagrangian", f"{tag} perturbed KKT residual", kkt_residual(off, protocol),
                          POWER_MIN, upper=False)
                )
    return checks


def optimality_suite(n_values=(2,), tamper=False, restarts=32, seed=0) -> list[Check]:
    """General search against the closed form, plus the Lagrangian checks at the same sizes."""
    checks = lagrangian_suite(n_values, tamper)
    for n in n_values:
        if n > MAX_QUBITS_GENERAL:
            continue
        for protocol in Protocol:
            rep = verify_tensor_optimality(protocol, n, fb_grid=SEARCH_FB, restarts=restarts, seed=seed)
            worst = rep.max_deviation
            if tamper:
                worst = max(
                    abs(p.fe_search - average_qubit_fidelity(_cloner(protocol, p.fb, n, True), protocol, p.mode, "E"))
                    for p in rep.points
                )
            checks.append(Check("optimality", f"{protocol.value} N={n} |F_E search - closed form|", worst, SEARCH_TOL))
            checks.append(
                Check("optimality", f"{protocol.value} N={n} correlated vs independent", rep.mode_disagreement, MODE_TOL)
            )
            checks.append(
                Check("optimality", f"{protocol.value} N={n} restarts converged", float(rep.all_converged), 1.0,
                      upper=False)
            )
    return checks


def run_suite(name: str, n_values=None, tamper=False, restarts=32, seed=0) -> list[Check]:
    if name == "all":
        out = []
        out += ansatz_suite(n_values or (1, 2, 3), tamper)
        out += optimality_suite(n_values or (2, 3), tamper, restarts, seed)
        return out
    if name == "ansatz":
        return ansatz_suite(n_values or (1, 2, 3), tamper)
    if name == "lagrangian":
        return lagrangian_suite(n_values or (2, 3), tamper)
    if name == "optimality":
        return optimality_suite(n_values or (2,), tamper, restarts, seed)
    raise ValueError(f"unknown suite {name!r}")
