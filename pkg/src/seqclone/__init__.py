"""Cloning attacks on sequences of qubits sharing one encoding basis."""
from .cloner import (
    AmplitudeMatrix,
    Clone,
    bb84_product_ansatz,
    fidelity_report,
    fourier_dual,
    sixstate_product_ansatz,
)
from .infotheory import ck_rate, info_ab, info_ae_bb84, info_ae_six, threshold
from .optimizer import (
    InfeasibleTargetError,
    OptimizationProblem,
    Parameterization,
    bb84_optimal_fe,
    optimize,
    sixstate_optimal_fe,
)
from .qkit import Basis, Mode, PauliLabel, Protocol, enumerate_ensemble
from .simulator import SimConfig, SimReport, empirical_vs_analytic, run

__version__ = "0.1.0"
