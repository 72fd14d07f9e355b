"""Optimal cloner curves and a constrained search over cloner amplitudes.

Eve's average single-qubit fidelity is maximized for a fixed average
single-qubit fidelity of Bob, with every single-qubit fidelity equal across
the input ensemble and sequence positions, for both clones. Amplitudes are
real and nonnegative. Normalization holds by construction (the search
variables are rescaled onto the unit sphere); the remaining equality
constraints go through an augmented Lagrangian with L-BFGS-B inner solves,
followed by a Gauss-Newton feasibility polish.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .cloner import AmplitudeMatrix, product_ansatz, qubit_basis_counts, qubit_pass_mask, tensor_power
from .qkit import Mode, Protocol

MAX_QUBITS_GENERAL = 3
MAX_QUBITS_TENSOR = 8
DEFAULT_RESTARTS = 32
DENSE_DUAL_MAX_QUBITS = 4


class InfeasibleTargetError(ValueError):
    """The requested Bob fidelity is outside what the protocol's cloners reach."""


class Parameterization(str, enum.Enum):
    TENSOR_POWER = "tensor"
    GENERAL_REAL = "general"


def fidelity_domain(protocol) -> tuple[float, float]:
    if Protocol(protocol) is Protocol.BB84:
        return 0.5, 1.0
    return 1.0 / 3.0, 1.0


def _check_domain(protocol, fb):
    lo, hi = fidelity_domain(protocol)
    if not lo <= fb <= hi:
        raise InfeasibleTargetError(
            f"F_B = {fb} is infeasible for {Protocol(protocol).value}: must lie in [{lo:.6g}, {hi:.6g}]"
        )


def bb84_optimal_fe(fb: float) -> float:
    _check_domain(Protocol.BB84, fb)
    return 0.5 + math.sqrt(fb * (1.0 - fb))


def sixstate_optimal_fe(fb: float) -> float:
    _check_domain(Protocol.SIX_STATE, fb)
    return 1.0 - fb / 2.0 + 0.25 * math.sqrt(6.0 * fb - 2.0) * math.sqrt(2.0 - 2.0 * fb)


def optimal_fe(protocol, fb: float) -> float:
    if Protocol(protocol) is Protocol.BB84:
        return bb84_optimal_fe(fb)
    return sixstate_optimal_fe(fb)


class FidelityModel:
    """Linear fidelity functionals of a cloner over one input ensemble.

    Every single-qubit fidelity of a product-state input depends only on the
    basis of that qubit, so the ensemble reduces to distinct (qubit, basis)
    rows. Objective and Bob's fidelity weight each row by how often it occurs
    in the ensemble.
    """

    def __init__(self, protocol, n_qubits: int, mode):
        self.protocol, self.mode, self.n_qubits = Protocol(protocol), Mode(mode), n_qubits
        counts = qubit_basis_counts(self.protocol, n_qubits, self.mode)
        keys = list(counts)
        self.rows = keys
        self.masks = np.array([qubit_pass_mask(n_qubits, i, b).ravel() for i, b in keys])
        w = np.array([counts[k] for k in keys], dtype=float)
        self.row_weights = w / w.sum()
        self.mean_mask = self.row_weights @ self.masks
        self.deviations = self.masks - self.masks.mean(axis=0)
        self._dense = None
        if n_qubits <= DENSE_DUAL_MAX_QUBITS:
            self._dense = self._butterfly(np.eye(4**n_qubits))

    def dual(self, x):
        """vec(a) -> vec(b) on the last axis; the map is symmetric and its own inverse."""
        if self._dense is not None:
            return x @ self._dense
        return self._butterfly(x)

    def _butterfly(self, x):
        n = self.n_qubits
        batch = x.shape[:-1]
        y = x.reshape(batch + (2,) * (2 * n))
        for axis in range(len(batch), len(batch) + 2 * n):
            lo = np.take(y, 0, axis=axis)
            hi = np.take(y, 1, axis=axis)
            y = np.stack((lo + hi, lo - hi), axis=axis)
        # the transform yields c[n, m]; b[m, n] = c[n, m] / 2^N
        row_axes = list(range(len(batch), len(batch) + n))
        col_axes = list(range(len(batch) + n, len(batch) + 2 * n))
        y = np.transpose(y, list(range(len(batch))) + col_axes + row_axes)
        return y.reshape(x.shape) / 2**n

    def fe(self, a):
        return float(self.mean_mask @ (a * a))

    def fb(self, a):
        b = self.dual(a)
        return float(self.mean_mask @ (b * b))

    def constraints(self, a, target_fb):
        """Constraint values and their Jacobian with respect to vec(a)."""
        b = self.dual(a)
        c = np.concatenate(
            ([self.mean_mask @ (b * b) - target_fb], self.deviations @ (a * a), self.deviations @ (b * b))
        )
        jac = np.vstack(
            (
                2.0 * self.dual(self.mean_mask * b),
                2.0 * self.deviations * a,
                2.0 * self.dual(self.deviations * b),
            )
        )
        return c, jac

    def spreads(self, a):
        b = self.dual(a)
        fe_rows, fb_rows = self.masks @ (a * a), self.masks @ (b * b)
        return float(np.ptp(fe_rows)), float(np.ptp(fb_rows))


class _GeneralReal:
    def __init__(self, n_qubits):
        self.size = 4**n_qubits
        self.n_qubits = n_qubits

    def start(self, rng):
        return rng.random(self.size) + 0.05

    def amplitudes(self, u):
        return u / np.linalg.norm(u)

    def jacobian(self, u):
        r = np.linalg.norm(u)
        a = u / r
        return (np.eye(self.size) - np.outer(a, a)) / r


class _TensorPower:
    """a = (t / |t|)^{⊗N} for a free nonnegative 2x2 table t."""

    def __init__(self, n_qubits):
        self.size = 4
        self.n_qubits = n_qubits

    def start(self, rng):
        return rng.random(4) + 0.05

    def amplitudes(self, t):
        s = (t / np.linalg.norm(t)).reshape(2, 2)
        out = np.ones((1, 1))
        for _ in range(self.n_qubits):
            out = np.kron(out, s)
        return out.ravel()

    def jacobian(self, t):
        r = np.linalg.norm(t)
        s = (t / r).reshape(2, 2)
        powers = [np.ones((1, 1))]
        for _ in range(self.n_qubits - 1):
            powers.append(np.kron(powers[-1], s))
        cols = []
        for j in range(4):
            e = np.zeros(4)
            e[j] = 1.0
            e = e.reshape(2, 2)
            total = sum(
                np.kron(np.kron(powers[pos], e), powers[self.n_qubits - 1 - pos])
                for pos in range(self.n_qubits)
            )
            cols.append(total.ravel())
        da_ds = np.array(cols).T
        ds_dt = (np.eye(4) - np.outer(s.ravel(), s.ravel())) / r
        return da_ds @ ds_dt


@dataclass(frozen=True)
class OptimizationProblem:
    protocol: Protocol
    n_qubits: int
    mode: Mode
    target_fb: float
    parameterization: Parameterization = Parameterization.GENERAL_REAL
    constraint_tol: float = 1e-8
    objective_tol: float = 1e-9
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "parameterization", Parameterization(self.parameterization))
        cap = MAX_QUBITS_GENERAL if self.parameterization is Parameterization.GENERAL_REAL else MAX_QUBITS_TENSOR
        if not 1 <= self.n_qubits <= cap:
            raise ValueError(f"n_qubits must be in [1, {cap}] for {self.parameterization.value} search")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        _check_domain(self.protocol, self.target_fb)


@dataclass(frozen=True)
class OptimizationResult:
    a: AmplitudeMatrix
    fe: float
    fb_achieved: float
    residuals: dict = field(default_factory=dict)
    converged: bool = False
    restarts_used: int = 0

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


def _solve_alm(model, param, p0, target_fb, max_outer=40):
    lam = np.zeros(1 + 2 * len(model.rows))
    mu, prev = 10.0, np.inf
    p = p0
    bounds = [(0.0, None)] * param.size

    def phi(p):
        if not np.any(p > 0):
            return np.inf, np.zeros_like(p)
        a = param.amplitudes(p)
        c, jac = model.constraints(a, target_fb)
        val = -model.fe(a) + lam @ c + 0.5 * mu * c @ c
        grad_a = -2.0 * model.mean_mask * a + jac.T @ (lam + mu * c)
        return val, param.jacobian(p).T @ grad_a

    for _ in range(max_outer):
        res = minimize(
            phi, p, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": 2000},
        )
        p = res.x
        c, _ = model.constraints(param.amplitudes(p), target_fb)
        worst = np.abs(c).max()
        lam = lam + mu * c
        if worst < 1e-12:
            break
        if worst > 0.25 * prev:
            mu = min(mu * 10.0, 1e8)
        prev = worst
    return _polish(model, param, p, target_fb)


def _polish(model, param, p, target_fb, steps=8):
    """Minimum-norm Newton steps back onto the constraint set."""
    for _ in range(steps):
        a = param.amplitudes(p)
        c, jac = model.constraints(a, target_fb)
        if np.abs(c).max() < 1e-14:
            break
        step = np.linalg.lstsq(jac @ param.jacobian(p), -c, rcond=1e-10)[0]
        trial = np.maximum(p + step, 0.0)
        c_trial, _ = model.constraints(param.amplitudes(trial), target_fb)
        if np.abs(c_trial).max() >= np.abs(c).max():
            break
        p = trial
    return p


def optimize(problem: OptimizationProblem) -> OptimizationResult:
    """Multi-start search for Eve's best cloner at Bob fidelity ``problem.target_fb``.

    Raises :class:`InfeasibleTargetError` for targets outside the protocol's
    domain; a target that no start can meet gives ``converged=False``.
    """
    model = FidelityModel(problem.protocol, problem.n_qubits, problem.mode)
    if problem.parameterization is Parameterization.GENERAL_REAL:
        param = _GeneralReal(problem.n_qubits)
    else:
        param = _TensorPower(problem.n_qubits)
    rng = np.random.default_rng(problem.seed)
    best = None
    fallback = None
    for _ in range(problem.restarts):
        p = _solve_alm(model, param, param.start(rng), problem.target_fb)
        a = param.amplitudes(p)
        c, _ = model.constraints(a, problem.target_fb)
        worst = float(np.abs(c).max())
        fe = model.fe(a)
        if worst <= problem.constraint_tol:
            if best is None or fe > best[0]:
                best = (fe, a)
        elif fallback is None or worst < fallback[0]:
            fallback = (worst, a)
    converged = best is not None
    a = best[1] if converged else fallback[1]
    spread_e, spread_b = model.spreads(a)
    residuals = {
        "normalization": abs(float(a @ a) - 1.0),
        "fb": abs(model.fb(a) - problem.target_fb),
        "spread_E": spread_e,
        "spread_B": spread_b,
    }
    d = 2**problem.n_qubits
    return OptimizationResult(
        a=AmplitudeMatrix(a.reshape(d, d)),
        fe=model.fe(a),
        fb_achieved=model.fb(a),
        residuals=residuals,
        converged=converged,
        restarts_used=problem.restarts,
    )


# --- stationarity checks -------------------------------------------------

def single_qubit_factor(a: AmplitudeMatrix, atol: float = 1e-10) -> np.ndarray:
    """Recover s with a = s^{⊗N} (s normalized, s[0,0] > 0), or raise ValueError."""
    n = a.n_qubits
    entries = a.entries
    if abs(entries.imag).max() > atol:
        raise ValueError("tensor-power check needs real amplitudes")
    entries = entries.real
    if entries[0, 0] <= 0:
        raise ValueError("a[0, 0] must be positive to factor the tensor power")
    s00 = entries[0, 0] ** (1.0 / n)
    half = 2 ** (n - 1)
    s = np.array([[entries[j * half, k * half] for k in range(2)] for j in range(2)]) / s00 ** (n - 1)
    if not np.allclose(tensor_power(s, n).entries.real, entries, atol=atol, rtol=0):
        raise ValueError("amplitude table is not a tensor power of a 2x2 table")
    return s


def lagrangian_terms(params, protocol, n_qubits: int):
    """Eve fidelity, Bob fidelity and normalization excess in the printed polynomial form.

    ``params`` is (v, x, y) for BB84 and (v, x) for six-state, where the
    six-state form puts x wherever the BB84 form has y. The sum runs over all
    bit-flip patterns m with weight (N - |m|) / N.
    """
    if Protocol(protocol) is Protocol.BB84:
        v, x, y = params
    else:
        v, x = params
        y = x
    eve0, eve1 = v * v + x * x, x * x + y * y
    bob0, bob1 = 0.5 + v * x + x * y, 0.5 - v * x - x * y
    fe = fb = 0.0
    for m in itertools.product((0, 1), repeat=n_qubits):
        ones = sum(m)
        fe = fe + (n_qubits - ones) * eve0 ** (n_qubits - ones) * eve1**ones
        fb = fb + (n_qubits - ones) * bob0 ** (n_qubits - ones) * bob1**ones
    norm = (v * v + 2 * x * x + y * y) ** n_qubits - 1.0
    return fe / n_qubits, fb / n_qubits, norm


def _lagrangian_gradients(params, protocol, n_qubits):
    # complex-step derivatives; the terms are polynomials so this is exact to rounding
    h = 1e-30
    params = np.asarray(params, dtype=float)
    grads = np.zeros((3, len(params)))
    for j in range(len(params)):
        z = params.astype(complex)
        z[j] += 1j * h
        grads[:, j] = np.array(lagrangian_terms(z, protocol, n_qubits)).imag / h
    return grads


def ansatz_parameters(a: AmplitudeMatrix, protocol, atol: float = 1e-10):
    s = single_qubit_factor(a, atol)
    if abs(s[0, 1] - s[1, 0]) > atol:
        raise ValueError("single-qubit table is not symmetric")
    if Protocol(protocol) is Protocol.BB84:
        return s[0, 0], s[0, 1], s[1, 1]
    if abs(s[1, 1] - s[0, 1]) > atol:
        raise ValueError("six-state table must have the form [[v, x], [x, x]]")
    return s[0, 0], s[0, 1]


def fit_multipliers(params, protocol, n_qubits):
    g_fe, g_fb, g_norm = _lagrangian_gradients(params, protocol, n_qubits)
    basis = np.column_stack((g_fb, g_norm))
    lambdas = np.linalg.lstsq(basis, -g_fe, rcond=None)[0]
    return tuple(float(v) for v in lambdas)


def lagrangian_residual(a: AmplitudeMatrix, protocol, lambdas=None) -> float:
    """Norm of the gradient of F_E + l1 F_B + l2 (norm - 1) over the ansatz parameters.

    Multipliers are fitted by least squares unless given. For six-state the
    two-parameter family is pinned by its two constraints, so the residual
    vanishes at any point and carries no information; use :func:`kkt_residual`.
    """
    params = ansatz_parameters(a, protocol)
    n = a.n_qubits
    if lambdas is None:
        lambdas = fit_multipliers(params, protocol, n)
    g_fe, g_fb, g_norm = _lagrangian_gradients(params, protocol, n)
    return float(np.linalg.norm(g_fe + lambdas[0] * g_fb + lambdas[1] * g_norm))


def kkt_residual(a: AmplitudeMatrix, protocol, mode=Mode.INDEPENDENT) -> float:
    """Stationarity residual of the full constrained problem in amplitude space.

    Uses every constraint the search imposes (normalization, Bob's fidelity,
    equal single-qubit fidelities for both clones) with least-squares
    multipliers, at the Bob fidelity ``a`` achieves.
    """
    if abs(a.entries.imag).max() > 1e-12:
        raise ValueError("KKT check needs real amplitudes")
    vec = a.entries.real.ravel()
    model = FidelityModel(protocol, a.n_qubits, mode)
    _, jac = model.constraints(vec, model.fb(vec))
    jac = np.vstack((2.0 * vec, jac))
    grad = 2.0 * model.mean_mask * vec
    lambdas = np.linalg.lstsq(jac.T, -grad, rcond=1e-12)[0]
    return float(np.linalg.norm(grad + jac.T @ lambdas))


def perturbed_ansatz(protocol, fb: float, n_qubits: int, scale: float = 0.05) -> AmplitudeMatrix:
    """Tensor-power optimum with the single-qubit entry v scaled by 1 + scale, renormalized."""
    s = single_qubit_factor(product_ansatz(protocol, fb, n_qubits)).copy()
    s[0, 0] *= 1.0 + scale
    s /= np.linalg.norm(s)
    return tensor_power(s, n_qubits)


def perturb_entry(a: AmplitudeMatrix, index=(0, 0), scale: float = 0.05) -> AmplitudeMatrix:
    """Scale one amplitude of the full table and renormalize.

    Tensor powers of symmetric 2x2 tables are stationary for the six-state
    constraint set, so power checks of :func:`kkt_residual` must break the
    tensor structure.
    """
    entries = np.array(a.entries)
    entries[index] *= 1.0 + scale
    return AmplitudeMatrix(entries / np.linalg.norm(entries))


# --- closed form versus general search ------------------------------------

@dataclass(frozen=True)
class GridPoint:
    fb: float
    mode: Mode
    fe_search: float
    fe_closed: float
    converged: bool

    @property
    def deviation(self) -> float:
        return abs(self.fe_search - self.fe_closed)


@dataclass(frozen=True)
class TensorOptimalityReport:
    protocol: Protocol
    n_qubits: int
    points: tuple[GridPoint, ...]

    @property
    def max_deviation(self) -> float:
        return max(p.deviation for p in self.points)

    @property
    def mode_disagreement(self) -> float:
        """Largest |F_E(correlated) - F_E(independent)| over shared grid points; 0 with one mode."""
        by_fb: dict = {}
        for p in self.points:
            by_fb.setdefault(p.fb, []).append(p.fe_search)
        return max((max(v) - min(v) for v in by_fb.values()), default=0.0)

    @property
    def all_converged(self) -> bool:
        return all(p.converged for p in self.points)


def verify_tensor_optimality(
    protocol,
    n_qubits: int,
    modes=(Mode.INDEPENDENT, Mode.CORRELATED),
    fb_grid=None,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
) -> TensorOptimalityReport:
    protocol = Protocol(protocol)
    if fb_grid is None:
        fb_grid = np.linspace(0.75, 0.95, 11)
    if isinstance(modes, (str, Mode)):
        modes = (modes,)
    points = []
    for fb in fb_grid:
        fb = float(fb)
        for mode in modes:
            res = optimize(
                OptimizationProblem(protocol, n_qubits, Mode(mode), fb, restarts=restarts, seed=seed)
            )
            points.append(GridPoint(fb, Mode(mode), res.fe, optimal_fe(protocol, fb), res.converged))
    return TensorOptimalityReport(protocol, n_qubits, tuple(points))
