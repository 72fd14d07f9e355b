"""Monte-Carlo rounds of the prepare-and-measure protocol under a cloning attack.

Each clone is sampled from its own Pauli channel (weights |a|^2 for Eve,
|b|^2 for Bob), so correlations between Eve's and Bob's errors are not
reproduced; every quantity checked here depends only on those marginals.

Random numbers come from numpy's PCG64. Rounds are split into fixed-size
chunks and chunk ``k`` draws from ``SeedSequence([seed, k])``, so tallies do
not depend on how chunks are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloner import AmplitudeMatrix, average_qubit_fidelity, clone_weights, product_ansatz
from .qkit import Basis, Mode, Protocol

CHUNK_ROUNDS = 50_000


@dataclass(frozen=True, eq=False)
class SimConfig:
    protocol: Protocol
    n_qubits: int
    mode: Mode
    cloner: AmplitudeMatrix
    rounds: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.cloner.n_qubits != self.n_qubits:
            raise ValueError("cloner size does not match the sequence length")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def at_fidelity(cls, protocol, n_qubits, mode, fb, rounds, seed=0):
        """Config using the protocol's tensor-power cloner tuned to Bob fidelity ``fb``."""
        return cls(protocol, n_qubits, mode, product_ansatz(protocol, fb, n_qubits), rounds, seed)


@dataclass(frozen=True)
class SimReport:
    empirical_fb: float
    se_fb: float
    empirical_fe: float
    se_fe: float
    empirical_qber: float
    rounds: int
    rounds_sifted: int
    qubits_sifted: int
    per_position_fb: tuple[float, ...]
    per_position_fe: tuple[float, ...]


def _flip_table(protocol: Protocol) -> np.ndarray:
    """flips[basis, m, n] = 1 when X^m Z^n flips the encoded bit of that basis."""
    table = np.zeros((len(protocol.bases), 2, 2), dtype=bool)
    for k, basis in enumerate(protocol.bases):
        for m in (0, 1):
            for n in (0, 1):
                table[k, m, n] = not basis.passes(m, n)
    return table


def _draw_bases(rng, size, n_qubits, n_bases, mode):
    if mode is Mode.CORRELATED:
        return np.repeat(rng.integers(n_bases, size=(size, 1)), n_qubits, axis=1)
    return rng.integers(n_bases, size=(size, n_qubits))


def _pattern_bits(flat_index, n_qubits):
    d = 2**n_qubits
    m, n = np.divmod(flat_index, d)
    shifts = np.arange(n_qubits - 1, -1, -1)
    return (m[:, None] >> shifts) & 1, (n[:, None] >> shifts) & 1


def _run_chunk(config, chunk, size, p_eve, p_bob, flips):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, chunk])))
    n, nb = config.n_qubits, len(config.protocol.bases)
    alice_basis = _draw_bases(rng, size, n, nb, config.mode)
    alice_bits = rng.integers(2, size=(size, n))
    bob_basis = _draw_bases(rng, size, n, nb, config.mode)
    eve_m, eve_n = _pattern_bits(rng.choice(p_eve.size, size=size, p=p_eve), n)
    bob_m, bob_n = _pattern_bits(rng.choice(p_bob.size, size=size, p=p_bob), n)
    bob_bits = alice_bits ^ flips[alice_basis, bob_m, bob_n]
    eve_bits = alice_bits ^ flips[alice_basis, eve_m, eve_n]
    sifted = bob_basis == alice_basis
    return (
        sifted.sum(axis=0),
        (sifted & (bob_bits == alice_bits)).sum(axis=0),
        (sifted & (eve_bits == alice_bits)).sum(axis=0),
        int(sifted.any(axis=1).sum()),
    )


def _probabilities(weights):
    p = np.clip(weights.ravel(), 0.0, None)
    return p / p.sum()


def run(config: SimConfig) -> SimReport:
    """Sample ``config.rounds`` sequences and tally sifted fidelities.

    Bob draws his bases like Alice (per sequence when correlated) and keeps
    the positions where they agree. Eve measures her clone in Alice's basis
    after it is announced.
    """
    p_eve = _probabilities(clone_weights(config.cloner, "E"))
    p_bob = _probabilities(clone_weights(config.cloner, "B"))
    flips = _flip_table(config.protocol)
    n = config.n_qubits
    sifted = np.zeros(n, dtype=np.int64)
    bob_ok = np.zeros(n, dtype=np.int64)
    eve_ok = np.zeros(n, dtype=np.int64)
    rounds_sifted = 0
    chunks = math.ceil(config.rounds / CHUNK_ROUNDS)
    for chunk in range(chunks):
        size = min(CHUNK_ROUNDS, config.rounds - chunk * CHUNK_ROUNDS)
        s, b, e, r = _run_chunk(config, chunk, size, p_eve, p_bob, flips)
        sifted += s
        bob_ok += b
        eve_ok += e
        rounds_sifted += r
    total = int(sifted.sum())
    fb = _ratio(bob_ok.sum(), total)
    fe = _ratio(eve_ok.sum(), total)
    return SimReport(
        empirical_fb=fb,
        se_fb=_binomial_se(fb, total),
        empirical_fe=fe,
        se_fe=_binomial_se(fe, total),
        empirical_qber=1.0 - fb,
        rounds=config.rounds,
        rounds_sifted=rounds_sifted,
        qubits_sifted=total,
        per_position_fb=tuple(_ratio(k, s) for k, s in zip(bob_ok, sifted)),
        per_position_fe=tuple(_ratio(k, s) for k, s in zip(eve_ok, sifted)),
    )


def _ratio(k, total):
    # no sifted data carries no information: report the coin-flip value
    return float(k) / float(total) if total else 0.5


def _binomial_se(p, total):
    if total == 0:
        return 0.5
    return math.sqrt(p * (1.0 - p) / total)


@dataclass(frozen=True)
class ComparisonRow:
    quantity: str
    empirical: float
    standard_error: float
    analytic: float
    z: float


def _z_score(empirical, analytic, total):
    sigma = math.sqrt(analytic * (1.0 - analytic) / total) if total else 0.5
    diff = empirical - analytic
    if sigma == 0.0:
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    return diff / sigma


def empirical_vs_analytic(config: SimConfig, report: SimReport | None = None) -> list[ComparisonRow]:
    """Side-by-side sampled and exact fidelities with z-scores.

    z-scores use the binomial error of the analytic value over the sifted
    qubit count; when that error vanishes z is 0 for an exact match.
    """
    if report is None:
        report = run(config)
    fe = average_qubit_fidelity(config.cloner, config.protocol, config.mode, "E")
    fb = average_qubit_fidelity(config.cloner, config.protocol, config.mode, "B")
    total = report.qubits_sifted
    rows = [
        ComparisonRow("F_B", report.empirical_fb, report.se_fb, fb, _z_score(report.empirical_fb, fb, total)),
        ComparisonRow("F_E", report.empirical_fe, report.se_fe, fe, _z_score(report.empirical_fe, fe, total)),
        ComparisonRow(
            "QBER", report.empirical_qber, report.se_fb, 1.0 - fb,
            _z_score(report.empirical_qber, 1.0 - fb, total),
        ),
    ]
    return rows


def sample_patterns(weights, size: int, seed: int = 0) -> np.ndarray:
    """Draw flat (m, n) pattern indices from a weight table; used for goodness-of-fit checks."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0])))
    p = _probabilities(np.asarray(weights))
    return rng.choice(p.size, size=size, p=p)


def flips_bit(basis, m: int, n: int) -> bool:
    """Whether X^m Z^n flips a bit encoded in ``basis`` (deterministic for Pauli errors)."""
    return not Basis(basis).passes(m, n)
