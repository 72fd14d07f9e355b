"""Shannon information of the legitimate parties and of the eavesdropper.

All logarithms are base 2, with 0 log 0 = 0 at the domain edges.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .optimizer import optimal_fe
from .qkit import Protocol

THRESHOLD_XTOL = 1e-12


def _xlog2x(p: float) -> float:
    return 0.0 if p == 0.0 else p * np.log2(p)


def _check_unit(name, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def info_ab(fidelity: float) -> float:
    """1 - h2(F): mutual information of a binary symmetric channel with success F."""
    _check_unit("fidelity", fidelity)
    return 1.0 + _xlog2x(fidelity) + _xlog2x(1.0 - fidelity)


def info_ae_bb84(fe: float) -> float:
    return info_ab(fe)


def info_ae_six(fb: float, fe: float) -> float:
    """Alice-Eve information for the six-state cloning attack."""
    _check_unit("F_B", fb)
    _check_unit("F_E", fe)
    if fb <= 0.0:
        raise ValueError("F_B must be positive")
    s = fb + fe - 1.0
    if s < 0.0:
        if s > -1e-15:
            s = 0.0
        else:
            raise ValueError(f"F_B + F_E must be >= 1, got {fb + fe}")
    out = 1.0
    if s > 0.0:
        out += s * np.log2(s / fb)
    if fe < 1.0:
        out += (1.0 - fe) * np.log2((1.0 - fe) / fb)
    return float(out)


def ck_rate(i_ab: float, i_ae: float, i_be: float | None = None) -> float:
    """One-way secret-key rate lower bound max(I_AB - I_AE, I_AB - I_BE).

    With ``i_be`` unknown, ``i_be = i_ae`` (the sufficient condition I_AB > I_AE).
    """
    if i_be is None:
        i_be = i_ae
    return max(i_ab - i_ae, i_ab - i_be)


def info_ae(protocol, fb: float, fe: float) -> float:
    if Protocol(protocol) is Protocol.BB84:
        return info_ae_bb84(fe)
    return info_ae_six(fb, fe)


@dataclass(frozen=True)
class InfoCurvePoint:
    F_B: float
    F_E: float
    I_AB: float
    I_AE: float
    rate_lower_bound: float


def curve_point(protocol, fb: float, fe: float) -> InfoCurvePoint:
    i_ab = info_ab(fb)
    i_ae = info_ae(protocol, fb, fe)
    return InfoCurvePoint(fb, fe, i_ab, i_ae, ck_rate(i_ab, i_ae))


def threshold(protocol, xtol: float = THRESHOLD_XTOL) -> float:
    """Bob fidelity above which I_AB exceeds Eve's information on the optimal curve."""
    protocol = Protocol(protocol)

    def gap(fb):
        return info_ab(fb) - info_ae(protocol, fb, optimal_fe(protocol, fb))

    lo, hi = 0.5 + 1e-9, 1.0 - 1e-9
    if np.sign(gap(lo)) == np.sign(gap(hi)):
        raise RuntimeError(f"no sign change of I_AB - I_AE on [{lo}, {hi}] for {protocol.value}")
    return float(bisect(gap, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200))
