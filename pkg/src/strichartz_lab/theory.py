"""Closed-form bound shapes and decoupling-iteration bookkeeping.

Every bound is returned as a product of powers with all absolute constants set
to 1 and ``eps`` defaulting to 0. Logarithms are natural. These are upper-bound
shapes: only their dependence on the parameters is meaningful.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

CONSTANTS_NOTE = "absolute constants normalized to 1; natural log; eps as given (default 0)"


def _as_fraction(beta):
    if isinstance(beta, Fraction):
        return beta
    if isinstance(beta, int):
        return Fraction(beta)
    if isinstance(beta, str):
        return Fraction(beta)
    return Fraction(beta).limit_denominator(10 ** 6)


def iteration_count(beta) -> int:
    """Smallest ``n`` with ``(beta / (1 + beta)) * 2**n >= 1``, i.e. ``ceil(log2(1/beta + 1))``.

    Exact rational arithmetic; floats are read as the nearest fraction with
    denominator at most 10**6.
    """
    b = _as_fraction(beta)
    if not 0 < b <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    target = 1 / b + 1
    n = 0
    while Fraction(2) ** n < target:
        n += 1
    return n


def smoothing_exponent_low_p(alpha, p, d):
    """Decay exponent for ``2 <= p < 2(d+2)/d`` on ``[0, N^-alpha]``."""
    return alpha * (1.0 / p - 0.5 * d * (0.5 - 1.0 / p))


def airy_smoothing_exponent(alpha):
    if not 0 < alpha <= 2:
        raise ValueError("Airy smoothing needs alpha in (0, 2]")
    return alpha / 6 if alpha <= 1 else 1.0 / 6


def B1(lam, N1):
    if N1 <= 1:
        return 1.0
    return math.sqrt(1.0 / N1 + 1.0 / lam)


def B2(lam, N1, N2):
    return math.sqrt(1.0 / lam + N2 / N1)


@dataclass
class BoundReport:
    estimate_id: str
    inputs: dict
    value: float
    exponent_breakdown: list = field(default_factory=list)
    note: str = CONSTANTS_NOTE

    def remultiply(self):
        out = 1.0
        for _, base, exp in self.exponent_breakdown:
            out *= base ** exp
        return out

    def to_dict(self):
        return {
            "estimate_id": self.estimate_id,
            "inputs": self.inputs,
            "value": self.value,
            "exponent_breakdown": [[name, base, exp] for name, base, exp in self.exponent_breakdown],
            "note": self.note,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _need(inputs, *keys):
    missing = [k for k in keys if inputs.get(k) is None]
    if missing:
        raise KeyError(f"missing input(s): {', '.join(missing)}")
    return [inputs[k] for k in keys]


def _L(lam, N, d, eps):
    """Linear rescaled constant as a breakdown entry list."""
    if lam >= N:
        return []
    if d == 1:
        return [("log N1", math.log(N), 2 + eps)]
    return [("N1", float(N), eps)]


def _trilinear_1d(inp):
    N1, alpha, beta = _need(inp, "N1", "alpha", "beta")
    eps = inp.get("eps", 0.0)
    return [("log N1", math.log(N1), 12 + eps), ("N1", float(N1), -alpha * beta / 8)]


def _trilinear_1d_log(inp):
    N1, alpha = _need(inp, "N1", "alpha")
    if N1 <= math.e:
        raise ValueError("log-refined bound needs N1 > e")
    return [("log N1", math.log(N1), 20.0),
            ("N1", float(N1), -alpha / (40 * math.log(math.log(N1))))]


def _nu_exponent(beta):
    return -1 + beta / (2 * (1 + beta))


def _trilinear_2d(inp):
    nu, N1, alpha, beta = _need(inp, "nu", "N1", "alpha", "beta")
    eps = inp.get("eps", 0.0)
    return [("nu", float(nu), _nu_exponent(beta)), ("N1", float(N1), -alpha * beta / 12 + eps)]


def _bilinear_short(inp):
    (N1,) = _need(inp, "N1")
    return [("N1", float(N1), -0.5)]


def _linear_lp(inp):
    (N,) = _need(inp, "N")
    d = int(inp.get("d", 1))
    p = float(inp.get("p", 2 * (d + 2) / d))
    eps = inp.get("eps", 0.0)
    crit = 2 * (d + 2) / d
    if p < crit:
        return [("N", float(N), 0.0)]
    if p == crit:
        if d == 1:
            return [("log N", math.log(N), 2 + eps)]
        return [("N", float(N), eps)]
    return [("N", float(N), d / 2 - (d + 2) / p + eps)]


def _rescaled_bilinear_1d(inp):
    lam, N1 = _need(inp, "lambda", "N1")
    if N1 <= 1:
        return [("B1", 1.0, 1.0)]
    return [("B1", B1(lam, N1), 1.0)]


def _rescaled_trilinear_1d(inp):
    lam, N1, beta = _need(inp, "lambda", "N1", "beta")
    eps = inp.get("eps", 0.0)
    return [("B1", B1(lam, N1), beta / (1 + beta))] + _L(lam, N1, 1, eps)


def _rescaled_trilinear_2d(inp):
    nu, lam, N1, beta = _need(inp, "nu", "lambda", "N1", "beta")
    return [("nu", float(nu), _nu_exponent(beta)),
            ("B2", B2(lam, N1, 1), 2 * beta / (3 * (1 + beta)))]


def _smoothing_low_p(inp):
    N, alpha, p = _need(inp, "N", "alpha", "p")
    d = int(inp.get("d", 1))
    if not 2 <= p < 2 * (d + 2) / d:
        raise ValueError(f"p = {p} outside [2, {2 * (d + 2) / d})")
    return [("N", float(N), -smoothing_exponent_low_p(alpha, p, d))]


def _airy_smoothing(inp):
    N, alpha = _need(inp, "N", "alpha")
    return [("N", float(N), -airy_smoothing_exponent(alpha))]


def _square_function_gap(inp):
    return [("constant", 1.0, 1.0)]


_SHAPES = {
    "trilinear_1d": _trilinear_1d,
    "trilinear_1d_log": _trilinear_1d_log,
    "trilinear_2d": _trilinear_2d,
    "bilinear_short": _bilinear_short,
    "linear_lp": _linear_lp,
    "rescaled_bilinear_1d": _rescaled_bilinear_1d,
    "rescaled_trilinear_1d": _rescaled_trilinear_1d,
    "rescaled_trilinear_2d": _rescaled_trilinear_2d,
    "smoothing_low_p": _smoothing_low_p,
    "airy_smoothing": _airy_smoothing,
    "square_function_gap": _square_function_gap,
}

ESTIMATE_IDS = tuple(sorted(_SHAPES))


def theory_bound(estimate_id: str, inputs: dict) -> BoundReport:
    if estimate_id not in _SHAPES:
        raise KeyError(f"unknown estimate id {estimate_id!r}")
    inputs = dict(inputs)
    if inputs.get("eps", 0.0) < 0:
        raise ValueError("eps must be >= 0")
    breakdown = _SHAPES[estimate_id](inputs)
    value = 1.0
    for _, base, exp in breakdown:
        value *= base ** exp
    return BoundReport(estimate_id, inputs, value, breakdown)
