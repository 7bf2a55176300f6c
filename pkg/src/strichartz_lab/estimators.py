"""Measured left-hand sides of the linear, bilinear and trilinear estimates.

All observed quantities are scale-free ratios: integrals are divided by the
matching powers of ``||f||_{L^2} = sqrt(vol) * ||c||_2``. Theory bounds come
from :mod:`strichartz_lab.theory` with constants normalized to 1, so only
their dependence on the parameters is meaningful.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from . import theory
from .core import CoefficientVector, Dispersion, FrequencyRegion, TorusSpec
from .norms import (DEFAULT_BUDGET, DEFAULT_TOL, exact_even_power_integral, is_even,
                    is_full_period, spacetime_integral)

TRILINEAR_2D_POWER = 4.0 / 3.0
# |xi_1* - xi_2*| >= SEPARATION_FRACTION * N1 stands in for "comparable to N1"
SEPARATION_FRACTION = 0.25
SQUARE_FUNCTION_CONSTANT = 4.0


class PreconditionError(ValueError):
    """Input data violate the hypotheses of the estimate being measured."""


@dataclass
class EstimateReport:
    estimate_id: str
    parameters: dict
    observed: float
    theory_bound: float | None
    data_provenance: dict = field(default_factory=dict)
    error_estimate: float = 0.0

    def to_dict(self):
        return {
            "estimate_id": self.estimate_id,
            "parameters": self.parameters,
            "observed": self.observed,
            "theory_bound": self.theory_bound,
            "error_estimate": self.error_estimate,
            "provenance": self.data_provenance,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _provenance(*coeffs):
    return {f"f{i + 1}": dict(c.provenance) for i, c in enumerate(coeffs) if c.provenance}


def _radii(c: CoefficientVector):
    xi = c.xi
    return np.sqrt(np.sum(xi * xi, axis=1))


def dyadic_scale(c: CoefficientVector):
    """Dyadic ``N`` with the support inside ``[N, 2N]``; raises otherwise."""
    r = _radii(c)
    lo, hi = float(r.min()), float(r.max())
    N = 2.0 ** math.floor(math.log2(lo)) if lo >= 1 else 1.0
    if hi > 2 * N * (1 + 1e-12):
        raise PreconditionError(f"support |xi| in [{lo:g}, {hi:g}] spans more than one dyadic shell")
    return N


def _check_shell(c, N, label):
    r = _radii(c)
    if r.min() < N * (1 - 1e-12) or r.max() > 2 * N * (1 + 1e-12):
        raise PreconditionError(f"{label} support not inside [{N:g}, {2 * N:g}]")


def _check_separated(c1, c2):
    """Dyadic separation of the high factor ``c1`` and the low factor ``c2``."""
    if _radii(c2).max() > 0.5 * _radii(c1).min() * (1 + 1e-12):
        raise PreconditionError("supports are not dyadically separated "
                                "(need max|supp c2| <= min|supp c1| / 2)")


def _same_torus(*cs):
    t = cs[0].torus
    if any(c.torus != t for c in cs):
        raise ValueError("inputs live on different tori")
    return t


def _normalized(factors, disp, T, tol, budget):
    """Integral of ``prod |f_i|^{p_i}`` over ``prod ||f_i||^{p_i}``, with error."""
    res = spacetime_integral(factors, disp, T, tol, budget)
    denom = 1.0
    for c, p in factors:
        denom *= c.function_l2() ** p
    return res.value / denom, res.error / denom, res


def _root(value, err, q):
    v = max(value, 0.0) ** (1.0 / q)
    e = v * err / (q * value) if value > 0 else err ** (1.0 / q)
    return v, e


# linear


def strichartz_ratio(coeffs: CoefficientVector, disp: Dispersion, torus: TorusSpec | None = None,
                     T=2 * math.pi, p=6, *, method="auto", tol=DEFAULT_TOL,
                     max_time_nodes=DEFAULT_BUDGET, with_error=False):
    """``||field||_{L^p([0,T] x torus)} / ||f||_{L^2}``.

    ``method="auto"`` uses the resonance oracle over full periods for even
    ``p <= 6`` with integral phases, and quadrature otherwise.
    """
    if torus is not None and torus != coeffs.torus:
        raise ValueError("coefficients live on a different torus")
    if coeffs.is_zero():
        raise ValueError("zero data")
    use_exact = method == "exact" or (
        method == "auto" and is_even(p) and p <= 6 and is_full_period(T, coeffs.torus, disp, [coeffs]))
    if use_exact:
        n = round(T / (2 * math.pi))
        I = n * exact_even_power_integral(coeffs, None, disp, int(p) // 2)
        val, err = I / coeffs.function_l2() ** p, 0.0
    else:
        val, err, _ = _normalized([(coeffs, p)], disp, T, tol, max_time_nodes)
    r, e = _root(val, err, p)
    return (r, e) if with_error else r


def linear_lp(coeffs, disp, T, p, N=None, **kw) -> EstimateReport:
    N = dyadic_scale(coeffs) if N is None else N
    r, e = strichartz_ratio(coeffs, disp, None, T, p, with_error=True, **kw)
    bound = theory.theory_bound("linear_lp", {"N": N, "p": p, "d": coeffs.torus.d}).value
    return EstimateReport("linear_lp", {"N": N, "p": p, "T": T, "dispersion": disp.kind},
                          r, bound, _provenance(coeffs), e)


# bilinear


def _bilinear(c1, c2, disp, T, method, tol, budget):
    torus = _same_torus(c1, c2)
    if c1.is_zero() or c2.is_zero():
        raise ValueError("zero data")
    if method == "exact" or (method == "auto" and is_full_period(T, torus, disp, [c1, c2])):
        n = round(T / (2 * math.pi))
        I = n * exact_even_power_integral(c1, c2, disp, 2, (1, 1))
        val, err = I / (c1.function_l2() * c2.function_l2()) ** 2, 0.0
    else:
        val, err, _ = _normalized([(c1, 2), (c2, 2)], disp, T, tol, budget)
    return _root(val, err, 2)


def bilinear_short_ratio(c1: CoefficientVector, c2: CoefficientVector, disp: Dispersion, T, *,
                         allow_unseparated=False, method="auto", tol=DEFAULT_TOL,
                         max_time_nodes=DEFAULT_BUDGET, with_error=False):
    """``||f_1 f_2||_{L^2([0,T] x torus)} / (||f_1|| ||f_2||)``, ``f_1`` the high factor."""
    if not allow_unseparated:
        _check_separated(c1, c2)
    r, e = _bilinear(c1, c2, disp, T, method, tol, max_time_nodes)
    return (r, e) if with_error else r


def bilinear_short(c1, c2, disp, T=None, *, N1=None, N2=None, **kw) -> EstimateReport:
    N1 = dyadic_scale(c1) if N1 is None else N1
    N2 = dyadic_scale(c2) if N2 is None else N2
    T = 1.0 / N1 if T is None else T
    r, e = bilinear_short_ratio(c1, c2, disp, T, with_error=True, **kw)
    bound = theory.theory_bound("bilinear_short", {"N1": N1}).value
    return EstimateReport("bilinear_short", {"N1": N1, "N2": N2, "T": T, "dispersion": disp.kind},
                          r, bound, _provenance(c1, c2), e)


# trilinear, one dimension


def _trilinear_scales(cs, N):
    if N is None:
        N = tuple(dyadic_scale(c) for c in cs)
    else:
        N = tuple(float(n) for n in N)
        for c, n, lab in zip(cs, N, ("f1", "f2", "f3")):
            _check_shell(c, n, lab)
    if not N[0] >= N[1] >= N[2]:
        raise PreconditionError(f"need N1 >= N2 >= N3, got {N}")
    return N


def _max_beta(N1, N3):
    if N3 <= 1:
        return 1.0
    return min(1.0, math.log(N1) / math.log(N3) - 1.0)


def _trilinear_1d_measure(cs, alpha, disp, Ns, tol, budget):
    if _same_torus(*cs).d != 1:
        raise PreconditionError("one-dimensional estimate on a d = 2 torus")
    T = Ns[0] ** (-alpha)
    val, err, _ = _normalized([(c, 2) for c in cs], disp, T, tol, budget)
    return T, val, err


def trilinear_1d(c1, c2, c3, alpha, beta=None, *, N=None, eps=0.0,
                 disp=Dispersion.schrodinger(), tol=DEFAULT_TOL,
                 max_time_nodes=DEFAULT_BUDGET) -> EstimateReport:
    """``int_{[0, N1^-alpha] x T} prod |f_j|^2 / prod ||f_j||^2``.

    Requires dyadic ``N1 >= N2 >= N3`` and ``N1 >= N3^(1+beta)``; ``beta``
    defaults to the largest admissible value, capped at 1.
    """
    if any(c.is_zero() for c in (c1, c2, c3)):
        return EstimateReport("trilinear_1d", {"alpha": alpha}, 0.0, None, _provenance(c1, c2, c3))
    Ns = _trilinear_scales((c1, c2, c3), N)
    N1, N3 = Ns[0], Ns[2]
    if beta is None:
        beta = _max_beta(N1, N3)
        if beta <= 0:
            raise PreconditionError("N1 and N3 are not separated (no admissible beta)")
    elif N1 < N3 ** (1 + beta) * (1 - 1e-12):
        raise PreconditionError(f"N1 = {N1:g} < N3^(1+beta) = {N3 ** (1 + beta):g}")
    T, val, err = _trilinear_1d_measure((c1, c2, c3), alpha, disp, Ns, tol, max_time_nodes)
    bound = theory.theory_bound("trilinear_1d",
                                {"N1": N1, "alpha": alpha, "beta": beta, "eps": eps}).value
    params = {"N1": N1, "N2": Ns[1], "N3": N3, "alpha": alpha, "beta": beta, "T": T}
    return EstimateReport("trilinear_1d", params, val, bound, _provenance(c1, c2, c3), err)


def weak_separation_threshold(N1):
    """Largest ``N3`` allowed by ``N3 <= N1 exp(-log N1 / log log N1)``."""
    ll = math.log(math.log(N1))
    if ll <= 0:
        raise PreconditionError("weak separation needs log log N1 > 0")
    return N1 * math.exp(-math.log(N1) / ll)


def trilinear_1d_log(c1, c2, c3, alpha, *, N=None, disp=Dispersion.schrodinger(),
                     tol=DEFAULT_TOL, max_time_nodes=DEFAULT_BUDGET) -> EstimateReport:
    if any(c.is_zero() for c in (c1, c2, c3)):
        return EstimateReport("trilinear_1d_log", {"alpha": alpha}, 0.0, None,
                              _provenance(c1, c2, c3))
    Ns = _trilinear_scales((c1, c2, c3), N)
    N1, N3 = Ns[0], Ns[2]
    thr = weak_separation_threshold(N1)
    if N3 > thr * (1 + 1e-12):
        raise PreconditionError(f"N3 = {N3:g} exceeds N1 exp(-log N1/log log N1) = {thr:g}")
    T, val, err = _trilinear_1d_measure((c1, c2, c3), alpha, disp, Ns, tol, max_time_nodes)
    bound = theory.theory_bound("trilinear_1d_log", {"N1": N1, "alpha": alpha}).value
    params = {"N1": N1, "N2": Ns[1], "N3": N3, "alpha": alpha, "T": T}
    return EstimateReport("trilinear_1d_log", params, val, bound, _provenance(c1, c2, c3), err)


# trilinear, two dimensions


def _points(obj, torus):
    if isinstance(obj, CoefficientVector):
        return np.asarray(obj.ks, dtype=np.int64)
    if isinstance(obj, FrequencyRegion):
        if torus is None:
            raise ValueError("a torus is needed to enumerate a region")
        return obj.lattice_points(torus)
    return np.asarray(obj, dtype=np.int64).reshape(-1, 2)


def transversality_nu(supports, N1, torus: TorusSpec | None = None):
    """Minimal triangle area over ``supp_1 x supp_2 x supp_3`` divided by ``N1^2``.

    Exhaustive over the lattice points; areas are in physical units.
    """
    if len(supports) != 3:
        raise ValueError("need exactly three supports")
    if torus is None:
        for s in supports:
            if isinstance(s, CoefficientVector):
                torus = s.torus
                break
    if torus is None:
        torus = TorusSpec.unit(2)
    if torus.d != 2:
        raise ValueError("transversality is defined for d = 2")
    pts = [np.ascontiguousarray(_points(s, torus)) for s in supports]
    if any(len(p) == 0 for p in pts):
        raise ValueError("empty support")
    doubled = _kernels.min_doubled_area(*pts)
    scale = torus.lam ** 2 * torus.alphas[0] * torus.alphas[1]
    return 0.5 * doubled / scale / N1 ** 2


def _ball_geometry(c: CoefficientVector):
    xi = c.xi
    lo, hi = xi.min(axis=0), xi.max(axis=0)
    center = 0.5 * (lo + hi)
    r = float(np.sqrt(np.sum((xi - center) ** 2, axis=1)).max())
    return center, r


def _trilinear_2d_measure(cs, alpha_T, disp, tol, budget):
    p = TRILINEAR_2D_POWER
    return _normalized([(c, p) for c in cs], disp, alpha_T, tol, budget)


def trilinear_2d(c1, c2, c3, alpha, beta=None, *, N1=None, N3=None, centers=None,
                 disp=Dispersion.schrodinger(), eps=0.0, tol=DEFAULT_TOL,
                 max_time_nodes=DEFAULT_BUDGET) -> EstimateReport:
    """``int_{[0, N1^-alpha] x T^2} prod |f_i|^{4/3} / prod ||f_i||^{4/3}``.

    Supports must sit in balls ``B(center_i, N3)`` with the first two centers
    at distance at least ``N1 / 4``; transversality must be positive.
    """
    cs = (c1, c2, c3)
    torus = _same_torus(*cs)
    if torus.d != 2:
        raise PreconditionError("two-dimensional estimate on a d = 1 torus")
    if any(c.is_zero() for c in cs):
        return EstimateReport("trilinear_2d", {"alpha": alpha}, 0.0, None, _provenance(*cs))
    geo = [_ball_geometry(c) for c in cs]
    if centers is None:
        centers = [g[0] for g in geo]
    centers = [np.asarray(c, dtype=np.float64) for c in centers]
    if N3 is None:
        N3 = max(g[1] for g in geo)
        N3 = 2.0 ** math.ceil(math.log2(N3)) if N3 >= 1 else 1.0
    for c, ctr, lab in zip(cs, centers, ("f1", "f2", "f3")):
        dist = np.sqrt(np.sum((c.xi - ctr) ** 2, axis=1)).max()
        if dist > N3 * (1 + 1e-12):
            raise PreconditionError(f"{lab} support leaves the ball of radius N3 = {N3:g}")
    if N1 is None:
        rmax = max(float(_radii(c).max()) for c in cs)
        N1 = 2.0 ** math.floor(math.log2(rmax)) if rmax >= 1 else 1.0
    sep = float(np.linalg.norm(centers[0] - centers[1]))
    if sep < SEPARATION_FRACTION * N1:
        raise PreconditionError(f"|xi_1* - xi_2*| = {sep:g} < N1/4")
    if beta is None:
        beta = _max_beta(N1, N3)
        if beta <= 0:
            raise PreconditionError("N3 is not small relative to N1 (no admissible beta)")
    nu = transversality_nu(cs, N1, torus)
    if nu <= 0:
        raise PreconditionError("transversality degenerates (nu = 0)")
    T = N1 ** (-alpha)
    val, err, _ = _trilinear_2d_measure(cs, T, disp, tol, max_time_nodes)
    bound = theory.theory_bound("trilinear_2d", {"nu": nu, "N1": N1, "alpha": alpha,
                                                 "beta": beta, "eps": eps}).value
    params = {"N1": N1, "N3": N3, "alpha": alpha, "beta": beta, "nu": nu, "T": T,
              "gamma": torus.alphas[1]}
    return EstimateReport("trilinear_2d", params, val, bound, _provenance(*cs), err)


# rescaled tori

RESCALED_KINDS = ("rescaled_bilinear_1d", "rescaled_trilinear_1d", "rescaled_trilinear_2d")


def rescaled_verify(kind, lam, Ns, data, *, beta=None, disp=Dispersion.schrodinger(),
                    allow_unseparated=False, tol=DEFAULT_TOL,
                    max_time_nodes=DEFAULT_BUDGET) -> EstimateReport:
    """Unit-time estimates on the torus of period ``2 pi lam``.

    ``Ns`` maps ``N1`` (and optionally ``N2``, ``N3``) to dyadic scales in
    physical frequency units.
    """
    if kind not in RESCALED_KINDS:
        raise ValueError(f"unknown rescaled estimate {kind!r}")
    data = tuple(data)
    torus = _same_torus(*data)
    if abs(torus.lam - lam) > 1e-12 * lam:
        raise ValueError(f"data live on lambda = {torus.lam}, expected {lam}")
    Ns = dict(Ns)
    N1 = float(Ns["N1"])
    T = 1.0
    prov = _provenance(*data)
    if kind == "rescaled_bilinear_1d":
        if len(data) != 2 or torus.d != 1:
            raise ValueError("rescaled bilinear needs two one-dimensional factors")
        c1, c2 = data
        if not allow_unseparated:
            _check_separated(c1, c2)
        val, err = _bilinear(c1, c2, disp, T, "quadrature", tol, max_time_nodes)
        bound = theory.theory_bound(kind, {"lambda": lam, "N1": N1}).value
        return EstimateReport(kind, {"lambda": lam, "N1": N1, "N2": Ns.get("N2"), "T": T},
                              val, bound, prov, err)
    if len(data) != 3:
        raise ValueError("rescaled trilinear estimates need three factors")
    if any(c.is_zero() for c in data):
        return EstimateReport(kind, {"lambda": lam, "N1": N1}, 0.0, None, prov)
    N3 = float(Ns.get("N3", dyadic_scale(data[2]) if torus.d == 1 else 1.0))
    if beta is None:
        beta = _max_beta(N1, N3) if N3 > 1 else 1.0
    if kind == "rescaled_trilinear_1d":
        if torus.d != 1:
            raise ValueError("rescaled_trilinear_1d needs d = 1")
        val, err, _ = _normalized([(c, 2) for c in data], disp, T, tol, max_time_nodes)
        bound = theory.theory_bound(kind, {"lambda": lam, "N1": N1, "beta": beta}).value
        return EstimateReport(kind, {"lambda": lam, "N1": N1, "N3": N3, "beta": beta, "T": T},
                              val, bound, prov, err)
    if torus.d != 2:
        raise ValueError("rescaled_trilinear_2d needs d = 2")
    nu = transversality_nu(data, N1, torus)
    if nu <= 0:
        raise PreconditionError("transversality degenerates (nu = 0)")
    val, err, _ = _trilinear_2d_measure(data, T, disp, tol, max_time_nodes)
    bound = theory.theory_bound(kind, {"nu": nu, "lambda": lam, "N1": N1, "beta": beta}).value
    return EstimateReport(kind, {"lambda": lam, "N1": N1, "N3": N3, "beta": beta, "nu": nu,
                                 "T": T}, val, bound, prov, err)


# square function


def split_blocks(c: CoefficientVector, length):
    """Partition the support into consecutive lattice cells of side ``length``."""
    length = int(length)
    if length < 1:
        raise ValueError("block length must be >= 1")
    if len(c) == 0:
        return []
    cells = (c.ks - c.ks.min(axis=0)) // length
    keys, inv = np.unique(cells, axis=0, return_inverse=True)
    inv = np.asarray(inv).reshape(-1)
    return [CoefficientVector(c.torus, c.ks[inv == j], c.amps[inv == j]) for j in range(len(keys))]


def _blocks_from_regions(c, regions):
    member = np.zeros((len(regions), len(c)), dtype=bool)
    for j, reg in enumerate(regions):
        member[j] = reg.contains(c.ks, c.torus)
    counts = member.sum(axis=0)
    if np.any(counts > 1):
        raise ValueError("overlapping blocks")
    if np.any(counts == 0):
        raise ValueError("blocks do not cover the support")
    return [CoefficientVector(c.torus, c.ks[m], c.amps[m]) for m in member if m.any()]


def square_function_gap(c1, c2, blocks, T, *, disp=Dispersion.schrodinger(), tol=DEFAULT_TOL,
                        max_time_nodes=DEFAULT_BUDGET, with_error=False):
    """``int |f_1 f_2|^2`` over ``int (sum_theta |f_1theta|^2)(sum_theta |f_2theta|^2)``.

    ``blocks`` is a block side length (lattice units) or a pair of region
    lists partitioning each support.
    """
    _same_torus(c1, c2)
    if c1.is_zero() or c2.is_zero():
        raise ValueError("zero data")
    shared = set(map(tuple, c1.ks.tolist())) & set(map(tuple, c2.ks.tolist()))
    if shared:
        raise PreconditionError("supports are not disjoint")
    if isinstance(blocks, (int, np.integer)):
        b1, b2 = split_blocks(c1, blocks), split_blocks(c2, blocks)
    else:
        r1, r2 = blocks
        b1, b2 = _blocks_from_regions(c1, r1), _blocks_from_regions(c2, r2)
    lhs = spacetime_integral([(c1, 2), (c2, 2)], disp, T, tol, max_time_nodes)
    rhs = spacetime_integral([(b1, 2), (b2, 2)], disp, T, tol, max_time_nodes)
    ratio = lhs.value / rhs.value
    err = ratio * (lhs.error / lhs.value + rhs.error / rhs.value)
    return (ratio, err) if with_error else ratio


# smoothing


def smoothing_ratio(kind, N, alpha, p, data: CoefficientVector, *, tol=DEFAULT_TOL,
                    max_time_nodes=DEFAULT_BUDGET) -> EstimateReport:
    """``||field||_{L^p([0, N^-alpha] x T^d)} / ||f||_2`` against ``N^-kappa``."""
    d = data.torus.d
    if kind == "schrodinger_low_p":
        if not 2 <= p < 2 * (d + 2) / d:
            raise PreconditionError(f"p = {p} outside [2, {2 * (d + 2) / d:g})")
        disp, eid = Dispersion.schrodinger(), "smoothing_low_p"
    elif kind == "airy":
        if p != 6 or d != 1:
            raise PreconditionError("Airy smoothing is stated for p = 6, d = 1")
        if not 0 < alpha <= 2:
            raise PreconditionError("Airy smoothing needs alpha in (0, 2]")
        disp, eid = Dispersion.airy(), "airy_smoothing"
    else:
        raise ValueError(f"unknown smoothing kind {kind!r}")
    if data.is_zero():
        raise ValueError("zero data")
    _check_shell(data, N, "data")
    T = float(N) ** (-alpha)
    val, err, _ = _normalized([(data, p)], disp, T, tol, max_time_nodes)
    r, e = _root(val, err, p)
    bound = theory.theory_bound(eid, {"N": N, "alpha": alpha, "p": p, "d": d}).value
    return EstimateReport(eid, {"N": N, "alpha": alpha, "p": p, "T": T, "d": d}, r, bound,
                          _provenance(data), e)
