"""Space-time L^p norms and the exact resonance-counting oracle.

Integrals of products ``prod_i |f_i|^{p_i}`` over ``[0, T] x torus`` are
computed slice by slice: the spatial integral is a uniform-grid sum (exact for
even powers once the grid exceeds the trigonometric degree), and time is
composite Gauss-Legendre with panel doubling.

Two facts keep the time rule affordable. The spatial integral ``S(t)`` only
contains frequency differences of momentum-matched tuples, so subtracting a
common linear term ``b . xi`` from every phase (and a constant per factor)
leaves ``S(t)`` unchanged while shrinking its bandwidth. When the budget still
cannot resolve ``[0, T]`` the panels are graded toward ``t = 0`` and the
difference between two levels is reported as the error estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import _kernels
from .core import CoefficientVector, Dispersion, TorusSpec
from .field import (DEFAULT_ORDER, FieldPlan, FieldSamples, chunk_len, composite_gauss,
                    evaluate_field, fast_size, sampling_for)

DEFAULT_TOL = 1e-7
DEFAULT_BUDGET = 1 << 16
# resolved panel width is PANEL_PHASE / bandwidth
PANEL_PHASE = 3.0
FULL_PERIOD_RTOL = 1e-12


@dataclass(frozen=True)
class NormResult:
    value: float
    p: float
    quadrature_error_estimate: float
    exact: bool

    def to_dict(self):
        return {"value": self.value, "p": self.p,
                "quadrature_error_estimate": self.quadrature_error_estimate,
                "exact": self.exact}


@dataclass(frozen=True)
class IntegralResult:
    """``value`` of the integral with an absolute ``error`` estimate."""
    value: float
    error: float
    exact: bool
    converged: bool
    time_nodes: int
    bandwidth: float


def is_even(p):
    return float(p).is_integer() and int(p) % 2 == 0 and p > 0


def _spread_objective(b, xis, oms, weights):
    total = 0.0
    for xi, om, w in zip(xis, oms, weights):
        r = om - xi @ b
        total += w * (r.max() - r.min())
    return total


def common_slope(factors, disp, weights):
    """Linear term ``b`` minimizing the weighted phase spread of all factors."""
    xis, oms, ws = [], [], []
    for c, w in zip(factors, weights):
        if len(c) > 1:
            xis.append(c.xi)
            oms.append(disp.omega(c.xi))
            ws.append(w)
    d = factors[0].torus.d
    if not xis:
        return np.zeros(d)
    if d == 1:
        slopes = []
        for xi, om in zip(xis, oms):
            x = xi[:, 0]
            slopes.append(np.diff(om) / np.diff(x))
        lo = min(s.min() for s in slopes)
        hi = max(s.max() for s in slopes)
        if hi - lo <= 1e-12 * max(abs(lo), abs(hi), 1.0):
            return np.array([0.5 * (lo + hi)])
        res = scipy.optimize.minimize_scalar(
            lambda v: _spread_objective(np.array([v]), xis, oms, ws),
            bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-10 * max(abs(lo), abs(hi), 1.0)})
        return np.array([float(res.x)])
    x = np.concatenate(xis)
    y = np.concatenate(oms)
    A = np.column_stack([x, np.ones(len(x))])
    b0 = np.linalg.lstsq(A, y, rcond=None)[0][:d]
    res = scipy.optimize.minimize(
        lambda v: _spread_objective(v, xis, oms, ws), b0, method="Nelder-Mead",
        options={"xatol": 1e-9 * (1 + np.abs(b0).max()), "fatol": 1e-12, "maxiter": 2000})
    best = res.x if res.fun <= _spread_objective(b0, xis, oms, ws) else b0
    return np.asarray(best, dtype=np.float64)


def reduced_phases(factors, disp: Dispersion, weights):
    """Per-factor phase rates with a common linear term removed.

    Returns the reduced rates and each factor's phase spread; the spatial
    integral of ``prod |f_i|^{p_i}`` then has bandwidth ``sum w_i * spread_i``.
    """
    b = common_slope(factors, disp, weights)
    out, spreads = [], []
    for c in factors:
        if len(c) == 0:
            out.append(np.zeros(0))
            spreads.append(0.0)
            continue
        r = disp.omega(c.xi) - c.xi @ b
        mid = 0.5 * (r.max() + r.min())
        out.append(r - mid)
        spreads.append(float(r.max() - r.min()))
    return out, spreads


def graded_breakpoints(T, bandwidth, max_panels):
    """Panel breakpoints on ``[0, T]``.

    Uniform and fully resolved when ``max_panels`` allows it; otherwise the
    interval is split dyadically toward 0, the innermost piece is resolved and
    the remaining pieces share the budget equally.
    """
    need = max(1, math.ceil(T * bandwidth / PANEL_PHASE))
    if need <= max_panels:
        return np.linspace(0.0, T, need + 1)
    J = 1
    while True:
        first = max(1, math.ceil(need / 2 ** J))
        rest = (max_panels - first) // J
        # stop once the outer pieces get at least as many panels as the innermost
        if first <= rest or first == 1:
            break
        J += 1
    rest = max(rest, 1)
    pieces = [np.linspace(0.0, T / 2 ** J, first + 1)]
    for j in range(J, 0, -1):
        lo, hi = T / 2 ** j, T / 2 ** (j - 1)
        pieces.append(np.linspace(lo, hi, rest + 1)[1:])
    b = np.concatenate(pieces)
    b[-1] = T
    return b


def refine(breakpoints):
    b = np.asarray(breakpoints)
    nb = np.empty(2 * len(b) - 1)
    nb[0::2] = b
    nb[1::2] = 0.5 * (b[1:] + b[:-1])
    return nb


def coarsen(breakpoints):
    b = np.asarray(breakpoints)
    if len(b) <= 2:
        return b
    out = b[::2]
    if out[-1] != b[-1]:
        out = np.append(out, b[-1])
    return out


def _power(absq, p):
    """``|f|^p`` from ``|f|^2``."""
    if p == 2:
        return absq
    if is_even(p):
        return absq ** (int(p) // 2)
    return absq ** (0.5 * p)


def _slice_integrals(groups, powers, ts, cell):
    """Spatial integrals ``S(t_j)`` of ``prod_g (sum_{f in g} |f|^2)^{p_g/2}``."""
    first = groups[0][0]
    size = first.size
    step = chunk_len(size * (1 + sum(len(g) for g in groups)))
    out = np.empty(len(ts))
    axes = tuple(range(1, len(first.shape) + 1))
    for s in range(0, len(ts), step):
        tc = ts[s:s + step]
        prod = None
        for plans, p in zip(groups, powers):
            sq = None
            for plan in plans:
                v = plan.values(tc)
                a = v.real * v.real + v.imag * v.imag
                sq = a if sq is None else sq + a
            a = _power(sq, p)
            prod = a if prod is None else prod * a
        out[s:s + step] = cell * prod.sum(axis=axes)
    return out


def _time_sum(groups, powers, breakpoints, order, cell):
    nodes, weights = composite_gauss(breakpoints, order)
    S = _slice_integrals(groups, powers, nodes, cell)
    return math.fsum((weights * S).tolist())


def spatial_points(groups, powers):
    """Per-axis grid size integrating the product exactly (even powers).

    Non-even powers use the grid of the even ceiling; callers oversample."""
    d = groups[0][0].torus.d
    pts = []
    for a in range(d):
        deg = 0
        wmax = 1
        for g, p in zip(groups, powers):
            w = max(c.width[a] for c in g)
            wmax = max(wmax, w)
            deg += math.ceil(p / 2) * max(w - 1, 0)
        pts.append(fast_size(max(deg + 1, wmax)))
    return tuple(pts)


def _as_group(obj):
    if isinstance(obj, CoefficientVector):
        return [obj]
    return list(obj)


def spacetime_integral(factors, disp: Dispersion, T, tol=DEFAULT_TOL,
                       max_time_nodes=DEFAULT_BUDGET, order=DEFAULT_ORDER) -> IntegralResult:
    """``int_0^T int_torus prod_i |f_i|^{p_i} dx dt``.

    ``factors`` is a sequence of ``(data, p_i)`` where ``data`` is a
    CoefficientVector or a list of them; a list stands for the square function
    ``(sum_theta |f_theta|^2)^{1/2}``. The time rule starts at the resolved (or
    graded) partition and is doubled until the relative change is below
    ``tol`` or the next level would exceed ``max_time_nodes``.
    """
    if not T > 0:
        raise ValueError("need T > 0")
    groups = [[c for c in _as_group(g) if len(c)] for g, _ in factors]
    powers = [float(p) for _, p in factors]
    if any(p <= 0 for p in powers):
        raise ValueError("powers must be positive")
    members = [c for g in groups for c in g]
    tori = {c.torus for g, _ in factors for c in _as_group(g)}
    if len(tori) > 1:
        raise ValueError("factors live on different tori")
    if any(len(g) == 0 for g in groups):
        return IntegralResult(0.0, 0.0, True, True, 0, 0.0)
    torus = members[0].torus
    weights = [max(p / 2, 1.0) for p in powers]
    member_w = [w for g, w in zip(groups, weights) for _ in g]
    omegas, spreads = reduced_phases(members, disp, member_w)
    band, i = 0.0, 0
    for g, w in zip(groups, weights):
        band += w * max(spreads[i:i + len(g)])
        i += len(g)
    all_even = all(is_even(p) for p in powers)
    pts = spatial_points(groups, powers)
    if not all_even:
        pts = tuple(fast_size(2 * m) for m in pts)

    def make_plans(points):
        it = iter(zip(members, omegas))
        return [[FieldPlan(c, om, points) for c, om in (next(it) for _ in g)] for g in groups]

    plans = make_plans(pts)
    cell = torus.volume / plans[0][0].size

    max_panels = max(1, max_time_nodes // (2 * order))
    bps = graded_breakpoints(T, band, max_panels)
    prev = _time_sum(plans, powers, bps, order, cell)
    value, err, converged = prev, math.inf, False
    while (2 * (len(bps) - 1)) * order <= max_time_nodes:
        bps = refine(bps)
        value = _time_sum(plans, powers, bps, order, cell)
        err = abs(value - prev)
        if err <= tol * abs(value) or value == 0.0:
            converged = True
            break
        prev = value
    if err == math.inf:
        # no room to refine: compare against the partition with every other panel merged
        err = abs(value - _time_sum(plans, powers, coarsen(bps), order, cell))
    nodes = (len(bps) - 1) * order

    if not all_even:
        coarse = tuple(fast_size(m // 2) for m in pts)
        cplans = make_plans(coarse)
        cval = _time_sum(cplans, powers, bps, order, torus.volume / cplans[0][0].size)
        err += abs(value - cval)
    return IntegralResult(value, err, all_even and converged, converged, nodes, band)


def _norm_from_integral(res: IntegralResult, p):
    val = max(res.value, 0.0) ** (1.0 / p)
    if res.value > 0:
        e = val * res.error / (p * res.value)
    else:
        e = res.error ** (1.0 / p)
    return NormResult(val, float(p), float(e), bool(res.exact))


def spacetime_norm(coeffs: CoefficientVector, disp: Dispersion, T, p,
                   tol=DEFAULT_TOL, max_time_nodes=DEFAULT_BUDGET) -> NormResult:
    """``||e^{-it omega} f||_{L^p([0,T] x torus)}`` by adaptive quadrature."""
    if p < 1:
        raise ValueError("need p >= 1")
    res = spacetime_integral([(coeffs, p)], disp, T, tol, max_time_nodes)
    return _norm_from_integral(res, p)


def _samples_integral(values, grid, torus, p):
    a = _power(values.real ** 2 + values.imag ** 2, p)
    axes = tuple(range(1, a.ndim))
    cell = torus.volume / int(np.prod(grid.spatial_points))
    S = cell * a.sum(axis=axes)
    return math.fsum((grid.time_weights * S).tolist())


def lp_spacetime_norm(field: FieldSamples, p) -> NormResult:
    """Norm of sampled values with the grid's quadrature rule.

    The error estimate comes from re-evaluating with every time panel halved
    (and, for non-even ``p``, the spatial grid doubled); this needs the
    generating data in ``field.source``, otherwise it is reported as ``inf``.
    """
    if p < 1:
        raise ValueError("need p >= 1")
    vals = field.values
    if not np.all(np.isfinite(vals)):
        raise ValueError("field contains non-finite samples")
    grid = field.grid
    I = _samples_integral(vals, grid, field.torus, p)
    if field.source is None:
        return NormResult(max(I, 0.0) ** (1 / p), float(p), math.inf, False)
    coeffs, disp = field.source
    om = disp.omega(coeffs.xi)
    fine = grid.refined()
    plan = FieldPlan(coeffs, om, grid.spatial_points)
    If = _time_sum([[plan]], [p], fine.breakpoints, fine.order,
                   field.torus.volume / plan.size)
    err = abs(If - I)
    spatially_exact = is_even(p) and all(
        m > (p / 2) * max(w - 1, 0) for m, w in zip(grid.spatial_points, coeffs.width))
    if not is_even(p):
        pts2 = tuple(2 * m for m in grid.spatial_points)
        plan2 = FieldPlan(coeffs, om, pts2)
        I2 = _time_sum([[plan2]], [p], grid.breakpoints, grid.order,
                       field.torus.volume / plan2.size)
        err += abs(I2 - I)
    exact = spatially_exact and err <= DEFAULT_TOL * abs(I)
    res = IntegralResult(I, err, exact, exact, grid.time_points, math.nan)
    return _norm_from_integral(res, p)


def is_full_period(T, torus, disp: Dispersion, supports=()):
    """True when ``T`` is a positive multiple of 2*pi and every phase is integral."""
    if not torus.integer_lattice:
        return False
    n = T / (2 * math.pi)
    if n < 0.5 or abs(n - round(n)) > FULL_PERIOD_RTOL * n:
        return False
    try:
        for c in supports:
            disp.integer_omega(c.ks)
    except ValueError:
        return False
    return True


def _encode(points_list, m):
    """Additive, injective integer codes for up to ``m``-fold sums of 2d points."""
    allp = np.concatenate(points_list)
    lo = allp.min(axis=0)
    if allp.shape[1] == 1:
        return [p[:, 0] - lo[0] for p in points_list]
    wx = int(allp[:, 0].max() - lo[0]) + 1
    stride = m * (wx - 1) + 1
    return [(p[:, 0] - lo[0]) + stride * (p[:, 1] - lo[1]) for p in points_list]


def _integer_slope(coeffs_list, disp):
    """Integer linear term used to shrink the phase range before counting."""
    b = common_slope(coeffs_list, disp, [1.0] * len(coeffs_list))
    return np.rint(b).astype(np.int64)


def exact_even_power_integral(c1: CoefficientVector, c2: CoefficientVector | None,
                              disp: Dispersion, m: int, weights=None) -> float:
    """Exact ``int_0^{2pi} int |f_1|^{2 m_1} |f_2|^{2 m_2}`` by resonance counting.

    Writing ``f_1^{m_1} f_2^{m_2} = sum A(s, q) e^{i(s x - q t)}`` the integral
    is ``vol * 2pi * sum |A(s, q)|^2``. Tuples are bucketed by momentum ``s``
    and keyed by phase ``q`` inside each bucket. A per-bucket affine change of
    ``q`` (an integer linear term in ``k``) is a bijection of the classes, so it
    is applied first to keep the phase range small.
    """
    if weights is None:
        weights = (m, 0) if c2 is None else (m // 2, m - m // 2)
    m1, m2 = (int(w) for w in weights)
    if m1 < 0 or m2 < 0 or m1 + m2 != m:
        raise ValueError("weights must be non-negative and sum to m")
    if m < 1:
        raise ValueError("need m >= 1")
    if m > 3:
        raise ValueError("resonance counting limited to m <= 3")
    if m2 > 0 and c2 is None:
        raise ValueError("second factor missing")
    torus = c1.torus
    if c2 is not None and c2.torus != torus:
        raise ValueError("factors live on different tori")
    if not torus.integer_lattice:
        raise ValueError("resonance counting needs lambda = 1 and unit period factors")
    slots = [c1] * m1 + [c2] * m2
    if any(len(c) == 0 for c in slots):
        return 0.0
    used = [c for c in (c1, c2) if c is not None]
    b = _integer_slope(used, disp)
    omegas = []
    for c in slots:
        w = np.asarray(disp.integer_omega(c.ks), dtype=np.int64) - c.ks @ b
        omegas.append(w - w.min())
    codes = _encode([c.ks for c in slots], m)
    sorted_slots = []
    for code, om, c in zip(codes, omegas, slots):
        order = np.argsort(code, kind="stable")
        sorted_slots.append((np.ascontiguousarray(code[order]), np.ascontiguousarray(om[order]),
                             np.ascontiguousarray(c.amps[order])))
    energy = _kernels.resonance_energy([s[0] for s in sorted_slots],
                                       [s[1] for s in sorted_slots],
                                       [s[2] for s in sorted_slots])
    return torus.volume * 2 * math.pi * energy


def even_power_norm_exact(coeffs, disp, T, p) -> NormResult:
    """Full-period ``L^p`` norm from the resonance oracle (even ``p <= 6``)."""
    n = round(T / (2 * math.pi))
    I = n * exact_even_power_integral(coeffs, None, disp, int(p) // 2)
    return NormResult(I ** (1.0 / p), float(p), 0.0, True)


def time_points_for(coeffs: CoefficientVector, disp: Dispersion, T, p, order=8):
    """Gauss nodes resolving ``|f|^p`` in time with the adaptive rule's panel density."""
    _, spreads = reduced_phases([coeffs], disp, [max(p / 2, 1.0)])
    band = max(p / 2, 1.0) * max(spreads)
    panels = max(1, math.ceil(T * band / PANEL_PHASE))
    return panels * order


def random_support_data(rng, torus: TorusSpec, max_support, box=12):
    """Complex normal amplitudes on a random lattice subset of ``[-box, box]^d``."""
    n = int(rng.integers(1, max_support + 1))
    axis = np.arange(-box, box + 1)
    grid = np.stack(np.meshgrid(*([axis] * torus.d), indexing="ij"), -1).reshape(-1, torus.d)
    ks = grid[rng.choice(len(grid), size=n, replace=False)]
    amps = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return CoefficientVector(torus, ks, amps, {"generator": "random_support", "size": n})


def oracle_check(trials=50, max_support=24, powers=(2, 4, 6), seed=0, d=1,
                 disp=None, box=12):
    """Sampled-field ``L^p`` integrals against resonance counting over one period.

    Returns one record per (trial, p) with the relative discrepancy.
    """
    disp = Dispersion.schrodinger() if disp is None else disp
    torus = TorusSpec.unit(d)
    T = 2 * math.pi
    out = []
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        c = random_support_data(rng, torus, max_support, box)
        for p in powers:
            grid = sampling_for(p, c, T, time_points_for(c, disp, T, p))
            quad = lp_spacetime_norm(evaluate_field(c, disp, grid), p).value ** p
            exact = exact_even_power_integral(c, None, disp, p // 2)
            out.append({"trial": i, "p": p, "support": len(c), "quadrature": quad,
                        "oracle": exact, "rel_error": abs(quad - exact) / exact})
    return out
