"""Structured test data and projected gradient ascent on the unit sphere.

Objectives are ratios ``R = I^{1/q} / prod_s ||f_s||^{p_s/q}`` with
``I = int_0^T int prod_s |f_s|^{p_s}``. For even powers the gradient of ``I``
with respect to the coefficients of slot ``i`` is

    G_k = int p_i |f_i|^{p_i - 2} f_i prod_{j != i} |f_j|^{p_j} conj(e_k),

computed with one forward transform per time node. Other powers fall back to
central differences.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import CoefficientVector, Dispersion, FrequencyRegion, TorusSpec
from .estimators import _normalized, bilinear_short_ratio, strichartz_ratio
from .field import DEFAULT_ORDER, FieldPlan, chunk_len, composite_gauss, workers
from .norms import (DEFAULT_BUDGET, _power, graded_breakpoints, is_even, reduced_phases, refine,
                    spatial_points)

KINDS = ("knapp", "constant", "random", "single_mode")

STEP0 = 0.1
BACKTRACK = 0.5
GROW = 1.2
STEP_FLOOR = 1e-8
STREAK = 5
GRAD_ZERO = 1e-10


# structured data


def default_support(N, torus: TorusSpec):
    """Dyadic shell ``N <= |xi| < 2N`` (positive half-line in one dimension)."""
    if torus.d == 1:
        return FrequencyRegion.interval(N, 2 * N, upper_open=True)
    return FrequencyRegion.shell(N)


def knapp_width(N, alpha, disp: Dispersion):
    """Coherent block width in physical units."""
    if disp.kind in ("airy", "kdv_galilean"):
        return float(N) ** ((1 + alpha) / 2)
    return float(N) ** (alpha / 2)


def _knapp_points(pts, torus, width, anchored):
    xi = torus.physical(pts)
    if anchored:
        lo = xi.min(axis=0)
        if torus.d == 2:
            lo = np.array([lo[0], 0.0])
        hi = lo + width
    else:
        ctr = 0.5 * (xi.min(axis=0) + xi.max(axis=0))
        lo, hi = ctr - width / 2, ctr + width / 2
    tol = 1e-12 * max(1.0, float(np.abs(hi).max()))
    keep = np.all((xi >= lo - tol) & (xi < hi - tol), axis=1)
    return pts[keep]


def structured_data(kind, N, disp: Dispersion, torus: TorusSpec, *, alpha=1.0, seed=None,
                    factor=0, region: FrequencyRegion | None = None) -> CoefficientVector:
    """Unit-norm test data on the shell at ``N`` (or on ``region``).

    ``knapp`` is the indicator of a coherent block of width ``N^{alpha/2}``
    (``N^{(1+alpha)/2}`` for cubic dispersion); ``random`` draws complex normal
    amplitudes from ``default_rng([seed, factor])``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown data kind {kind!r}")
    support = default_support(N, torus) if region is None else region
    pts = support.lattice_points(torus)
    if len(pts) == 0:
        raise ValueError("empty support")
    prov = {"generator": kind, "N": N}
    warnings = []
    if kind == "knapp":
        prov["alpha"] = alpha
        width = knapp_width(N, alpha, disp)
        count = math.floor(width * float(np.min(torus.scales)) * (1 + 1e-12))
        if count < 1:
            warnings.append(f"block width {width:g} below one lattice step; single mode used")
            kind = "single_mode"
        elif torus.d == 1 and count >= len(pts):
            warnings.append(f"block width {width:g} reaches the support size {len(pts)}; capped")
        else:
            block = _knapp_points(pts, torus, width, anchored=region is None)
            if len(block) == 0:
                warnings.append("no lattice point in the block; single mode used")
                kind = "single_mode"
            else:
                pts = block
    if kind == "single_mode":
        pts = pts[:1]
        amps = np.ones(1, dtype=np.complex128)
    elif kind in ("knapp", "constant"):
        amps = np.ones(len(pts), dtype=np.complex128)
    else:
        if seed is None:
            raise ValueError("random data need a seed")
        prov["seed"] = int(seed)
        prov["factor"] = int(factor)
        rng = np.random.default_rng([int(seed), int(factor)])
        amps = rng.standard_normal(len(pts)) + 1j * rng.standard_normal(len(pts))
    if warnings:
        prov["warnings"] = warnings
    return CoefficientVector(torus, pts, amps, prov).normalized()


def parse_kind(text):
    """``"random:7"`` -> ``("random", 7)``; other kinds carry no seed."""
    name, _, arg = str(text).partition(":")
    return name, (int(arg) if arg else None)


# objectives

_SHAPES = {
    "linear_lp": None,
    "smoothing_low_p": None,
    "airy_smoothing": None,
    "bilinear_short": ((2.0, 2.0), 2.0),
    "rescaled_bilinear_1d": ((2.0, 2.0), 2.0),
    "trilinear_1d": ((2.0, 2.0, 2.0), 1.0),
    "trilinear_1d_log": ((2.0, 2.0, 2.0), 1.0),
    "rescaled_trilinear_1d": ((2.0, 2.0, 2.0), 1.0),
    "trilinear_2d": ((4 / 3,) * 3, 1.0),
    "rescaled_trilinear_2d": ((4 / 3,) * 3, 1.0),
}


@dataclass
class Objective:
    """A Strichartz-type ratio seen as a function of some coefficient slots.

    ``fixed`` maps slot index to data held constant; the remaining slots are
    free. With several free slots the ascent cycles them in index order.
    """
    estimate_id: str
    disp: Dispersion
    T: float
    p: float | None = None
    fixed: dict = field(default_factory=dict)
    max_time_nodes: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.estimate_id not in _SHAPES:
            raise ValueError(f"no objective for {self.estimate_id!r}")
        shape = _SHAPES[self.estimate_id]
        if shape is None:
            if self.p is None:
                raise ValueError("linear objectives need p")
            self.powers, self.root = (float(self.p),), float(self.p)
        else:
            self.powers, self.root = shape
        self.fixed = {int(k): v for k, v in self.fixed.items()}
        self.free = tuple(i for i in range(len(self.powers)) if i not in self.fixed)
        if not self.free:
            raise ValueError("objective has no free slot")
        self.analytic = all(is_even(self.powers[i]) for i in range(len(self.powers)))
        self._grid = None

    @property
    def nslots(self):
        return len(self.powers)

    def slots(self, free_values):
        out = []
        it = iter(free_values)
        for i in range(self.nslots):
            out.append(self.fixed[i] if i in self.fixed else next(it))
        return out

    def prepare(self, free_values):
        """Freeze the space-time grid for supports of ``free_values``."""
        cs = self.slots(free_values)
        weights = [max(p / 2, 1.0) for p in self.powers]
        omegas, spreads = reduced_phases(cs, self.disp, weights)
        band = sum(w * s for w, s in zip(weights, spreads))
        pts = spatial_points([[c] for c in cs], self.powers)
        if not self.analytic:
            pts = tuple(2 * m for m in pts)
        plans = [FieldPlan(c, om, pts) for c, om in zip(cs, omegas)]
        max_panels = max(1, self.max_time_nodes // (2 * DEFAULT_ORDER))
        bps = refine(graded_breakpoints(self.T, band, max_panels))
        nodes, tw = composite_gauss(bps, DEFAULT_ORDER)
        torus = cs[0].torus
        self._grid = {
            "plans": plans, "nodes": nodes, "weights": tw,
            "cell": torus.volume / plans[0].size,
            "norm_scale": math.sqrt(torus.volume),
            "supports": [c.ks for c in cs],
        }

    def _check_support(self, cs):
        for c, ks in zip(cs, self._grid["supports"]):
            if not np.array_equal(c.ks, ks):
                raise ValueError("support changed after the grid was prepared")

    def _integral(self, amps_list, grad_slot=None):
        g = self._grid
        plans = g["plans"]
        ts, tw, cell = g["nodes"], g["weights"], g["cell"]
        step = chunk_len(plans[0].size * (self.nslots + 1))
        terms = []
        grad = None
        if grad_slot is not None:
            grad = np.zeros(len(plans[grad_slot].index), dtype=np.complex128)
        axes = tuple(range(1, len(plans[0].shape) + 1))
        for s in range(0, len(ts), step):
            tc, wc = ts[s:s + step], tw[s:s + step]
            vals, pw = [], []
            for plan, amps, p in zip(plans, amps_list, self.powers):
                v = plan.values(tc, amps)
                vals.append(v)
                pw.append(_power(v.real * v.real + v.imag * v.imag, p))
            prod = pw[0]
            for a in pw[1:]:
                prod = prod * a
            S = cell * prod.sum(axis=axes)
            terms.extend((wc * S).tolist())
            if grad_slot is not None:
                i = grad_slot
                p = self.powers[i]
                others = None
                for j, a in enumerate(pw):
                    if j != i:
                        others = a if others is None else others * a
                v = vals[i]
                absq = v.real * v.real + v.imag * v.imag
                h = p * _power(absq, p - 2) * v if p > 2 else p * v
                if others is not None:
                    h = h * others
                grad += plans[i].adjoint(h, tc, wc, cell)
        return math.fsum(terms), grad

    def _amps(self, cs):
        return [np.asarray(c.amps) for c in cs]

    def ratio_grid(self, free_values):
        """Ratio on the frozen grid."""
        cs = self.slots(free_values)
        self._check_support(cs)
        I, _ = self._integral(self._amps(cs))
        return self._ratio_from(I, cs)

    def _ratio_from(self, I, cs):
        denom = 1.0
        for c, p in zip(cs, self.powers):
            denom *= (self._grid["norm_scale"] * c.l2()) ** p
        return max(I, 0.0) ** (1.0 / self.root) / denom ** (1.0 / self.root)

    def log_gradient(self, free_values, slot):
        """Value and gradient of ``log R`` with respect to free slot ``slot``."""
        cs = self.slots(free_values)
        self._check_support(cs)
        idx = self.free[slot]
        c = cs[idx]
        if self.analytic:
            I, G = self._integral(self._amps(cs), grad_slot=idx)
            g = (G / I - self.powers[idx] * c.amps / c.l2() ** 2) / self.root
            return self._ratio_from(I, cs), g
        return self.ratio_grid(free_values), self._fd_log_gradient(free_values, slot)

    def _fd_log_gradient(self, free_values, slot, h=1e-6):
        base = list(free_values)
        c = base[slot]
        g = np.zeros(len(c), dtype=np.complex128)
        for k in range(len(c)):
            for unit in (1.0, 1j):
                e = np.zeros(len(c), dtype=np.complex128)
                e[k] = unit * h
                up, dn = list(base), list(base)
                up[slot] = c.with_amps(c.amps + e)
                dn[slot] = c.with_amps(c.amps - e)
                d = (math.log(self.ratio_grid(up)) - math.log(self.ratio_grid(dn))) / (2 * h)
                g[k] += unit * d
        return g

    def estimate(self, free_values):
        """Ratio through the estimators' adaptive machinery."""
        cs = self.slots(free_values)
        if self.estimate_id in ("linear_lp", "smoothing_low_p", "airy_smoothing"):
            return strichartz_ratio(cs[0], self.disp, None, self.T, self.p,
                                    max_time_nodes=self.max_time_nodes)
        if self.root == 2.0:
            return bilinear_short_ratio(cs[0], cs[1], self.disp, self.T, allow_unseparated=True,
                                        max_time_nodes=self.max_time_nodes)
        val, _, _ = _normalized(list(zip(cs, self.powers)), self.disp, self.T, 1e-7,
                                self.max_time_nodes)
        return val ** (1.0 / self.root)


# ascent


@dataclass
class ExtremizerResult:
    best_coeffs: object
    best_ratio: float
    trace: list
    restarts_used: int
    converged: bool
    seed_ratios: dict = field(default_factory=dict)


def _unit(amps):
    n = math.sqrt(math.fsum((amps.real ** 2 + amps.imag ** 2).tolist()))
    return amps / n


def _tangent(c_amps, g):
    # c is unit; remove the radial component
    return g - np.real(np.vdot(c_amps, g)) * c_amps


def _ascend(obj: Objective, start, max_iters, tol):
    cur = [c.normalized() for c in start]
    val = obj.ratio_grid(cur)
    trace = [(0, val, STEP0, math.nan)]
    steps = [STEP0] * len(cur)
    streak = 0
    flat = 0
    converged = False
    for it in range(1, max_iters + 1):
        slot = (it - 1) % len(cur)
        c = cur[slot]
        g = _tangent(c.amps, obj.log_gradient(cur, slot)[1])
        gn = float(np.linalg.norm(g))
        if gn < GRAD_ZERO:
            trace.append((it, val, steps[slot], gn))
            flat += 1
            if flat >= len(cur):
                converged = True
                break
            continue
        flat = 0
        accepted = False
        while steps[slot] >= STEP_FLOOR:
            trial = list(cur)
            trial[slot] = c.with_amps(_unit(c.amps + steps[slot] * g / gn))
            v = obj.ratio_grid(trial)
            if np.isfinite(v) and v > val:
                rel = (v - val) / val
                cur, val = trial, v
                steps[slot] *= GROW
                accepted = True
                break
            steps[slot] *= BACKTRACK
        trace.append((it, val, steps[slot], gn))
        if not accepted:
            break
        streak = streak + 1 if rel < tol else 0
        if streak >= STREAK:
            converged = True
            break
    return cur, val, trace, converged


def restart_names(restarts, seed0=0):
    """knapp, constant, then ``restarts - 2`` random seeds."""
    names = ["knapp", "constant"]
    names += [f"random:{seed0 + i}" for i in range(max(restarts - 2, 0))]
    return names


def extremize_ratio(objective: Objective, support, torus: TorusSpec, *, restarts=4, max_iters=200,
                    tol=1e-9, N=None, alpha=1.0, seed=0) -> ExtremizerResult:
    """Best ratio over restarts seeded with knapp, constant and random data.

    ``support`` is a FrequencyRegion (one free slot) or a list with one region
    per free slot.
    """
    regions = [support] if isinstance(support, FrequencyRegion) else list(support)
    if len(regions) != len(objective.free):
        raise ValueError("need one support region per free slot")
    full, scales = [], []
    for reg in regions:
        pts = reg.lattice_points(torus)
        if len(pts) == 0:
            raise ValueError("empty support")
        full.append(CoefficientVector(torus, pts, np.zeros(len(pts))))
        if N is None:
            r = np.sqrt(np.sum(torus.physical(pts) ** 2, axis=1))
            scales.append(max(float(r.min()), 1.0))
        else:
            scales.append(N)
    seeds = []
    for name in restart_names(restarts, seed):
        kind, s = parse_kind(name)
        vals = [_embed(structured_data(kind, n, objective.disp, torus, alpha=alpha, seed=s,
                                       factor=i, region=reg), f)
                for i, (reg, n, f) in enumerate(zip(regions, scales, full))]
        seeds.append((name, vals))
    objective.prepare(seeds[0][1])

    def run(item):
        name, start = item
        seed_val = objective.ratio_grid([c.normalized() for c in start])
        cur, val, trace, conv = _ascend(objective, start, max_iters, tol)
        return name, seed_val, cur, val, trace, conv

    with ThreadPoolExecutor(max_workers=workers()) as ex:
        results = list(ex.map(run, seeds))
    best = max(range(len(results)), key=lambda i: (results[i][3], -i))
    name, _, cur, val, trace, conv = results[best]
    ratio = objective.estimate(cur)
    prov = {"restart": name}
    cur = [CoefficientVector(c.torus, c.ks, c.amps, prov) for c in cur]
    coeffs = cur[0] if len(cur) == 1 else cur
    return ExtremizerResult(coeffs, ratio, trace, len(results), conv,
                            {r[0]: r[1] for r in results})


def _embed(c: CoefficientVector, full: CoefficientVector):
    """``c`` written on the support of ``full`` (zeros elsewhere)."""
    pos = {tuple(k): i for i, k in enumerate(full.ks.tolist())}
    amps = np.zeros(len(full), dtype=np.complex128)
    for k, a in zip(c.ks.tolist(), c.amps):
        amps[pos[tuple(k)]] = a
    return CoefficientVector(full.torus, full.ks, amps, c.provenance)


def gradient_check(objective: Objective, point, h=1e-5, directions=10, seed=0):
    """Max relative error between analytic and central-difference directional
    derivatives of the ratio along random unit directions (all free slots).

    Falls back to absolute error where both derivatives are negligible."""
    point = [point] if isinstance(point, CoefficientVector) else list(point)
    if objective._grid is None:
        objective.prepare(point)
    rng = np.random.default_rng(seed)
    R = objective.ratio_grid(point)
    grads = [objective.log_gradient(point, s)[1] for s in range(len(point))]
    worst = 0.0
    for _ in range(directions):
        dirs = [rng.standard_normal(len(c)) + 1j * rng.standard_normal(len(c)) for c in point]
        nrm = math.sqrt(sum(float(np.vdot(d, d).real) for d in dirs))
        dirs = [d / nrm for d in dirs]
        analytic = R * sum(float(np.real(np.vdot(g, d))) for g, d in zip(grads, dirs))
        up = [c.with_amps(c.amps + h * d) for c, d in zip(point, dirs)]
        dn = [c.with_amps(c.amps - h * d) for c, d in zip(point, dirs)]
        fd = (objective.ratio_grid(up) - objective.ratio_grid(dn)) / (2 * h)
        scale = max(abs(analytic), abs(fd))
        err = abs(analytic - fd)
        if scale > 1e-6 * R:
            err /= scale
        worst = max(worst, err)
    return worst


def write_trace_csv(path, trace):
    """Rows ``iter, ratio, step, grad_norm`` (LF line endings)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "ratio", "step", "grad_norm"])
        for row in trace:
            w.writerow([row[0], repr(float(row[1])), repr(float(row[2])), repr(float(row[3]))])
