"""Parameter sweeps over dyadic axes and log-log scaling fits."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import estimators as est
from . import theory
from .core import Dispersion, FrequencyRegion, TorusSpec
from .extremize import (Objective, default_support, extremize_ratio, parse_kind,
                        structured_data)
from .field import workers
from .norms import DEFAULT_BUDGET, DEFAULT_TOL

DYADIC_AXES = ("N", "N1", "N2", "N3")
# power_plus_log must beat power_only by this factor in residual to be selected
MODEL_THRESHOLD = 0.95
ESTIMATE_IDS = theory.ESTIMATE_IDS


class SpecError(ValueError):
    """Malformed sweep specification."""


def _torus(params, d):
    lam = float(params.get("lambda", 1.0))
    if d == 1:
        return TorusSpec(1, (1.0,), lam)
    return TorusSpec(2, (1.0, float(params.get("gamma", 1.0))), lam)


def _disp(params, default="schrodinger"):
    return Dispersion.parse(params.get("disp", default))


def _gen(kind, seed, N, disp, torus, alpha, factor, region=None):
    return structured_data(kind, N, disp, torus, alpha=alpha, seed=seed, factor=factor,
                           region=region)


def _balls(params, torus):
    centers = params.get("centers")
    if centers is None or len(centers) != 3:
        raise SpecError("trilinear_2d needs three 'centers'")
    r = float(params["N3"])
    return [FrequencyRegion.ball(c, r) for c in centers]


def evaluate_point(estimate_id, params, data_kind, *, tol=DEFAULT_TOL,
                   max_time_nodes=DEFAULT_BUDGET) -> est.EstimateReport:
    """One verifier run on generated data of the given kind (e.g. ``random:3``)."""
    kind, seed = parse_kind(data_kind)
    p = dict(params)
    alpha = float(p.get("alpha", 1.0))
    kw = {"tol": tol, "max_time_nodes": max_time_nodes}
    if estimate_id == "linear_lp":
        d = int(p.get("d", 1))
        torus = _torus(p, d)
        disp = _disp(p)
        N = float(p["N"])
        c = _gen(kind, seed, N, disp, torus, alpha, 0)
        if "T" in p:
            T = float(p["T"])
        elif "alpha" in p:
            T = N ** (-alpha)
        else:
            T = 2 * math.pi
        return est.linear_lp(c, disp, T, float(p.get("p", 6)), N=N, **kw)
    if estimate_id == "bilinear_short":
        torus = _torus(p, 1)
        disp = _disp(p)
        N1, N2 = float(p["N1"]), float(p["N2"])
        c1 = _gen(kind, seed, N1, disp, torus, alpha, 0)
        c2 = _gen(kind, seed, N2, disp, torus, alpha, 1)
        return est.bilinear_short(c1, c2, disp, float(p.get("T", 1.0 / N1)), N1=N1, N2=N2, **kw)
    if estimate_id in ("trilinear_1d", "trilinear_1d_log"):
        torus = _torus(p, 1)
        disp = _disp(p)
        N1, N3 = float(p["N1"]), float(p["N3"])
        N2 = float(p.get("N2", N3))
        cs = [_gen(kind, seed, n, disp, torus, alpha, i) for i, n in enumerate((N1, N2, N3))]
        if estimate_id == "trilinear_1d":
            return est.trilinear_1d(*cs, alpha, p.get("beta"), N=(N1, N2, N3), disp=disp, **kw)
        return est.trilinear_1d_log(*cs, alpha, N=(N1, N2, N3), disp=disp, **kw)
    if estimate_id == "trilinear_2d":
        torus = _torus(p, 2)
        disp = _disp(p)
        N1 = float(p["N1"])
        regions = _balls(p, torus)
        cs = [_gen(kind, seed, N1, disp, torus, alpha, i, reg) for i, reg in enumerate(regions)]
        return est.trilinear_2d(*cs, alpha, p.get("beta"), N1=N1, N3=float(p["N3"]),
                                centers=p["centers"], disp=disp, **kw)
    if estimate_id in est.RESCALED_KINDS:
        lam = float(p["lambda"])
        disp = _disp(p)
        N1 = float(p["N1"])
        if estimate_id == "rescaled_bilinear_1d":
            torus = _torus(p, 1)
            N2 = float(p["N2"])
            data = [_gen(kind, seed, N1, disp, torus, alpha, 0),
                    _gen(kind, seed, N2, disp, torus, alpha, 1)]
            Ns = {"N1": N1, "N2": N2}
        elif estimate_id == "rescaled_trilinear_1d":
            torus = _torus(p, 1)
            N3 = float(p["N3"])
            N2 = float(p.get("N2", N3))
            data = [_gen(kind, seed, n, disp, torus, alpha, i) for i, n in enumerate((N1, N2, N3))]
            Ns = {"N1": N1, "N2": N2, "N3": N3}
        else:
            torus = _torus(p, 2)
            regions = _balls(p, torus)
            data = [_gen(kind, seed, N1, disp, torus, alpha, i, reg)
                    for i, reg in enumerate(regions)]
            Ns = {"N1": N1, "N3": float(p["N3"])}
        return est.rescaled_verify(estimate_id, lam, Ns, data, beta=p.get("beta"), disp=disp, **kw)
    if estimate_id in ("smoothing_low_p", "airy_smoothing"):
        d = int(p.get("d", 1))
        torus = _torus(p, d)
        skind = "airy" if estimate_id == "airy_smoothing" else "schrodinger_low_p"
        disp = Dispersion.airy() if skind == "airy" else Dispersion.schrodinger()
        N = float(p["N"])
        c = _gen(kind, seed, N, disp, torus, alpha, 0)
        return est.smoothing_ratio(skind, N, alpha, float(p.get("p", 6 if skind == "airy" else 4)),
                                   c, **kw)
    if estimate_id == "square_function_gap":
        torus = _torus(p, 1)
        disp = _disp(p)
        N1, N2 = float(p["N1"]), float(p["N2"])
        c1 = _gen(kind, seed, N1, disp, torus, alpha, 0)
        c2 = _gen(kind, seed, N2, disp, torus, alpha, 1)
        block = int(p.get("block", round(math.sqrt(N1))))
        T = float(p.get("T", 1.0 / N1))
        r, e = est.square_function_gap(c1, c2, block, T, disp=disp, with_error=True, **kw)
        bound = theory.theory_bound("square_function_gap", {}).value
        return est.EstimateReport("square_function_gap",
                                  {"N1": N1, "N2": N2, "block": block, "T": T}, r, bound,
                                  {"f1": c1.provenance, "f2": c2.provenance}, e)
    raise SpecError(f"unknown estimate id {estimate_id!r}")


def data_kinds(policy):
    """Expand a generator policy to the ordered list of data kinds."""
    kinds = list(policy.get("data", ["constant"]))
    for k in kinds:
        name, _ = parse_kind(k)
        if name not in ("knapp", "constant", "random", "single_mode"):
            raise SpecError(f"unknown data kind {k!r}")
    n = int(policy.get("random_seeds", 0))
    seed0 = int(policy.get("seed0", 0))
    kinds += [f"random:{seed0 + i}" for i in range(n)]
    if not kinds:
        raise SpecError("generator policy produces no data")
    return kinds


def evaluate_max(estimate_id, params, policy, *, tol=DEFAULT_TOL,
                 max_time_nodes=DEFAULT_BUDGET) -> est.EstimateReport:
    """Largest observed value over the policy's data kinds (ties: first)."""
    best = None
    seeds = []
    for kind in data_kinds(policy):
        rep = evaluate_point(estimate_id, params, kind, tol=tol, max_time_nodes=max_time_nodes)
        seeds.append(kind)
        if best is None or rep.observed > best[1].observed:
            best = (kind, rep)
    kind, rep = best
    if "extremize" in policy:
        rep = _extremized(estimate_id, params, policy["extremize"], rep, kind,
                          tol=tol, max_time_nodes=max_time_nodes)
    rep.data_provenance = {"best": kind, "seeds": seeds, **rep.data_provenance}
    return rep


def _extremized(estimate_id, params, opts, rep, kind, **kw):
    """Refine single-function estimates with an ascent over the shell."""
    if estimate_id not in ("linear_lp", "smoothing_low_p", "airy_smoothing"):
        raise SpecError("extremize policy supports linear and smoothing estimates only")
    p = dict(params)
    d = int(p.get("d", 1))
    torus = _torus(p, d)
    N = float(p["N"])
    alpha = float(p.get("alpha", 1.0))
    if estimate_id == "airy_smoothing":
        disp, pw, T = Dispersion.airy(), 6.0, N ** (-alpha)
    elif estimate_id == "smoothing_low_p":
        disp, pw, T = Dispersion.schrodinger(), float(p.get("p", 4)), N ** (-alpha)
    else:
        disp, pw = _disp(p), float(p.get("p", 6))
        T = float(p["T"]) if "T" in p else (N ** (-alpha) if "alpha" in p else 2 * math.pi)
    obj = Objective(estimate_id, disp, T, p=pw, max_time_nodes=kw["max_time_nodes"])
    res = extremize_ratio(obj, default_support(N, torus), torus,
                          restarts=int(opts.get("restarts", 4)),
                          max_iters=int(opts.get("max_iters", 100)),
                          tol=float(opts.get("tol", 1e-9)), N=N, alpha=alpha,
                          seed=int(opts.get("seed", 0)))
    if res.best_ratio > rep.observed:
        rep.observed = res.best_ratio
        rep.data_provenance = {"extremized": True, "restarts": res.restarts_used}
    return rep


# sweep specs and tables

SPEC_KEYS = {"estimate_id", "axes", "fixed", "policy", "primary", "tol", "max_time_nodes", "fit"}
POLICY_KEYS = {"data", "random_seeds", "seed0", "extremize"}


@dataclass
class SweepSpec:
    estimate_id: str
    axes: dict
    fixed: dict = field(default_factory=dict)
    policy: dict = field(default_factory=lambda: {"data": ["constant"]})
    primary: str | None = None
    tol: float = DEFAULT_TOL
    max_time_nodes: int = DEFAULT_BUDGET
    fit: str | None = None

    @classmethod
    def from_dict(cls, obj):
        unknown = sorted(set(obj) - SPEC_KEYS)
        if unknown:
            raise SpecError(f"unknown sweep key {unknown[0]!r}")
        for key in ("estimate_id", "axes"):
            if key not in obj:
                raise SpecError(f"sweep spec is missing {key!r}")
        pol = dict(obj.get("policy", {"data": ["constant"]}))
        unknown = sorted(set(pol) - POLICY_KEYS)
        if unknown:
            raise SpecError(f"unknown policy key {unknown[0]!r}")
        spec = cls(obj["estimate_id"], dict(obj["axes"]), dict(obj.get("fixed", {})), pol,
                   obj.get("primary"), float(obj.get("tol", DEFAULT_TOL)),
                   int(obj.get("max_time_nodes", DEFAULT_BUDGET)), obj.get("fit"))
        spec.validate()
        return spec

    def validate(self):
        if self.estimate_id not in ESTIMATE_IDS:
            raise SpecError(f"unknown estimate id {self.estimate_id!r}")
        if not self.axes:
            raise SpecError("sweep needs at least one axis")
        for name, values in self.axes.items():
            if not isinstance(values, (list, tuple)) or not values:
                raise SpecError(f"axis {name!r} must be a non-empty list")
            if len(set(map(float, values))) != len(values):
                raise SpecError(f"axis {name!r} has duplicate points")
            if name in DYADIC_AXES:
                for v in values:
                    lv = math.log2(float(v)) if float(v) > 0 else math.nan
                    if not (lv == lv and abs(lv - round(lv)) < 1e-12):
                        raise SpecError(f"axis {name!r} point {v} is not dyadic")
        overlap = set(self.axes) & set(self.fixed)
        if overlap:
            raise SpecError(f"{sorted(overlap)[0]!r} is both an axis and fixed")
        if self.primary is None:
            self.primary = next(iter(self.axes))
        if self.primary not in self.axes:
            raise SpecError(f"primary axis {self.primary!r} is not an axis")
        if self.fit not in (None, "power_only", "power_plus_log", "auto"):
            raise SpecError(f"unknown fit model {self.fit!r}")
        data_kinds(self.policy)

    def points(self):
        names = list(self.axes)
        grid = itertools.product(*(self.axes[n] for n in names))
        pts = [dict(zip(names, vals)) for vals in grid]
        pts.sort(key=lambda q: tuple(float(q[n]) for n in [self.primary] + names))
        return pts

    def to_dict(self):
        return {"estimate_id": self.estimate_id, "axes": self.axes, "fixed": self.fixed,
                "policy": self.policy, "primary": self.primary, "tol": self.tol,
                "max_time_nodes": self.max_time_nodes, "fit": self.fit}


@dataclass
class SweepTable:
    estimate_id: str
    axes: list
    primary: str
    rows: list
    metadata: dict = field(default_factory=dict)

    def good_rows(self):
        return [r for r in self.rows if r["error"] is None]

    def column(self, name):
        return np.array([float(r["parameters"][name]) for r in self.good_rows()])

    def observed(self):
        return np.array([r["observed"] for r in self.good_rows()])

    def to_dict(self):
        return {"estimate_id": self.estimate_id, "axes": self.axes, "primary": self.primary,
                "rows": self.rows, "metadata": self.metadata}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self):
        names = list(self.axes)
        extra = sorted({k for r in self.rows for k in r["parameters"]} - set(names))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names + extra + ["observed", "theory_bound", "error_estimate", "best_data",
                                    "error"])
        for r in self.rows:
            par = r["parameters"]
            w.writerow([_fmt(par.get(n)) for n in names + extra]
                       + [_fmt(r["observed"]), _fmt(r["theory_bound"]),
                          _fmt(r["error_estimate"]), r.get("best_data") or "", r["error"] or ""])
        return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def run_sweep(spec) -> SweepTable:
    """Evaluate every axis point; verifier precondition failures abort the row only."""
    if isinstance(spec, dict):
        spec = SweepSpec.from_dict(spec)
    points = spec.points()

    def run(point):
        params = {**spec.fixed, **point}
        try:
            rep = evaluate_max(spec.estimate_id, params, spec.policy, tol=spec.tol,
                               max_time_nodes=spec.max_time_nodes)
        except (est.PreconditionError, KeyError, ValueError) as exc:
            msg = str(exc) if not isinstance(exc, KeyError) else f"missing parameter {exc}"
            return {"parameters": params, "observed": None, "theory_bound": None,
                    "error_estimate": None, "best_data": None, "seeds": [],
                    "error": f"{type(exc).__name__}: {msg}"}
        params_out = {**rep.parameters, **params}
        return {"parameters": params_out, "observed": rep.observed,
                "theory_bound": rep.theory_bound, "error_estimate": rep.error_estimate,
                "best_data": rep.data_provenance.get("best"),
                "seeds": rep.data_provenance.get("seeds", []), "error": None}

    with ThreadPoolExecutor(max_workers=workers()) as ex:
        rows = list(ex.map(run, points))
    aborted = sum(r["error"] is not None for r in rows)
    meta = {"spec": spec.to_dict(), "aborted_rows": aborted, "rows": len(rows)}
    return SweepTable(spec.estimate_id, list(spec.axes), spec.primary, rows, meta)


# fits


@dataclass
class ScalingFit:
    gamma: float
    c_log: float
    b: float
    residual_rms: float
    model: str
    flagged: str | None = None
    alternatives: dict = field(default_factory=dict)

    def to_dict(self):
        return {"gamma": self.gamma, "c_log": self.c_log, "b": self.b,
                "residual_rms": self.residual_rms, "model": self.model,
                "flagged": self.flagged, "alternatives": self.alternatives}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def predict(self, N):
        N = np.asarray(N, dtype=np.float64)
        logn = np.log(N)
        out = self.gamma * logn + self.b
        if self.c_log:
            out = out + self.c_log * np.log(logn)
        return np.exp(out)


def _lstsq(cols, y):
    A = np.column_stack(cols)
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise ValueError("degenerate design matrix")
    coef = np.linalg.lstsq(A, y, rcond=None)[0]
    res = y - A @ coef
    return coef, float(math.sqrt(np.mean(res * res)))


def fit_scaling(table, model="auto", axis=None) -> ScalingFit:
    """Least squares on ``log obs = gamma log N + c log log N + b``.

    ``table`` is a SweepTable or a pair ``(N, observed)``. ``auto`` fits both
    models, flags the lower residual, and selects ``power_plus_log`` only if
    its residual is below ``MODEL_THRESHOLD`` times the power-only residual.
    """
    if isinstance(table, SweepTable):
        N = table.column(axis or table.primary)
        obs = table.observed()
    else:
        N, obs = (np.asarray(a, dtype=np.float64) for a in table)
    if len(N) < 4:
        raise ValueError("need at least 4 rows to fit")
    if np.any(obs <= 0) or np.any(N <= 0):
        raise ValueError("fits need positive values")
    if np.all(N == N[0]):
        raise ValueError("degenerate design matrix (all N equal)")
    logn = np.log(N)
    y = np.log(obs)
    ones = np.ones_like(y)

    def power_only():
        (g, b), r = _lstsq([logn, ones], y)
        return ScalingFit(float(g), 0.0, float(b), r, "power_only")

    def power_plus_log():
        if np.any(N <= 1):
            raise ValueError("log log N needs N > 1")
        (g, c, b), r = _lstsq([logn, np.log(logn), ones], y)
        return ScalingFit(float(g), float(c), float(b), r, "power_plus_log")

    if model == "power_only":
        return power_only()
    if model == "power_plus_log":
        return power_plus_log()
    if model != "auto":
        raise ValueError(f"unknown model {model!r}")
    a, b = power_only(), power_plus_log()
    chosen = b if b.residual_rms < MODEL_THRESHOLD * a.residual_rms else a
    flagged = "power_plus_log" if b.residual_rms < a.residual_rms else "power_only"
    alts = {f.model: {"gamma": f.gamma, "c_log": f.c_log, "b": f.b,
                      "residual_rms": f.residual_rms} for f in (a, b)}
    return ScalingFit(chosen.gamma, chosen.c_log, chosen.b, chosen.residual_rms, chosen.model,
                      flagged, alts)


def fit_plot_csv(table: SweepTable, fit: ScalingFit, axis=None):
    """Plot-ready columns: ``x`` (axis), ``observed`` and the fitted curve."""
    axis = axis or table.primary
    N = table.column(axis)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([axis, "observed", f"fit_{fit.model}"])
    for n, o, f in zip(N, table.observed(), fit.predict(N)):
        w.writerow([repr(float(n)), repr(float(o)), repr(float(f))])
    return buf.getvalue()
