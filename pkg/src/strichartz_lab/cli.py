"""Command-line front end: ``strichartz-lab <command> [flags]`` or ``--config run.json``.

Exit status: 0 success, 1 internal error, 2 verifier precondition failure,
3 invalid configuration.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys
import tempfile

from . import sweep as sw
from .core import CoefficientVector, Dispersion, TorusSpec
from .estimators import PreconditionError, strichartz_ratio
from .extremize import (Objective, default_support, extremize_ratio, parse_kind,
                        structured_data, write_trace_csv)
from .field import dump_field, evaluate_field, sampling_for
from .norms import DEFAULT_BUDGET, DEFAULT_TOL, oracle_check, spacetime_norm, time_points_for
from .theory import ESTIMATE_IDS, theory_bound

COMMANDS = ("norm", "ratio", "extremize", "verify", "sweep", "theory", "oracle-check")


class ConfigError(ValueError):
    pass


def _numlist(v):
    if isinstance(v, str):
        v = [float(x) for x in v.split(",")]
    if not isinstance(v, (list, tuple)):
        raise TypeError
    return [float(x) for x in v]


def _centers(v):
    if isinstance(v, str):
        v = json.loads(v)
    out = [[float(a) for a in c] for c in v]
    if len(out) != 3 or any(len(c) != 2 for c in out):
        raise TypeError
    return out


def _strlist(v):
    if isinstance(v, str):
        return [s for s in v.split(",") if s]
    if not isinstance(v, (list, tuple)) or not all(isinstance(s, str) for s in v):
        raise TypeError
    return list(v)


def _pos_int(v):
    if isinstance(v, bool) or float(v) != int(float(v)) or int(float(v)) < 0:
        raise TypeError
    return int(float(v))


def _num(v):
    if isinstance(v, bool):
        raise TypeError
    return float(v)


def _estimate(v):
    if v not in ESTIMATE_IDS:
        raise TypeError
    return v


# key -> (converter, help)
KEYS = {
    "command": (str, None),
    "output": (str, "artifact path (written atomically)"),
    "format": (str, "artifact format: json or csv"),
    "seed": (_pos_int, "base seed"),
    "seeds": (_pos_int, "number of extra random data seeds"),
    "tol": (_num, "relative tolerance of the time quadrature"),
    "max_time_nodes": (_pos_int, "time-node budget"),
    "estimate": (_estimate, "estimate id"),
    "data": (_strlist, "data kinds, comma separated (knapp, constant, random:<seed>, single_mode)"),
    "coeffs": (str, "coefficient JSON file"),
    "N": (_num, None), "N1": (_num, None), "N2": (_num, None), "N3": (_num, None),
    "alpha": (_num, None), "beta": (_num, None), "eps": (_num, None), "nu": (_num, None),
    "p": (_num, None), "T": (_num, "time interval length"), "d": (_pos_int, "dimension"),
    "lambda": (_num, "torus scale"), "gamma": (_num, "second torus axis ratio"),
    "disp": (str, "schrodinger, airy, fractional:<a> or kdv_galilean:<A>"),
    "centers": (_centers, "three 2d ball centers as JSON"),
    "block": (_pos_int, "square-function block length"),
    "method": (str, "auto, exact or quadrature"),
    "dump": (str, "binary field dump path"),
    "restarts": (_pos_int, None), "max_iters": (_pos_int, None),
    "trace": (str, "ascent trace CSV path"),
    "spec": (str, "sweep spec JSON file"),
    "sweep": (dict, None),
    "fit": (str, "power_only, power_plus_log or auto"),
    "plot": (str, "plot-ready fit CSV path"),
    "trials": (_pos_int, None), "max_support": (_pos_int, None),
    "powers": (_numlist, "even powers, comma separated"),
}

_DATA = {"coeffs", "data", "N", "d", "lambda", "gamma", "alpha", "disp", "seed"}
_IO = {"command", "output", "format", "tol", "max_time_nodes"}
ALLOWED = {
    "norm": _IO | _DATA | {"T", "p", "dump"},
    "ratio": _IO | _DATA | {"T", "p", "method"},
    "extremize": _IO | (_DATA - {"coeffs", "data"}) | {"estimate", "T", "p", "restarts",
                                                      "max_iters", "trace"},
    "verify": _IO | {"estimate", "data", "seeds", "seed", "N", "N1", "N2", "N3", "alpha",
                     "beta", "p", "d", "gamma", "lambda", "T", "disp", "centers", "block"},
    "sweep": _IO | {"spec", "sweep", "fit", "plot"},
    "theory": {"command", "output", "format", "estimate", "N", "N1", "alpha", "beta", "nu",
               "lambda", "eps", "d", "p"},
    "oracle-check": {"command", "output", "format", "trials", "max_support", "powers", "seed",
                     "tol"},
}
REQUIRED = {"verify": ("estimate",), "theory": ("estimate",), "extremize": ("estimate",)}


def validate(cfg: dict) -> dict:
    """Schema check; raises ConfigError naming the offending key."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if "command" not in cfg:
        raise ConfigError("missing required key 'command'")
    cmd = cfg["command"]
    if cmd not in COMMANDS:
        raise ConfigError(f"key 'command': unknown command {cmd!r}")
    out = {}
    for key in sorted(cfg):
        if key not in ALLOWED[cmd]:
            raise ConfigError(f"unknown key {key!r} for command {cmd!r}")
        conv = KEYS[key][0]
        try:
            out[key] = conv(cfg[key])
        except (TypeError, ValueError, json.JSONDecodeError):
            raise ConfigError(f"key {key!r}: invalid value {cfg[key]!r}") from None
    for key in REQUIRED.get(cmd, ()):
        if key not in out:
            raise ConfigError(f"missing required key {key!r}")
    if cmd == "sweep" and ("spec" in out) == ("sweep" in out):
        raise ConfigError("key 'spec': give exactly one of 'spec' or 'sweep'")
    if out.get("format", "json") not in ("json", "csv"):
        raise ConfigError(f"key 'format': unknown format {out['format']!r}")
    if out.get("fit") not in (None, "power_only", "power_plus_log", "auto"):
        raise ConfigError(f"key 'fit': unknown model {out['fit']!r}")
    if out.get("method", "auto") not in ("auto", "exact", "quadrature"):
        raise ConfigError(f"key 'method': unknown method {out['method']!r}")
    return out


@contextlib.contextmanager
def atomic_path(path):
    """Yield a temporary path next to ``path``; rename onto it only on success."""
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-",
                               suffix=os.path.basename(path))
    os.close(fd)
    try:
        yield tmp
        mask = os.umask(0)
        os.umask(mask)
        os.chmod(tmp, 0o666 & ~mask)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def atomic_write(path, text):
    with atomic_path(path) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _line(obj):
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def _emit(cfg, lines, artifact=None):
    for ln in lines:
        print(ln)
    if "output" in cfg:
        atomic_write(cfg["output"], artifact if artifact is not None
                     else "".join(ln + "\n" for ln in lines))


# commands


def _torus(cfg):
    d = cfg.get("d", 1)
    lam = cfg.get("lambda", 1.0)
    if d == 1:
        return TorusSpec(1, (1.0,), lam)
    if d == 2:
        return TorusSpec(2, (1.0, cfg.get("gamma", 1.0)), lam)
    raise ConfigError("key 'd': only d = 1 or 2")


def _disp(cfg):
    try:
        return Dispersion.parse(cfg.get("disp", "schrodinger"))
    except ValueError as exc:
        raise ConfigError(f"key 'disp': {exc}") from None


def _coeffs(cfg, disp):
    if "coeffs" in cfg:
        with open(cfg["coeffs"], encoding="utf-8") as fh:
            return CoefficientVector.from_json(fh.read())
    if "N" not in cfg:
        raise ConfigError("missing required key 'coeffs' (or 'N' with 'data')")
    kinds = cfg.get("data", ["constant"])
    if len(kinds) != 1:
        raise ConfigError("key 'data': give a single data kind")
    kind, seed = parse_kind(kinds[0])
    return structured_data(kind, cfg["N"], disp, _torus(cfg), alpha=cfg.get("alpha", 1.0),
                           seed=seed if seed is not None else cfg.get("seed"))


def _budget(cfg):
    return {"tol": cfg.get("tol", DEFAULT_TOL),
            "max_time_nodes": cfg.get("max_time_nodes", DEFAULT_BUDGET)}


def cmd_norm(cfg):
    disp = _disp(cfg)
    c = _coeffs(cfg, disp)
    T = cfg.get("T", 2 * math.pi)
    p = cfg.get("p", 6.0)
    res = spacetime_norm(c, disp, T, p, **_budget(cfg))
    rec = {"command": "norm", "T": T, "coeffs": len(c), **res.to_dict()}
    if "dump" in cfg:
        if p not in (2, 4, 6, 8):
            raise ConfigError("key 'dump': field dumps need p in {2, 4, 6, 8}")
        grid = sampling_for(int(p), c, T, time_points_for(c, disp, T, p))
        samples = evaluate_field(c, disp, grid)
        with atomic_path(cfg["dump"]) as tmp:
            dump_field(samples, tmp)
        rec["dump"] = cfg["dump"]
    _emit(cfg, [_line(rec)])


def cmd_ratio(cfg):
    disp = _disp(cfg)
    c = _coeffs(cfg, disp)
    T = cfg.get("T", 2 * math.pi)
    p = cfg.get("p", 6.0)
    r, e = strichartz_ratio(c, disp, None, T, p, method=cfg.get("method", "auto"),
                            with_error=True, **_budget(cfg))
    _emit(cfg, [_line({"command": "ratio", "T": T, "p": p, "ratio": r, "error_estimate": e,
                       "provenance": c.provenance})])


def cmd_extremize(cfg):
    eid = cfg["estimate"]
    if eid not in ("linear_lp", "smoothing_low_p", "airy_smoothing"):
        raise ConfigError("key 'estimate': extremize supports linear_lp, smoothing_low_p "
                          "and airy_smoothing")
    if "N" not in cfg:
        raise ConfigError("missing required key 'N'")
    N = cfg["N"]
    alpha = cfg.get("alpha", 1.0)
    torus = _torus(cfg)
    if eid == "airy_smoothing":
        disp, p = Dispersion.airy(), 6.0
    else:
        disp, p = _disp(cfg), cfg.get("p", 4.0 if eid == "smoothing_low_p" else 6.0)
    if eid == "linear_lp":
        T = cfg.get("T", 2 * math.pi)
    else:
        T = cfg.get("T", N ** (-alpha))
    obj = Objective(eid, disp, T, p=p, max_time_nodes=cfg.get("max_time_nodes", DEFAULT_BUDGET))
    res = extremize_ratio(obj, default_support(N, torus), torus,
                          restarts=cfg.get("restarts", 4), max_iters=cfg.get("max_iters", 200),
                          tol=cfg.get("tol", 1e-9), N=N, alpha=alpha, seed=cfg.get("seed", 0))
    if "trace" in cfg:
        with atomic_path(cfg["trace"]) as tmp:
            write_trace_csv(tmp, res.trace)
    best = res.best_coeffs
    rec = {"command": "extremize", "estimate_id": eid, "N": N, "alpha": alpha, "T": T, "p": p,
           "best_ratio": res.best_ratio, "converged": res.converged,
           "restarts_used": res.restarts_used, "seed_ratios": res.seed_ratios,
           "best_coeffs": best.to_dict()}
    _emit(cfg, [_line(rec)])


_VERIFY_PARAMS = ("N", "N1", "N2", "N3", "alpha", "beta", "p", "d", "gamma", "lambda", "T",
                  "disp", "centers", "block")


def cmd_verify(cfg):
    params = {k: cfg[k] for k in _VERIFY_PARAMS if k in cfg}
    if params.get("d") is not None:
        params["d"] = int(params["d"])
    policy = {"data": cfg.get("data", ["knapp"]), "random_seeds": cfg.get("seeds", 0),
              "seed0": cfg.get("seed", 0)}
    try:
        sw.data_kinds(policy)
    except sw.SpecError as exc:
        raise ConfigError(f"key 'data': {exc}") from None
    try:
        rep = sw.evaluate_max(cfg["estimate"], params, policy, **_budget(cfg))
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc.args[0]!r}") from None
    _emit(cfg, [rep.to_json()])


def cmd_sweep(cfg):
    if "spec" in cfg:
        try:
            with open(cfg["spec"], encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"key 'spec': {exc}") from None
    else:
        raw = cfg["sweep"]
    try:
        spec = sw.SweepSpec.from_dict(raw)
    except sw.SpecError as exc:
        raise ConfigError(f"key 'spec': {exc}") from None
    if "tol" in cfg:
        spec.tol = cfg["tol"]
    if "max_time_nodes" in cfg:
        spec.max_time_nodes = cfg["max_time_nodes"]
    table = sw.run_sweep(spec)
    lines = [_line(r) for r in table.rows]
    model = cfg.get("fit", spec.fit)
    fit = None
    if model is not None:
        fit = sw.fit_scaling(table, model)
        lines.append(_line({"fit": fit.to_dict(), "estimate_id": spec.estimate_id}))
        if "plot" in cfg:
            atomic_write(cfg["plot"], sw.fit_plot_csv(table, fit))
    if cfg.get("format", "json") == "csv":
        artifact = table.to_csv()
    else:
        artifact = table.to_json() + "\n"
    _emit(cfg, lines, artifact)
    if table.metadata["aborted_rows"]:
        print(f"{table.metadata['aborted_rows']} row(s) aborted on preconditions",
              file=sys.stderr)


def cmd_theory(cfg):
    inputs = {k: cfg[k] for k in ("N", "N1", "alpha", "beta", "nu", "lambda", "eps", "d", "p")
              if k in cfg}
    try:
        rep = theory_bound(cfg["estimate"], inputs)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    _emit(cfg, [rep.to_json()])


def cmd_oracle_check(cfg):
    powers = [int(p) for p in cfg.get("powers", [2, 4, 6])]
    if any(p not in (2, 4, 6) for p in powers):
        raise ConfigError("key 'powers': only 2, 4 and 6")
    tol = cfg.get("tol", 1e-8)
    recs = oracle_check(cfg.get("trials", 50), cfg.get("max_support", 24), powers,
                        cfg.get("seed", 0))
    worst = max(r["rel_error"] for r in recs)
    lines = [_line(r) for r in recs]
    lines.append(_line({"command": "oracle-check", "cases": len(recs), "max_rel_error": worst,
                        "tol": tol, "passed": worst <= tol}))
    _emit(cfg, lines)
    return 0 if worst <= tol else 1


HANDLERS = {"norm": cmd_norm, "ratio": cmd_ratio, "extremize": cmd_extremize,
            "verify": cmd_verify, "sweep": cmd_sweep, "theory": cmd_theory,
            "oracle-check": cmd_oracle_check}


def build_parser():
    top = argparse.ArgumentParser(prog="strichartz-lab",
                                  description="Numerical experiments for periodic Strichartz "
                                              "and multilinear estimates.")
    top.add_argument("--config", help="JSON run configuration; flags override its keys")
    subs = top.add_subparsers(dest="command")
    for cmd in COMMANDS:
        sp = subs.add_parser(cmd)
        sp.add_argument("--config", dest="sub_config", default=argparse.SUPPRESS,
                        help="JSON run configuration")
        for key in sorted(ALLOWED[cmd] - {"command"}):
            if key == "sweep":
                continue
            flag = "--" + key.replace("_", "-")
            names = [flag] if flag == "--" + key else [flag, "--" + key]
            sp.add_argument(*names, dest=key, default=argparse.SUPPRESS, help=KEYS[key][1])
    return top


def run(cfg: dict) -> int:
    cfg = validate(cfg)
    rc = HANDLERS[cfg["command"]](cfg)
    return rc or 0


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    path = args.pop("sub_config", None) or args.pop("config", None)
    args.pop("config", None)
    cfg = {}
    try:
        if path is not None:
            try:
                with open(path, encoding="utf-8") as fh:
                    text = fh.read()
                cfg = json.loads(text) if text.strip() else {}
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path!r}: {exc}") from None
            if not isinstance(cfg, dict):
                raise ConfigError("config must be a JSON object")
        if args.get("command") is None:
            args.pop("command", None)
        cfg.update({k: v for k, v in args.items()})
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as an internal error
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
