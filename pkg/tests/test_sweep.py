import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from strichartz_lab.sweep import (SpecError, SweepSpec, data_kinds, evaluate_max, fit_plot_csv,
                                  fit_scaling, run_sweep)

TWO_PI = 2 * math.pi
GRID = 2.0 ** np.arange(4, 15)


def test_single_mode_policy_matches_closed_form():
    spec = {"estimate_id": "linear_lp", "axes": {"N": [4, 8, 16]},
            "fixed": {"p": 6, "T": 0.5}, "policy": {"data": ["single_mode"]}}
    table = run_sweep(spec)
    expected = (TWO_PI * 0.5) ** (1 / 6) / math.sqrt(TWO_PI)
    for r in table.rows:
        assert r["observed"] == pytest.approx(expected, rel=1e-12)
        assert r["best_data"] == "single_mode"


def test_bilinear_knapp_sweep():
    spec = {"estimate_id": "bilinear_short", "axes": {"N1": [16, 32, 64, 128, 256]},
            "fixed": {"N2": 4, "alpha": 1}, "policy": {"data": ["knapp"]}}
    table = run_sweep(spec)
    assert len(table.rows) == 5
    assert table.metadata["aborted_rows"] == 0
    assert list(table.column("N1")) == [16, 32, 64, 128, 256]
    obs = table.observed()
    assert np.all(np.diff(obs) < 0)


def test_policy_expansion():
    assert data_kinds({"data": ["knapp"], "random_seeds": 2, "seed0": 5}) == \
        ["knapp", "random:5", "random:6"]
    with pytest.raises(SpecError):
        data_kinds({"data": ["gaussian"]})
    with pytest.raises(SpecError):
        data_kinds({"data": []})


def test_max_records_best_and_seeds():
    rep = evaluate_max("bilinear_short", {"N1": 64, "N2": 4},
                       {"data": ["constant", "knapp"], "random_seeds": 2})
    assert rep.data_provenance["seeds"] == ["constant", "knapp", "random:0", "random:1"]
    single = [evaluate_max("bilinear_short", {"N1": 64, "N2": 4}, {"data": [k]}).observed
              for k in rep.data_provenance["seeds"]]
    assert rep.observed == max(single)


@pytest.mark.parametrize("bad", [
    {"axes": {"N": [4, 4, 8]}},
    {"axes": {"N": [4, 6]}},
    {"axes": {"N": []}},
    {"axes": {"N": [4, 8]}, "fixed": {"N": 4}},
    {"axes": {"N": [4, 8]}, "primary": "T"},
    {"axes": {"N": [4, 8]}, "fit": "cubic"},
    {"axes": {"N": [4, 8]}, "colour": "red"},
    {"axes": {"N": [4, 8]}, "policy": {"data": ["knapp"], "sedes": 3}},
])
def test_spec_validation(bad):
    with pytest.raises(SpecError):
        SweepSpec.from_dict({"estimate_id": "linear_lp", **bad})


def test_unknown_estimate():
    with pytest.raises(SpecError):
        SweepSpec.from_dict({"estimate_id": "quadrilinear", "axes": {"N": [4]}})


def test_precondition_failure_aborts_row_only():
    # N3 = 1024 against N1 = 2**16 breaks weak separation; N3 = 16 is fine
    spec = {"estimate_id": "trilinear_1d", "axes": {"N3": [16, 1024]},
            "fixed": {"N1": 2 ** 16, "alpha": 1, "beta": 1},
            "policy": {"data": ["single_mode"]}}
    table = run_sweep(spec)
    assert table.metadata["aborted_rows"] == 1
    assert table.rows[0]["error"] is None
    assert table.rows[1]["error"].startswith("PreconditionError")
    assert len(table.good_rows()) == 1


def test_points_sorted_by_primary():
    spec = SweepSpec.from_dict({"estimate_id": "linear_lp",
                                "axes": {"p": [6, 4], "N": [16, 4, 8]}, "primary": "N"})
    pts = spec.points()
    assert [q["N"] for q in pts] == [4, 4, 8, 8, 16, 16]
    assert [q["p"] for q in pts[:2]] == [4, 6]


def test_csv_and_json_stable():
    spec = {"estimate_id": "bilinear_short", "axes": {"N1": [16, 32]}, "fixed": {"N2": 4}}
    a, b = run_sweep(spec), run_sweep(spec)
    assert a.to_csv() == b.to_csv()
    assert a.to_json() == b.to_json()
    head = a.to_csv().splitlines()[0].split(",")
    assert head[0] == "N1" and head[-5:] == ["observed", "theory_bound", "error_estimate",
                                              "best_data", "error"]


# fits


def test_fit_exact_power():
    fit = fit_scaling((GRID, GRID ** -0.5), "power_only")
    assert fit.gamma == pytest.approx(-0.5, abs=1e-12)
    assert fit.residual_rms == pytest.approx(0, abs=1e-12)


def test_fit_log_square():
    fit = fit_scaling((GRID, np.log(GRID) ** 2), "power_plus_log")
    assert fit.gamma == pytest.approx(0, abs=1e-6)
    assert fit.c_log == pytest.approx(2, abs=1e-6)
    auto = fit_scaling((GRID, np.log(GRID) ** 2), "auto")
    assert auto.model == "power_plus_log"
    assert auto.flagged == "power_plus_log"
    assert set(auto.alternatives) == {"power_only", "power_plus_log"}


def test_fit_constant():
    fit = fit_scaling((GRID, np.full(GRID.shape, 3.0)), "power_plus_log")
    assert fit.gamma == pytest.approx(0, abs=1e-10)
    assert fit.c_log == pytest.approx(0, abs=1e-10)
    assert fit.b == pytest.approx(math.log(3), rel=1e-12)


def test_auto_keeps_power_only_without_gain():
    auto = fit_scaling((GRID, GRID ** 0.25), "auto")
    assert auto.model == "power_only"
    assert auto.gamma == pytest.approx(0.25, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 100), st.lists(st.floats(-1, 1), min_size=len(GRID), max_size=len(GRID)))
def test_fit_equivariance(scale, noise):
    obs = GRID ** -0.3 * np.exp(0.2 * np.asarray(noise))
    for model in ("power_only", "power_plus_log"):
        a = fit_scaling((GRID, obs), model)
        b = fit_scaling((GRID, scale * obs), model)
        assert b.gamma == pytest.approx(a.gamma, rel=1e-10, abs=1e-10)
        assert b.c_log == pytest.approx(a.c_log, rel=1e-10, abs=1e-10)
        assert b.b == pytest.approx(a.b + math.log(scale), rel=1e-10, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=len(GRID), max_size=len(GRID)))
def test_nested_models(noise):
    obs = np.exp(np.asarray(noise))
    a = fit_scaling((GRID, obs), "power_only")
    b = fit_scaling((GRID, obs), "power_plus_log")
    assert a.residual_rms >= b.residual_rms - 1e-12


@pytest.mark.parametrize("N,obs", [
    ([16, 16, 16, 16], [1, 2, 3, 4]),
    ([4, 8, 16], [1, 1, 1]),
    ([4, 8, 16, 32], [1, 0, 1, 1]),
])
def test_fit_degenerate(N, obs):
    with pytest.raises(ValueError):
        fit_scaling((np.array(N, float), np.array(obs, float)))


def test_fit_from_table_and_plot():
    spec = {"estimate_id": "linear_lp", "axes": {"N": [4, 8, 16, 32]},
            "fixed": {"p": 4, "T": TWO_PI}, "policy": {"data": ["constant"]}}
    table = run_sweep(spec)
    fit = fit_scaling(table, "power_only")
    text = fit_plot_csv(table, fit)
    lines = text.splitlines()
    assert lines[0] == "N,observed,fit_power_only"
    assert len(lines) == 5
    assert float(lines[1].split(",")[2]) == pytest.approx(fit.predict(4.0), rel=1e-12)
