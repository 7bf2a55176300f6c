import math

import numpy as np
import pytest

from strichartz_lab import estimators as est
from strichartz_lab.core import CoefficientVector, Dispersion, FrequencyRegion, TorusSpec
from strichartz_lab.extremize import (Objective, extremize_ratio, gradient_check, knapp_width,
                                      restart_names, structured_data, write_trace_csv)

T1 = TorusSpec.unit(1)
SCH = Dispersion.schrodinger()
TWO_PI = 2 * math.pi


def shell(N):
    return FrequencyRegion.interval(N, 2 * N, upper_open=True)


def test_knapp_examples():
    c = structured_data("knapp", 256, SCH, T1, alpha=1.0)
    assert len(c) == 16
    assert c.l2() == pytest.approx(1.0, rel=1e-15)
    a = structured_data("knapp", 4096, Dispersion.airy(), T1, alpha=1.0)
    assert len(a) == 4096
    assert any("capped" in w for w in a.provenance["warnings"])
    assert knapp_width(4096, 1.0, Dispersion.airy()) == 4096


def test_knapp_counts_half_open_block():
    # width 2**0.25 covers the lattice points 2 and 3
    c = structured_data("knapp", 2, SCH, T1, alpha=0.5)
    assert sorted(c.entries) == [2, 3]


def test_random_reproducible():
    a = structured_data("random", 64, SCH, T1, seed=7)
    b = structured_data("random", 64, SCH, T1, seed=7)
    assert np.array_equal(a.amps, b.amps)
    assert a.provenance == {"generator": "random", "N": 64, "seed": 7, "factor": 0}
    assert not np.array_equal(a.amps, structured_data("random", 64, SCH, T1, seed=7, factor=1).amps)


def test_restart_names():
    assert restart_names(4, 10) == ["knapp", "constant", "random:10", "random:11"]


def test_p2_converges_immediately():
    obj = Objective("linear_lp", SCH, 0.37, p=2)
    res = extremize_ratio(obj, shell(8), T1, restarts=3, max_iters=50)
    assert res.converged
    assert len(res.trace) <= 3
    assert all(row[3] <= 1e-10 for row in res.trace[1:])
    assert res.best_ratio == pytest.approx(math.sqrt(0.37), rel=1e-12)


def test_single_mode_support():
    obj = Objective("linear_lp", SCH, TWO_PI, p=6)
    res = extremize_ratio(obj, FrequencyRegion.explicit([[5]]), T1, restarts=2, max_iters=10)
    assert res.best_coeffs.entries.keys() == {5}
    assert res.best_ratio == pytest.approx(TWO_PI ** (-1 / 6), rel=1e-12)


def test_p4_beats_constant_feasible_point():
    N = 16
    obj = Objective("linear_lp", SCH, TWO_PI, p=4)
    res = extremize_ratio(obj, shell(N), T1, restarts=3, max_iters=30, N=N)
    feasible = (2 * N * N - N) * TWO_PI ** 2 / (TWO_PI * N) ** 2
    assert res.best_ratio ** 4 >= feasible * (1 - 1e-12)
    assert res.best_ratio >= max(res.seed_ratios.values()) * (1 - 1e-12)
    ratios = [row[1] for row in res.trace]
    assert all(b >= a for a, b in zip(ratios, ratios[1:]))
    again = est.strichartz_ratio(res.best_coeffs, SCH, T=TWO_PI, p=4)
    assert again == pytest.approx(res.best_ratio, rel=1e-9)


def test_short_time_search_improves_on_seeds():
    obj = Objective("linear_lp", SCH, 1 / 16, p=6)
    res = extremize_ratio(obj, shell(16), T1, restarts=3, max_iters=40, N=16)
    assert res.best_ratio >= max(res.seed_ratios.values())
    again = est.strichartz_ratio(res.best_coeffs, SCH, T=1 / 16, p=6)
    assert again == pytest.approx(res.best_ratio, rel=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_check_p4(seed):
    obj = Objective("linear_lp", SCH, 0.5, p=4)
    point = structured_data("random", 8, SCH, T1, seed=seed)
    assert gradient_check(obj, point, h=1e-5, seed=seed) <= 1e-6


def test_gradient_check_constant_objective():
    obj = Objective("linear_lp", SCH, 0.5, p=2)
    point = structured_data("random", 8, SCH, T1, seed=1)
    assert gradient_check(obj, point, h=1e-5) <= 1e-8


def test_gradient_check_multilinear():
    fixed = {1: structured_data("random", 4, SCH, T1, seed=2, factor=1)}
    obj = Objective("bilinear_short", SCH, 1 / 32, fixed=fixed)
    point = structured_data("random", 32, SCH, T1, seed=2)
    assert gradient_check(obj, point, h=1e-5) <= 1e-6


def test_phase_symmetry():
    obj = Objective("linear_lp", SCH, 0.5, p=4)
    c = structured_data("random", 8, SCH, T1, seed=3)
    obj.prepare([c])
    assert obj.ratio_grid([c]) == pytest.approx(obj.ratio_grid([c.scaled(-1)]), rel=1e-14)
    g1 = obj.log_gradient([c], 0)[1]
    g2 = obj.log_gradient([c.scaled(-1)], 0)[1]
    assert np.allclose(g1, -g2, rtol=1e-12, atol=1e-14)


def test_non_even_power_uses_differences():
    obj = Objective("trilinear_2d", SCH, 1 / 64,
                    fixed={1: CoefficientVector.from_mapping(TorusSpec.unit(2), {(-32, 0): 1}),
                           2: CoefficientVector.from_mapping(TorusSpec.unit(2), {(0, 24): 1})})
    assert not obj.analytic


def test_deterministic_and_trace_csv(tmp_path):
    def go():
        obj = Objective("linear_lp", SCH, 1 / 8, p=4)
        return extremize_ratio(obj, shell(8), T1, restarts=3, max_iters=15, N=8)
    a, b = go(), go()
    assert a.best_ratio == b.best_ratio
    assert np.array_equal(a.best_coeffs.amps, b.best_coeffs.amps)
    write_trace_csv(tmp_path / "a.csv", a.trace)
    write_trace_csv(tmp_path / "b.csv", b.trace)
    raw = (tmp_path / "a.csv").read_bytes()
    assert raw == (tmp_path / "b.csv").read_bytes()
    assert raw.startswith(b"iter,ratio,step,grad_norm\n")
    assert b"\r" not in raw
