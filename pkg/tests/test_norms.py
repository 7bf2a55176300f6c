import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from strichartz_lab.core import CoefficientVector, Dispersion, FrequencyRegion, TorusSpec, project
from strichartz_lab.field import GridSampling, evaluate_field, sampling_for
from strichartz_lab.norms import (coarsen, exact_even_power_integral, graded_breakpoints,
                                  is_full_period, lp_spacetime_norm, oracle_check, refine,
                                  spacetime_integral, spacetime_norm, time_points_for)

T1 = TorusSpec.unit(1)
SCH = Dispersion.schrodinger()
TWO_PI = 2 * math.pi


def cv(entries, torus=T1):
    return CoefficientVector.from_mapping(torus, entries)


def ones(n, start=1):
    return cv({k: 1 for k in range(start, start + n)})


def full_period_norm(c, p, disp=SCH):
    g = sampling_for(p, c, TWO_PI, time_points_for(c, disp, TWO_PI, p))
    return lp_spacetime_norm(evaluate_field(c, disp, g), p)


def test_single_mode_l6():
    r = full_period_norm(cv({3: 1}), 6)
    assert r.value == pytest.approx((TWO_PI * TWO_PI) ** (1 / 6), rel=1e-12)
    assert r.exact


def test_zero_field():
    g = GridSampling.uniform((4,), 1.0, 8)
    f = evaluate_field(CoefficientVector.zeros(T1), SCH, g)
    assert lp_spacetime_norm(f, 4).value == 0.0
    assert spacetime_norm(CoefficientVector.zeros(T1), SCH, 1.0, 4).value == 0.0


def test_two_mode_l4():
    r = full_period_norm(ones(2), 4)
    assert r.value ** 4 == pytest.approx(6 * TWO_PI ** 2, rel=1e-12)


def test_plancherel_oracle():
    rng = np.random.default_rng(0)
    c = CoefficientVector(T1, np.arange(5), rng.standard_normal(5) + 1j)
    assert exact_even_power_integral(c, None, SCH, 1) == pytest.approx(
        TWO_PI ** 2 * c.l2() ** 2, rel=1e-14)


@pytest.mark.parametrize("N", [2, 4, 8, 16])
def test_closed_count(backend, N):
    count = oracles.ordered_quadruples(range(1, N + 1))
    assert count == 2 * N * N - N
    assert exact_even_power_integral(ones(N), None, SCH, 2) == pytest.approx(
        TWO_PI ** 2 * count, rel=1e-14)
    assert exact_even_power_integral(ones(4), None, SCH, 2) == pytest.approx(28 * TWO_PI ** 2)


def test_separated_bilinear_example(backend):
    c1, c2 = ones(4, 0), ones(4, 16)
    assert exact_even_power_integral(c1, c2, SCH, 2, (1, 1)) == pytest.approx(16 * TWO_PI ** 2,
                                                                              rel=1e-14)
    r = spacetime_integral([(c1, 2), (c2, 2)], SCH, TWO_PI)
    assert r.value == pytest.approx(16 * TWO_PI ** 2, rel=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_separated_diagonal_identity(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    b = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    start = int(rng.integers(6, 30))
    c1 = CoefficientVector(T1, np.arange(5), a)
    c2 = CoefficientVector(T1, np.arange(start, start + 4), b)
    want = TWO_PI ** 2 * c1.l2() ** 2 * c2.l2() ** 2
    assert exact_even_power_integral(c1, c2, SCH, 2, (1, 1)) == pytest.approx(want, rel=1e-12)


def test_oracle_check_small(backend):
    recs = oracle_check(trials=6, max_support=10, seed=3)
    assert max(r["rel_error"] for r in recs) <= 1e-8


def test_oracle_2d():
    rng = np.random.default_rng(9)
    torus = TorusSpec.unit(2)
    ks = np.unique(rng.integers(-3, 4, size=(6, 2)), axis=0)
    c = CoefficientVector(torus, ks, rng.standard_normal(len(ks)) + 1j)
    for p in (4, 6):
        r = spacetime_integral([(c, p)], SCH, TWO_PI)
        assert r.value == pytest.approx(exact_even_power_integral(c, None, SCH, p // 2),
                                        rel=1e-9)


def test_airy_oracle_matches_quadrature():
    rng = np.random.default_rng(10)
    c = CoefficientVector(T1, np.arange(3, 9), rng.standard_normal(6) + 1j)
    disp = Dispersion.airy()
    r = spacetime_integral([(c, 4)], disp, TWO_PI)
    assert r.value == pytest.approx(exact_even_power_integral(c, None, disp, 2), rel=1e-9)


def test_full_period_detection():
    assert is_full_period(TWO_PI, T1, SCH, [ones(3)])
    assert is_full_period(2 * TWO_PI, T1, SCH, [ones(3)])
    assert not is_full_period(1.0, T1, SCH, [ones(3)])
    assert not is_full_period(TWO_PI, TorusSpec(1, (1.0,), 2.0), SCH, [])
    assert not is_full_period(TWO_PI, T1, Dispersion.fractional(2.5), [ones(3)])


def test_non_even_power_error_bounds_true_error():
    c = ones(5)
    r = spacetime_norm(c, SCH, 0.3, 3.0)
    assert not r.exact
    g = GridSampling.uniform((512,), 0.3, 4096)
    f = evaluate_field(c, SCH, g)
    ref = math.fsum(g.time_weights * (TWO_PI / 512 * np.sum(np.abs(f.values) ** 3, axis=1)))
    err = abs(r.value - ref ** (1 / 3))
    assert err <= r.quadrature_error_estimate
    assert r.quadrature_error_estimate < 1e-2 * r.value


def test_p2_is_plancherel_for_any_T():
    rng = np.random.default_rng(1)
    c = CoefficientVector(T1, np.arange(-6, 7), rng.standard_normal(13) + 1j)
    for T in (0.01, 0.7, 3.0):
        r = spacetime_norm(c, Dispersion.airy(), T, 2)
        assert r.value ** 2 == pytest.approx(T * c.function_l2() ** 2, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 10), st.floats(1, 1e9), st.integers(1, 4096))
def test_graded_breakpoints_respect_budget(T, band, max_panels):
    b = graded_breakpoints(T, band, max_panels)
    assert b[0] == 0 and b[-1] == T
    assert np.all(np.diff(b) > 0)
    need = max(1, math.ceil(T * band / 3.0))
    assert len(b) - 1 <= max(max_panels, 2 * math.ceil(math.log2(need + 1)) + 2)
    if need <= max_panels:
        assert len(b) - 1 == need


def test_refine_coarsen_inverse():
    b = np.array([0.0, 0.1, 0.5, 2.0])
    assert np.array_equal(coarsen(refine(b)), b)


def test_budget_capped_integral_reports_error():
    c = ones(64, 256)
    r = spacetime_integral([(c, 6)], Dispersion.airy(), 1 / 256, max_time_nodes=2048)
    assert r.time_nodes <= 2048
    assert math.isfinite(r.error)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(-10, 10), st.integers(0, 12))
def test_l2_monotone_under_projection(seed, lo, span):
    rng = np.random.default_rng(seed)
    c = CoefficientVector(T1, np.arange(-10, 11), rng.standard_normal(21) + 1j)
    sub = project(c, FrequencyRegion.interval(lo, lo + span))
    a = spacetime_norm(c, SCH, 0.4, 2).value
    b = spacetime_norm(sub, SCH, 0.4, 2).value
    assert b <= a * (1 + 1e-12)


def test_oracle_limits():
    with pytest.raises(ValueError):
        exact_even_power_integral(ones(3), None, SCH, 4)
    with pytest.raises(ValueError):
        exact_even_power_integral(cv({1: 1}, TorusSpec(1, (1.0,), 2.0)), None, SCH, 2)
