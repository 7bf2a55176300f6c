import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from strichartz_lab.theory import (B1, B2, ESTIMATE_IDS, airy_smoothing_exponent, iteration_count,
                                   smoothing_exponent_low_p, theory_bound)

SAMPLE_INPUTS = {
    "trilinear_1d": {"N1": 1024, "alpha": 1, "beta": 1},
    "trilinear_1d_log": {"N1": 4096, "alpha": 1},
    "trilinear_2d": {"nu": 0.12, "N1": 128, "alpha": 1, "beta": 0.5},
    "bilinear_short": {"N1": 256},
    "linear_lp": {"N": 64, "d": 1, "p": 6},
    "rescaled_bilinear_1d": {"lambda": 64, "N1": 32},
    "rescaled_trilinear_1d": {"lambda": 8, "N1": 256, "beta": 1},
    "rescaled_trilinear_2d": {"nu": 0.3, "lambda": 16, "N1": 64, "beta": 1},
    "smoothing_low_p": {"N": 512, "alpha": 1, "p": 4},
    "airy_smoothing": {"N": 512, "alpha": 1},
    "square_function_gap": {},
}


@pytest.mark.parametrize("beta,n", [(1, 1), (Fraction(1, 3), 2), (Fraction(1, 7), 3),
                                    (Fraction(1, 15), 4), ("1/7", 3), (1 / 3, 2)])
def test_iteration_table(beta, n):
    assert iteration_count(beta) == n


@given(st.integers(1, 4096), st.integers(1, 4096))
def test_iteration_inequality_and_minimality(p, q):
    b = Fraction(min(p, q), max(p, q))
    n = iteration_count(b)
    ratio = b / (1 + b)
    assert ratio * 2 ** n >= 1
    if n >= 1:
        assert ratio * 2 ** (n - 1) < 1


@pytest.mark.parametrize("beta", [0, -0.5, 1.5])
def test_iteration_range(beta):
    with pytest.raises(ValueError):
        iteration_count(beta)


def test_trilinear_example():
    rep = theory_bound("trilinear_1d", {"N1": 2 ** 10, "alpha": 1, "beta": 1, "eps": 0})
    assert [(n, e) for n, _, e in rep.exponent_breakdown] == [("log N1", 12), ("N1", -0.125)]
    assert rep.value == pytest.approx((10 * math.log(2)) ** 12 * 2 ** (-10 / 8), rel=1e-14)


def test_airy_and_b1_examples():
    assert airy_smoothing_exponent(0.5) == pytest.approx(1 / 12, rel=1e-15)
    assert airy_smoothing_exponent(2) == pytest.approx(1 / 6)
    assert B1(64, 64) == pytest.approx(math.sqrt(2 / 64), rel=1e-15)
    assert B2(16, 64, 1) == pytest.approx(math.sqrt(1 / 16 + 1 / 64))
    with pytest.raises(ValueError):
        airy_smoothing_exponent(2.5)


def test_low_p_exponent_sign():
    # positive decay below the critical exponent, zero at p = 2 * (d + 2) / d minus the
    # 1/p term
    assert smoothing_exponent_low_p(1, 2, 1) == pytest.approx(0.5)
    assert smoothing_exponent_low_p(1, 4, 1) == pytest.approx(0.25 - 0.125)
    assert smoothing_exponent_low_p(1, 6, 1) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("eid", ESTIMATE_IDS)
def test_breakdown_remultiplies(eid):
    rep = theory_bound(eid, SAMPLE_INPUTS[eid])
    assert rep.remultiply() == pytest.approx(rep.value, rel=1e-14)
    assert rep.to_dict()["note"]


def _tri(N1, alpha=1, beta=1):
    return theory_bound("trilinear_1d", {"N1": N1, "alpha": alpha, "beta": beta}).value


@pytest.mark.parametrize("alpha,beta", [(1, 1), (0.5, 1), (1, 0.25)])
def test_trilinear_turns_down_only_past_log_threshold(alpha, beta):
    # d/dlogN of the log: 12 / ln N - alpha * beta / 8, negative once ln N > 96 / (alpha * beta)
    assert _tri(2.0 ** 41, alpha, beta) > _tri(2.0 ** 40, alpha, beta)
    k = math.ceil(96 / (alpha * beta) / math.log(2)) + 1
    assert _tri(2.0 ** (k + 1), alpha, beta) < _tri(2.0 ** k, alpha, beta)


def test_trilinear_step_ratio_closed_form():
    ratio = _tri(2.0 ** 41) / _tri(2.0 ** 40)
    assert ratio == pytest.approx((41 / 40) ** 12 * 2 ** (-1 / 8), rel=1e-12)


def test_linear_lp_regimes():
    assert theory_bound("linear_lp", {"N": 64, "p": 4}).value == 1.0
    assert theory_bound("linear_lp", {"N": 64, "p": 6}).value == pytest.approx(math.log(64) ** 2)
    assert theory_bound("linear_lp", {"N": 64, "p": 10}).value == pytest.approx(64 ** (0.5 - 0.3))


def test_rescaled_linear_factor_drops_when_torus_large():
    small = theory_bound("rescaled_trilinear_1d", {"lambda": 8, "N1": 256, "beta": 1})
    large = theory_bound("rescaled_trilinear_1d", {"lambda": 512, "N1": 256, "beta": 1})
    assert len(small.exponent_breakdown) == 2
    assert len(large.exponent_breakdown) == 1


def test_errors():
    with pytest.raises(KeyError):
        theory_bound("nope", {})
    with pytest.raises(KeyError, match="N1"):
        theory_bound("trilinear_1d", {"alpha": 1, "beta": 1})
    with pytest.raises(ValueError):
        theory_bound("bilinear_short", {"N1": 8, "eps": -1})
    with pytest.raises(ValueError):
        theory_bound("smoothing_low_p", {"N": 8, "alpha": 1, "p": 6})
