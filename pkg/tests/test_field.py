import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from strichartz_lab.core import CoefficientVector, Dispersion, TorusSpec
from strichartz_lab.field import (GridSampling, composite_gauss, dump_field, evaluate_at,
                                  evaluate_field, load_field, sampling_for)
from strichartz_lab.norms import lp_spacetime_norm

T1 = TorusSpec.unit(1)
SCH = Dispersion.schrodinger()


def cv(entries, torus=T1):
    return CoefficientVector.from_mapping(torus, entries)


def grid(pts, T=1.0, nt=16):
    return GridSampling.uniform(pts, T, nt)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSampling((0,), 1.0, (0.0, 1.0))
    with pytest.raises(ValueError):
        GridSampling((8,), 0.0, (0.0, 1.0))
    with pytest.raises(ValueError):
        GridSampling((8,), 1.0, (0.0, 0.7, 0.5, 1.0))


def test_gauss_rule_integrates_polynomials():
    nodes, w = composite_gauss(np.linspace(0, 2, 5), 8)
    assert math.fsum(w * nodes ** 15) == pytest.approx(2 ** 16 / 16, rel=1e-13)


def test_single_mode_unimodular():
    for disp in (SCH, Dispersion.airy(), Dispersion.fractional(3)):
        f = evaluate_field(cv({5: 1}), disp, grid((8,)))
        assert np.allclose(np.abs(f.values), 1.0, rtol=0, atol=1e-14)


def test_zero_mode_constant():
    f = evaluate_field(cv({0: 2}), SCH, grid((4,), T=3.0))
    assert np.allclose(f.values, 2.0, atol=1e-14)


def test_cosine_against_direct_sum():
    c = cv({1: 1, -1: 1})
    g = GridSampling((8,), 1.0, (0.0, 1.0), order=2)
    f = evaluate_field(c, SCH, g)
    xs = g.spatial_nodes(T1)[0]
    for m in range(8):
        want = oracles.direct_field([1, -1], [1, 1], [1, 1], xs[m], g.time_nodes[0])
        assert abs(f.values[0, m] - want) <= 1e-12 * abs(want) + 1e-15
    g0 = GridSampling((8,), 1e-300, (0.0, 1e-300), order=2)
    f0 = evaluate_field(c, SCH, g0)
    assert np.allclose(f0.values[0], 2 * np.cos(xs), rtol=1e-12, atol=1e-15)


def test_evaluate_at_matches_grid():
    rng = np.random.default_rng(1)
    torus = TorusSpec(2, (1.0, 0.75), 2.0)
    ks = np.array([[1, 2], [-3, 0], [4, -1]])
    c = CoefficientVector(torus, ks, rng.standard_normal(3) + 1j * rng.standard_normal(3))
    g = grid((9, 7), T=0.3, nt=8)
    f = evaluate_field(c, SCH, g)
    ax = g.spatial_nodes(torus)
    X = np.array([[ax[0][2], ax[1][5]]])
    t = g.time_nodes[3]
    assert np.allclose(evaluate_at(c, SCH, X, t)[0], f.values[3, 2, 5], rtol=1e-12)


def test_sampling_for_sizes():
    c = cv({k: 1 for k in range(100, 164)})
    assert sampling_for(6, c, 1.0, 16).spatial_points[0] >= 385
    assert sampling_for(6, cv({3: 1}), 1.0, 16).spatial_points[0] >= 7


def test_sampling_exactness_against_oracle():
    rng = np.random.default_rng(2)
    ks = np.arange(0, 32)
    amps = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    c = CoefficientVector(T1, ks, amps)
    g = sampling_for(4, c, 1e-300, 2)
    g = GridSampling(g.spatial_points, 1e-300, (0.0, 1e-300), order=2, exact_power=4)
    f = evaluate_field(c, SCH, g)
    M = g.spatial_points[0]
    grid_val = (2 * math.pi / M) * np.sum(np.abs(f.values[0]) ** 4)
    want = oracles.resonance_integral([dict(zip(ks.tolist(), amps))] * 2, lambda k: 0) / (2 * math.pi)
    assert grid_val == pytest.approx(want, rel=1e-10)


def test_round_trip_recovers_coefficients():
    rng = np.random.default_rng(4)
    ks = np.array([-5, -1, 2, 7])
    amps = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    c = CoefficientVector(T1, ks, amps)
    g = grid((32,), T=0.7, nt=8)
    f = evaluate_field(c, SCH, g)
    j = 5
    t = g.time_nodes[j]
    spec = np.fft.fft(f.values[j]) / 32
    got = spec[np.mod(ks, 32)] * np.exp(1j * t * ks.astype(float) ** 2)
    assert np.allclose(got, amps, rtol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.complex_numbers(max_magnitude=5, allow_nan=False,
                                                    allow_infinity=False))
def test_linearity(seed, a):
    rng = np.random.default_rng(seed)
    ks = np.arange(-4, 5)
    c1 = CoefficientVector(T1, ks, rng.standard_normal(9) + 1j * rng.standard_normal(9))
    c2 = CoefficientVector(T1, ks, rng.standard_normal(9) + 1j * rng.standard_normal(9))
    g = grid((16,), T=0.5, nt=8)
    lhs = evaluate_field(c1.with_amps(a * c1.amps + c2.amps), SCH, g).values
    rhs = a * evaluate_field(c1, SCH, g).values + evaluate_field(c2, SCH, g).values
    scale = np.abs(rhs).max() + 1e-300
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(scale, 1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from(["schrodinger", "airy", "fractional:3"]))
def test_unitarity(seed, kind):
    rng = np.random.default_rng(seed)
    ks = np.unique(rng.integers(-20, 21, 8))
    c = CoefficientVector(T1, ks, rng.standard_normal(len(ks)) + 1j * rng.standard_normal(len(ks)))
    g = grid((64,), T=2.0, nt=16)
    f = evaluate_field(c, Dispersion.parse(kind), g)
    vol = 2 * math.pi
    l2t = vol / 64 * np.sum(np.abs(f.values) ** 2, axis=1)
    ref = vol * c.l2() ** 2
    assert np.max(np.abs(l2t - ref)) / ref <= 1e-10


def test_alias_guard():
    with pytest.raises(ValueError):
        evaluate_field(cv({0: 1, 20: 1}), SCH, grid((8,)))


def test_dump_round_trip(tmp_path):
    c = cv({1: 1, 3: 2j})
    f = evaluate_field(c, SCH, sampling_for(4, c, 0.5, 16))
    path = tmp_path / "f.bin"
    dump_field(f, path)
    g = load_field(path)
    assert np.array_equal(g.values, f.values)
    assert g.grid.breakpoints == f.grid.breakpoints
    assert g.torus == f.torus
    assert g.source is None
    assert lp_spacetime_norm(g, 4).quadrature_error_estimate == math.inf
    assert lp_spacetime_norm(g, 4).value == lp_spacetime_norm(f, 4).value


def test_dump_rejects_garbage(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"XXXX" + b"\0" * 40)
    with pytest.raises(ValueError):
        load_field(p)


def test_samples_read_only():
    f = evaluate_field(cv({1: 1}), SCH, grid((4,)))
    with pytest.raises(ValueError):
        f.values[0, 0] = 0
