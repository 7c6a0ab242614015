import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermolab.oracles import LOG_C, LOG_CU, LOG_U
from thermolab.potentials import Central, Constant, Trig, Zero, cos_x1
from thermolab.pressure import OrbitSegment
from thermolab.thermo import (DecompositionParams, EmpiricalMeasure, EmptySetError,
                              birkhoff, bowen_bound, bowen_oscillation, central_exponent,
                              classify_segment, decompose, decompose_by_scan,
                              equilibrium_measure, gap_check, p_filter, random_segments,
                              restricted_pressure)

unit = st.floats(0.0, 1.0, allow_nan=False, exclude_max=True)
points = st.tuples(unit, unit, unit).map(np.array)


@settings(max_examples=40, deadline=None)
@given(x=points, n=st.integers(1, 30), m=st.integers(1, 30))
def test_birkhoff_additivity(a0, x, n, m):
    pot = cos_x1()
    whole = birkhoff(a0, pot, x, n + m)[-1]
    head = birkhoff(a0, pot, x, n)[-1]
    tail = birkhoff(a0, pot, _iterate(a0, x, n), m)[-1]
    # equal up to rounding; the partial sums are accumulated sequentially
    assert abs(whole - head - tail) <= 64 * np.finfo(float).eps * (n + m)


def _iterate(fmap, x, n):
    for _ in range(n):
        x = fmap.forward(x)
    return x


def test_birkhoff_validation(a0, x0):
    with pytest.raises(ValueError):
        birkhoff(a0, Zero(), x0, 0)


@settings(max_examples=20, deadline=None)
@given(x=points)
def test_central_exponent_linear(a0, a0inv, x):
    assert abs(central_exponent(a0, x, 50) - LOG_C) <= 1e-9
    assert abs(central_exponent(a0inv, x, 50) + LOG_C) <= 1e-9


def test_classify_examples(a0, a0inv, x0):
    params = DecompositionParams(0.2)
    assert classify_segment(a0, params, OrbitSegment(x0, 5)).label == "P"
    assert classify_segment(a0inv, params, OrbitSegment(x0, 5)).label == "G"
    assert classify_segment(a0, params, OrbitSegment(x0, 0)).label == "PG"
    with pytest.raises(ValueError):
        DecompositionParams(0.0)
    # a constant centre override straddling the threshold
    assert classify_segment(a0, params, OrbitSegment(x0, 5), Constant(-0.2)).label == "P"
    assert classify_segment(a0, params, OrbitSegment(x0, 5), Constant(-0.3)).label == "G"
    assert classify_segment(a0, params, OrbitSegment(x0, 5), Constant(-0.1)).label == "P"


@settings(max_examples=30, deadline=None)
@given(x=points, n=st.integers(0, 40), r=st.floats(0.01, 1.0),
       amp=st.floats(0.0, 2.0), shift=st.floats(-1.0, 1.0))
def test_decompose_matches_scan(mane, x, n, r, amp, shift):
    fmap = mane[-0.1]
    center = Trig([(amp, (1, 0, 0), 0.0), (0.5 * amp, (0, 1, 1), 0.3)], shift)
    params = DecompositionParams(r)
    seg = OrbitSegment(x, n)
    fast = decompose(fmap, params, seg, center)
    assert fast == decompose_by_scan(fmap, params, seg, center)
    assert fast.p_hat + fast.g_hat == n
    # the tail after p_hat has every partial sum below -r j
    sums = birkhoff(fmap, center, x, n) if n else np.empty(0)
    p = fast.p_hat
    if p < n:
        tail = sums[p:] - (sums[p - 1] if p else 0.0)
        assert np.all(tail < -r * np.arange(1, n - p + 1) + 1e-12)


def test_decompose_linear_extremes(a0, a0inv):
    params = DecompositionParams(0.2)
    for seg in random_segments(50, 1, 30, 4):
        assert decompose(a0, params, seg).p_hat == seg.n
        assert decompose(a0inv, params, seg).g_hat == seg.n


@settings(max_examples=30, deadline=None)
@given(x=points, n=st.integers(1, 30), r1=st.floats(0.01, 1.0), r2=st.floats(0.01, 1.0))
def test_g_membership_monotone_in_r(a0, x, n, r1, r2):
    lo, hi = sorted((r1, r2))
    center = Trig([(1.0, (1, 0, 0), 0.0)], -0.4)
    seg = OrbitSegment(x, n)
    if classify_segment(a0, DecompositionParams(hi), seg, center).in_g:
        assert classify_segment(a0, DecompositionParams(lo), seg, center).in_g


def test_gap_check_signs(a0):
    g = gap_check(a0, Zero(), LOG_U, LOG_CU)
    assert g.forward == pytest.approx(-LOG_C) and g.inverse == pytest.approx(LOG_C)
    g2 = gap_check(a0, cos_x1(), LOG_CU, LOG_U)
    assert g2.oscillation == pytest.approx(0.2)
    assert g2.forward == pytest.approx(LOG_C - 0.2)


def test_bowen_constant_potential_is_zero(a0inv, x0):
    res = bowen_oscillation(a0inv, OrbitSegment(x0, 20), 0.05, Constant(1.3), probes=16)
    assert res.oscillation == pytest.approx(0.0, abs=1e-12)
    assert res.probes_inside == 16


def test_bowen_within_bound(a0inv, x0):
    for n in (5, 10, 20, 40):
        res = bowen_oscillation(a0inv, OrbitSegment(x0, n), 0.05, cos_x1(), probes=32)
        assert res.probes_inside == 32
        assert 0 < res.oscillation <= res.bound


def test_bowen_nonlinear_probes_inside(mane, x0):
    res = bowen_oscillation(mane[-0.1].inverted(), OrbitSegment(x0, 10), 0.05, cos_x1(),
                            probes=8)
    assert res.probes_inside == 8
    assert res.oscillation <= res.bound


def test_bowen_bound_grows_with_n():
    b = [bowen_bound((1.0, 1.0), 0.05, n, 0.3) for n in (1, 5, 10)]
    assert b == sorted(b) and b[0] > 0


def test_empirical_measure_basics():
    m = EmpiricalMeasure(np.array([[0.1, 0.1, 0.1], [0.6, 0.6, 0.6]]), np.array([0.25, 0.75]))
    assert m.total() == 1.0
    assert m.integrate(lambda p: p[:, 0]) == pytest.approx(0.475)
    masses = m.bin_masses(2)
    assert masses[0] == 0.25 and masses[-1] == 0.75
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.empty((0, 3)), np.empty(0))
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((1, 3)), np.array([0.0]))


@pytest.fixture(scope="module")
def mu_a0(a0):
    return equilibrium_measure(a0, Zero(), 4, 0.1, budget=20_000, seed=2)


def test_equilibrium_normalized(mu_a0):
    assert mu_a0.total() == pytest.approx(1.0, abs=1e-12)
    assert mu_a0.discrepancy() < 0.08


@settings(max_examples=20, deadline=None)
@given(amp=st.floats(-3, 3), k=st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3)))
def test_equilibrium_integral_bounds(mu_a0, amp, k):
    pot = Trig([(amp, k, 0.1)])
    sup, inf = pot.sup_inf()
    val = mu_a0.integrate(pot)
    assert inf - 1e-2 <= val <= sup + 1e-2


def test_equilibrium_nearly_invariant(a0, mu_a0):
    pushed = mu_a0.push_forward(a0)
    assert np.max(np.abs(pushed.bin_masses() - mu_a0.bin_masses())) <= 0.05


def test_equilibrium_nu_index_k(a0):
    mu = equilibrium_measure(a0, Zero(), 3, 0.1, budget=5000, seed=1, nu_index="k")
    assert mu.total() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        equilibrium_measure(a0, Zero(), 3, 0.1, budget=100, nu_index="m")


def test_equilibrium_restricted_empty_raises(a0inv):
    with pytest.raises(EmptySetError):
        equilibrium_measure(a0inv, Zero(), 4, 0.1, DecompositionParams(0.2), budget=2000)


def test_p_filter(a0, a0inv):
    pts = np.random.default_rng(0).random((50, 3))
    assert p_filter(a0, DecompositionParams(0.2))(pts, 5).all()
    assert not p_filter(a0inv, DecompositionParams(0.2))(pts, 5).any()


def test_restricted_pressure_inverse_is_minus_inf(a0inv):
    est = restricted_pressure(a0inv, Zero(), DecompositionParams(0.2), 0.1, range(4, 8), 2000, 1)
    assert est.value == -math.inf


def test_central_potential_is_log_lambda_c(a0):
    vals = Central(a0)(np.random.default_rng(1).random((10, 3)))
    np.testing.assert_allclose(vals, LOG_C, atol=1e-12)
