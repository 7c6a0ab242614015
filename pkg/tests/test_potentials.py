import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from thermolab.potentials import (Central, Constant, Trig, Zero, cos_x1, estimate_holder,
                                  potential_from_params)
from thermolab.torus import torus_distance

points = arrays(np.float64, 3, elements=st.floats(0, 1, exclude_max=True))


@settings(max_examples=80)
@given(points, points)
def test_trig_holder_bound(x, y):
    p = Trig([(0.1, (1, 0, 0), 0.0), (0.05, (0, 2, 1), 0.3)])
    c0, gamma = p.holder
    assert abs(p(x) - p(y)) <= c0 * torus_distance(x, y) ** gamma + 1e-12


def test_cos_x1_values():
    p = cos_x1()
    assert p(np.zeros(3)) == pytest.approx(0.1)
    assert p(np.array([0.5, 0.3, 0.2])) == pytest.approx(-0.1)
    sup, inf = p.sup_inf()
    assert sup == pytest.approx(0.1) and inf == pytest.approx(-0.1)


def test_constant_potentials():
    assert Zero()(np.zeros((4, 3))).tolist() == [0.0] * 4
    assert Constant(2.5).sup_inf() == (2.5, 2.5)
    assert Constant(2.5).holder[0] == 0.0


def test_central_constant_for_linear(a0, a0inv):
    assert Central(a0).constant_value == pytest.approx(math.log(a0.rates[1]), abs=1e-14)
    assert Central(a0inv).constant_value == pytest.approx(-math.log(a0.rates[1]), abs=1e-14)


def test_central_for_mane_is_shifted_near_q(mane, a0):
    f = mane[-0.1]
    phi = Central(f)
    near, far = phi(np.zeros(3)), phi(np.array([0.5, 0.5, 0.5]))
    assert far == pytest.approx(math.log(a0.rates[1]), abs=1e-6)
    assert near < far - 0.3


def test_estimated_holder_dominates_samples():
    p = cos_x1()
    c_est, _ = estimate_holder(p)
    assert 0 < c_est <= 1.5 * p.holder[0] + 1e-12


def test_params_roundtrip(a0):
    for p in (Zero(), Constant(0.25), Trig([(0.1, (1, 0, 0), 0.0), (0.2, (0, 1, 1), 0.5)])):
        q = potential_from_params(p.to_params())
        x = np.random.default_rng(0).random((10, 3))
        assert np.allclose(q(x), p(x))
    c = potential_from_params({"kind": "central", "t": "2.0"}, a0)
    assert c.constant_value == pytest.approx(2 * math.log(a0.rates[1]))
    with pytest.raises(ValueError):
        potential_from_params({"kind": "central"})
    with pytest.raises(ValueError):
        potential_from_params({"kind": "nope"})
