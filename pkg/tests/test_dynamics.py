import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from thermolab.dynamics import (A0, CAT2, InverseMap, LinearMap, ManeMap, MapError, apply,
                                bump, cocycle, cone_check, estimate_splitting, line_angle,
                                map_from_params, orbit, splitting_fields)
from thermolab.oracles import char_roots
from thermolab.torus import min_image, sobol_points, torus_distance

points = arrays(np.float64, 3, elements=st.floats(0, 1, exclude_max=True))


def test_eigenvalues_match_characteristic_polynomial(a0):
    assert np.allclose(np.abs(a0.eigenvalues), char_roots(A0), atol=1e-13)
    assert np.allclose(np.abs(a0.eigenvalues), [0.19806226, 1.55495813, 3.2469796], atol=1e-8)
    assert a0.is_da_base()


def test_eigenvectors_orthonormal_for_symmetric_matrix(a0):
    e = a0.eigenvectors
    assert np.allclose(e.T @ e, np.eye(3), atol=1e-12)
    assert np.allclose(A0 @ e, e * a0.eigenvalues, atol=1e-12)


def test_inverse_matrix_is_integer(a0):
    assert np.array_equal(a0.inverted().matrix, [[1, -1, 1], [-1, 2, -2], [1, -2, 3]])


@pytest.mark.parametrize("bad", [[[1, 0], [0, 2]], [[1.5, 0], [0, 1]], [[1, 2, 3]]])
def test_invalid_matrices_rejected(bad):
    with pytest.raises(MapError):
        LinearMap(bad)


def test_complex_spectrum_rejected():
    with pytest.raises(MapError):
        LinearMap([[0, -1], [1, 0]])


@settings(max_examples=40, deadline=None)
@given(points)
def test_linear_inverse_roundtrip(x):
    a = LinearMap(A0)
    assert torus_distance(a.inverse(a.forward(x)), x) < 1e-12


@settings(max_examples=40, deadline=None)
@given(points, st.sampled_from([0.03, -0.05, -0.1]))
def test_mane_inverse_roundtrip(x, theta):
    f = _MANE[theta]
    assert torus_distance(f.inverse(f.forward(x)), x) < 1e-10
    assert torus_distance(f.forward(f.inverse(x)), x) < 1e-10


_BASE = LinearMap(A0)
_MANE = {th: ManeMap(_BASE, th) for th in (0.03, -0.05, -0.1)}


def test_mane_lift_inverse_handles_large_lifts(mane):
    f = mane[-0.1]
    z = np.array([123.25, -77.5, 40.125])
    assert np.allclose(f.lift_forward(f.lift_inverse(z)), z, atol=1e-9)


def test_mane_is_linear_away_from_q(mane, a0):
    x = np.array([0.5, 0.5, 0.5])
    assert np.allclose(mane[-0.1].forward(x), a0.forward(x))


def test_mane_derivative_at_q(mane, a0):
    f = mane[-0.1]
    v_c = a0.frame()[1]
    expected = A0 + 2 * np.pi * f.theta * np.outer(v_c, v_c)
    assert np.allclose(f.jacobian(np.zeros(3)), expected, atol=1e-12)
    # center derivative lambda_c + 2 pi theta
    assert math.isclose(v_c @ f.jacobian(np.zeros(3)) @ v_c,
                        a0.eigenvalues[1] + 2 * np.pi * f.theta, abs_tol=1e-12)


@pytest.mark.parametrize("theta", [0.03, -0.1])
def test_jacobian_matches_finite_differences(mane, theta):
    f = mane[theta]
    for x in sobol_points(8, 3, 2) * 0.3:
        h = 1e-6
        fd = np.column_stack([(f.lift_forward(x + h * e) - f.lift_forward(x - h * e)) / (2 * h)
                              for e in np.eye(3)])
        assert np.allclose(f.jacobian(x), fd, atol=1e-6)


def test_inverse_map_jacobian(mane):
    g = mane[-0.05].inverted()
    assert isinstance(g, InverseMap)
    x = np.array([0.02, 0.05, 0.01])
    assert np.allclose(g.jacobian(x) @ mane[-0.05].jacobian(g.forward(x)), np.eye(3), atol=1e-9)


def test_bump_profile():
    assert bump(0.0) == pytest.approx(1.0)
    assert bump(1.0) == 0.0 and bump(1.5) == 0.0
    t = np.linspace(0, 0.99, 50)
    assert np.all(np.diff(bump(t)) <= 0)


def test_cone_check_values(a0):
    ok, margin = cone_check(a0, 0.2, 256, 0)
    assert ok and margin > 0.4
    assert cone_check(ManeMap(a0, -0.09, check=False), 0.2, 512, 7)[0]
    assert not cone_check(ManeMap(a0, -0.1, check=False), 0.2, 512, 7)[0]
    assert cone_check(ManeMap(a0, -0.15, check=False), 0.5, 512, 7)[0]
    assert not cone_check(ManeMap(a0, -0.2, check=False), 0.5, 512, 7)[0]


def test_construction_rejects_large_theta(a0):
    with pytest.raises(MapError):
        ManeMap(a0, -0.2)
    with pytest.raises(MapError):
        ManeMap(a0, 0.01, q=(0.1, 0.1, 0.1))


def test_splitting_recovers_eigenvectors(a0):
    fr = estimate_splitting(a0, np.array([0.3, 0.1, 0.7]))
    for v, ref in zip((fr.e_s, fr.e_c, fr.e_u), a0.frame()):
        assert line_angle(v, ref) < 1e-8
    assert 0 < fr.xi < 1


def test_splitting_invariance_for_mane(mane):
    f = mane[-0.1]
    xs = sobol_points(16, 3, 3) * 0.4 - 0.2
    es, ec, eu = splitting_fields(f, xs)
    fxs = f.forward(xs)
    es2, ec2, eu2 = splitting_fields(f, fxs)
    jac = f.jacobian(xs)
    for v, w in ((es, es2), (ec, ec2), (eu, eu2)):
        img = np.einsum("nij,nj->ni", jac, v)
        assert np.max(line_angle(img, w)) < 1e-6


def test_orbit_and_apply(a0, x0):
    orb = orbit(a0, x0, 5)
    assert orb.shape == (5, 3)
    assert np.allclose(orb[4], apply(a0, x0, 4))
    assert torus_distance(apply(a0, apply(a0, x0, 3), -3), x0) < 1e-12


def test_cocycle_chain_rule(mane, x0):
    f = mane[-0.05]
    x = x0 * 0.2
    m5 = cocycle(f, x, 5)
    m2 = cocycle(f, x, 2)
    m3 = cocycle(f, apply(f, x, 2), 3)
    assert np.allclose(m5, m3 @ m2, atol=1e-9)
    assert np.allclose(cocycle(f, x, 0), np.eye(3))


def test_params_roundtrip(a0, mane):
    for fmap in (a0, LinearMap(CAT2)):
        assert np.array_equal(map_from_params(fmap.to_params()).matrix, fmap.matrix)
    f = map_from_params(mane[-0.05].to_params())
    assert isinstance(f, ManeMap) and f.theta == -0.05
    g = map_from_params(mane[-0.05].inverted().to_params())
    x = np.array([0.01, 0.02, 0.03])
    assert np.allclose(g.forward(x), mane[-0.05].inverse(x), atol=1e-12)


def test_min_image_consistency(a0):
    x = sobol_points(32, 3, 9)
    d = min_image(a0.forward(x) - x @ np.array(A0).T)
    assert np.allclose(d, 0, atol=1e-12)
