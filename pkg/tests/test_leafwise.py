import numpy as np
import pytest

from thermolab.dynamics import LinearMap
from thermolab.leafwise import (b_set_leaf_fraction, cu_determinant, grow_leaf,
                                leaf_lengths, max_tangent_angle, minimality_radius,
                                quasi_isometry_constant, unstable_entropy)
from thermolab.oracles import LOG_CU, LOG_U, SYNTHETIC


def test_linear_leaf_is_straight(a0, x0):
    leaf = grow_leaf(a0, x0, 0.05, 1e-3)
    assert leaf.length == pytest.approx(0.1, rel=1e-9)
    assert max_tangent_angle(a0, leaf) < 1e-9
    assert np.max(leaf.gaps()) <= 1e-3 + 1e-12
    assert leaf.weights().sum() == pytest.approx(leaf.length)


def test_zero_radius_leaf(a0, x0):
    leaf = grow_leaf(a0, x0, 0.0, 1e-3)
    assert leaf.points.shape == (1, 3) and leaf.length == 0.0
    with pytest.raises(ValueError):
        grow_leaf(a0, x0, 0.1, 0.0)


def test_mane_leaf_in_cone(mane, x0):
    leaf = grow_leaf(mane[-0.05], x0, 0.2, 1e-3)
    assert leaf.length == pytest.approx(0.4, rel=1e-6)
    assert np.max(leaf.gaps()) <= 1e-3 * (1 + 1e-9)
    assert max_tangent_angle(mane[-0.05], leaf) < 0.5


def test_leaf_lengths_grow_by_lambda_u(a0, x0):
    lengths, truncated = leaf_lengths(a0, x0, 5)
    assert not truncated
    ratios = np.array(lengths[1:]) / np.array(lengths[:-1])
    np.testing.assert_allclose(ratios, np.exp(LOG_U), rtol=1e-9)


def test_unstable_entropy_oracles(a0, a0inv):
    assert abs(unstable_entropy(a0).value - LOG_U) < 0.02
    assert abs(unstable_entropy(a0inv).value - LOG_CU) < 0.02


def test_unstable_entropy_needs_four_n(a0):
    with pytest.raises(ValueError):
        unstable_entropy(a0, n_range=range(1, 3))


def test_minimality_radius_monotone_in_epsilon(a0):
    coarse = minimality_radius(a0, 0.2, 512, 0)
    fine = minimality_radius(a0, 0.1, 512, 0)
    assert coarse.found and fine.found
    assert coarse.radius <= fine.radius
    # coverage grows along the doubling schedule
    cov = [c for _, c in fine.history]
    assert cov[-1] == 1.0 and cov == sorted(cov)


def test_minimality_trivial_above_diameter(a0):
    run = minimality_radius(a0, 1.0, 64, 0)
    assert run.radius == 0.25
    with pytest.raises(ValueError):
        minimality_radius(a0, 0.0, 64, 0)


def test_cu_determinant_linear(a0, x0):
    det = cu_determinant(a0, x0[None, :])
    assert det[0] == pytest.approx(np.exp(LOG_CU), rel=1e-12)


def test_bset_linear_oracles(a0, x0):
    assert b_set_leaf_fraction(a0, x0, 5.0, 1e-3) == 0.0
    assert b_set_leaf_fraction(LinearMap(SYNTHETIC), x0, 5.0, 1e-3) == 1.0
    with pytest.raises(ValueError):
        b_set_leaf_fraction(a0, x0, 0.0, 1e-3)


def test_bset_mane_fraction_bounded(mane):
    frac = b_set_leaf_fraction(mane[-0.1], np.array([0.01, 0.02, 0.03]), 5.0, 1e-3)
    assert 0.0 < frac < 1.0
    assert b_set_leaf_fraction(mane[0.03], np.array([0.01, 0.02, 0.03]), 5.0, 1e-3) == 0.0


def test_quasi_isometry_linear(a0):
    q = quasi_isometry_constant(a0, leaves=2, length=4.0, mesh=0.01, pairs=200)
    assert 1.0 <= q <= 1.0 + 1e-9
