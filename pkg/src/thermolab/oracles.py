"""Closed-form fixtures for the linear family, checked by ``thermolab verify``.

Expected values come from the characteristic polynomial (roots found with
numpy.roots, independently of the eigen-solver used by the maps) or from
direct linear algebra; actual values run the estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import A0, CAT2, LinearMap, cocycle
from .leafwise import b_set_leaf_fraction, unstable_entropy
from .potentials import Central, Constant, Zero, cos_x1
from .pressure import (FULL, OrbitSegment, build_separated, nonexpansive_fraction,
                       partition_function, pressure_estimate)
from .speclab import bracket, glue
from .thermo import (DecompositionParams, birkhoff, central_exponent, decompose,
                     equilibrium_measure, gap_check)
from .torus import DIAMETER_T3, min_image, sobol_points


def char_roots(matrix):
    """Eigenvalue moduli of an integer 3x3 matrix via its characteristic polynomial."""
    m = np.asarray(matrix, dtype=float)
    c2 = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0] + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0] \
        + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]
    poly = [1.0, -np.trace(m), c2, -np.linalg.det(m)]
    return np.sort(np.abs(np.roots(poly).real))


ROOTS = char_roots(A0)
LOG_C = math.log(ROOTS[1])
LOG_U = math.log(ROOTS[2])
LOG_CU = LOG_C + LOG_U
CAT_H = math.log((3 + math.sqrt(5)) / 2)
SYNTHETIC = [[2, 1, 0], [1, 1, 0], [0, 0, 1]]


@dataclass
class Fixture:
    name: str
    expected: float
    tolerance: float
    compute: object

    def run(self, seed, expected=None):
        exp = self.expected if expected is None else expected
        actual = float(self.compute(seed))
        ok = abs(actual - exp) <= self.tolerance or (actual == exp)
        return {"fixture": self.name, "expected": exp, "actual": actual,
                "tolerance": self.tolerance, "status": "PASS" if ok else "FAIL"}


def _a():
    return LinearMap(A0)


def _ai():
    return LinearMap(A0).inverted()


def _x(seed):
    return sobol_points(1, 3, seed)[0]


def _pressure(fmap, seed, pot=None):
    return pressure_estimate(fmap, Zero() if pot is None else pot, 0.1, 0.0, range(4, 9),
                             100_000, seed).value


def _bracket_gap(seed):
    a = _a()
    x = _x(seed)
    y = (x + np.array([0.03, -0.02, 0.025])) % 1.0
    es, ec, eu = a.frame()
    coef = np.linalg.solve(np.column_stack([es, ec, -eu]), min_image(y - x))
    expected = (y + coef[2] * eu) % 1.0
    return float(np.max(np.abs(min_image(bracket(a, x, y) - expected))))


def _glue_two(seed):
    xs = sobol_points(2, 3, seed)
    r = glue(_ai(), [OrbitSegment(xs[0], 10), OrbitSegment(xs[1], 10)], 0.1, seed=seed)
    return float(r.success)


def _shift_law(seed):
    a = _a()
    sset = build_separated(a, FULL, 6, 0.1, 4096, seed)
    c = 0.37
    return partition_function(sset, Constant(c)) - partition_function(sset, Zero()) - 6 * c


def _cocycle_growth(seed):
    m = cocycle(_a(), _x(seed), 20)
    return math.log(np.linalg.norm(m, 2)) / 20


FIXTURES = [
    Fixture("eigen_log_center", LOG_C, 1e-12,
            lambda s: math.log(abs(_a().eigenvalues[1]))),
    Fixture("eigen_log_unstable", LOG_U, 1e-12,
            lambda s: math.log(abs(_a().eigenvalues[2]))),
    Fixture("cocycle_top_exponent", LOG_U, 1e-10, _cocycle_growth),
    Fixture("birkhoff_central_A0", 5 * LOG_C, 1e-12,
            lambda s: birkhoff(_a(), Central(_a()), _x(s), 5)[-1]),
    Fixture("central_exponent_A0", LOG_C, 1e-9, lambda s: central_exponent(_a(), _x(s), 50)),
    Fixture("central_exponent_A0inv", -LOG_C, 1e-9,
            lambda s: central_exponent(_ai(), _x(s), 50)),
    Fixture("decompose_A0_p_hat", 10, 0,
            lambda s: decompose(_a(), DecompositionParams(0.2), OrbitSegment(_x(s), 10)).p_hat),
    Fixture("decompose_A0inv_g_hat", 10, 0,
            lambda s: decompose(_ai(), DecompositionParams(0.2), OrbitSegment(_x(s), 10)).g_hat),
    Fixture("unstable_entropy_A0", LOG_U, 0.02, lambda s: unstable_entropy(_a(), seed=s).value),
    Fixture("unstable_entropy_A0inv", LOG_CU, 0.02,
            lambda s: unstable_entropy(_ai(), seed=s).value),
    Fixture("gap_margin_A0inv", LOG_C, 0.05,
            lambda s: gap_check(_ai(), Zero(), unstable_entropy(_ai(), seed=s).value,
                                unstable_entropy(_a(), seed=s).value).forward),
    Fixture("gap_margin_A0", -LOG_C, 0.05,
            lambda s: gap_check(_a(), Zero(), unstable_entropy(_a(), seed=s).value,
                                unstable_entropy(_ai(), seed=s).value).forward),
    Fixture("entropy_A0", LOG_CU, 0.25, lambda s: _pressure(_a(), s)),
    Fixture("entropy_cat2", CAT_H, 0.1, lambda s: _pressure(LinearMap(CAT2), s)),
    Fixture("pressure_shift_law", 0.0, 1e-12, _shift_law),
    Fixture("bracket_eigen_solve", 0.0, 1e-10, _bracket_gap),
    Fixture("glue_two_blocks", 1.0, 0.0, _glue_two),
    Fixture("equilibrium_discrepancy", 0.0, 0.08,
            lambda s: equilibrium_measure(_a(), Zero(), 8, 0.1, None, 100_000, s).discrepancy()),
    Fixture("nonexpansive_small_eps", 0.0, 0.0,
            lambda s: nonexpansive_fraction(_a(), 0.05, 20, 500, s)),
    Fixture("nonexpansive_diameter", 1.0, 0.0,
            lambda s: nonexpansive_fraction(_a(), DIAMETER_T3, 20, 500, s)),
    Fixture("bset_A0", 0.0, 0.0,
            lambda s: b_set_leaf_fraction(_a(), _x(s), 5.0, 1e-3)),
    Fixture("bset_synthetic", 1.0, 0.0,
            lambda s: b_set_leaf_fraction(LinearMap(SYNTHETIC), _x(s), 5.0, 1e-3)),
    Fixture("trig_oscillation", 0.2, 1e-12, lambda s: (lambda p: p[0] - p[1])(cos_x1().sup_inf())),
]

NAMES = [f.name for f in FIXTURES]


def run_fixture(index, seed, expected=None):
    return FIXTURES[index].run(seed, expected)
