"""Acceptance criteria 1-10, each at its stated tolerance.

Every test appends a one-line verdict, printed in the terminal summary.
"""

import filecmp
import math
import time

import mpmath
import numpy as np

from conftest import ACCEPTANCE_LINES
from thermolab.cli import main
from thermolab.dynamics import ManeMap
from thermolab.experiments import good_segments
from thermolab.leafwise import b_set_leaf_fraction, unstable_entropy
from thermolab.oracles import CAT_H, LOG_C, LOG_CU
from thermolab.potentials import Constant, Trig, Zero, cos_x1
from thermolab.pressure import OrbitSegment, fit_slope, nonexpansive_fraction, pressure_estimate
from thermolab.speclab import GlueError, glue, shadowing_distances
from thermolab.thermo import (DecompositionParams, bowen_oscillation, central_exponent,
                              classify_segment, decompose, decompose_by_scan,
                              equilibrium_measure, gap_check, random_segments)
from thermolab.torus import DIAMETER_T3, sobol_points


def record(tag, ok, detail):
    ACCEPTANCE_LINES.append(f"{tag} {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_c1_entropy_oracle(a0, cat2):
    t0 = time.perf_counter()
    h = pressure_estimate(a0, Zero(), 0.1, 0.0, range(4, 9), 100_000, 1).value
    h2 = pressure_estimate(cat2, Zero(), 0.1, 0.0, range(4, 9), 100_000, 1).value
    dt = time.perf_counter() - t0
    ok = 1.37 <= h <= 1.87 and 0.86 <= h2 <= 1.06 and dt <= 300
    record("C1", ok, f"h(A0)={h:.4f} in [1.37,1.87] (oracle {LOG_CU:.4f}); "
                     f"h(cat)={h2:.4f} in [0.86,1.06] (oracle {CAT_H:.4f}); {dt:.1f}s <= 300s")


def test_c2_unstable_stable_entropy(a0, a0inv):
    t0 = time.perf_counter()
    hu = unstable_entropy(a0).value
    hs = unstable_entropy(a0inv).value
    g_inv = gap_check(a0inv, Zero(), hs, hu).forward
    g_fwd = gap_check(a0, Zero(), hu, hs).forward
    dt = time.perf_counter() - t0
    ok = (abs(hu - 1.178) <= 0.02 and abs(hs - 1.619) <= 0.02 and abs(g_inv - 0.44) <= 0.05
          and abs(g_fwd + 0.44) <= 0.05 and dt <= 30)
    record("C2", ok, f"h_u(A0)={hu:.4f} (1.178+-0.02); h_u(A0^-1)={hs:.4f} (1.619+-0.02); "
                     f"gap(A0^-1)={g_inv:+.4f}, gap(A0)={g_fwd:+.4f} (+-0.44+-0.05); {dt:.1f}s")


def test_c3_lyapunov(a0):
    xs = np.random.default_rng(2024).random((100, 3))
    vals = np.array([central_exponent(a0, x, 50) for x in xs])
    err = float(np.max(np.abs(vals - LOG_C)))
    literal = float(np.max(np.abs(vals - 0.4415)))
    record("C3", err <= 1e-6, f"max|chi_c - log lambda_c|={err:.2e} <= 1e-6 over 100 x "
                              f"(log lambda_c={LOG_C:.10f}; distance to literal 0.4415: {literal:.2e})")


def test_c4_decomposition(a0, a0inv, mane):
    params = DecompositionParams(0.2)
    segs = random_segments(1000, 0, 40, 17)
    center = Trig([(0.6, (1, 0, 0), 0.0), (0.4, (0, 1, -1), 0.7)], -0.15)
    mismatches = 0
    for seg in segs:
        for fmap, c in ((mane[-0.1], center), (mane[-0.1], None), (a0, None), (a0inv, None)):
            if decompose(fmap, params, seg, c) != decompose_by_scan(fmap, params, seg, c):
                mismatches += 1
    nontrivial = sum(0 < decompose(mane[-0.1], params, s, center).p_hat < s.n for s in segs)
    full_p = all(decompose(a0, params, s).p_hat == s.n for s in segs)
    full_g = all(decompose(a0inv, params, s).g_hat == s.n for s in segs)
    ok = mismatches == 0 and full_p and full_g
    record("C4", ok, f"{mismatches} mismatches over 4x1000 segments ({nontrivial} with mixed "
                     f"P/G); A0 fully P: {full_p}; A0^-1 fully G: {full_g}")


def test_c5_specification(a0inv):
    t0 = time.perf_counter()
    params = DecompositionParams(0.2)
    verified, uniform, taus_seen = 0, True, set()
    for tid in range(100):
        rng = np.random.default_rng([1, tid])
        k = int(rng.integers(2, 6))
        segs = good_segments(a0inv, params, k, 5, 20, rng)
        try:
            r = glue(a0inv, segs, 0.1, seed=1)
        except GlueError:
            continue
        uniform &= len(set(r.taus)) == 1 and len(r.taus) == k - 1
        taus_seen.update(r.taus)
        total = sum(s.n for s in segs) + (k - 1) * r.M_u
        # independent re-check at a separately chosen precision
        with mpmath.workdps(40 + int(total * math.log10(5.05))):
            d = shadowing_distances(a0inv.matrix, r.y_mp, [s.x for s in segs],
                                    [s.n for s in segs], r.M_u)
        if max(d) < 0.1:
            verified += 1
    dt = time.perf_counter() - t0
    ok = verified >= 95 and uniform and dt <= 120
    record("C5", ok, f"{verified}/100 tuples independently verified (>= 95); uniform "
                     f"transition time {sorted(taus_seen)}; {dt:.1f}s <= 120s")


def test_c6_bowen(a0inv):
    pot = cos_x1()
    params = DecompositionParams(0.2)
    ns = (5, 10, 20, 40)
    per_n = {n: 0.0 for n in ns}
    worst, count = 0.0, 0
    for x in sobol_points(50, 3, 6):
        for n in ns:
            seg = OrbitSegment(x, n)
            assert classify_segment(a0inv, params, seg).in_g
            res = bowen_oscillation(a0inv, seg, 0.05, pot, probes=64, seed=0)
            count += res.probes_inside
            worst = max(worst, res.oscillation / res.bound)
            per_n[n] = max(per_n[n], res.oscillation)
    slope = fit_slope(ns, [per_n[n] for n in ns])[0]
    ok = worst <= 1.0 and slope <= 0.005 and count == 50 * 4 * 64
    record("C6", ok, f"max oscillation/K = {worst:.3f} <= 1 over 200 G-segments; slope of max "
                     f"oscillation vs n = {slope:.2e} <= 0.005; "
                     + ", ".join(f"n={n}: {per_n[n]:.4f}" for n in ns))


def test_c7_equilibrium_and_shift_law(a0):
    mu = equilibrium_measure(a0, Zero(), 8, 0.1, budget=100_000, seed=1)
    disc = mu.discrepancy(4)
    c = 0.731
    p0 = pressure_estimate(a0, Zero(), 0.1, 0.0, range(4, 9), 20_000, 3)
    pc = pressure_estimate(a0, Constant(c), 0.1, 0.0, range(4, 9), 20_000, 3)
    shift = abs(pc.value - p0.value - c)
    ok = disc <= 0.08 and shift <= 1e-12
    record("C7", ok, f"discrepancy {disc:.2e} <= 0.08 over 4^3 cells; "
                     f"|P(phi+c) - P(phi) - c| = {shift:.1e} <= 1e-12")


def test_c8_expansivity(a0):
    small = nonexpansive_fraction(a0, 0.05, 20, 500, 1)
    big = nonexpansive_fraction(a0, DIAMETER_T3, 20, 500, 1)
    record("C8", small == 0.0 and big == 1.0,
           f"fraction(eps=0.05)={small!r} (== 0); fraction(eps=diam)={big!r} (== 1)")


def test_c9_bset(a0):
    x = np.array([0.01, 0.02, 0.03])
    linear = b_set_leaf_fraction(a0, x, 5.0, 1e-3)
    fracs = {}
    for theta in (0.05, 0.03, 0.0, -0.05, -0.1):
        fmap = a0 if theta == 0.0 else ManeMap(a0, theta)
        fracs[theta] = b_set_leaf_fraction(fmap, x, 5.0, 1e-3)
    finite = all(math.isfinite(v) and 0.0 <= v <= 1.0 for v in fracs.values())
    record("C9", linear == 0.0 and finite,
           f"B(f) fraction for A0 = {linear!r} (== 0); sweep " +
           ", ".join(f"theta={t:+.2f}: {v:.4f}" for t, v in fracs.items()))


def test_c10_determinism(tmp_path):
    runs = [("w1", 1), ("w4", 4)]
    codes = [main(["verify", "--seed", "5", "--workers", str(w), "--out", str(tmp_path / d)])
             for d, w in runs]
    same = filecmp.cmp(tmp_path / "w1" / "verify.csv", tmp_path / "w4" / "verify.csv",
                       shallow=False)
    record("C10", same and codes == [0, 0],
           f"two seeded verify runs (workers=1, workers=4) give byte-identical verify.csv: {same}; "
           f"exit codes {codes}")
