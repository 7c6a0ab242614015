"""Estimator tasks driven by an ExperimentConfig.

Work is split into picklable parts (one per estimator, or per theta / per
chunk of gluing tuples) so a process pool can run them; ``combine`` merges
parts in task order, which keeps outputs independent of the worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SCHEMA
from .dynamics import ManeMap, map_from_params
from .leafwise import b_set_leaf_fraction, unstable_entropy
from .potentials import Zero, potential_from_params
from .pressure import (PRESSURE_CSV_HEADER, OrbitSegment, fit_slope, nonexpansive_fraction,
                       pressure_estimate)
from .speclab import GLUE_CSV_HEADER, GlueError, glue
from .thermo import (DecompositionParams, bowen_oscillation, central_exponent,
                     classify_segment, decompose, equilibrium_measure, gap_check,
                     random_segments, restricted_pressure)
from .torus import sobol_points

SPEC_CHUNK = 10


class EstimatorError(RuntimeError):
    pass


@dataclass
class Check:
    name: str
    value: float
    op: str
    threshold: float

    @property
    def passed(self):
        v, t = self.value, self.threshold
        if isinstance(v, float) and math.isnan(v):
            return False
        return {">=": v >= t, ">": v > t, "<=": v <= t, "<": v < t}[self.op]

    def line(self):
        return f"{self.name} {fmt(self.value)} {self.op}{fmt(self.threshold)} " \
               f"{'PASS' if self.passed else 'FAIL'}"


@dataclass
class Output:
    name: str
    header: tuple
    rows: list
    checks: list = field(default_factory=list)
    plot: dict = field(default_factory=dict)


def fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".10g")


def build_map(cfg):
    return map_from_params({k: cfg.raw("map", k) for k in SCHEMA["map"]})


def build_potential(cfg, fmap):
    params = {k: cfg.raw("potential", k) for k in SCHEMA["potential"]}
    return potential_from_params(params, fmap)


def _target_map(cfg, section, fmap):
    which = cfg.get(section, "map")
    if which not in ("forward", "inverse"):
        raise EstimatorError(f"[{section}] map must be 'forward' or 'inverse'")
    return fmap.inverted() if which == "inverse" else fmap


def _n_range(lo, hi):
    return range(lo, hi + 1)


# --- planning -----------------------------------------------------------

def plan(cfg):
    """List of (estimator, part) pairs in deterministic order."""
    tasks = []
    for name in cfg.get("run", "estimators"):
        if name == "sweep":
            tasks += [(name, i) for i in range(len(cfg.get("sweep", "thetas")))]
        elif name == "spec":
            tuples = cfg.get("spec", "tuples")
            tasks += [(name, i) for i in range(max(1, math.ceil(tuples / SPEC_CHUNK)))]
        else:
            tasks.append((name, 0))
    return tasks


def execute(cfg, name, part):
    fn = RUNNERS.get(name)
    if fn is None:
        raise EstimatorError(f"unknown estimator {name!r}")
    return fn(cfg, part)


def combine(name, parts):
    if len(parts) == 1 and name not in ("sweep", "spec"):
        return parts[0]
    return COMBINERS[name](parts)


# --- estimators -----------------------------------------------------------

def _pressure_common(cfg, potential_factory, label, check_name):
    fmap = build_map(cfg)
    p = cfg.section("pressure")
    pot = potential_factory(fmap)
    est = pressure_estimate(fmap, pot, p["delta"], p["epsilon"],
                            _n_range(p["n_min"], p["n_max"]), p["budget"], cfg.get("run", "seed"))
    checks = [Check(check_name, est.value, ">=", cfg.get("thresholds", "h_top_min"))]
    plot = {"n": list(est.n_range), "log_lambda": list(est.log_lambda),
            "slope": est.slope, "intercept": est.intercept, "label": label}
    return Output(label, PRESSURE_CSV_HEADER, est.rows(), checks, plot)


def run_entropy(cfg, part):
    return _pressure_common(cfg, lambda f: Zero(), "entropy", "H_TOP")


def run_pressure(cfg, part):
    return _pressure_common(cfg, lambda f: build_potential(cfg, f), "pressure", "PRESSURE")


def _entropies(fmap, cfg):
    u = cfg.section("uentropy")
    seed = cfg.get("run", "seed")
    rng = _n_range(u["n_min"], u["n_max"])
    hu = unstable_entropy(fmap, n_range=rng, seed=seed, delta=u["delta"], mesh=u["mesh"])
    hs = unstable_entropy(fmap.inverted(), n_range=rng, seed=seed, delta=u["delta"],
                          mesh=u["mesh"])
    return hu, hs


def run_uentropy(cfg, part):
    fmap = build_map(cfg)
    hu, hs = _entropies(fmap, cfg)
    rows = [("unstable", n, v) for n, v in hu.rows()] + [("stable", n, v) for n, v in hs.rows()]
    th = cfg.section("thresholds")
    checks = [Check("H_U", hu.value, ">=", th["h_u_min"]),
              Check("H_S", hs.value, ">=", th["h_s_min"])]
    plot = {"unstable": hu.rows(), "stable": hs.rows(), "h_u": hu.value, "h_s": hs.value}
    return Output("uentropy", ("leaf", "n", "log_length"), rows, checks, plot)


def run_gapcheck(cfg, part):
    fmap = build_map(cfg)
    hu, hs = _entropies(fmap, cfg)
    margin = gap_check(fmap, build_potential(cfg, fmap), hu.value, hs.value)
    gmin = cfg.get("thresholds", "gap_min")
    rows = [(hu.value, hs.value, margin.oscillation, margin.forward, margin.inverse)]
    checks = [Check("GAP_FORWARD", margin.forward, ">", gmin),
              Check("GAP_INVERSE", margin.inverse, ">", gmin)]
    return Output("gapcheck", ("h_u", "h_s", "oscillation", "gap_forward", "gap_inverse"),
                  rows, checks)


def run_lyapunov(cfg, part):
    fmap = build_map(cfg)
    p = cfg.section("lyapunov")
    xs = sobol_points(p["samples"], 3, cfg.get("run", "seed"))
    vals = [central_exponent(fmap, x, p["n"]) for x in xs]
    rows = [(i, *x.tolist(), v) for i, (x, v) in enumerate(zip(xs, vals))]
    mean = math.fsum(vals) / len(vals)
    checks = [Check("LYAPUNOV_MEAN", mean, "<", cfg.get("thresholds", "lyapunov_max"))]
    return Output("lyapunov", ("sample", "x1", "x2", "x3", "exponent"), rows, checks,
                  {"values": vals})


def run_decompose(cfg, part):
    fmap = build_map(cfg)
    p = cfg.section("decompose")
    seed = cfg.get("run", "seed")
    params = DecompositionParams(p["r"])
    segs = random_segments(p["segments"], p["n_min"], p["n_max"], seed)
    res = [decompose(fmap, params, s) for s in segs]
    rows = [(s.n, d.p_hat, d.g_hat) for s, d in zip(segs, res)]
    g_frac = sum(d.g_hat for d in res) / max(1, sum(s.n for s in segs))
    checks = [Check("DECOMP_G_FRACTION", g_frac, ">=", cfg.get("thresholds", "decomp_g_min"))]
    if p["restricted_pressure"]:
        q = cfg.section("pressure")
        pot = build_potential(cfg, fmap)
        rng = _n_range(q["n_min"], q["n_max"])
        full = pressure_estimate(fmap, pot, q["delta"], q["epsilon"], rng, q["budget"], seed)
        restr = restricted_pressure(fmap, pot, params, q["delta"], rng, q["budget"], seed,
                                    q["epsilon"])
        checks.append(Check("PRESSURE_SANDWICH", full.value - restr.value, ">=",
                            cfg.get("thresholds", "sandwich_min")))
    plot = {"p_fraction": [d.p_hat / s.n for s, d in zip(segs, res)]}
    return Output("decompose", ("n", "p_hat", "g_hat"), rows, checks, plot)


def good_segments(gmap, params, count, n_lo, n_hi, rng, max_draws=64):
    """``count`` segments in G_g, drawn from a seeded stream."""
    out = []
    for _ in range(max_draws * count):
        x = rng.random(3)
        seg = OrbitSegment(x, int(rng.integers(n_lo, n_hi + 1)))
        if classify_segment(gmap, params, seg).in_g:
            out.append(seg)
            if len(out) == count:
                return out
    raise EstimatorError("could not draw enough G-segments for gluing")


def run_spec(cfg, part):
    fmap = build_map(cfg)
    gmap = _target_map(cfg, "spec", fmap)
    if not gmap.linear:
        raise EstimatorError("spec: gluing is implemented for linear maps only")
    p = cfg.section("spec")
    seed = cfg.get("run", "seed")
    params = DecompositionParams(p["r"])
    results = []
    lo = part * SPEC_CHUNK
    for tid in range(lo, min(lo + SPEC_CHUNK, p["tuples"])):
        rng = np.random.default_rng([seed, tid])
        k = int(rng.integers(p["blocks_min"], p["blocks_max"] + 1))
        segs = good_segments(gmap, params, k, p["n_min"], p["n_max"], rng)
        try:
            r = glue(gmap, segs, p["delta"], seed=seed)
            results.append((tid, k, int(r.success), r.max_distance, r.M_u))
        except GlueError:
            results.append((tid, k, 0, math.nan, 0))
    return Output("spec", GLUE_CSV_HEADER, results,
                  [Check("SPEC_SUCCESS", 0.0, ">=", cfg.get("thresholds", "spec_min"))])


def combine_spec(parts):
    rows = [r for p in parts for r in p.rows]
    rate = sum(r[2] for r in rows) / len(rows) if rows else math.nan
    threshold = parts[0].checks[0].threshold
    rows = [(t, k, s, repr(float(d)), m) for t, k, s, d, m in rows]
    plot = {"distances": [float(r[3]) for r in rows if r[2]]}
    return Output("spec", GLUE_CSV_HEADER, rows, [Check("SPEC_SUCCESS", rate, ">=", threshold)],
                  plot)


def run_equilibrium(cfg, part):
    fmap = build_map(cfg)
    p = cfg.section("equilibrium")
    restrict = DecompositionParams(p["r"]) if p["restrict"] else None
    mu = equilibrium_measure(fmap, build_potential(cfg, fmap), p["n"], p["delta"], restrict,
                             p["budget"], cfg.get("run", "seed"), nu_index=p["nu_index"])
    disc = mu.discrepancy(4)
    checks = [Check("DISCREPANCY", disc, "<=", cfg.get("thresholds", "discrepancy_max"))]
    return Output("equilibrium", ("x1", "x2", "x3", "weight"), mu.rows(), checks,
                  {"bins": mu.bin_masses(4).tolist()})


def run_bset(cfg, part):
    fmap = build_map(cfg)
    p = cfg.section("bset")
    x = np.array([float(v) for v in p["x"].split()])
    frac = b_set_leaf_fraction(fmap, x, p["length"], p["mesh"])
    return Output("bset", ("x1", "x2", "x3", "length", "fraction"),
                  [(*x.tolist(), p["length"], frac)],
                  [Check("BSET_FRACTION", frac, "<=", cfg.get("thresholds", "bset_max"))])


def run_bowen(cfg, part):
    fmap = build_map(cfg)
    gmap = _target_map(cfg, "bowen", fmap)
    p = cfg.section("bowen")
    seed = cfg.get("run", "seed")
    pot = build_potential(cfg, fmap)
    params = DecompositionParams(p["r"])
    ns = [int(v) for v in p["n_values"]]
    xs = sobol_points(p["segments"], 3, seed)
    rows, worst_ratio, per_n = [], 0.0, {n: 0.0 for n in ns}
    for i, x in enumerate(xs):
        for n in ns:
            seg = OrbitSegment(x, n)
            if not classify_segment(gmap, params, seg).in_g:
                continue
            r = bowen_oscillation(gmap, seg, p["epsilon"], pot, p["probes"], seed, p["C"], p["r"])
            rows.append((i, n, r.oscillation, r.bound, r.probes_inside))
            if r.bound > 0:
                worst_ratio = max(worst_ratio, r.oscillation / r.bound)
            elif r.oscillation > 0:
                worst_ratio = math.inf
            per_n[n] = max(per_n[n], r.oscillation)
    slope = fit_slope(ns, [per_n[n] for n in ns])[0] if len(ns) >= 2 else 0.0
    th = cfg.section("thresholds")
    checks = [Check("BOWEN_RATIO", worst_ratio if rows else math.nan, "<=", th["bowen_ratio_max"]),
              Check("BOWEN_SLOPE", slope, "<=", th["bowen_slope_max"])]
    return Output("bowen", ("segment", "n", "oscillation", "bound", "probes_inside"), rows,
                  checks, {"n": ns, "max_oscillation": [per_n[n] for n in ns]})


def run_nonexpansive(cfg, part):
    fmap = build_map(cfg)
    p = cfg.section("nonexpansive")
    frac = nonexpansive_fraction(fmap, p["epsilon"], p["horizon"], p["samples"],
                                 cfg.get("run", "seed"))
    return Output("nonexpansive", ("epsilon", "horizon", "samples", "fraction"),
                  [(p["epsilon"], p["horizon"], p["samples"], frac)],
                  [Check("NONEXPANSIVE", frac, "<=", cfg.get("thresholds", "nonexpansive_max"))])


def run_sweep(cfg, part):
    theta = float(cfg.get("sweep", "thetas")[part])
    base = build_map(cfg).reference
    fmap = base if theta == 0.0 else ManeMap(base, theta,
                                             r0=cfg.get("map", "r0"),
                                             q=[float(v) for v in cfg.raw("map", "q").split()])
    hu, hs = _entropies(fmap, cfg)
    margin = gap_check(fmap, build_potential(cfg, fmap), hu.value, hs.value)
    b = cfg.section("bset")
    x = np.array([float(v) for v in b["x"].split()])
    frac = b_set_leaf_fraction(fmap, x, b["length"], b["mesh"])
    row = (theta, hu.value, hs.value, frac, margin.forward, margin.inverse)
    gmin = cfg.get("thresholds", "gap_min")
    return Output("sweep", SWEEP_HEADER, [row],
                  [Check(f"GAP_INVERSE[theta={fmt(theta)}]", margin.inverse, ">", gmin)])


SWEEP_HEADER = ("theta", "h_u", "h_s", "bset_fraction", "gap_forward", "gap_inverse")


def combine_sweep(parts):
    rows = [r for p in parts for r in p.rows]
    checks = [c for p in parts for c in p.checks]
    plot = {k: [r[i] for r in rows] for i, k in enumerate(SWEEP_HEADER)}
    return Output("sweep", SWEEP_HEADER, rows, checks, plot)


RUNNERS = {
    "entropy": run_entropy, "pressure": run_pressure, "uentropy": run_uentropy,
    "lyapunov": run_lyapunov, "decompose": run_decompose, "spec": run_spec,
    "gapcheck": run_gapcheck, "equilibrium": run_equilibrium, "bset": run_bset,
    "bowen": run_bowen, "nonexpansive": run_nonexpansive, "sweep": run_sweep,
}
COMBINERS = {"spec": combine_spec, "sweep": combine_sweep}
