"""Bowen metrics, separated sets, partition functions and pressure at scale."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .dynamics import apply, orbit, splitting_fields
from .potentials import Constant
from .reduce import logsumexp
from .torus import DIAMETER_T3, sobol_points, min_image, torus_distance, wrap


def bowen_distance(fmap, x, y, n):
    """d_n(x, y) = max_{0<=k<n} d(f^k x, f^k y); vectorized over rows."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ox = orbit(fmap, x, n)
    oy = orbit(fmap, y, n)
    return np.max(torus_distance(ox, oy), axis=0)


@dataclass(frozen=True)
class Box:
    """Axis-aligned candidate box of side ``side`` centred at ``center``."""

    center: tuple
    side: float

    def sample(self, count, dim, seed):
        u = sobol_points(count, dim, seed)
        return wrap(np.asarray(self.center, dtype=float) + self.side * (u - 0.5))


@dataclass(frozen=True)
class EigenBox:
    """Box aligned with the eigenvectors of the linear reference, with a guard
    band along expanding directions.

    Candidates are drawn from the box widened on each side by the width of
    the Bowen ball, delta / rate^(n-1), along every expanding eigendirection.
    Accepted guard points block their neighbours but are not counted, which
    removes the boundary excess of a bare box.
    """

    center: tuple
    extents: tuple

    def sample(self, fmap, count, n, delta, seed):
        ref = fmap.reference
        rates = np.abs(ref.eigenvalues)
        ext = np.asarray(self.extents, dtype=float)
        guard = np.where(rates > 1.0, delta / rates ** max(n - 1, 0), 0.0)
        u = sobol_points(count, fmap.dim, seed)
        coords = (u - 0.5) * (ext + 2.0 * guard)
        pts = wrap(np.asarray(self.center) + coords @ ref.eigenvectors.T)
        inner = np.all(np.abs(coords) <= ext / 2.0, axis=1)
        return pts, inner


FULL = "full"


def candidate_stream(region, count, dim, seed):
    if isinstance(region, str):
        if region != FULL:
            raise ValueError(f"unknown region {region!r}")
        return sobol_points(count, dim, seed)
    if isinstance(region, Box):
        return region.sample(count, dim, seed)
    pts = np.asarray(region, dtype=float)
    if pts.size == 0:
        return np.empty((0, dim))
    return wrap(pts.reshape(-1, dim)[:count])


@dataclass
class OrbitSegment:
    """Orbit segment (x, n) with cached Birkhoff partial sums."""

    x: np.ndarray
    n: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def sums(self, fmap, potential):
        """S_1..S_n of ``potential`` along the segment (S_0 = 0 omitted)."""
        key = (id(fmap), id(potential))
        if key not in self._cache:
            if self.n == 0:
                sums = np.empty(0)
            else:
                sums = np.cumsum(potential(orbit(fmap, self.x, self.n)))
            # holding the objects keeps their ids from being reused
            self._cache[key] = (fmap, potential, sums)
        return self._cache[key][2]


@dataclass
class SeparatedSet:
    """Accepted points (counted) plus uncounted guard points; the union is
    (n, delta)-separated."""

    points: np.ndarray
    n: int
    delta: float
    fmap: object = field(repr=False, default=None)
    orbits: np.ndarray = field(repr=False, default=None)
    candidates: int = 0
    guard_points: np.ndarray = field(repr=False, default=None)

    def __len__(self):
        return int(self.points.shape[0])


def build_separated(fmap, region, n, delta, budget, seed, candidate_filter=None):
    """Greedy (n, delta)-separated set over a seeded candidate stream.

    Candidates are accepted in stream order when their d_n distance to every
    previously accepted point exceeds ``delta``; the result is therefore
    maximal within the stream and deterministic in ``seed``.
    ``candidate_filter(points, n)`` returns a mask of candidates to keep.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    dim = fmap.dim
    if isinstance(region, EigenBox):
        cand, inner = region.sample(fmap, budget, n, delta, seed)
    else:
        cand = candidate_stream(region, budget, dim, seed)
        inner = np.ones(cand.shape[0], dtype=bool)
    if candidate_filter is not None and cand.shape[0]:
        mask = np.asarray(candidate_filter(cand, n), dtype=bool)
        cand, inner = cand[mask], inner[mask]
    if cand.shape[0] == 0:
        empty = np.empty((0, dim))
        return SeparatedSet(empty, n, delta, fmap, np.empty((n, 0, dim)), 0, empty)
    orb = orbit(fmap, cand, n)
    keep = _greedy(orb, delta)
    counted = keep[inner[keep]]
    guard = keep[~inner[keep]]
    return SeparatedSet(cand[counted], n, delta, fmap, orb[:, counted, :], cand.shape[0],
                        cand[guard])


def _conflicts(orb, a, b, delta):
    """Mask of pairs (a[i], b[i]) with d_n <= delta, evaluated in chunks."""
    hit = np.zeros(a.size, dtype=bool)
    for lo in range(0, a.size, 100_000):
        sl = slice(lo, lo + 100_000)
        diff = min_image(orb[:, a[sl], :] - orb[:, b[sl], :])
        hit[sl] = np.max(np.sum(diff * diff, axis=-1), axis=0) <= delta * delta
    return hit


def _greedy(orb, delta, block=2048):
    """Indices accepted by the greedy pass over candidate orbits (n, C, d).

    Candidate i is kept iff no kept j < i has d_n(i, j) <= delta.  Neighbours
    are pre-screened on (first, last) iterates with periodic trees in the max
    norm and confirmed on the full orbit.  Candidates are handled in blocks:
    first against everything kept so far, then among the block's survivors.
    """
    count = orb.shape[1]
    if delta >= DIAMETER_T3 * 2 or count == 1:
        return np.arange(min(count, 1))
    ends = np.concatenate([orb[0], orb[-1]], axis=1) % 1.0
    ends[ends >= 1.0] = 0.0
    kept = np.empty(0, dtype=np.int64)
    for lo in range(0, count, block):
        idx = np.arange(lo, min(lo + block, count))
        if kept.size:
            tree = cKDTree(ends[kept], boxsize=1.0)
            near = tree.query_ball_point(ends[idx], delta, p=np.inf, return_sorted=False)
            sizes = np.fromiter((len(v) for v in near), dtype=np.int64, count=idx.size)
            if sizes.sum():
                cand = np.repeat(idx, sizes)
                other = kept[np.concatenate([np.asarray(v, dtype=np.int64) for v in near])]
                hit = _conflicts(orb, cand, other, delta)
                blocked = np.zeros(count, dtype=bool)
                blocked[cand[hit]] = True
                idx = idx[~blocked[idx]]
        if idx.size > 1:
            pairs = cKDTree(ends[idx], boxsize=1.0).query_pairs(delta, p=np.inf,
                                                                output_type="ndarray")
            if pairs.size:
                pairs = idx[np.sort(pairs, axis=1)]
                pairs = pairs[_conflicts(orb, pairs[:, 0], pairs[:, 1], delta)]
                # by later index, so keep[a] is final when (a, b) is seen
                pairs = pairs[np.lexsort((pairs[:, 0], pairs[:, 1]))]
                drop = set()
                for a, b in pairs.tolist():
                    if b not in drop and a not in drop:
                        drop.add(b)
                idx = idx[~np.isin(idx, list(drop))]
        kept = np.concatenate([kept, idx])
    return kept


def _directions(count, dim, seed):
    rng = np.random.default_rng([seed, 97])
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sup_birkhoff(fmap, potential, points, n, epsilon, seed=0, directions=32, levels=16,
                 chunk=256):
    """Sampled Phi_eps(x, n) = sup of S_n phi over the Bowen ball B_n(x, eps).

    Each point probes a fixed pool of ``directions`` x ``levels`` offsets
    r_j u_i (r_j = 2^-j).  The pool does not depend on ``epsilon``, so the
    admissible subset, and hence the estimate, is monotone in ``epsilon``.
    The point itself is always included.
    """
    points = np.asarray(points, dtype=float)
    base = np.sum(potential(orbit(fmap, points, n)), axis=0)
    if epsilon <= 0 or points.shape[0] == 0:
        return base
    dim = points.shape[1]
    dirs = _directions(directions, dim, seed)
    radii = 2.0 ** -np.arange(1, levels + 1)
    offsets = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, dim)
    best = base.copy()
    for start in range(0, points.shape[0], chunk):
        pts = points[start:start + chunk]
        probes = wrap(pts[:, None, :] + offsets[None, :, :]).reshape(-1, dim)
        ox = orbit(fmap, np.repeat(pts, offsets.shape[0], axis=0), n)
        oy = orbit(fmap, probes, n)
        dn = np.max(torus_distance(ox, oy), axis=0)
        sums = np.sum(potential(oy), axis=0)
        sums = np.where(dn < epsilon, sums, -np.inf).reshape(pts.shape[0], -1)
        best[start:start + chunk] = np.maximum(best[start:start + chunk], np.max(sums, axis=1))
    return best


def partition_function(sset, potential, epsilon=0.0, seed=0):
    """log Lambda = log sum_{x in set} exp(Phi_eps(x, n)); -inf for an empty set."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if len(sset) == 0:
        return -math.inf
    if epsilon == 0:
        sums = np.sum(potential(sset.orbits), axis=0)
    else:
        sums = sup_birkhoff(sset.fmap, potential, sset.points, sset.n, epsilon, seed)
    return logsumexp(sums)


def fit_slope(xs, ys):
    """Least-squares line through (xs, ys): (slope, intercept, rms residual)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    xm = math.fsum(xs.tolist()) / xs.size
    ym = math.fsum(ys.tolist()) / ys.size
    dx = xs - xm
    slope = math.fsum((dx * (ys - ym)).tolist()) / math.fsum((dx * dx).tolist())
    intercept = ym - slope * xm
    resid = ys - (intercept + slope * xs)
    return slope, intercept, math.sqrt(math.fsum((resid * resid).tolist()) / xs.size)


@dataclass
class PressureEstimate:
    value: float
    n_range: tuple
    delta: float
    epsilon: float
    slope: float
    intercept: float
    residual: float
    log_lambda: tuple
    sizes: tuple
    seed: int = 0
    converged: bool = True

    def rows(self):
        """CSV rows (n, log_lambda, set_size, delta, epsilon, seed)."""
        return [(n, ll, sz, self.delta, self.epsilon, self.seed)
                for n, ll, sz in zip(self.n_range, self.log_lambda, self.sizes)]


PRESSURE_CSV_HEADER = ("n", "log_lambda", "set_size", "delta", "epsilon", "seed")


def default_region(fmap, delta, budget, n_min, n_max, seed=0, packing=0.8):
    """Guarded eigen-box sized for the budget.

    Extents along expanding directions are balanced at ``n_min`` (each spans
    the same number of Bowen-ball widths) and scaled so the expected count
    at ``n_max`` is a tenth of ``budget``; other directions get delta/4.
    Falls back to the full torus when nothing expands.
    """
    rates = np.abs(fmap.reference.eigenvalues)
    expanding = rates > 1.0
    k = int(np.count_nonzero(expanding))
    if k == 0:
        return FULL
    logr = np.log(rates[expanding])
    target = 0.1 * budget / packing
    logc = (math.log(target) + k * math.log(delta) - float(np.sum(logr)) * (n_max - n_min)) / k
    extents = np.full(rates.size, delta / 4.0)
    extents[expanding] = np.minimum(np.exp(logc - logr * (n_min - 1)), 0.5)
    center = tuple(float(v) for v in sobol_points(2, fmap.dim, seed + 1)[1])
    return EigenBox(center, tuple(float(v) for v in extents))


def pressure_estimate(fmap, potential, delta, epsilon, n_range, budget, seed,
                      region=None, residual_threshold=0.15, candidate_filter=None):
    """Slope of log Lambda_n against n over ``n_range`` (least squares)."""
    n_range = tuple(int(n) for n in n_range)
    if len(n_range) < 4 or any(b - a != 1 for a, b in zip(n_range, n_range[1:])):
        raise ValueError("n_range must span at least 4 consecutive values")
    if region is None:
        region = default_region(fmap, delta, budget, min(n_range), max(n_range), seed)
    logs, sizes = [], []
    for n in n_range:
        sset = build_separated(fmap, region, n, delta, budget, seed, candidate_filter)
        logs.append(partition_function(sset, potential, epsilon, seed))
        sizes.append(len(sset))
    if not all(math.isfinite(v) for v in logs):
        return PressureEstimate(-math.inf, n_range, delta, epsilon, -math.inf, -math.inf,
                                math.nan, tuple(logs), tuple(sizes), seed, False)
    slope, intercept, resid = fit_slope(n_range, logs)
    return PressureEstimate(slope, n_range, delta, epsilon, slope, intercept, resid,
                            tuple(logs), tuple(sizes), seed, resid <= residual_threshold)


def entropy_estimate(fmap, delta, n_range, budget, seed, region=None):
    return pressure_estimate(fmap, Constant(0.0), delta, 0.0, n_range, budget, seed, region)


def nonexpansive_fraction(fmap, epsilon, horizon, samples, seed, tries=16, depth=30):
    """Fraction of sampled x with a companion y, d(x, y) in (eps/10, eps), whose
    orbit stays eps-close for |k| <= horizon; companions are searched along
    the estimated center direction.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    x = sobol_points(samples, 3, seed)
    if fmap.linear:
        e_c = np.broadcast_to(fmap.frame()[1], x.shape)
    else:
        e_c = splitting_fields(fmap, x, depth)[1]
    t = epsilon * (0.1 + 0.9 * (np.arange(1, tries + 1) / (tries + 1)))
    t = np.concatenate([t, -t])
    y = wrap(x[:, None, :] + t[None, :, None] * e_c[:, None, :])
    xr = np.repeat(x[:, None, :], t.size, axis=1)
    d0 = torus_distance(xr, y)
    ok = (d0 > epsilon / 10) & (d0 < epsilon)
    fx, fy = xr, y
    bx, by = xr, y
    for _ in range(horizon):
        fx, fy = fmap.forward(fx), fmap.forward(fy)
        bx, by = fmap.inverse(bx), fmap.inverse(by)
        ok &= (torus_distance(fx, fy) < epsilon) & (torus_distance(bx, by) < epsilon)
        if not ok.any():
            break
    return float(np.count_nonzero(ok.any(axis=1))) / samples


__all__ = [
    "Box", "EigenBox", "FULL", "OrbitSegment", "PressureEstimate", "SeparatedSet", "apply",
    "bowen_distance", "build_separated", "default_region", "entropy_estimate",
    "fit_slope", "nonexpansive_fraction", "partition_function", "pressure_estimate",
    "sup_birkhoff",
]
