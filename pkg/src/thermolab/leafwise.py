"""Unstable leaves as polylines in the universal cover, leaf volume growth,
epsilon-density of leaves and the leaf fraction of the low-volume set B(f).

dim E^u = 1 for every supported map, so leaf volume is arclength.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .dynamics import line_angle, splitting_fields
from .pressure import fit_slope
from .reduce import exact_sum
from .torus import DIAMETER_T3, grid_points, sobol_points, wrap


class LeafError(RuntimeError):
    """Leaf tangent left the unstable cone during growth."""


@dataclass
class LeafDisk:
    base: np.ndarray
    points: np.ndarray       # lift coordinates, ordered along the leaf
    arclength: np.ndarray    # signed arclength tag, 0 at the base point
    mesh: float
    kind: str = "unstable"

    @property
    def length(self):
        return float(self.arclength[-1] - self.arclength[0])

    def gaps(self):
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    def weights(self):
        """Arclength carried by each vertex (half of each adjacent gap)."""
        g = self.gaps()
        w = np.zeros(self.points.shape[0])
        w[:-1] += g / 2
        w[1:] += g / 2
        return w


def _image_refined(fmap, pts, mesh, max_points=None):
    """Map a lifted polyline forward, inserting domain points until every
    image gap is at most ``mesh``."""
    img = fmap.lift_forward(pts)
    for _ in range(60):
        gaps = np.linalg.norm(np.diff(img, axis=0), axis=1)
        extra = np.ceil(gaps / mesh).astype(np.int64) - 1
        if not np.any(extra > 0):
            return pts, img
        total = pts.shape[0] + int(extra.sum())
        if max_points is not None and total > max_points:
            raise MemoryError(f"polyline would need {total} points")
        idx = np.nonzero(extra > 0)[0]
        counts = extra[idx]
        seg = np.repeat(idx, counts)
        # fractional positions within each refined segment
        start = np.repeat(np.cumsum(counts) - counts, counts)
        j = np.arange(seg.size) - start + 1
        frac = j / np.repeat(counts + 1, counts)
        new = pts[seg] + frac[:, None] * (pts[seg + 1] - pts[seg])
        new_img = fmap.lift_forward(new)
        order = np.argsort(np.concatenate([np.arange(pts.shape[0], dtype=float),
                                           seg + frac]), kind="stable")
        pts = np.concatenate([pts, new])[order]
        img = np.concatenate([img, new_img])[order]
    raise LeafError("re-meshing did not converge")


def _arclength(pts):
    gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(gaps)])


def _trim(pts, arc, lo, hi, snap=1e-9):
    """Restrict a polyline to arclength window [lo, hi] with interpolated ends.

    Ends within ``snap`` (in vertex-index units) of a vertex reuse that
    vertex, so no rounding-sized segment is created.
    """
    ends = np.interp([lo, hi], arc, np.arange(arc.size))
    near = np.abs(ends - np.round(ends)) < snap
    ends[near] = np.round(ends[near])
    i0, i1 = int(np.ceil(ends[0])), int(np.floor(ends[1]))
    def at(t):
        k = min(int(np.floor(t)), arc.size - 2)
        f = t - k
        return pts[k] + f * (pts[k + 1] - pts[k])
    body = pts[i0:i1 + 1]
    out = [at(ends[0])[None, :]] if ends[0] < i0 else []
    out.append(body)
    if ends[1] > i1:
        out.append(at(ends[1])[None, :])
    return np.concatenate(out)


def _pullback_steps(fmap, radius):
    if fmap.linear:
        return 0
    lam = float(np.abs(fmap.reference.eigenvalues[-1]))
    # keep the seed segment above ~1e-7 so lifts stay well resolved
    return int(max(0, min(12, math.floor(math.log(max(radius, 1e-12) / 1e-7) / math.log(lam)))))


def grow_leaf(fmap, x, radius, mesh, steps=None, aperture=0.5):
    """Local unstable curve through x of arclength radius ``radius`` each way.

    The curve is the forward image of a short segment along the reference
    unstable eigendirection placed at f^-k(x); images converge to the
    unstable leaf at the domination rate.  Linear maps use k = 0 (exact).
    """
    if radius < 0 or mesh <= 0:
        raise ValueError("radius must be >= 0 and mesh > 0")
    x = wrap(np.asarray(x, dtype=float))
    if radius == 0:
        return LeafDisk(x, x[None, :].copy(), np.zeros(1), mesh)
    e_u = fmap.reference.frame()[2]
    k = _pullback_steps(fmap, radius) if steps is None else steps
    start = x.copy()
    for _ in range(k):
        start = fmap.inverse(start)
    lam = float(np.abs(fmap.reference.eigenvalues[-1]))
    half = 2.0 * radius / lam**k if k else 1.01 * radius
    pieces = max(2, int(math.ceil(2 * half / mesh)))
    pieces += pieces % 2
    t = np.linspace(-half, half, pieces + 1)
    pts = start + t[:, None] * e_u
    centre = pieces // 2
    for _ in range(k):
        anchor = pts[centre].copy()
        pts, img = _image_refined(fmap, pts, mesh)
        centre = int(np.argmin(np.linalg.norm(pts - anchor, axis=1)))
        pts = img
    # the centre vertex is f^k(f^-k x); re-anchor the lift at x exactly
    pts = pts + (x - pts[centre])
    arc = _arclength(pts)
    arc = arc - arc[centre]
    if arc[0] > -radius or arc[-1] < radius:
        raise LeafError("seed segment too short for the requested radius")
    pts = _trim(pts, arc, -radius, radius)
    arc = _arclength(pts)
    centre = int(np.argmin(np.linalg.norm(pts - x, axis=1)))
    arc = arc - arc[centre]
    tangents = np.diff(pts, axis=0)
    ref = np.column_stack(fmap.reference.frame())
    coords = tangents @ np.linalg.inv(ref).T
    spread = np.linalg.norm(coords[:, :2], axis=1) / np.abs(coords[:, 2])
    if np.any(spread > aperture):
        raise LeafError(f"leaf tangent left the unstable cone (aperture {spread.max():.3g})")
    return LeafDisk(x, pts, arc, mesh)


@dataclass
class EntropyRun:
    value: float
    n_values: tuple
    log_length: tuple
    intercept: float
    residual: float
    truncated: bool = False

    def rows(self):
        return list(zip(self.n_values, self.log_length))


def leaf_lengths(fmap, x, n_max, delta=1e-4, mesh=1e-3, max_points=4_000_000):
    """Arclength of f^n(D) for n = 0..n_max, D the unstable disk of radius delta.

    Returns (lengths, truncated); lengths stops early if the polyline would
    exceed ``max_points``.
    """
    leaf = grow_leaf(fmap, x, delta, mesh)
    pts = leaf.points
    lengths = [exact_sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
    for _ in range(n_max):
        try:
            _, pts = _image_refined(fmap, pts, mesh, max_points)
        except MemoryError:
            return lengths, True
        lengths.append(exact_sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
    return lengths, False


def unstable_entropy(fmap, x=None, n_range=range(1, 11), seed=0, delta=1e-4, mesh=1e-3,
                     max_points=4_000_000):
    """Growth rate of unstable leaf length: slope of log length(f^n D) vs n.

    The stable entropy of f is this quantity for ``fmap.inverted()``.
    """
    n_range = tuple(int(n) for n in n_range)
    if len(n_range) < 4:
        raise ValueError("n_range must span at least 4 values")
    if x is None:
        x = sobol_points(1, 3, seed)[0]
    lengths, truncated = leaf_lengths(fmap, x, max(n_range), delta, mesh, max_points)
    ns = tuple(n for n in n_range if n < len(lengths))
    logs = tuple(math.log(lengths[n]) for n in ns)
    if len(ns) < 2:
        return EntropyRun(math.nan, ns, logs, math.nan, math.nan, True)
    slope, intercept, resid = fit_slope(ns, logs)
    return EntropyRun(slope, ns, logs, intercept, resid, truncated)


@dataclass
class MinimalityRun:
    radius: float | None
    history: list           # (R, covered_fraction)

    @property
    def found(self):
        return self.radius is not None


def minimality_radius(fmap, epsilon, samples, seed, initial=0.25, max_doublings=14,
                      max_points=2_000_000):
    """Smallest R on a doubling schedule whose leaf disk is epsilon-dense
    against a grid of ``samples`` points; ``radius`` is None if the point
    budget runs out first."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    grid = grid_points(samples, 3)
    x = sobol_points(1, 3, seed)[0]
    history = []
    if epsilon > DIAMETER_T3:
        history.append((initial, 1.0))
        return MinimalityRun(initial, history)
    mesh = min(epsilon / 4, 0.05)
    radius = initial
    for _ in range(max_doublings + 1):
        if 2 * radius / mesh > max_points:
            break
        leaf = grow_leaf(fmap, x, radius, mesh)
        tree = cKDTree(wrap(leaf.points), boxsize=1.0)
        # vertex distance overestimates curve distance, so this is conservative
        dist, _ = tree.query(grid, k=1)
        covered = float(np.mean(dist < epsilon))
        history.append((radius, covered))
        if covered == 1.0:
            return MinimalityRun(radius, history)
        radius *= 2
    return MinimalityRun(None, history)


def cu_determinant(fmap, pts, depth=20):
    """|det Df restricted to the center-unstable plane| at each point."""
    pts = wrap(np.asarray(pts, dtype=float))
    if fmap.linear:
        _, e_c, e_u = fmap.frame()
        e_c = np.broadcast_to(e_c, pts.shape)
        e_u = np.broadcast_to(e_u, pts.shape)
    else:
        _, e_c, e_u = splitting_fields(fmap, pts, depth)
    basis = np.linalg.qr(np.stack([e_c, e_u], axis=-1))[0]
    img = fmap.jacobian(pts) @ basis
    gram = np.swapaxes(img, -1, -2) @ img
    return np.sqrt(np.linalg.det(gram))


def b_set_leaf_fraction(fmap, x, length, mesh, rel_tol=1e-9):
    """Arclength fraction of an unstable leaf segment lying in
    B(f) = {|det Df|_{E^cu}| <= lambda_u of the linear reference}."""
    if length <= 0:
        raise ValueError("length must be positive")
    leaf = grow_leaf(fmap, x, length / 2, mesh)
    det = cu_determinant(fmap, leaf.points)
    lam_u = float(np.abs(fmap.reference.eigenvalues[-1]))
    inside = det <= lam_u * (1 + rel_tol)
    w = leaf.weights()
    return exact_sum(w[inside]) / exact_sum(w)


def quasi_isometry_constant(fmap, leaves=8, length=20.0, mesh=0.01, pairs=2000, seed=0):
    """Smallest Q with d_leaf <= Q d_R3 + Q over sampled same-leaf pairs (lifts)."""
    rng = np.random.default_rng(seed)
    worst = 1.0
    for x in sobol_points(leaves, 3, seed):
        leaf = grow_leaf(fmap, x, length / 2, mesh)
        i = rng.integers(0, leaf.points.shape[0], pairs)
        j = rng.integers(0, leaf.points.shape[0], pairs)
        d_leaf = np.abs(leaf.arclength[i] - leaf.arclength[j])
        d_amb = np.linalg.norm(leaf.points[i] - leaf.points[j], axis=1)
        worst = max(worst, float(np.max(d_leaf / (d_amb + 1.0))))
    return worst


def max_tangent_angle(fmap, leaf):
    """Largest angle between leaf tangents and the reference unstable direction."""
    e_u = fmap.reference.frame()[2]
    tangents = np.diff(leaf.points, axis=0)
    return float(np.max(line_angle(tangents, np.broadcast_to(e_u, tangents.shape)), initial=0.0))
