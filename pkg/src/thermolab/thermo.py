"""Birkhoff sums, central exponents, the (P, G, S) decomposition by central
Birkhoff averages, the gap condition, Bowen oscillation and empirical
equilibrium measures."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import estimate_splitting, orbit
from .potentials import Central
from .pressure import (FULL, OrbitSegment, build_separated, candidate_stream,
                       pressure_estimate)
from .reduce import exact_sum
from .torus import sobol_points, wrap


def birkhoff(fmap, potential, x, n):
    """Partial sums S_1..S_n of ``potential`` along the orbit of x."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.cumsum(potential(orbit(fmap, x, n)), axis=0)


def central_exponent(fmap, x, n, depth=30):
    """Birkhoff average (1/n) S_n phi^c(x) of phi^c = log ||Df e_c||."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return birkhoff(fmap, Central(fmap, depth=depth), x, n)[-1] / n


@dataclass(frozen=True)
class DecompositionParams:
    r: float = 0.2
    a: float = 0.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be positive")


@dataclass(frozen=True)
class Membership:
    in_p: bool
    in_g: bool

    @property
    def label(self):
        if self.in_p and self.in_g:
            return "PG"
        return "P" if self.in_p else ("G" if self.in_g else "neither")


@dataclass(frozen=True)
class DecompositionResult:
    p_hat: int
    g_hat: int
    s_hat: int = 0


def _center_sums(fmap, seg, center):
    center = Central(fmap) if center is None else center
    return seg.sums(fmap, center)


def classify_segment(fmap, params, seg, center=None):
    """P iff S_n >= -r n; G iff S_j < -r j for every 1 <= j <= n.

    The empty segment (x, 0) belongs to both.  ``center`` overrides the
    central potential (the default is phi^c of ``fmap``).
    """
    if seg.n == 0:
        return Membership(True, True)
    return _membership(_center_sums(fmap, seg, center), params.r)


def _membership(sums, r):
    n = sums.size
    if n == 0:
        return Membership(True, True)
    in_p = bool(sums[-1] >= -r * n)
    in_g = bool(np.all(sums < -r * np.arange(1, n + 1)))
    return Membership(in_p, in_g)


def decompose(fmap, params, seg, center=None):
    """p_hat = largest p <= n with S_p >= -r p (p = 0 always qualifies)."""
    if seg.n == 0:
        return DecompositionResult(0, 0, 0)
    sums = _center_sums(fmap, seg, center)
    ok = np.nonzero(sums >= -params.r * np.arange(1, seg.n + 1))[0]
    p_hat = int(ok[-1]) + 1 if ok.size else 0
    return DecompositionResult(p_hat, seg.n - p_hat, 0)


def decompose_by_scan(fmap, params, seg, center=None):
    """Reference decomposition: classify every prefix (x, p) separately.

    The potential is evaluated once along the orbit; each prefix gets its
    own partial sums.
    """
    center = Central(fmap) if center is None else center
    vals = center(orbit(fmap, seg.x, seg.n)) if seg.n else np.empty(0)
    best = 0
    for p in range(seg.n + 1):
        if _membership(np.cumsum(vals[:p]), params.r).in_p:
            best = p
    return DecompositionResult(best, seg.n - best, 0)


@dataclass(frozen=True)
class GapMargin:
    forward: float
    inverse: float
    oscillation: float


def gap_check(fmap, potential, h_u, h_s):
    """Signed margin h^u - h^s - (sup phi - inf phi), plus the same for f^-1
    (whose unstable and stable entropies are swapped)."""
    sup, inf = potential.sup_inf()
    osc = sup - inf
    return GapMargin(h_u - h_s - osc, h_s - h_u - osc, osc)


@dataclass
class BowenResult:
    oscillation: float
    bound: float
    probes_inside: int


def bowen_bound(holder, epsilon, n, xi, C=2.0, r=0.2):
    """K = C0 (2 delta0)^g sum_{k<n} (C e^{-g r k / 2} + xi^{g (n - k)}), delta0 = 2 eps."""
    c0, gamma = holder
    delta0 = 2.0 * epsilon
    k = np.arange(n)
    terms = C * np.exp(-gamma * r * k / 2.0) + xi ** (gamma * (n - k))
    return c0 * (2.0 * delta0) ** gamma * exact_sum(terms)


def _probe_displacements(fmap, x, n, epsilon, probes, rng):
    """Displacement sequences delta_k (k < n) of probes y in B_n(x, eps).

    Linear maps propagate exactly in eigen-coordinates so that the tiny
    unstable component survives; other maps solve for each probe orbit as a
    boundary value problem (``probe_segment``).
    """
    if fmap.linear:
        vals = fmap.eigenvalues
        vecs = fmap.eigenvectors
        k = np.arange(n)
        growth = np.abs(vals)[None, :] ** k[:, None]            # (n, 3)
        bound = epsilon / (3.0 * np.max(growth, axis=0))         # per direction
        coeff = rng.uniform(-1.0, 1.0, size=(probes, vals.size)) * bound
        powers = vals[None, :] ** k[:, None]                     # signed
        disp = np.einsum("pd,kd,jd->kpj", coeff, powers, vecs)
        return disp
    ox = orbit(fmap, x, n)
    out = []
    for _ in range(probes):
        coeff = rng.uniform(-1.0, 1.0, size=3) * (epsilon / 6.0)
        disp = probe_segment(fmap, ox, coeff)
        out.append(np.full((n, 3), np.inf) if disp is None else disp)
    return np.stack(out, axis=1)


def probe_segment(fmap, ox, coeff, iters=20, tol=1e-14):
    """Displacements d_k along the computed orbit ox (n, 3) such that
    ox_k + d_k is an orbit segment of fmap, with reference stable and center
    coordinates of d_0 and the unstable coordinate of d_{n-1} prescribed by
    ``coeff``.  Solved by Newton on the stacked step equations, which avoids
    the exponential error growth of plain forward iteration.  Returns None
    if Newton fails."""
    n = ox.shape[0]
    ref = np.column_stack(fmap.reference.frame())
    dual = np.linalg.inv(ref)
    base = fmap.lift_forward(ox[:-1])
    d = np.zeros((n, 3))
    for _ in range(iters):
        img = fmap.lift_forward(ox[:-1] + d[:-1]) - base
        res = np.concatenate([(img - d[1:]).ravel(),
                              dual[:2] @ d[0] - coeff[:2],
                              [dual[2] @ d[-1] - coeff[2]]])
        if np.max(np.abs(res)) < tol:
            return d
        jac = np.zeros((3 * n, 3 * n))
        blocks = fmap.jacobian(ox[:-1] + d[:-1])
        for k in range(n - 1):
            jac[3 * k:3 * k + 3, 3 * k:3 * k + 3] = blocks[k]
            jac[3 * k:3 * k + 3, 3 * k + 3:3 * k + 6] = -np.eye(3)
        jac[3 * n - 3:3 * n - 1, 0:3] = dual[:2]
        jac[3 * n - 1, 3 * n - 3:] = dual[2]
        try:
            d = d - np.linalg.solve(jac, res).reshape(n, 3)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(d)) or np.max(np.abs(d)) > 0.5:
            return None
    return None


def bowen_oscillation(fmap, seg, epsilon, potential, probes=64, seed=0, C=2.0, r=0.2):
    """max |Phi_0(x, n) - Phi_0(y, n)| over sampled y in B_n(x, eps), with the
    bound K built from the potential's Holder data and the splitting's xi."""
    x = wrap(np.asarray(seg.x, dtype=float))
    n = seg.n
    rng = np.random.default_rng(seed)
    disp = _probe_displacements(fmap, x, n, epsilon, probes, rng)
    inside = np.max(np.linalg.norm(disp, axis=-1), axis=0) < epsilon
    xi = estimate_splitting(fmap, x).xi
    bound = bowen_bound(potential.holder, epsilon, n, xi, C, r)
    if not inside.any():
        warnings.warn("no probe landed inside the Bowen ball; oscillation reported as 0")
        return BowenResult(0.0, bound, 0)
    ox = orbit(fmap, x, n)
    oy = wrap(ox[:, None, :] + disp[:, inside, :])
    phi_x = exact_sum(potential(ox))
    diffs = [abs(phi_x - exact_sum(col)) for col in np.moveaxis(potential(oy), 1, 0)]
    return BowenResult(max(diffs), bound, int(inside.sum()))


@dataclass
class EmpiricalMeasure:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.points.shape[0] == 0:
            raise ValueError("empirical measure needs at least one atom")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    def integrate(self, fn):
        return exact_sum(self.weights * fn(self.points))

    def total(self):
        return exact_sum(self.weights)

    def push_forward(self, fmap):
        return EmpiricalMeasure(fmap.forward(self.points), self.weights.copy())

    def bin_masses(self, bins=4):
        idx = np.minimum((self.points * bins).astype(np.int64), bins - 1)
        flat = np.ravel_multi_index(idx.T, (bins,) * self.points.shape[1])
        masses = np.zeros(bins ** self.points.shape[1])
        for b in np.unique(flat):
            masses[b] = exact_sum(self.weights[flat == b])
        return masses

    def discrepancy(self, bins=4):
        """max over cells of |mass - 1/bins^d| for the regular bins^d partition."""
        masses = self.bin_masses(bins)
        return float(np.max(np.abs(masses - 1.0 / masses.size)))

    def rows(self):
        return [tuple(p) + (w,) for p, w in zip(self.points.tolist(), self.weights.tolist())]


class EmptySetError(ValueError):
    pass


def p_filter(fmap, params, center=None):
    """Candidate filter keep(points, n) selecting x with (x, n) in P_g."""
    center = Central(fmap) if center is None else center

    def keep(points, n):
        if n == 0:
            return np.ones(points.shape[0], dtype=bool)
        sums = np.sum(center(orbit(fmap, points, n)), axis=0)
        return sums >= -params.r * n

    return keep


def restricted_pressure(fmap, potential, params, delta, n_range, budget, seed, epsilon=0.0):
    """Pressure estimate over candidates in (P_g)_n only; -inf when the
    filtered sets are empty."""
    return pressure_estimate(fmap, potential, delta, epsilon, n_range, budget, seed,
                             candidate_filter=p_filter(fmap, params))


def _nu(fmap, potential, n, delta, restrict, budget, seed, region):
    cand = candidate_stream(region, budget, fmap.dim, seed)
    if restrict is not None:
        cand = cand[p_filter(fmap, restrict)(cand, n)]
    sset = build_separated(fmap, cand, n, delta, cand.shape[0] or 1, seed) if cand.size else None
    if sset is None or len(sset) == 0:
        why = "the P_g filter removed every candidate" if restrict is not None else "no candidates"
        raise EmptySetError(f"empty separated set at n={n}: {why}")
    sums = np.sum(potential(sset.orbits), axis=0)
    logw = sums - np.max(sums)
    w = np.exp(logw)
    return sset, w / exact_sum(w)


def equilibrium_measure(fmap, potential, n, delta, restrict=None, budget=100_000, seed=0,
                        region=FULL, nu_index="n"):
    """mu_n = (1/n) sum_{k<n} f^k_* nu, nu the exp(S_n phi)-weighted normalized
    counting measure on an (n, delta)-separated set.

    ``nu_index="k"`` averages push-forwards f^k_* nu_{k+1} of the measures
    built at each length instead of pushing the single nu_n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pts, wts = [], []
    if nu_index == "n":
        sset, w = _nu(fmap, potential, n, delta, restrict, budget, seed, region)
        for k in range(n):
            pts.append(sset.orbits[k])
            wts.append(w / n)
    elif nu_index == "k":
        for k in range(n):
            sset, w = _nu(fmap, potential, k + 1, delta, restrict, budget, seed, region)
            pts.append(sset.orbits[k])
            wts.append(w / n)
    else:
        raise ValueError("nu_index must be 'n' or 'k'")
    weights = np.concatenate(wts)
    weights = weights / exact_sum(weights)
    return EmpiricalMeasure(np.concatenate(pts), weights)


def random_segments(count, n_lo, n_hi, seed):
    """Seeded segments (x, n) with x quasi-random and n uniform in [n_lo, n_hi]."""
    rng = np.random.default_rng(seed)
    xs = sobol_points(count, 3, seed)
    ns = rng.integers(n_lo, n_hi + 1, size=count)
    return [OrbitSegment(x, int(k)) for x, k in zip(xs, ns)]
