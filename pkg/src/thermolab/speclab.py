"""Center-stable disks, the bracket [x, y] and an empirical gluing search
for orbit segments with negative central averages."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .dynamics import estimate_splitting
from .leafwise import grow_leaf, minimality_radius
from .torus import min_image, torus_distance, wrap


class DiskError(RuntimeError):
    """Sampled disk points failed the exponential decay check."""


class BracketError(RuntimeError):
    """No unique intersection inside the local window."""


class GlueError(RuntimeError):
    def __init__(self, message, block):
        super().__init__(f"block {block}: {message}")
        self.block = block


def _frame(fmap, x):
    if fmap.linear:
        return fmap.frame()
    f = estimate_splitting(fmap, x)
    return f.e_s, f.e_c, f.e_u


@dataclass
class CenterStableDisk:
    base: np.ndarray
    e_s: np.ndarray
    e_c: np.ndarray
    e_u: np.ndarray
    radius: float
    C: float = 2.0
    r: float = 0.2
    horizon: int = 0
    fmap: object = field(default=None, repr=False)

    def point(self, a, b):
        """Disk point over frame coordinates (a, b).

        Linear maps give the affine patch.  Otherwise the affine point is
        shifted along e_u until its unstable coordinate vanishes at time
        ``horizon`` (shooting), which places it on the local center-stable
        graph to working precision.
        """
        y0 = self.base + a * self.e_s + b * self.e_c
        if self.fmap is None or self.fmap.linear or self.horizon == 0:
            return y0
        return _shoot(self.fmap, self.base, y0, self.e_u, self.horizon)


def _unstable_coord(fmap, x, y, n):
    ref = np.column_stack(fmap.reference.frame())
    dual = np.linalg.inv(ref)[2]
    xl, yl = x.copy(), y.copy()
    for _ in range(n):
        xl, yl = fmap.lift_forward(xl), fmap.lift_forward(yl)
    return float(dual @ (yl - xl))


def _shoot(fmap, x, y0, e_u, n, iters=8):
    lam = float(np.abs(fmap.reference.eigenvalues[-1]))
    h = 1e-8
    s = 0.0
    for _ in range(iters):
        val = _unstable_coord(fmap, x, y0 + s * e_u, n)
        slope = (_unstable_coord(fmap, x, y0 + (s + h) * e_u, n) - val) / h
        if not np.isfinite(slope) or abs(slope) < 1.0:
            slope = lam**n
        step = val / slope
        s -= step
        if abs(step) < 1e-15:
            break
    return y0 + s * e_u


def _decay_distances(fmap, disk, coeffs, n):
    """d(f^k x, f^k y) for k = 0..n and each disk point y."""
    if fmap.linear:
        vals = fmap.eigenvalues
        k = np.arange(n + 1)[:, None]
        vs = coeffs[:, 0][None, :] * vals[0] ** k
        vc = coeffs[:, 1][None, :] * vals[1] ** k
        vec = vs[..., None] * disk.e_s + vc[..., None] * disk.e_c
        return np.linalg.norm(vec, axis=-1)
    ys = np.stack([disk.point(a, b) for a, b in coeffs])
    xl = np.broadcast_to(disk.base, ys.shape).copy()
    yl = ys.copy()
    out = [np.linalg.norm(yl - xl, axis=-1)]
    for _ in range(n):
        xl, yl = fmap.lift_forward(xl), fmap.lift_forward(yl)
        out.append(np.linalg.norm(yl - xl, axis=-1))
    return np.array(out)


def build_cs_disk(fmap, seg, R_cs=0.1, C=2.0, r=0.2, samples=32, seed=0):
    """Center-stable disk at seg.x of radius R_cs, checked on ``samples``
    points for d(f^k x, f^k y) <= C e^{-k r / 2} d(x, y), 0 <= k <= n."""
    if not 0 < R_cs <= 0.1:
        raise ValueError("R_cs must lie in (0, 0.1]")
    x = wrap(np.asarray(seg.x, dtype=float))
    e_s, e_c, e_u = _frame(fmap, x)
    disk = CenterStableDisk(x, e_s, e_c, e_u, R_cs, C, r, seg.n, fmap)
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0, 2 * np.pi, samples)
    rad = R_cs * np.sqrt(rng.uniform(0, 1, samples))
    coeffs = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    dist = _decay_distances(fmap, disk, coeffs, seg.n)
    k = np.arange(seg.n + 1)[:, None]
    allowed = C * np.exp(-k * r / 2) * dist[0][None, :]
    if np.any(dist > allowed * (1 + 1e-9) + 1e-15):
        worst = int(np.argmax(np.max(dist / np.maximum(allowed, 1e-300), axis=1)))
        raise DiskError(f"decay violated at k={worst}; segment lacks contraction at this scale")
    return disk


def bracket(fmap, x, y, tolerance=1e-12, window=0.1, mesh=1e-4):
    """[x, y]: intersection of the center-stable plane at x with the local
    unstable curve through y (arclength window ``window`` each way)."""
    x = wrap(np.asarray(x, dtype=float))
    y = wrap(np.asarray(y, dtype=float))
    if torus_distance(x, y) >= window:
        raise BracketError("d(x, y) exceeds the admissibility radius")
    e_s, e_c, _ = _frame(fmap, x)
    normal = np.cross(e_s, e_c)
    normal /= np.linalg.norm(normal)
    yl = x + min_image(y - x)
    leaf = grow_leaf(fmap, y, window, mesh)
    pts = leaf.points + (yl - leaf.points[np.argmin(np.abs(leaf.arclength))])
    h = (pts - x) @ normal
    roots = []
    for i in range(h.size - 1):
        if h[i] == 0.0:
            roots.append(pts[i])
        elif h[i] * h[i + 1] < 0:
            t = h[i] / (h[i] - h[i + 1])
            roots.append(pts[i] + t * (pts[i + 1] - pts[i]))
    if h[-1] == 0.0:
        roots.append(pts[-1])
    if not roots:
        raise BracketError("unstable curve misses the center-stable plane inside the window")
    if len(roots) > 1:
        spread = max(np.linalg.norm(p - roots[0]) for p in roots)
        if spread > mesh:
            raise BracketError(f"{len(roots)} intersections inside the window")
    z = roots[0]
    if abs((z - x) @ normal) > tolerance * max(1.0, np.linalg.norm(z - x)) + 1e-15:
        raise BracketError("root did not converge")
    return wrap(z)


@dataclass
class GluingResult:
    y: np.ndarray
    taus: list
    distances: list
    success: bool
    M_u: int
    epsilon: float
    y_mp: list = field(default=None, repr=False)

    @property
    def max_distance(self):
        return max(self.distances) if self.distances else 0.0

    @property
    def scale_ratio(self):
        """achieved scale / epsilon, the empirical stand-in for 1 + K."""
        return self.max_distance / self.epsilon if self.epsilon else 0.0


@functools.lru_cache(maxsize=32)
def _radius(matrix_key, epsilon, samples, seed):
    from .dynamics import LinearMap
    fmap = LinearMap(np.array(matrix_key))
    return minimality_radius(fmap, epsilon, samples, seed).radius


def minimality_scale(fmap, epsilon, samples=4096, seed=0):
    """(R_u, M_u) with M_u = ceil(log(R_u / eps) / log lambda_u)."""
    key = tuple(map(tuple, fmap.matrix.tolist()))
    R_u = _radius(key, float(epsilon), int(samples), int(seed))
    if R_u is None:
        return None, None
    lam = float(np.abs(fmap.eigenvalues[-1]))
    return R_u, max(1, math.ceil(math.log(R_u / epsilon) / math.log(lam)))


def _mp_frame(fmap):
    """Unit eigenvectors (e_s, e_c, e_u) at the current mp precision."""
    vals, vecs = mpmath.eig(mpmath.matrix(fmap.matrix.tolist()))
    order = sorted(range(len(vals)), key=lambda i: abs(vals[i]))
    out = []
    for i in order:
        v = [mpmath.re(vecs[j, i]) for j in range(fmap.dim)]
        big = max(range(fmap.dim), key=lambda j: abs(v[j]))
        sgn = 1 if v[big] > 0 else -1
        norm = mpmath.sqrt(mpmath.fsum(c * c for c in v))
        out.append([sgn * c / norm for c in v])
    return out


def _mp_apply(matrix, v, times):
    for _ in range(times):
        v = [mpmath.fsum(int(matrix[i][j]) * v[j] for j in range(len(v))) for i in range(len(v))]
    return v


def _mp_mod1(v):
    return [c - mpmath.floor(c) for c in v]


def _nearest_on_line(p, e_u, target, half, step):
    """t in [-half, half] minimising the torus distance from p + t e_u to target."""
    best_t, best_d = 0.0, math.inf
    chunk = 1 << 18
    total = int(math.ceil(2 * half / step)) + 1
    for lo in range(0, total, chunk):
        t = -half + step * np.arange(lo, min(lo + chunk, total))
        d = np.linalg.norm(min_image(p + t[:, None] * e_u - target), axis=1)
        i = int(np.argmin(d))
        if d[i] < best_d:
            best_t, best_d = float(t[i]), float(d[i])
    # exact minimum along the straight line near the best grid point
    off = min_image(target - (p + best_t * e_u))
    t = best_t + float(off @ e_u)
    t = min(max(t, -half), half)
    return t, float(np.linalg.norm(min_image(p + t * e_u - target)))


def glue(fmap, segments, delta, tau_max=None, M_u=None, epsilon=None, samples=4096, seed=0):
    """Orbit y shadowing every segment to within delta in its Bowen metric,
    with the uniform transition time M_u between consecutive blocks.

    Backward induction: from the end of block j, the M_u-th image of the
    unstable epsilon-disk is epsilon-dense, so it has a point y_hat near
    w_{j+1}; the bracket z = [w_{j+1}, y_hat] is pulled back n_j + M_u steps
    to give w_j.  Everything runs in mpmath at a precision covering the
    total orbit length, which only exact integer lifts allow, so the search
    is restricted to linear maps.
    """
    if not fmap.linear:
        raise NotImplementedError("gluing needs exact lifts; only linear maps are supported")
    if not segments:
        raise ValueError("need at least one segment")
    eps = delta / 4.0 if epsilon is None else float(epsilon)
    xs = [wrap(np.asarray(s.x, dtype=float)) for s in segments]
    ns = [int(s.n) for s in segments]
    if len(segments) == 1:
        return GluingResult(xs[0].copy(), [], [0.0], True, 0, eps)
    if M_u is None:
        R_u, M_u = minimality_scale(fmap, eps, samples, seed)
        if R_u is None:
            raise GlueError("minimality search exhausted its radius budget", 0)
    if tau_max is not None and M_u > tau_max:
        raise GlueError(f"M_u={M_u} exceeds tau_max={tau_max}", 0)
    lam_u = float(np.abs(fmap.eigenvalues[-1]))
    expand = max(float(np.max(np.abs(fmap.eigenvalues))), 1.0 / float(np.min(np.abs(fmap.eigenvalues))))
    total = sum(ns) + (len(ns) - 1) * M_u
    fwd = fmap.matrix.tolist()
    bwd = fmap.inverted().matrix.tolist()
    with mpmath.workdps(30 + int(math.ceil(total * math.log10(expand)))):
        e_s, e_c, e_u = _mp_frame(fmap)
        e_u_f = np.array([float(c) for c in e_u])
        basis = mpmath.matrix([[e_s[i], e_c[i], -e_u[i]] for i in range(3)])
        w = [mpmath.mpf(float(c)) for c in xs[-1]]
        half = eps * lam_u**M_u
        for j in range(len(ns) - 2, -1, -1):
            x_mp = [mpmath.mpf(float(c)) for c in xs[j]]
            p = _mp_mod1(_mp_apply(fwd, x_mp, ns[j] + M_u))
            p_f = np.array([float(c) for c in p])
            w_f = np.array([float(c) for c in w])
            t, d = _nearest_on_line(p_f, e_u_f, w_f, half, eps / 4)
            if d >= eps:
                raise GlueError(f"no point of the unstable disk within {eps:g} of the next block", j)
            y_hat = [p[i] + mpmath.mpf(t) * e_u[i] for i in range(3)]
            w_l = [w[i] + mpmath.nint(y_hat[i] - w[i]) for i in range(3)]
            rhs = mpmath.matrix([y_hat[i] - w_l[i] for i in range(3)])
            a, b, s = mpmath.lu_solve(basis, rhs)
            if max(abs(a), abs(b)) > 0.1 or abs(s) > 0.1:
                raise GlueError("bracket left the local window", j)
            z = [y_hat[i] + s * e_u[i] for i in range(3)]
            w = _mp_mod1(_mp_apply(bwd, z, ns[j] + M_u))
        y_mp = w
        dists = shadowing_distances(fmap.matrix, y_mp, xs, ns, M_u)
    y = np.array([float(c) for c in y_mp]) % 1.0
    taus = [M_u] * (len(ns) - 1)
    return GluingResult(y, taus, dists, all(d < delta for d in dists), M_u, eps, y_mp)


def shadowing_distances(matrix, y, xs, ns, tau):
    """Independent check of d_{n_j}(g^{s_j} y, x_j), s_j = sum_{i<j}(n_i + tau).

    Iterates exact integer matrix products at the ambient mp precision and
    measures plain torus distances; nothing is shared with the search.
    """
    rows = [[mpmath.mpf(int(v)) for v in row] for row in np.asarray(matrix).tolist()]

    def step(v):
        return [sum((rows[i][k] * v[k] for k in range(3)), mpmath.mpf(0)) for i in range(3)]

    def dist(u, v):
        diff = [u[i] - v[i] for i in range(3)]
        diff = [c - mpmath.nint(c) for c in diff]
        return float(mpmath.sqrt(sum(c * c for c in diff)))

    out = []
    cur = [mpmath.mpf(c) for c in y]
    for j, (x, n) in enumerate(zip(xs, ns)):
        xv = [mpmath.mpf(float(c)) for c in x]
        worst = 0.0
        for _ in range(n):
            worst = max(worst, dist(cur, xv))
            cur, xv = step(cur), step(xv)
        out.append(worst)
        if j < len(ns) - 1:
            for _ in range(tau):
                cur = step(cur)
    return out


GLUE_CSV_HEADER = ("tuple_id", "blocks", "success", "max_block_distance", "M_u")
