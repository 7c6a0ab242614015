"""Map families on the torus, their derivative cocycle and the estimated
partially hyperbolic splitting.

Two families are supported: linear unimodular automorphisms (any dimension,
three-dimensional for everything splitting related) and a localized
Mane-type perturbation of a linear automorphism of T^3 along its center
eigendirection.  All point arguments are arrays of shape ``(d,)`` or
``(N, d)``; every map method is vectorized over the leading axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .torus import sobol_points, min_image, wrap

A0 = ((2, 1, 0), (1, 2, 1), (0, 1, 1))
CAT2 = ((2, 1), (1, 1))

_GENERIC = np.array([0.5366, 0.6113, 0.5817])


class MapError(ValueError):
    """Invalid map specification (bad matrix, inadmissible perturbation)."""


class InverseError(RuntimeError):
    """Newton inversion of a perturbed map did not converge."""


class SplittingError(RuntimeError):
    """The estimated splitting is degenerate or not dominated."""


def _as_points(x):
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x, x.ndim == 1


def _unit(v, axis=-1):
    return v / np.linalg.norm(v, axis=axis, keepdims=True)


def bump(t):
    """Smooth profile exp(1 - 1/(1 - t^2)) on |t| < 1, zero elsewhere."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    safe = np.where(inside, t, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe * safe)), 0.0)


def bump_derivative(t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    safe = np.where(inside, t, 0.0)
    one_minus = 1.0 - safe * safe
    val = np.exp(1.0 - 1.0 / one_minus) * (-2.0 * safe / one_minus**2)
    return np.where(inside, val, 0.0)


class MapModel:
    """Common interface; subclasses provide forward/inverse/jacobian."""

    dim = 3
    linear = False

    def forward(self, x):
        raise NotImplementedError

    def inverse(self, x):
        raise NotImplementedError

    def jacobian(self, x):
        raise NotImplementedError

    def lift_forward(self, xl):
        """Image of lifted points in R^d (continuous lift of the map)."""
        raise NotImplementedError

    def inverse_jacobian(self, x):
        """Derivative of the inverse map at ``x`` (= Df(f^-1 x)^-1)."""
        return np.linalg.inv(self.jacobian(self.inverse(x)))

    def inverted(self):
        raise NotImplementedError

    @property
    def reference(self):
        """Linear part used for reference frames and thresholds."""
        raise NotImplementedError

    def to_params(self):
        raise NotImplementedError


class LinearMap(MapModel):
    """Toral automorphism x -> M x mod 1 for an integer matrix M."""

    linear = True

    def __init__(self, matrix):
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise MapError("matrix must be square")
        if not np.all(np.equal(np.round(m), m)):
            raise MapError("matrix must have integer entries")
        self.matrix = np.array(np.round(m), dtype=np.int64)
        self.dim = self.matrix.shape[0]
        det = int(round(np.linalg.det(self.matrix)))
        if abs(det) != 1:
            raise MapError(f"|det| must be 1, got {det}")
        self.det = det
        self._fmatrix = self.matrix.astype(float)
        self._finv = np.round(np.linalg.inv(self._fmatrix))
        vals, vecs = np.linalg.eig(self._fmatrix)
        if np.max(np.abs(vals.imag)) > 1e-12:
            raise MapError("matrix has non-real eigenvalues")
        vals = vals.real
        vecs = vecs.real
        order = np.argsort(np.abs(vals), kind="stable")
        self.eigenvalues = vals[order]
        vecs = vecs[:, order]
        # fix orientation: largest component positive
        for j in range(vecs.shape[1]):
            k = np.argmax(np.abs(vecs[:, j]))
            if vecs[k, j] < 0:
                vecs[:, j] = -vecs[:, j]
        self.eigenvectors = _unit(vecs, axis=0)

    def __repr__(self):
        rows = "; ".join(" ".join(str(v) for v in row) for row in self.matrix)
        return f"LinearMap([{rows}])"

    @property
    def rates(self):
        return np.abs(self.eigenvalues)

    @property
    def reference(self):
        return self

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        return wrap(x @ self._fmatrix.T)

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        return wrap(x @ self._finv.T)

    def lift_forward(self, xl):
        return np.asarray(xl, dtype=float) @ self._fmatrix.T

    def lift_inverse(self, xl):
        return np.asarray(xl, dtype=float) @ self._finv.T

    def jacobian(self, x):
        x, single = _as_points(x)
        out = np.broadcast_to(self._fmatrix, (x.shape[0], self.dim, self.dim)).copy()
        return out[0] if single else out

    def inverse_jacobian(self, x):
        x, single = _as_points(x)
        out = np.broadcast_to(self._finv, (x.shape[0], self.dim, self.dim)).copy()
        return out[0] if single else out

    def inverted(self):
        return LinearMap(self._finv.astype(np.int64))

    def lift_forward_mp(self, xl):
        """Exact-arithmetic image of an mpmath vector (list of mpf)."""
        return [mpmath.fsum(int(self.matrix[i, j]) * xl[j] for j in range(self.dim))
                for i in range(self.dim)]

    def frame(self):
        """(e_s, e_c, e_u) eigenvectors of a 3x3 hyperbolic matrix."""
        if self.dim != 3:
            raise MapError("splitting frames need a 3x3 matrix")
        return self.eigenvectors[:, 0], self.eigenvectors[:, 1], self.eigenvectors[:, 2]

    def is_da_base(self, tol=1e-12):
        """True when the spectrum satisfies 0 < ls < 1 < lc < lu (with signs)."""
        if self.dim != 3:
            return False
        ls, lc, lu = self.eigenvalues
        if min(ls, lc, lu) <= 0:
            return False
        if not (0 < ls < 1 - tol and 1 + tol < lc < lu - tol):
            return False
        residual = np.linalg.norm(self._fmatrix @ self.eigenvectors
                                  - self.eigenvectors * self.eigenvalues)
        return residual < 1e-10

    def to_params(self):
        return {
            "kind": "linear",
            "matrix": "; ".join(" ".join(str(int(v)) for v in row) for row in self.matrix),
        }


class ManeMap(MapModel):
    """Localized perturbation of a linear map of T^3 along its center direction.

    f(x) = A x + theta * rho(d(x, q)/r0) * sin(2 pi s(x)) * v_c  (mod 1),
    where s(x) is the v_c-coordinate of the shortest lift of x - q.
    """

    def __init__(self, base, theta, r0=0.2, q=(0.0, 0.0, 0.0), check=True,
                 aperture=0.5, check_samples=512, check_seed=7):
        if not isinstance(base, LinearMap) or base.dim != 3:
            raise MapError("base must be a 3x3 LinearMap")
        if not 0.0 < r0 < 0.5:
            raise MapError("r0 must lie in (0, 1/2)")
        q = wrap(np.asarray(q, dtype=float))
        if np.max(np.abs(min_image(base.forward(q) - q))) > 1e-12:
            raise MapError("perturbation centre must be a fixed point of the base")
        self.base = base
        self.theta = float(theta)
        self.r0 = float(r0)
        self.q = q
        self.v_c = base.frame()[1].copy()
        self._a = base._fmatrix
        self._ainv = base._finv
        if check and self.theta != 0.0:
            ok, margin = cone_check(self, aperture, check_samples, check_seed)
            if not ok:
                raise MapError(f"theta={self.theta} breaks cone invariance "
                               f"(margin {margin:.3g})")

    def __repr__(self):
        return f"ManeMap(theta={self.theta}, r0={self.r0})"

    @property
    def reference(self):
        return self.base

    def _offset(self, x):
        delta = min_image(x - self.q)
        dist = np.sqrt(np.sum(delta * delta, axis=-1))
        s = delta @ self.v_c
        return delta, dist, s

    def perturbation(self, x):
        x = np.asarray(x, dtype=float)
        _, dist, s = self._offset(x)
        amp = self.theta * bump(dist / self.r0) * np.sin(2.0 * np.pi * s)
        return amp[..., None] * self.v_c

    def lift_forward(self, xl):
        xl = np.asarray(xl, dtype=float)
        return xl @ self._a.T + self.perturbation(wrap(xl))

    def forward(self, x):
        return wrap(self.lift_forward(np.asarray(x, dtype=float)))

    def jacobian(self, x):
        x, single = _as_points(x)
        delta, dist, s = self._offset(x)
        t = dist / self.r0
        rho = bump(t)
        drho = bump_derivative(t)
        safe = np.where(dist > 0, dist, 1.0)
        grad_dist = np.where((dist > 0)[:, None], delta / safe[:, None], 0.0)
        phase = 2.0 * np.pi * s
        grad = self.theta * (
            (rho * 2.0 * np.pi * np.cos(phase))[:, None] * self.v_c
            + (np.sin(phase) * drho / self.r0)[:, None] * grad_dist
        )
        out = self._a[None, :, :] + self.v_c[None, :, None] * grad[:, None, :]
        return out[0] if single else out

    def lift_inverse(self, zl, tol=1e-12, max_iter=50):
        """Newton solve of lift_forward(x) = zl seeded by the linear inverse."""
        zl, single = _as_points(zl)
        # f(x + m) = f(x) + A m for integer m: solve on the fractional part only
        shift = np.floor(zl)
        zl = zl - shift
        shift = shift @ self._ainv.T
        x = zl @ self._ainv.T
        for _ in range(max_iter):
            resid = self.lift_forward(x) - zl
            if np.max(np.abs(resid), initial=0.0) < tol:
                x = x + shift
                return x[0] if single else x
            step = np.linalg.solve(self.jacobian(wrap(x)), resid[..., None])[..., 0]
            x = x - step
        resid = self.lift_forward(x) - zl
        if np.max(np.abs(resid), initial=0.0) < tol:
            x = x + shift
            return x[0] if single else x
        raise InverseError(f"inverse did not converge for theta={self.theta}")

    def inverse(self, x):
        return wrap(self.lift_inverse(np.asarray(x, dtype=float)))

    def inverted(self):
        return InverseMap(self)

    def to_params(self):
        p = self.base.to_params()
        p.update(kind="mane", theta=repr(self.theta), r0=repr(self.r0),
                 q=" ".join(repr(float(v)) for v in self.q))
        return p


class InverseMap(MapModel):
    """The inverse of a perturbed map, exposed as a map in its own right."""

    def __init__(self, inner):
        self.inner = inner
        self._ref = inner.reference.inverted()

    def __repr__(self):
        return f"InverseMap({self.inner!r})"

    @property
    def reference(self):
        return self._ref

    def forward(self, x):
        return self.inner.inverse(x)

    def inverse(self, x):
        return self.inner.forward(x)

    def lift_forward(self, xl):
        return self.inner.lift_inverse(xl)

    def lift_inverse(self, xl):
        return self.inner.lift_forward(xl)

    def jacobian(self, x):
        return np.linalg.inv(self.inner.jacobian(self.inner.inverse(x)))

    def inverse_jacobian(self, x):
        return np.linalg.inv(self.jacobian(self.inverse(x)))

    def inverted(self):
        return self.inner

    def to_params(self):
        p = self.inner.to_params()
        p["inverse"] = "true"
        return p


def _parse_matrix(text):
    rows = [r.split() for r in str(text).split(";") if r.strip()]
    return [[int(v) for v in r] for r in rows]


def map_from_params(params):
    """Build a map from a key=value block (see ``MapModel.to_params``)."""
    kind = params.get("kind", "linear")
    matrix = _parse_matrix(params.get("matrix", "2 1 0; 1 2 1; 0 1 1"))
    base = LinearMap(matrix)
    if kind == "linear":
        fmap = base
    elif kind == "mane":
        q = [float(v) for v in str(params.get("q", "0 0 0")).split()]
        fmap = ManeMap(base, float(params.get("theta", 0.0)),
                       r0=float(params.get("r0", 0.2)), q=q)
    else:
        raise MapError(f"unknown map kind {kind!r}")
    if str(params.get("inverse", "false")).lower() in ("1", "true", "yes"):
        fmap = fmap.inverted()
    return fmap


def apply(fmap, x, k):
    """k-th iterate f^k(x); negative k uses the inverse map."""
    x = wrap(np.asarray(x, dtype=float))
    step = fmap.forward if k >= 0 else fmap.inverse
    for _ in range(abs(int(k))):
        x = step(x)
    return x


def orbit(fmap, x, n):
    """Array of shape (n, ..., d) holding x, f(x), ..., f^{n-1}(x)."""
    x = wrap(np.asarray(x, dtype=float))
    out = np.empty((n,) + x.shape)
    for k in range(n):
        out[k] = x
        if k + 1 < n:
            x = fmap.forward(x)
    return out


def cocycle(fmap, x, n):
    """Df^n(x) = Df(f^{n-1}x) ... Df(x); identity for n = 0."""
    if n < 0:
        raise ValueError("n must be non-negative")
    x, single = _as_points(wrap(np.asarray(x, dtype=float)))
    if fmap.linear:
        mat = np.linalg.matrix_power(fmap.matrix, n).astype(float)
        out = np.broadcast_to(mat, (x.shape[0], fmap.dim, fmap.dim)).copy()
        return out[0] if single else out
    out = np.broadcast_to(np.eye(fmap.dim), (x.shape[0], fmap.dim, fmap.dim)).copy()
    for _ in range(n):
        out = fmap.jacobian(x) @ out
        x = fmap.forward(x)
    return out[0] if single else out


@dataclass(frozen=True)
class SplittingFrame:
    e_s: np.ndarray
    e_c: np.ndarray
    e_u: np.ndarray
    xi: float


def _orient(v, ref):
    sign = np.sign(np.sum(v * ref, axis=-1, keepdims=True))
    return v * np.where(sign == 0, 1.0, sign)


def _push(mats, vecs):
    return np.einsum("nij,nj...->ni...", mats, vecs)


def splitting_fields(fmap, x, depth=30):
    """Estimated (e_s, e_c, e_u) at each row of ``x`` by forward/backward
    power iteration of the derivative cocycle.

    E^u and the center-unstable plane come from pushing a generic vector and
    2-frame forward along the ``depth`` preimages; E^s and the center-stable
    plane from pulling back along the forward orbit.  e_c is the intersection
    of the two planes.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x, single = _as_points(wrap(np.asarray(x, dtype=float)))
    npts = x.shape[0]
    ref_s, ref_c, ref_u = fmap.reference.frame()
    rng = np.random.default_rng(12345)
    frame2 = np.linalg.qr(rng.standard_normal((3, 2)))[0]

    back = [x]
    for _ in range(depth):
        back.append(fmap.inverse(back[-1]))
    vu = np.broadcast_to(_GENERIC, (npts, 3)).copy()
    cu = np.broadcast_to(frame2, (npts, 3, 2)).copy()
    for k in range(depth, 0, -1):
        jac = fmap.jacobian(back[k])
        vu = _unit(_push(jac, vu))
        cu = np.linalg.qr(_push(jac, cu))[0]

    fwd = [x]
    for _ in range(depth):
        fwd.append(fmap.forward(fwd[-1]))
    vs = np.broadcast_to(_GENERIC, (npts, 3)).copy()
    cs = np.broadcast_to(frame2, (npts, 3, 2)).copy()
    for k in range(depth - 1, -1, -1):
        jinv = np.linalg.inv(fmap.jacobian(fwd[k]))
        vs = _unit(_push(jinv, vs))
        cs = np.linalg.qr(_push(jinv, cs))[0]

    n_cu = np.cross(cu[:, :, 0], cu[:, :, 1])
    n_cs = np.cross(cs[:, :, 0], cs[:, :, 1])
    vc = _unit(np.cross(n_cu, n_cs))
    e_s = _orient(vs, ref_s)
    e_c = _orient(vc, ref_c)
    e_u = _orient(vu, ref_u)
    if single:
        return e_s[0], e_c[0], e_u[0]
    return e_s, e_c, e_u


def _angle(a, b):
    """Angle between the lines spanned by a and b."""
    c = np.abs(np.sum(a * b, axis=-1))
    c = np.clip(c / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)), 0.0, 1.0)
    s = np.linalg.norm(np.cross(a, b), axis=-1) / (
        np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))
    return np.arctan2(s, c)


line_angle = _angle


def estimate_splitting(fmap, x, depth=30):
    """Splitting frame and domination scalar at a single point."""
    x = wrap(np.asarray(x, dtype=float))
    e_s, e_c, e_u = splitting_fields(fmap, x, depth)
    for a, b in ((e_s, e_c), (e_s, e_u), (e_c, e_u)):
        if _angle(a, b) < 1e-6:
            raise SplittingError("degenerate splitting frame")
    jac = fmap.jacobian(x)
    grow = [np.linalg.norm(jac @ v) for v in (e_s, e_c, e_u)]
    if not grow[0] < grow[1] < grow[2]:
        raise SplittingError(f"no domination at {x}: rates {grow}")
    back = np.linalg.norm(fmap.inverse_jacobian(x) @ e_u)
    worst = max(grow[0], back)
    if not worst < 1.0:
        raise SplittingError("stable/unstable directions are not contracted")
    return SplittingFrame(e_s, e_c, e_u, float(math.sqrt(worst)))


def cone_check(fmap, aperture, samples, seed, angles=64):
    """Strict invariance of the unstable cone under Df and the stable cone
    under Df^-1, measured in the eigen-coordinates of the linear part.

    Returns ``(passed, margin)``; margin is 1 minus the worst ratio of image
    aperture to source aperture over both cones.
    """
    if not 0.0 < aperture < 1.0:
        raise ValueError("aperture must lie in (0, 1)")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    ref = fmap.reference
    basis = np.column_stack(ref.frame())
    to_eigen = np.linalg.inv(basis)
    pts = sobol_points(samples, 3, seed)
    jac = fmap.jacobian(pts)
    fwd = to_eigen @ jac @ basis
    bwd = np.linalg.inv(fwd)
    phi = 2.0 * np.pi * np.arange(angles) / angles
    ring = np.stack([np.cos(phi), np.sin(phi)], axis=0) * aperture
    # unstable cone: (s, c) spread around the u axis
    cone_u = np.vstack([ring, np.ones(angles)])
    img = fwd @ cone_u
    ratio_u = np.linalg.norm(img[:, :2, :], axis=1) / np.abs(img[:, 2, :]) / aperture
    # stable cone: (c, u) spread around the s axis
    cone_s = np.vstack([np.ones(angles), ring])
    img = bwd @ cone_s
    ratio_s = np.linalg.norm(img[:, 1:, :], axis=1) / np.abs(img[:, 0, :]) / aperture
    worst = max(float(np.max(ratio_u)), float(np.max(ratio_s)))
    margin = 1.0 - worst
    return margin > 0.0, margin
