"""Potentials on T^3 with their Holder data."""

from __future__ import annotations

import math

import numpy as np

from .dynamics import splitting_fields
from .torus import sobol_points, torus_distance


class Potential:
    """Base class.  ``holder`` is the pair (C0, gamma) with
    |phi(x) - phi(y)| <= C0 d(x, y)^gamma."""

    kind = "abstract"
    constant_value = None

    def __call__(self, x):
        raise NotImplementedError

    @property
    def holder(self):
        raise NotImplementedError

    def sup_inf(self, per_axis=64):
        """(sup, inf) over the vertex grid {k / per_axis}^3."""
        if self.constant_value is not None:
            return self.constant_value, self.constant_value
        axis = np.arange(per_axis) / per_axis
        grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
        vals = self(grid)
        return float(np.max(vals)), float(np.min(vals))

    def to_params(self):
        raise NotImplementedError


class Constant(Potential):
    kind = "constant"

    def __init__(self, c=0.0):
        self.c = float(c)
        self.constant_value = self.c

    def __repr__(self):
        return f"Constant({self.c})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.c)

    @property
    def holder(self):
        return 0.0, 1.0

    def to_params(self):
        if self.c == 0.0:
            return {"kind": "zero"}
        return {"kind": "constant", "c": repr(self.c)}


def Zero():
    return Constant(0.0)


class Trig(Potential):
    """c + sum_i a_i cos(2 pi k_i . x + phase_i) for integer wavevectors k_i."""

    kind = "trig"

    def __init__(self, terms, c=0.0):
        self.terms = [(float(a), tuple(int(v) for v in k), float(ph)) for a, k, ph in terms]
        self.c = float(c)

    def __repr__(self):
        return f"Trig({self.terms}, c={self.c})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], self.c)
        for a, k, ph in self.terms:
            out = out + a * np.cos(2.0 * np.pi * (x @ np.asarray(k, dtype=float)) + ph)
        return out

    @property
    def holder(self):
        # Lipschitz in the torus metric: |grad| <= sum 2 pi |a| |k|
        lip = math.fsum(2.0 * math.pi * abs(a) * math.sqrt(sum(v * v for v in k))
                        for a, k, _ in self.terms)
        return lip, 1.0

    def to_params(self):
        spec = "; ".join(f"{a!r} {' '.join(map(str, k))} {ph!r}" for a, k, ph in self.terms)
        return {"kind": "trig", "terms": spec, "c": repr(self.c)}


def cos_x1(amplitude=0.1):
    """amplitude * cos(2 pi x_1), the stock test potential."""
    return Trig([(amplitude, (1, 0, 0), 0.0)])


class Central(Potential):
    """t * log ||Df(x) e_c(x)||, the scaled central log-derivative of a map."""

    kind = "central"

    def __init__(self, fmap, t=1.0, depth=30):
        self.fmap = fmap
        self.t = float(t)
        self.depth = depth
        self._holder = None
        if fmap.linear:
            e_c = fmap.frame()[1]
            self.constant_value = self.t * math.log(np.linalg.norm(fmap._fmatrix @ e_c))

    def __repr__(self):
        return f"Central({self.fmap!r}, t={self.t})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.constant_value is not None:
            return np.full(x.shape[:-1], self.constant_value)
        pts = x.reshape(-1, 3)
        e_c = splitting_fields(self.fmap, pts, self.depth)[1]
        jac = self.fmap.jacobian(pts)
        vals = self.t * np.log(np.linalg.norm(np.einsum("nij,nj->ni", jac, e_c), axis=-1))
        return vals.reshape(x.shape[:-1])

    @property
    def holder(self):
        if self.constant_value is not None:
            return 0.0, 1.0
        if self._holder is None:
            self._holder = estimate_holder(self)
        return self._holder

    def to_params(self):
        return {"kind": "central", "t": repr(self.t)}


def estimate_holder(potential, pairs=10_000, seed=0, gamma=1.0, safety=1.5):
    """Empirical Holder constant from sampled nearby pairs, times a safety factor."""
    rng = np.random.default_rng(seed)
    x = sobol_points(pairs, 3, seed)
    y = (x + rng.normal(scale=0.02, size=x.shape)) % 1.0
    d = torus_distance(x, y)
    keep = d > 0
    ratio = np.abs(potential(x) - potential(y))[keep] / d[keep] ** gamma
    return safety * float(np.max(ratio, initial=0.0)), gamma


def potential_from_params(params, fmap=None):
    kind = params.get("kind", "zero")
    if kind == "zero":
        return Zero()
    if kind == "constant":
        return Constant(float(params.get("c", 0.0)))
    if kind == "trig":
        terms = []
        for chunk in str(params.get("terms", "0.1 1 0 0 0.0")).split(";"):
            vals = chunk.split()
            if not vals:
                continue
            terms.append((float(vals[0]), tuple(int(v) for v in vals[1:4]), float(vals[4])))
        return Trig(terms, c=float(params.get("c", 0.0)))
    if kind == "central":
        if fmap is None:
            raise ValueError("central potential needs a map")
        return Central(fmap, float(params.get("t", 1.0)))
    raise ValueError(f"unknown potential kind {kind!r}")
