"""Geometry of the flat torus T^d in unit-cube coordinates."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import qmc

#: diameter of T^3 under the shift-minimizing Euclidean metric
DIAMETER_T3 = math.sqrt(3.0) / 2.0


def wrap(x):
    """Reduce coordinates mod 1 into [0, 1)."""
    y = np.mod(x, 1.0)
    # np.mod can return exactly 1.0 for tiny negative inputs
    return np.where(y >= 1.0, 0.0, y)


def min_image(d):
    """Shortest lift of a displacement, componentwise in [-1/2, 1/2]."""
    return d - np.round(d)


def torus_distance(x, y):
    """Distance on T^d: minimum over integer shifts of the Euclidean norm."""
    diff = min_image(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    return np.sqrt(np.sum(diff * diff, axis=-1))


def sobol_points(count, dim=3, seed=0):
    """First ``count`` points of a seeded scrambled Sobol' sequence in [0,1)^dim."""
    if count <= 0:
        return np.empty((0, dim))
    engine = qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng(seed))
    return engine.random_base2(max(0, math.ceil(math.log2(count))))[:count]


def grid_points(samples, dim=3):
    """Regular grid with at least ``samples`` points (cell centres)."""
    per_axis = max(1, math.ceil(samples ** (1.0 / dim) - 1e-9))
    ticks = (np.arange(per_axis) + 0.5) / per_axis
    mesh = np.meshgrid(*([ticks] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)
