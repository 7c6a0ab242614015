"""Order-independent reductions.

Every reported sum goes through ``math.fsum`` (correctly rounded), so the
result does not depend on how work was split between workers.
"""

from __future__ import annotations

import math

import numpy as np


def exact_sum(values):
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def logsumexp(values):
    """log(sum(exp(values))) with a correctly rounded inner sum; -inf if empty."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return -math.inf
    top = float(np.max(v))
    if not math.isfinite(top):
        return top
    return top + math.log(exact_sum(np.exp(v - top)))


def cumulative_sums(values):
    """Running sums along the first axis, S_1..S_n, computed sequentially."""
    return np.cumsum(np.asarray(values, dtype=float), axis=0)
