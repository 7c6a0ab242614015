"""PNG figures rendered next to the CSV reports (Agg backend, no display)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _pressure(ax, d):
    n = np.asarray(d["n"], dtype=float)
    ax.plot(n, d["log_lambda"], "o", label="log Lambda_n")
    ax.plot(n, d["intercept"] + d["slope"] * n, "-", label=f"slope {d['slope']:.4f}")
    ax.set_xlabel("n")
    ax.set_ylabel("log Lambda_n")
    ax.legend()


def _uentropy(ax, d):
    for key, lab in (("unstable", "h_u"), ("stable", "h_s")):
        rows = np.asarray(d[key], dtype=float)
        if rows.size:
            ax.plot(rows[:, 0], rows[:, 1], "o-", label=f"{lab} = {d[lab]:.4f}")
    ax.set_xlabel("n")
    ax.set_ylabel("log leaf length")
    ax.legend()


def _hist(key, xlabel):
    def draw(ax, d):
        ax.hist(d[key], bins=30)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("count")
    return draw


def _equilibrium(ax, d):
    bins = np.asarray(d["bins"])
    ax.bar(np.arange(bins.size), bins)
    ax.axhline(1.0 / bins.size, color="k", lw=0.8)
    ax.set_xlabel("cell of the 4^3 partition")
    ax.set_ylabel("mass")


def _bowen(ax, d):
    ax.plot(d["n"], d["max_oscillation"], "o-")
    ax.set_xlabel("n")
    ax.set_ylabel("max Birkhoff oscillation")


def _sweep(ax, d):
    for key in ("h_u", "h_s", "gap_inverse", "bset_fraction"):
        ax.plot(d["theta"], d[key], "o-", label=key)
    ax.set_xlabel("theta")
    ax.legend()


DRAW = {
    "entropy": _pressure, "pressure": _pressure, "uentropy": _uentropy,
    "lyapunov": _hist("values", "central exponent"),
    "decompose": _hist("p_fraction", "p_hat / n"),
    "spec": _hist("distances", "max block distance"),
    "equilibrium": _equilibrium, "bowen": _bowen, "sweep": _sweep,
}


def render(name, data, out_dir):
    """Write ``name``.png when a drawer exists and data is present; returns the path."""
    draw = DRAW.get(name)
    if draw is None or not data:
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        draw(ax, data)
        ax.set_title(name)
        fig.tight_layout()
        path = os.path.join(out_dir, f"{name}.png")
        fig.savefig(path, dpi=100, metadata={"Software": None})
    finally:
        plt.close(fig)
    return path
