"""Independent brute-force oracles used by the tests.

These deliberately share no code with the library paths they check: the
projection and localized-maximization oracles walk a refined 2-D mesh of
feasible points, and the width oracles are textbook special-function values.
"""

import numpy as np


def _grid(lo, hi, n):
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    xx, yy = np.meshgrid(xs, ys)
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def mesh_project(set_, p, half_width=4.0, stages=4, n=241, feas_tol=1e-9):
    """argmin over a zooming 2-D mesh of feasible points of ||p - q||."""
    p = np.asarray(p, dtype=float)
    lo = np.array([-half_width, -half_width])
    hi = np.array([half_width, half_width])
    best = None
    for _ in range(stages):
        pts = _grid(lo, hi, n)
        feas = set_.distance_batch(pts, 1e-12) <= feas_tol
        if not np.any(feas):
            raise AssertionError("mesh oracle found no feasible points")
        cand = pts[feas]
        d = np.linalg.norm(cand - p, axis=1)
        best = cand[np.argmin(d)]
        spacing = (hi - lo) / (n - 1)
        lo = best - 6 * spacing
        hi = best + 6 * spacing
    return best


def mesh_localized_max(set_, center, t, g, stages=4, n=241, feas_tol=1e-9):
    """max of <g, h> over a zooming mesh of (K - center) cap t B_2."""
    center = np.asarray(center, dtype=float)
    g = np.asarray(g, dtype=float)
    lo = np.array([-t, -t])
    hi = np.array([t, t])
    best = np.zeros(2)
    for _ in range(stages):
        hs = _grid(lo, hi, n)
        ok = np.linalg.norm(hs, axis=1) <= t
        pts = center[None, :] + hs
        ok &= set_.distance_batch(pts, 1e-12) <= feas_tol
        if not np.any(ok):
            break
        cand = hs[ok]
        vals = cand @ g
        best = cand[np.argmax(vals)]
        spacing = (hi - lo) / (n - 1)
        lo = np.maximum(best - 6 * spacing, -t)
        hi = np.minimum(best + 6 * spacing, t)
    return float(best @ g)


def chi_mean(d):
    """E||g_d|| for a standard Gaussian in R^d."""
    from math import gamma, sqrt

    return sqrt(2.0) * gamma((d + 1) / 2.0) / gamma(d / 2.0)
