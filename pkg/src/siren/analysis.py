"""Gaussian-complexity and convexity diagnostics.

Everything here is a desk-scale estimate of a population quantity: Monte Carlo
mean widths with standard errors, sampled restricted-strong-convexity ratios,
and the small-ball tail probability that drives the RSC guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import MeasurementEnsemble, RngStream
from .errors import DegenerateSampling, InfeasibleCenter, InvalidWindow, UnboundedSet
from .losses import Loss, empirical_gradient, empirical_loss
from .observations import ObservationModel
from .signal_sets import (
    SignalSet,
    max_linear_localized_batch,
    membership,
    project_best_effort,
)

_CHUNK = 4096


@dataclass(frozen=True)
class WidthEstimate:
    mean: float
    std_error: float
    samples: int
    scale: float = 0.0  # 0 marks a global width


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    std_error: float
    scale: float


@dataclass(frozen=True)
class RscReport:
    scale: float
    samples: int
    min_ratio: float
    mean_ratio: float
    violating_points: int


@dataclass(frozen=True)
class SmallBallEstimate:
    """Estimated marginal tail probability inf_h P[ truncated correlation >= 2t ].

    ``q_hat`` uses the hard truncation event {4t <= |<g,h>| <= M/4} together
    with the two window indicators (the event whose probability lower-bounds
    the tail function); ``q_hat_soft`` evaluates the soft-hat statistic
    |hat_{M/2}(<g,h>) <g,h>| >= 2t literally. Soft dominates hard pointwise.
    """

    q_hat: float
    q_hat_soft: float
    t: float
    m_window: float
    n_window: float
    h_samples: int
    g_samples: int


def _mc_mean(sample_fn, samples: int, rng: RngStream) -> tuple[float, float]:
    """Chunked MC mean with a fixed accumulation order for reproducibility."""
    total = 0.0
    total_sq = 0.0
    seen = 0
    chunk_idx = 0
    while seen < samples:
        b = min(_CHUNK, samples - seen)
        vals = sample_fn(b, rng.child(chunk_idx))
        if np.any(np.isinf(vals)):
            raise UnboundedSet("support function is infinite on a sampled direction")
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals * vals))
        seen += b
        chunk_idx += 1
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples)


def mean_width_mc(set_: SignalSet, samples: int, rng: RngStream) -> WidthEstimate:
    """Monte Carlo estimate of E[sup_{x in K} <g, x>]."""

    def draw(b, stream):
        g = stream.generator().standard_normal((b, set_.dim))
        return set_.support_batch(g)

    mean, se = _mc_mean(draw, samples, rng)
    return WidthEstimate(mean, se, samples, scale=0.0)


def local_mean_width_mc(set_: SignalSet, center: np.ndarray, t: float,
                        samples: int, rng: RngStream,
                        tol: float = 1e-9) -> WidthEstimate:
    """Monte Carlo estimate of the width of (K - center) cap t B_2."""
    center = np.asarray(center, dtype=float)
    if not membership(set_, center, max(tol, 1e-9)):
        raise InfeasibleCenter("local width center is not in the set")

    def draw(b, stream):
        g = stream.generator().standard_normal((b, set_.dim))
        return max_linear_localized_batch(set_, center, t, g, tol)

    mean, se = _mc_mean(draw, samples, rng)
    return WidthEstimate(mean, se, samples, scale=t)


def effective_dimension(width: WidthEstimate) -> DimensionEstimate:
    """w^2 (global) or w^2 / t^2 (local), with delta-method error propagation."""
    if width.scale > 0:
        val = (width.mean / width.scale) ** 2
        se = 2.0 * width.mean * width.std_error / width.scale ** 2
    else:
        val = width.mean ** 2
        se = 2.0 * width.mean * width.std_error
    return DimensionEstimate(val, se, width.scale)


def taylor_remainder(loss: Loss, ensemble: MeasurementEnsemble, ytilde: np.ndarray,
                     x: np.ndarray, base: np.ndarray) -> float:
    """Empirical loss minus its linearization at base."""
    x = np.asarray(x, dtype=float)
    base = np.asarray(base, dtype=float)
    lx = empirical_loss(loss, ensemble, ytilde, x)
    lb = empirical_loss(loss, ensemble, ytilde, base)
    grad = empirical_gradient(loss, ensemble, ytilde, base)
    return lx - lb - float(grad @ (x - base))


def shell_offsets(set_: SignalSet, base: np.ndarray, t: float,
                  directions: np.ndarray, tol: float) -> np.ndarray:
    """Feasible offsets h = P(base + c t u) - base with ||h|| in [t/2, t].

    At a sharp vertex a unit probe radius projects back far inside the shell,
    so c is calibrated per direction: the offset norm is continuous and
    non-decreasing in c, and it never exceeds t at c = 1 (non-expansiveness),
    so doubling until the shell is reached and bisecting any overshoot lands
    each direction in [t/2, t]. Directions along which the set is thinner
    than t/2 saturate below the shell and are dropped.
    """
    ptol = min(tol, 1e-11)
    n_dir = directions.shape[0]
    lo_band = 0.6 * t

    def norms_at(cs, exact=True):
        target = base[None, :] + (cs * t)[:, None] * directions
        if exact:
            pts, _ = set_.project_batch(target, ptol)
        else:
            pts = project_best_effort(set_, target, ptol)
        off = pts - base[None, :]
        return off, np.linalg.norm(off, axis=1)

    c = np.ones(n_dir)
    off, norms = norms_at(c)
    growing = norms < lo_band
    for _ in range(44):
        if not np.any(growing):
            break
        c_try = np.where(growing, 2.0 * c, c)
        off_try, norms_try = norms_at(c_try, exact=False)
        improved = norms_try > norms + 1e-9 + 1e-6 * norms
        saturated = growing & ~improved
        adopt = growing & improved
        c = np.where(adopt, c_try, c)
        off = np.where(adopt[:, None], off_try, off)
        norms = np.where(adopt, norms_try, norms)
        growing = adopt & (norms < lo_band)
        growing &= ~saturated

    over = norms > t
    if np.any(over):
        c_lo, c_hi = c / 2.0, c
        for _ in range(60):
            todo = (norms > t) | (norms < lo_band)
            todo &= over
            if not np.any(todo):
                break
            mid = np.where(todo, 0.5 * (c_lo + c_hi), c)
            off_try, norms_try = norms_at(mid)
            high = todo & (norms_try > t)
            low = todo & (norms_try < lo_band)
            c_hi = np.where(high, mid, c_hi)
            c_lo = np.where(low, mid, c_lo)
            c = np.where(todo, mid, c)
            off = np.where(todo[:, None], off_try, off)
            norms = np.where(todo, norms_try, norms)

    # best-effort probes can leave offsets marginally infeasible; polish with
    # one exact near-field projection before filtering
    pts, _ = set_.project_batch(base[None, :] + off, ptol)
    off = pts - base[None, :]
    norms = np.linalg.norm(off, axis=1)
    keep = (norms >= t / 2.0) & (norms <= t * (1.0 + 1e-9))
    return off[keep]


def _candidate_offsets(loss: Loss, ensemble: MeasurementEnsemble, ytilde: np.ndarray,
                       set_: SignalSet, base: np.ndarray, t: float,
                       n_points: int, rng: RngStream,
                       tol: float) -> np.ndarray:
    """Direction pool for RSC sampling: random unit vectors plus Hessian probes.

    Random directions never expose a measurement-kernel direction, so the pool
    is enriched with the bottom eigenvectors of the empirical Hessian at base;
    on under-sampled instances those are exactly the flat directions.
    """
    n = set_.dim
    gen = rng.generator()
    u = gen.standard_normal((n_points, n))
    u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-300)

    a = ensemble.matrix
    weights = np.asarray(loss.d2(a @ base, ytilde), dtype=float)
    hess = (a.T * weights) @ a / ensemble.m
    evals, evecs = np.linalg.eigh(hess)
    k = min(4, n)
    probes = evecs[:, :k].T
    u = np.vstack([u, probes, -probes])

    offsets = shell_offsets(set_, base, t, u, tol)
    if offsets.shape[0] < 10:
        raise DegenerateSampling(
            f"only {offsets.shape[0]} of {u.shape[0]} sampled directions stayed "
            f"in the [t/2, t] shell"
        )
    return offsets


def empirical_rsc(loss: Loss, ensemble: MeasurementEnsemble, ytilde: np.ndarray,
                  set_: SignalSet, base: np.ndarray, t: float,
                  n_points: int, rng: RngStream, tol: float = 1e-9) -> RscReport:
    """Sampled lower bound on the remainder-to-distance-squared ratio at scale t."""
    base = np.asarray(base, dtype=float)
    if not membership(set_, base, max(tol, 1e-9)):
        raise InfeasibleCenter("RSC base point is not in the set")
    offsets = _candidate_offsets(loss, ensemble, ytilde, set_, base, t, n_points, rng, tol)
    a = ensemble.matrix
    vb = a @ base
    lb = float(np.mean(loss.value(vb, ytilde)))
    grad = a.T @ loss.d1(vb, ytilde) / ensemble.m
    vx = vb[:, None] + a @ offsets.T
    lx = np.mean(loss.value(vx, ytilde[:, None]), axis=0)
    rems = lx - lb - offsets @ grad
    ratios = rems / np.einsum("ij,ij->i", offsets, offsets)
    return RscReport(
        scale=t,
        samples=len(ratios),
        min_ratio=float(np.min(ratios)),
        mean_ratio=float(np.mean(ratios)),
        violating_points=int(np.sum(ratios < -1e-10)),
    )


def default_window(t: float, mu: float, mean_abs_f: float, eps_inf: float,
                   c1: float = 8.0, c2: float = 8.0) -> tuple[float, float]:
    """Truncation window (M, N) = (max(32t, c1 |mu|), c2 E|f(g)| + eps_inf).

    The multipliers c1, c2 have no canonical values; 8 is a house default.
    """
    return max(32.0 * t, c1 * abs(mu)), c2 * mean_abs_f + eps_inf


def small_ball_q(set_: SignalSet, base: np.ndarray, x0: np.ndarray, t: float,
                 m_window: float, n_window: float, model: ObservationModel,
                 eps_inf: float, h_samples: int, g_samples: int,
                 rng: RngStream, tol: float = 1e-9) -> SmallBallEstimate:
    """Estimate the marginal tail function over sampled directions of the shell.

    For each sampled h on (K - base) with norm near t (rescaled to exactly t
    whenever the rescaled point stays feasible), the probability over fresh
    Gaussian vectors g of

        |<g, base>| <= M/2  and  |f(<g, x0>)| + eps_inf <= N
        and  4t <= |<g, h>| <= M/4

    is estimated; q_hat is the minimum over directions. The soft-hat variant
    replaces the last event with |hat_{M/2}(<g,h>) <g,h>| >= 2t.
    """
    if t <= 0:
        raise ValueError("scale t must be > 0")
    if m_window < 32.0 * t:
        raise InvalidWindow(f"window M={m_window} violates M >= 32 t = {32.0 * t}")
    base = np.asarray(base, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if not membership(set_, base, max(tol, 1e-9)):
        raise InfeasibleCenter("small-ball base point is not in the set")

    # Direction sampling mirrors empirical_rsc but without a Hessian (no data here).
    n = set_.dim
    gen = rng.child(0).generator()
    u = gen.standard_normal((h_samples, n))
    u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-300)
    offsets = shell_offsets(set_, base, t, u, tol)
    norms = np.linalg.norm(offsets, axis=1)
    if offsets.shape[0] < 10:
        raise DegenerateSampling("too few directions survived the shell filter")
    rescaled = offsets * (t / norms)[:, None]
    member_pts = base[None, :] + rescaled
    dist = set_.distance_batch(member_pts, min(tol, 1e-11))
    use_rescaled = dist <= max(tol, 1e-9)
    hs = np.where(use_rescaled[:, None], rescaled, offsets)

    ggen = rng.child(1).generator()
    half_m = m_window / 2.0
    seen = 0
    hard_hits = np.zeros(hs.shape[0])
    soft_hits = np.zeros(hs.shape[0])
    while seen < g_samples:
        b = min(_CHUNK, g_samples - seen)
        g = ggen.standard_normal((b, n))
        ind_base = np.abs(g @ base) <= half_m
        if math.isinf(n_window):
            ind_y = np.ones(b, dtype=bool)
        else:
            y = model.apply_batch(g @ x0, ggen)
            ind_y = np.abs(y) + eps_inf <= n_window
        corr = g @ hs.T  # (b, n_h)
        gate = (ind_base & ind_y)[:, None]
        abs_corr = np.abs(corr)
        hard = gate & (abs_corr >= 4.0 * t) & (abs_corr <= m_window / 4.0)
        if math.isinf(half_m):
            hat = np.ones_like(abs_corr)
        else:
            hat = np.clip((half_m - abs_corr) / half_m, 0.0, None)
        soft = gate & (hat * abs_corr >= 2.0 * t)
        hard_hits += hard.sum(axis=0)
        soft_hits += soft.sum(axis=0)
        seen += b
    q_hard = hard_hits / g_samples
    q_soft = soft_hits / g_samples
    return SmallBallEstimate(
        q_hat=float(np.min(q_hard)),
        q_hat_soft=float(np.min(q_soft)),
        t=t,
        m_window=m_window,
        n_window=n_window,
        h_samples=hs.shape[0],
        g_samples=g_samples,
    )
