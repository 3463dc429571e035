"""Population model parameters (mu, sigma^2, eta^2) for a loss/model pair.

mu solves 0 = E[L'(mu g, f(g)) g]; sigma^2 = E[L'(mu g, f(g))^2] and
eta^2 = E[L'(mu g, f(g))^2 g^2], with g standard normal. The score is
non-decreasing in mu (convexity of the loss), so root finding is a bracketed
bisection; a pair with a constant-sign score over the largest bracket is
"incompatible" and reported as NoRoot rather than aborting a sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import RngStream
from .errors import NoRoot, NonFinite, RangeViolation
from .losses import Loss, RANGE_SIGN as LOSS_RANGE_SIGN
from .observations import (
    FlipSign,
    LinearNoise,
    ObservationModel,
    RANGE_SIGN,
    SignClean,
)
from .quadrature import gauss_nodes

BRACKET_MAX_EXP = 20


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution knobs for the population expectations."""

    nodes: int = 200
    mc_samples: int = 1_000_000
    tol: float = 1e-10
    force_mc: bool = False

    def __post_init__(self):
        if self.nodes < 10:
            raise ValueError("nodes must be >= 10")
        if self.tol <= 0:
            raise ValueError("tolerance must be > 0")


@dataclass(frozen=True)
class ModelParams:
    mu: float
    sigma_sq: float
    eta_sq: float
    method: str  # "closed_form" | "quadrature" | "monte_carlo"
    stderr: float = 0.0
    bracket: tuple[float, float] | None = None


@dataclass(frozen=True)
class ScoreValue:
    value: float
    stderr: float


def _check_compat(loss: Loss, model: ObservationModel) -> None:
    if loss.value_range == LOSS_RANGE_SIGN and model.output_range != RANGE_SIGN:
        raise RangeViolation(
            f"loss {loss.kind} expects sign labels but model {model.kind} emits "
            f"{model.output_range}"
        )


def _expect(loss: Loss, model: ObservationModel, mu: float, weight_fn,
            spec: QuadratureSpec) -> float:
    """E[ weight(g) * sum_atoms p(g) * phi(L'(mu g, y(g))) ]-style quadrature."""
    g, w = gauss_nodes(model.breakpoints(), spec.nodes)
    total = np.zeros_like(g)
    for prob, yval in model.atoms(g):
        total = total + prob * weight_fn(loss.d1(mu * g, yval), g)
    val = float(np.dot(w, total))
    if not math.isfinite(val):
        raise NonFinite(f"expectation overflowed for loss={loss.kind}, model={model.kind}")
    return val


def _expect_mc(loss: Loss, model: ObservationModel, mu: float, weight_fn,
               spec: QuadratureSpec, rng: RngStream) -> ScoreValue:
    gen = rng.generator()
    g = gen.standard_normal(spec.mc_samples)
    y = model.apply_batch(g, gen)
    vals = weight_fn(loss.d1(mu * g, y), g)
    if not np.all(np.isfinite(vals)):
        raise NonFinite("Monte Carlo integrand overflowed")
    return ScoreValue(float(np.mean(vals)), float(np.std(vals) / math.sqrt(len(vals))))


def expected_score(loss: Loss, model: ObservationModel, mu_candidate: float,
                   spec: QuadratureSpec = QuadratureSpec(),
                   rng: RngStream | None = None) -> ScoreValue:
    """E[L'(mu g, f(g)) g] evaluated at a candidate mu."""
    _check_compat(loss, model)
    score = lambda d1, g: d1 * g
    if spec.force_mc:
        if rng is None:
            rng = RngStream(0)
        return _expect_mc(loss, model, mu_candidate, score, spec, rng)
    return ScoreValue(_expect(loss, model, mu_candidate, score, spec), 0.0)


def solve_mu(loss: Loss, model: ObservationModel,
             spec: QuadratureSpec = QuadratureSpec(),
             rng: RngStream | None = None) -> ModelParams:
    """Root-find mu on an expanding bracket; NoRoot flags the incompatible pair."""
    _check_compat(loss, model)

    def score(mu: float) -> float:
        return expected_score(loss, model, mu, spec, rng).value

    lo = hi = 0.0
    s_lo = s_hi = score(0.0)
    bracketed = False
    for k in range(BRACKET_MAX_EXP + 1):
        b = float(2 ** k)
        lo, hi = -b, b
        s_lo, s_hi = score(lo), score(hi)
        if s_lo <= 0.0 <= s_hi:
            bracketed = True
            break
    if not bracketed:
        # Score is monotone, so a constant sign over [-2^20, 2^20] means either
        # a genuinely rootless pair or a root beyond any practical bracket.
        closer = min(abs(s_lo), abs(s_hi))
        farther = max(abs(s_lo), abs(s_hi))
        exhausted = closer < 1e-2 * farther
        raise NoRoot(
            f"score keeps sign over [-2^{BRACKET_MAX_EXP}, 2^{BRACKET_MAX_EXP}] "
            f"for loss={loss.kind}, model={model.kind}",
            score_lo=s_lo, score_hi=s_hi, bracket_exhausted=exhausted,
        )
    if spec.force_mc:
        mu = _bisect_mc(score, lo, hi, spec.tol)
        method = "monte_carlo"
        stderr = expected_score(loss, model, mu, spec, rng).stderr
    else:
        mu = float(brentq(score, lo, hi, xtol=1e-13, rtol=8.9e-16, maxiter=300))
        method = "quadrature"
        stderr = 0.0
    sigma_sq, eta_sq = compute_sigma_eta(loss, model, mu, spec, rng)
    return ModelParams(mu, sigma_sq, eta_sq, method, stderr, bracket=(lo, hi))


def _bisect_mc(score, lo: float, hi: float, tol: float) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = score(mid)
        if abs(s) <= tol or hi - lo < 1e-12:
            return mid
        if s < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def compute_sigma_eta(loss: Loss, model: ObservationModel, mu: float,
                      spec: QuadratureSpec = QuadratureSpec(),
                      rng: RngStream | None = None) -> tuple[float, float]:
    """sigma^2 = E[L'(mu g, f(g))^2], eta^2 = E[L'(mu g, f(g))^2 g^2]."""
    _check_compat(loss, model)
    if spec.force_mc:
        if rng is None:
            rng = RngStream(0)
        s = _expect_mc(loss, model, mu, lambda d1, g: d1 * d1, spec, rng.child(1))
        e = _expect_mc(loss, model, mu, lambda d1, g: d1 * d1 * g * g, spec, rng.child(2))
        return max(s.value, 0.0), max(e.value, 0.0)
    sigma_sq = _expect(loss, model, mu, lambda d1, g: d1 * d1, spec)
    eta_sq = _expect(loss, model, mu, lambda d1, g: d1 * d1 * g * g, spec)
    return max(sigma_sq, 0.0), max(eta_sq, 0.0)


def closed_form_params(loss: Loss, model: ObservationModel) -> ModelParams | None:
    """Registry of exactly known (mu, sigma^2, eta^2) triples."""
    if loss.kind != "square":
        return None
    if isinstance(model, LinearNoise):
        var = model.noise_std ** 2
        return ModelParams(model.gain, var, var, "closed_form")
    if isinstance(model, (FlipSign, SignClean)):
        p = model.p if isinstance(model, FlipSign) else 1.0
        mu = (2.0 * p - 1.0) * math.sqrt(2.0 / math.pi)
        var = 1.0 - (2.0 / math.pi) * (1.0 - 2.0 * p) ** 2
        return ModelParams(mu, var, var, "closed_form")
    return None


def resolve_params(loss: Loss, model: ObservationModel,
                   spec: QuadratureSpec = QuadratureSpec(),
                   rng: RngStream | None = None,
                   prefer_closed_form: bool = True) -> ModelParams:
    if prefer_closed_form:
        cf = closed_form_params(loss, model)
        if cf is not None:
            return cf
    return solve_mu(loss, model, spec, rng)


def mean_abs_output(model: ObservationModel, nodes: int = 200) -> float:
    """E|f(g)|, needed for the small-ball truncation window."""
    # |.| adds its own kink where the output crosses zero (v = 0 for every
    # shipped model's central atom)
    g, w = gauss_nodes(tuple(model.breakpoints()) + (0.0,), nodes)
    total = np.zeros_like(g)
    for prob, yval in model.atoms(g):
        total = total + prob * np.abs(yval)
    return float(np.dot(w, total))


def error_floor_t0(sigma_sq: float, eta_sq: float, effective_dim: float,
                   m: int, epsilon: float) -> float:
    """(sigma sqrt(d_t) + eta) / sqrt(m) + eps, the accuracy floor."""
    if min(sigma_sq, eta_sq, effective_dim, epsilon) < 0 or m < 1:
        raise ValueError("inputs must be non-negative with m >= 1")
    return (math.sqrt(sigma_sq) * math.sqrt(effective_dim) + math.sqrt(eta_sq)) / math.sqrt(m) + epsilon
