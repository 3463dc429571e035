"""Convex losses L(v, y) with first/second derivatives and condition checks.

The logistic variant keeps the extra ``-y*v`` term exactly as it is used by the
estimator family this package implements; the GLM variant with a saturating
link provides the conventional smooth alternative for binary labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import MeasurementEnsemble
from .errors import RangeViolation

RANGE_REALS = "reals"
RANGE_SIGN = "sign"  # {-1, +1}, with 0 tolerated only as a null event


def _softplus(u: np.ndarray) -> np.ndarray:
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


class Loss:
    """Base class; values/derivatives are vectorized over v and y."""

    kind: str
    value_range: str

    def check_range(self, y: np.ndarray) -> None:
        if self.value_range == RANGE_SIGN:
            y = np.asarray(y)
            if not np.all(np.abs(y) == 1.0):
                raise RangeViolation(f"{self.kind} loss expects labels in {{-1, +1}}")

    def value(self, v, y):
        raise NotImplementedError

    def d1(self, v, y):
        raise NotImplementedError

    def d2(self, v, y):
        raise NotImplementedError


@dataclass(frozen=True)
class Square(Loss):
    kind: str = "square"
    value_range: str = RANGE_REALS

    def value(self, v, y):
        return 0.5 * (v - y) ** 2

    def d1(self, v, y):
        return v - y

    def d2(self, v, y):
        return np.ones_like(np.asarray(v, dtype=float) + np.asarray(y, dtype=float))


@dataclass(frozen=True)
class LogisticPaper(Loss):
    """-y v + log(1 + exp(-y v)) for y in {-1, +1}."""

    kind: str = "logistic_paper"
    value_range: str = RANGE_SIGN

    def value(self, v, y):
        u = -np.asarray(y, dtype=float) * np.asarray(v, dtype=float)
        return u + _softplus(u)

    def d1(self, v, y):
        y = np.asarray(y, dtype=float)
        s = expit(-y * np.asarray(v, dtype=float))
        return -y * (1.0 + s)

    def d2(self, v, y):
        s = expit(-np.asarray(y, dtype=float) * np.asarray(v, dtype=float))
        return s * (1.0 - s)


@dataclass(frozen=True)
class Glm(Loss):
    """Generalized-linear loss -y v + Phi(v) for a twice differentiable link Phi."""

    link: str = "square"
    kind: str = "glm"
    value_range: str = RANGE_REALS

    def __post_init__(self):
        if self.link not in ("square", "logcosh"):
            raise ValueError(f"unknown glm link {self.link!r}")
        object.__setattr__(self, "kind", f"glm_{self.link}")

    def _phi(self, v):
        if self.link == "square":
            return 0.5 * v * v
        return np.abs(v) + np.log1p(np.exp(-2.0 * np.abs(v))) - np.log(2.0)

    def _phi1(self, v):
        if self.link == "square":
            return v
        return np.tanh(v)

    def _phi2(self, v):
        if self.link == "square":
            return np.ones_like(np.asarray(v, dtype=float))
        t = np.tanh(v)
        return 1.0 - t * t

    def value(self, v, y):
        v = np.asarray(v, dtype=float)
        return -np.asarray(y, dtype=float) * v + self._phi(v)

    def d1(self, v, y):
        return -np.asarray(y, dtype=float) + self._phi1(np.asarray(v, dtype=float))

    def d2(self, v, y):
        return self._phi2(np.asarray(v, dtype=float))


def loss_value(loss: Loss, v, y):
    loss.check_range(np.asarray(y))
    return loss.value(v, y)


def loss_d1(loss: Loss, v, y):
    loss.check_range(np.asarray(y))
    return loss.d1(v, y)


def loss_d2(loss: Loss, v, y):
    loss.check_range(np.asarray(y))
    return loss.d2(v, y)


def empirical_loss(loss: Loss, ensemble: MeasurementEnsemble, ytilde: np.ndarray,
                   x: np.ndarray) -> float:
    """(1/m) sum_i L(<a_i, x>, ytilde_i)."""
    loss.check_range(ytilde)
    v = ensemble.matrix @ x
    return float(np.mean(loss.value(v, ytilde)))


def empirical_gradient(loss: Loss, ensemble: MeasurementEnsemble, ytilde: np.ndarray,
                       x: np.ndarray) -> np.ndarray:
    """(1/m) A^T [L'(<a_i, x>, ytilde_i)]_i."""
    loss.check_range(ytilde)
    v = ensemble.matrix @ x
    return ensemble.matrix.T @ loss.d1(v, ytilde) / ensemble.m


@dataclass(frozen=True)
class LossConditionReport:
    lipschitz_d1_in_y: float
    local_curvature: float
    convexity_violations: int
    box: tuple[float, float]


def check_conditions(loss: Loss, m_box: float, n_box: float,
                     resolution: int = 401) -> LossConditionReport:
    """Grid scan of the loss conditions on (-M, M) x ((-N, N) cap Y).

    A test utility, not a proof: C_{L'} is the largest observed difference
    quotient of L' in y, C_{M,N} the smallest observed second derivative.
    """
    if m_box <= 0 or n_box <= 0:
        raise ValueError("box sides must be positive")
    vs = np.linspace(-m_box, m_box, resolution)
    if loss.value_range == RANGE_SIGN:
        ys = np.array([y for y in (-1.0, 1.0) if abs(y) <= n_box])
        if ys.size == 0:
            ys = np.array([-1.0, 1.0])
    else:
        ys = np.linspace(-n_box, n_box, resolution)

    vv, yy = np.meshgrid(vs, ys, indexing="ij")
    d2 = np.asarray(loss.d2(vv, yy), dtype=float)
    curvature = float(np.min(d2))
    violations = int(np.sum(d2 < -1e-12))

    d1 = np.asarray(loss.d1(vv, yy), dtype=float)
    lip = 0.0
    for j in range(len(ys)):
        for jj in range(j + 1, len(ys)):
            dy = abs(ys[jj] - ys[j])
            if dy == 0:
                continue
            lip = max(lip, float(np.max(np.abs(d1[:, jj] - d1[:, j])) / dy))
    return LossConditionReport(lip, curvature, violations, (m_box, n_box))
