"""Single-index observation models y_i = f(<a_i, x0>) and adversarial corruption.

Every model also exposes its conditional output law given the projection value
v as a finite list of (probability, value) atoms (inner Gauss nodes for the
additive-noise model). The model-parameter quadrature consumes those atoms, so
population expectations never need Monte Carlo for the shipped models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from .core import MeasurementEnsemble, RngStream
from .errors import BudgetExceeded, RangeViolation

RANGE_REALS = "reals"
RANGE_SIGN = "sign"
RANGE_GRID = "grid"


class ObservationModel:
    kind: str
    output_range: str

    def apply_batch(self, v: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def atoms(self, v: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Conditional law of y given v as (weight, value) pairs, broadcast over v."""
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        """Kink locations of v -> atoms(v), for quadrature panel splitting."""
        return ()


@dataclass(frozen=True)
class LinearNoise(ObservationModel):
    """f(v) = gain * v + noise_std * z with z standard normal."""

    gain: float
    noise_std: float = 0.0
    inner_nodes: int = 64
    kind: str = "linear"
    output_range: str = RANGE_REALS

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    def apply_batch(self, v, gen):
        y = self.gain * v
        if self.noise_std > 0:
            y = y + self.noise_std * gen.standard_normal(v.shape)
        return y

    def atoms(self, v):
        if self.noise_std == 0:
            return [(np.ones_like(v), self.gain * v)]
        # Gauss–Hermite-in-disguise: Legendre panels over the noise variable
        # would be wasteful; the integrand is entire in z, so plain GH is exact.
        x, w = np.polynomial.hermite.hermgauss(self.inner_nodes)
        out = []
        for xi, wi in zip(x, w):
            z = math.sqrt(2.0) * xi
            out.append((np.full_like(v, wi / math.sqrt(math.pi)),
                        self.gain * v + self.noise_std * z))
        return out


def _sign(v: np.ndarray) -> np.ndarray:
    return np.sign(v)


@dataclass(frozen=True)
class SignClean(ObservationModel):
    kind: str = "sign_clean"
    output_range: str = RANGE_SIGN

    def apply_batch(self, v, gen):
        return _sign(v)

    def atoms(self, v):
        return [(np.ones_like(v), _sign(v))]

    def breakpoints(self):
        return (0.0,)


@dataclass(frozen=True)
class FlipSign(ObservationModel):
    """f(v) = eps * sign(v) with P[eps = +1] = p, independent per observation."""

    p: float
    kind: str = "flip_sign"
    output_range: str = RANGE_SIGN

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValueError("retention probability p must lie in [0, 1]")

    def apply_batch(self, v, gen):
        eps = np.where(gen.random(v.shape) < self.p, 1.0, -1.0)
        return eps * _sign(v)

    def atoms(self, v):
        s = _sign(v)
        return [(np.full_like(v, self.p), s), (np.full_like(v, 1.0 - self.p), -s)]

    def breakpoints(self):
        return (0.0,)


@dataclass(frozen=True)
class NoisySign(ObservationModel):
    """f(v) = sign(v + z); z logistic or Gaussian with the given scale."""

    noise: str = "logistic"
    scale: float = 1.0
    kind: str = "noisy_sign"
    output_range: str = RANGE_SIGN

    def __post_init__(self):
        if self.noise not in ("logistic", "gaussian"):
            raise ValueError("noise must be 'logistic' or 'gaussian'")
        if self.scale <= 0:
            raise ValueError("noise scale must be > 0")

    def _p_plus(self, v):
        if self.noise == "logistic":
            return expit(v / self.scale)
        return ndtr(v / self.scale)

    def apply_batch(self, v, gen):
        if self.noise == "logistic":
            z = gen.logistic(0.0, self.scale, v.shape)
        else:
            z = self.scale * gen.standard_normal(v.shape)
        return _sign(v + z)

    def atoms(self, v):
        q = self._p_plus(v)
        ones = np.ones_like(v)
        return [(q, ones), (1.0 - q, -ones)]


@dataclass(frozen=True)
class UniformQuantizer(ObservationModel):
    """f(v) = step * round(v / step), saturating at +- sat like a real ADC."""

    step: float
    sat: float
    kind: str = "quantizer"
    output_range: str = RANGE_GRID

    def __post_init__(self):
        if self.step <= 0 or self.sat <= 0:
            raise ValueError("step and saturation must be > 0")

    def _quantize(self, v):
        return np.clip(self.step * np.round(v / self.step), -self.sat, self.sat)

    def apply_batch(self, v, gen):
        return self._quantize(v)

    def atoms(self, v):
        return [(np.ones_like(v), self._quantize(v))]

    def breakpoints(self):
        half = self.step / 2.0
        kmax = int(math.ceil(14.0 / self.step)) + 1
        pts = [half + k * self.step for k in range(-kmax, kmax)]
        return tuple(p for p in pts if abs(p) < 13.5)


def apply_nonlinearity(model: ObservationModel, v: float, rng: RngStream) -> float:
    return float(model.apply_batch(np.asarray([float(v)]), rng.generator())[0])


def generate_observations(model: ObservationModel, ensemble: MeasurementEnsemble,
                          x0: np.ndarray, rng: RngStream) -> np.ndarray:
    """Rowwise independent application of the (possibly random) non-linearity."""
    v = ensemble.matrix @ x0
    return model.apply_batch(v, rng.generator())


# ---------------------------------------------------------------------------
# adversarial corruption


class Corruption:
    kind: str


@dataclass(frozen=True)
class NoCorruption(Corruption):
    kind: str = "none"


@dataclass(frozen=True)
class BitFlipBudget(Corruption):
    tau: int
    kind: str = "bit_flips"

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be >= 0")


@dataclass(frozen=True)
class BoundedL2(Corruption):
    eps: float
    kind: str = "l2"

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("target eps must be >= 0")


@dataclass(frozen=True)
class FixedOffsets(Corruption):
    offsets: np.ndarray
    kind: str = "offsets"

    def __post_init__(self):
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=float))


def _rms(delta: np.ndarray) -> float:
    return float(np.sqrt(np.mean(delta * delta)))


def corrupt(y: np.ndarray, corruption: Corruption, output_range: str,
            rng: RngStream, margins: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Apply the corruption and return (ytilde, eps) with eps the RMS deviation.

    Bit flips target the entries with the largest |<a_i, x0>| when the margins
    are supplied (the most damaging choice for a correlation-based fit), and a
    uniformly random subset otherwise. The bounded-L2 perturbation shrinks the
    observations along the measured signal direction for the same reason.
    """
    y = np.asarray(y, dtype=float)
    m = y.shape[0]
    if isinstance(corruption, NoCorruption):
        return y.copy(), 0.0
    if isinstance(corruption, BitFlipBudget):
        if output_range != RANGE_SIGN or not np.all(np.abs(y) == 1.0):
            raise RangeViolation("bit flips require sign-valued observations")
        if corruption.tau > m:
            raise BudgetExceeded(f"tau={corruption.tau} exceeds m={m}")
        ytilde = y.copy()
        if corruption.tau > 0:
            if margins is not None:
                idx = np.argsort(-np.abs(margins), kind="stable")[: corruption.tau]
            else:
                idx = rng.generator().choice(m, size=corruption.tau, replace=False)
            ytilde[idx] = -ytilde[idx]
        return ytilde, _rms(ytilde - y)
    if isinstance(corruption, BoundedL2):
        if output_range != RANGE_REALS:
            raise RangeViolation("bounded-L2 corruption requires real-valued observations")
        if corruption.eps == 0.0:
            return y.copy(), 0.0
        if margins is not None and np.linalg.norm(margins) > 0:
            direction = -margins / np.linalg.norm(margins)
        else:
            d = rng.generator().standard_normal(m)
            direction = d / np.linalg.norm(d)
        delta = math.sqrt(m) * corruption.eps * direction
        ytilde = y + delta
        return ytilde, _rms(delta)
    if isinstance(corruption, FixedOffsets):
        if corruption.offsets.shape != y.shape:
            raise ValueError("offsets length must match m")
        ytilde = y + corruption.offsets
        if output_range == RANGE_SIGN and not np.all(np.isin(ytilde, (-1.0, 0.0, 1.0))):
            raise RangeViolation("offsets push sign-valued observations outside Y")
        return ytilde, _rms(corruption.offsets)
    raise ValueError(f"unknown corruption {corruption!r}")


@dataclass(frozen=True)
class ObservationSet:
    """Clean and delivered observations plus the realized noise parameter."""

    y: np.ndarray
    ytilde: np.ndarray
    epsilon: float
    model: ObservationModel
    corruption: Corruption

    def __post_init__(self):
        recomputed = _rms(self.ytilde - self.y)
        if abs(recomputed - self.epsilon) > 1e-12:
            raise ValueError("stored epsilon does not match its definition")


def make_observation_set(model: ObservationModel, ensemble: MeasurementEnsemble,
                         x0: np.ndarray, corruption: Corruption,
                         rng: RngStream) -> ObservationSet:
    margins = ensemble.matrix @ x0
    y = model.apply_batch(margins, rng.child(0).generator())
    ytilde, eps = corrupt(y, corruption, model.output_range, rng.child(1), margins=margins)
    return ObservationSet(y, ytilde, eps, model, corruption)
