"""Dense linear-algebra primitives, SPD covariance handling, seeded Gaussian sampling.

All randomness in the package flows through :class:`RngStream`, a counter-based
scheme (Philox keyed by ``(seed, *path)``) so that any trial of any sweep can be
replayed bit-for-bit regardless of worker count or evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositiveDefinite, NotSymmetric


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by a master seed and an index path.

    ``child(k)`` derives an independent substream; substreams never collide for
    distinct paths. Draws are bit-identical across platforms for a fixed
    ``(seed, path)`` because Philox is counter based.
    """

    seed: int
    path: tuple[int, ...] = ()

    @property
    def index(self) -> int:
        return self.path[-1] if self.path else 0

    def child(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.path + (int(k),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence((int(self.seed) & 0xFFFFFFFFFFFFFFFF,) + self.path)
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class CovarianceFactor:
    """Two factorizations of an SPD covariance: FF^T = SS = Sigma.

    ``sampling_factor`` (Cholesky) is what the Gaussian sampler needs; the
    symmetric root is the metric of the anisotropic error bound and is kept
    separately because the two coincide only for diagonal Sigma.
    """

    dimension: int
    sigma: np.ndarray
    sampling_factor: np.ndarray
    symmetric_root: np.ndarray
    is_identity: bool = field(default=False)

    def whiten_metric(self, v: np.ndarray) -> float:
        """Euclidean norm of symmetric_root @ v."""
        if self.is_identity:
            return float(np.linalg.norm(v))
        return float(np.linalg.norm(self.symmetric_root @ v))


@dataclass(frozen=True)
class MeasurementEnsemble:
    """Measurement matrix A (rows are the Gaussian measurement vectors) plus provenance."""

    matrix: np.ndarray
    stream: RngStream

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


def make_covariance_factor(sigma: np.ndarray) -> CovarianceFactor:
    """Factor an SPD matrix into a Cholesky sampling factor and its symmetric root.

    Raises NotSymmetric / NotPositiveDefinite instead of silently symmetrizing,
    since a wrong Sigma changes both the sampler and the error metric.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise NotSymmetric(f"covariance must be square, got shape {sigma.shape}")
    n = sigma.shape[0]
    scale = np.max(np.abs(sigma)) or 1.0
    if np.max(np.abs(sigma - sigma.T)) > 1e-12 * scale:
        raise NotSymmetric("covariance is not symmetric within 1e-12 relative tolerance")
    sigma = 0.5 * (sigma + sigma.T)
    if np.allclose(sigma, np.eye(n), rtol=0.0, atol=0.0):
        eye = np.eye(n)
        return CovarianceFactor(n, eye, eye, eye, is_identity=True)
    evals, evecs = np.linalg.eigh(sigma)
    if evals[0] <= n * np.finfo(float).eps * evals[-1]:
        raise NotPositiveDefinite(
            f"smallest eigenvalue {evals[0]:.3e} fails the positive-definiteness gate"
        )
    root = (evecs * np.sqrt(evals)) @ evecs.T
    root = 0.5 * (root + root.T)
    chol = np.linalg.cholesky(sigma)
    return CovarianceFactor(n, sigma, chol, root)


def identity_factor(n: int) -> CovarianceFactor:
    eye = np.eye(n)
    return CovarianceFactor(n, eye, eye, eye, is_identity=True)


def sample_ensemble(m: int, factor: CovarianceFactor, rng: RngStream) -> MeasurementEnsemble:
    """Draw m independent rows from N(0, Sigma) using the stream's generator."""
    if m < 1:
        raise ValueError("m must be >= 1")
    gen = rng.generator()
    z = gen.standard_normal((m, factor.dimension))
    a = z if factor.is_identity else z @ factor.sampling_factor.T
    return MeasurementEnsemble(a, rng)


def mahalanobis_error(xhat: np.ndarray, target: np.ndarray, factor: CovarianceFactor) -> float:
    """|| sqrt(Sigma) (xhat - target) ||, the anisotropic error metric."""
    xhat = np.asarray(xhat, dtype=float)
    target = np.asarray(target, dtype=float)
    if xhat.shape != target.shape or xhat.shape[0] != factor.dimension:
        raise ValueError("dimension mismatch in mahalanobis_error")
    return factor.whiten_metric(xhat - target)
