"""Closed convex signal sets with the three oracles the rest of the package needs:

* Euclidean projection (batched; the solver's feasibility primitive),
* support value sup_{x in K} <g, x> (exact per variant, may be infinite),
* maximization of a linear functional over the localized intersection
  (K - center) cap t B_2, used by the local-mean-width machinery.

The localized maximization is solved by a 1-D dual bisection on the multiplier
of the Euclidean ball constraint: for beta > 0 the inner argmax is a single
projection P_K(center + g / beta), and ||x(beta) - center|| is non-increasing
in beta, so complementary slackness (norm == t) pins the optimum. Each dual
evaluation costs one projection, the returned maximizer is feasible, and the
scheme needs nothing from the set beyond its projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleCenter, NoConvergence, UnsupportedProjection


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray
    distance: float
    iterations: int = 0


class SignalSet:
    """Base class; concrete variants implement batched projection and support."""

    dim: int

    def project_batch(self, points: np.ndarray, tol: float) -> tuple[np.ndarray, int]:
        raise NotImplementedError

    def support_batch(self, gs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distance_batch(self, points: np.ndarray, tol: float) -> np.ndarray:
        proj, _ = self.project_batch(points, tol)
        return np.linalg.norm(points - proj, axis=1)


# ---------------------------------------------------------------------------
# batched building blocks


def _l1_project_batch(points: np.ndarray, radius: float) -> np.ndarray:
    """Sort-and-threshold projection onto radius * B_1, rowwise."""
    absp = np.abs(points)
    norms = absp.sum(axis=1)
    out = points.copy()
    todo = norms > radius
    if not np.any(todo):
        return out
    p = absp[todo]
    u = np.sort(p, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1)
    ks = np.arange(1, p.shape[1] + 1)
    rho = np.sum(u * ks > css - radius, axis=1)
    theta = (css[np.arange(p.shape[0]), rho - 1] - radius) / rho
    shrunk = np.sign(points[todo]) * np.maximum(p - theta[:, None], 0.0)
    out[todo] = shrunk
    return out


def _simplex_project_batch(lam: np.ndarray) -> np.ndarray:
    """Rowwise projection onto the probability simplex."""
    u = np.sort(lam, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - 1.0
    ks = np.arange(1, lam.shape[1] + 1)
    rho = np.sum(u * ks > css, axis=1)
    theta = css[np.arange(lam.shape[0]), rho - 1] / rho
    return np.maximum(lam - theta[:, None], 0.0)


# ---------------------------------------------------------------------------
# variants


@dataclass(frozen=True)
class L2Ball(SignalSet):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius < 0:
            raise ValueError("radius must be >= 0")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def project_batch(self, points, tol):
        d = points - self.center
        norms = np.linalg.norm(d, axis=1)
        scale = np.where(norms > self.radius, self.radius / np.maximum(norms, 1e-300), 1.0)
        return self.center + d * scale[:, None], 0

    def support_batch(self, gs):
        return gs @ self.center + self.radius * np.linalg.norm(gs, axis=1)

    def distance_batch(self, points, tol):
        return np.maximum(np.linalg.norm(points - self.center, axis=1) - self.radius, 0.0)


@dataclass(frozen=True)
class L1Ball(SignalSet):
    radius: float
    n: int

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be > 0")

    @property
    def dim(self) -> int:
        return self.n

    def project_batch(self, points, tol):
        return _l1_project_batch(points, self.radius), 0

    def support_batch(self, gs):
        return self.radius * np.max(np.abs(gs), axis=1)


@dataclass(frozen=True)
class SqrtSparsitySet(SignalSet):
    """scale * (sqrt(s) B_1 cap B_2), the convex hull of unit-norm s-sparse vectors."""

    s: int
    n: int
    scale: float = 1.0

    def __post_init__(self):
        if not (1 <= self.s <= self.n):
            raise ValueError("sparsity level must satisfy 1 <= s <= n")
        if self.scale <= 0:
            raise ValueError("scale must be > 0")

    @property
    def dim(self) -> int:
        return self.n

    @property
    def l1_radius(self) -> float:
        return self.scale * math.sqrt(self.s)

    @property
    def l2_radius(self) -> float:
        return self.scale

    def _pieces(self):
        return L1Ball(self.l1_radius, self.n), L2Ball(np.zeros(self.n), self.l2_radius)

    def project_batch(self, points, tol):
        a, b = self._pieces()
        return _dykstra_batch(a, b, points, max_iters=1500, tol=min(tol, 1e-11))

    def support_batch(self, gs):
        # Exact dual line search over the l1 multiplier theta:
        #   h(g) = min_{theta >= 0} [ theta R1 + R2 ||soft_theta(g)||_2 ],
        # piecewise smooth between the sorted |g_i|; each piece is minimized in
        # closed form and candidates are clamped back into their piece.
        r1, r2 = self.l1_radius, self.l2_radius
        a = np.sort(np.abs(gs), axis=1)[:, ::-1]
        s_k = np.cumsum(a, axis=1)
        q_k = np.cumsum(a * a, axis=1)
        ks = np.arange(1, gs.shape[1] + 1)[None, :]
        lo = np.concatenate([a[:, 1:], np.zeros((a.shape[0], 1))], axis=1)
        hi = a

        def phi(theta, k_idx):
            inner = np.maximum(ks * theta * theta - 2.0 * s_k * theta + q_k, 0.0)
            return theta * r1 + r2 * np.sqrt(inner)

        qa = ks * (r2 * r2 * ks - r1 * r1)
        qb = -2.0 * s_k * (r2 * r2 * ks - r1 * r1)
        qc = r2 * r2 * s_k * s_k - r1 * r1 * q_k
        with np.errstate(invalid="ignore", divide="ignore"):
            disc = np.sqrt(np.maximum(qb * qb - 4.0 * qa * qc, 0.0))
            roots = [(-qb - disc) / (2.0 * qa), (-qb + disc) / (2.0 * qa)]
        candidates = [lo, hi] + [np.clip(np.nan_to_num(r, nan=0.0), lo, hi) for r in roots]
        values = np.stack([phi(c, ks) for c in candidates])
        return np.min(values, axis=(0, 2))


@dataclass(frozen=True)
class Subspace(SignalSet):
    basis: np.ndarray  # (n, d), orthonormal columns

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[1] < 1:
            raise ValueError("basis must be an (n, d) matrix with d >= 1")
        gram = b.T @ b
        if np.max(np.abs(gram - np.eye(b.shape[1]))) > 1e-10:
            raise ValueError("basis columns must be orthonormal within 1e-10")
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def subspace_dim(self) -> int:
        return self.basis.shape[1]

    def project_batch(self, points, tol):
        return (points @ self.basis) @ self.basis.T, 0

    def support_batch(self, gs):
        coeff_norm = np.linalg.norm(gs @ self.basis, axis=1)
        return np.where(coeff_norm <= 1e-12 * np.maximum(np.linalg.norm(gs, axis=1), 1e-300),
                        0.0, np.inf)


@dataclass(frozen=True)
class PolytopeHull(SignalSet):
    vertices: np.ndarray  # (k, n)
    max_qp_iters: int = field(default=20000)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] < 1:
            raise ValueError("polytope needs at least one vertex")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def project_batch(self, points, tol):
        # Accelerated projected gradient on the simplex weights of the hull;
        # the iterate is always feasible, so early stopping only costs accuracy.
        v = self.vertices
        k = v.shape[0]
        if k == 1:
            return np.broadcast_to(v[0], points.shape).copy(), 0
        gram = v @ v.T
        lip = float(np.linalg.eigvalsh(gram)[-1])
        if lip <= 0.0:
            return np.broadcast_to(v[0], points.shape).copy(), 0
        b = points @ v.T
        lam = np.full((points.shape[0], k), 1.0 / k)
        z = lam.copy()
        t_acc = 1.0
        target = max(tol * 1e-3, 1e-14) * max(1.0, float(np.max(np.abs(v))))
        iters = 0
        for it in range(self.max_qp_iters):
            iters = it + 1
            grad = z @ gram - b
            lam_new = _simplex_project_batch(z - grad / lip)
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_acc * t_acc))
            z = lam_new + ((t_acc - 1.0) / t_new) * (lam_new - lam)
            step = float(np.max(np.abs(lam_new - lam))) if lam.size else 0.0
            lam, t_acc = lam_new, t_new
            if step <= target:
                break
        return lam @ v, iters

    def support_batch(self, gs):
        return np.max(gs @ self.vertices.T, axis=1)


@dataclass(frozen=True)
class DictionaryImage(SignalSet):
    """Image D K' of an inner set under a dictionary D (n x n')."""

    dictionary: np.ndarray
    inner: SignalSet

    def __post_init__(self):
        d = np.asarray(self.dictionary, dtype=float)
        if d.ndim != 2 or d.shape[1] != self.inner.dim:
            raise ValueError("dictionary shape must be (n, inner.dim)")
        object.__setattr__(self, "dictionary", d)

    @property
    def dim(self) -> int:
        return self.dictionary.shape[0]

    @property
    def has_orthonormal_columns(self) -> bool:
        d = self.dictionary
        gram = d.T @ d
        return bool(np.max(np.abs(gram - np.eye(d.shape[1]))) <= 1e-10)

    def _materialized(self) -> SignalSet | None:
        if isinstance(self.inner, PolytopeHull):
            return PolytopeHull(self.inner.vertices @ self.dictionary.T)
        return None

    def project_batch(self, points, tol):
        poly = self._materialized()
        if poly is not None:
            return poly.project_batch(points, tol)
        if not self.has_orthonormal_columns:
            raise UnsupportedProjection(
                "projection onto D K' is only available for orthonormal D "
                "or polytope inner sets"
            )
        inner_pts, iters = self.inner.project_batch(points @ self.dictionary, tol)
        return inner_pts @ self.dictionary.T, iters

    def support_batch(self, gs):
        return self.inner.support_batch(gs @ self.dictionary)


# ---------------------------------------------------------------------------
# operations


def project(set_: SignalSet, p: np.ndarray, tol: float = 1e-10) -> ProjectionResult:
    p = np.asarray(p, dtype=float)
    pts, iters = set_.project_batch(p[None, :], tol)
    z = pts[0]
    return ProjectionResult(z, float(np.linalg.norm(p - z)), iters)


def support_value(set_: SignalSet, g: np.ndarray) -> float:
    """Exact supremum of <g, x> over the set; math.inf when unbounded."""
    g = np.asarray(g, dtype=float)
    return float(set_.support_batch(g[None, :])[0])


def membership(set_: SignalSet, p: np.ndarray, tol: float = 1e-9) -> bool:
    p = np.asarray(p, dtype=float)
    return bool(set_.distance_batch(p[None, :], min(tol, 1e-10))[0] <= tol)


def _dykstra_batch(a: SignalSet, b: SignalSet, points: np.ndarray,
                   max_iters: int, tol: float) -> tuple[np.ndarray, int]:
    x = points.copy()
    inc_a = np.zeros_like(x)
    inc_b = np.zeros_like(x)
    tol_eff = tol
    for it in range(max_iters):
        ya, _ = a.project_batch(x + inc_a, tol)
        inc_a = x + inc_a - ya
        yb, _ = b.project_batch(ya + inc_b, tol)
        inc_b = ya + inc_b - yb
        residual = float(np.max(np.linalg.norm(yb - x, axis=1))) if it > 0 else np.inf
        if it == 0:
            # movement below float granularity of the correction terms is
            # unresolvable; distant inputs cannot reach an absolute tolerance
            far = float(np.max(np.linalg.norm(points - yb, axis=1)))
            tol_eff = max(tol, 8.0 * np.finfo(float).eps * far)
        x = yb
        if residual < tol_eff:
            return x, it + 1
    raise NoConvergence(
        f"Dykstra did not converge in {max_iters} iterations (residual {residual:.3e})",
        last_iterate=x, residual=residual,
    )


def dykstra_intersection_project(a: SignalSet, b: SignalSet, p: np.ndarray,
                                 max_iters: int = 2000, tol: float = 1e-12) -> ProjectionResult:
    """Euclidean projection onto the intersection of two projectable sets."""
    p = np.asarray(p, dtype=float)
    pts, iters = _dykstra_batch(a, b, p[None, :], max_iters, tol)
    z = pts[0]
    return ProjectionResult(z, float(np.linalg.norm(p - z)), iters)


def project_best_effort(set_: SignalSet, points: np.ndarray, tol: float) -> np.ndarray:
    """Batched projection that falls back to the last iterate on non-convergence.

    Used only for far-field probes whose exact location does not matter (they
    steer brackets); near-field results are always recomputed exactly.
    """
    try:
        pts, _ = set_.project_batch(points, tol)
        return pts
    except NoConvergence as exc:
        return exc.last_iterate


def max_linear_localized_batch(set_: SignalSet, center: np.ndarray, t: float,
                               gs: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """sup over h in (K - center) cap t B_2 of <g, h>, rowwise over gs."""
    center = np.asarray(center, dtype=float)
    if not membership(set_, center, max(tol, 1e-9)):
        raise InfeasibleCenter("localization center is not in the set")
    nrows = gs.shape[0]
    if t <= 0.0:
        return np.zeros(nrows)
    if isinstance(set_, Subspace):
        return t * np.linalg.norm(gs @ set_.basis, axis=1)

    gnorm = np.linalg.norm(gs, axis=1)
    out = np.zeros(nrows)
    live = gnorm > 0.0
    if not np.any(live):
        return out
    g = gs[live]
    gn = gnorm[live]
    ptol = min(tol * 1e-2, 1e-11)

    def probe(beta, exact=True):
        target = center[None, :] + g / beta[:, None]
        if exact:
            pts, _ = set_.project_batch(target, ptol)
        else:
            pts = project_best_effort(set_, target, ptol)
        off = pts - center[None, :]
        return off, np.linalg.norm(off, axis=1)

    # At beta = ||g|| / t the probe stays inside the t-ball (non-expansiveness).
    # Decrease beta geometrically until the ball constraint activates (nu > t)
    # or nu saturates at the set's extent; never probing far past activation
    # keeps the projections in well-conditioned floating-point territory.
    beta = gn / t
    off, nu = probe(beta)
    vals = np.einsum("ij,ij->i", g, off)
    beta_lo = beta.copy()
    beta_hi = beta.copy()
    settled = np.zeros(g.shape[0], dtype=bool)
    active = np.zeros(g.shape[0], dtype=bool)
    for _ in range(18):
        open_ = ~settled
        if not np.any(open_):
            break
        beta_next = np.where(open_, beta / 10.0, beta)
        off2, nu2 = probe(beta_next, exact=False)
        crossed = open_ & (nu2 > t)
        beta_lo = np.where(crossed, beta_next, beta_lo)
        beta_hi = np.where(crossed, beta, beta_hi)
        active |= crossed
        plateau = open_ & ~crossed & (nu2 - nu <= 1e-9 + 1e-6 * nu)
        adopt = open_ & ~crossed
        beta = np.where(adopt, beta_next, beta)
        off = np.where(adopt[:, None], off2, off)
        vals = np.where(adopt, np.einsum("ij,ij->i", g, off2), vals)
        nu = np.where(adopt, nu2, nu)
        settled |= crossed | plateau
    if np.any(active):
        ga = g[active]
        blo = beta_lo[active]
        bhi = beta_hi[active]
        best = off[active]
        for _ in range(60):
            mid = np.sqrt(blo * bhi)
            pts, _ = set_.project_batch(center[None, :] + ga / mid[:, None], ptol)
            hm = pts - center[None, :]
            num = np.linalg.norm(hm, axis=1)
            too_far = num > t
            blo = np.where(too_far, mid, blo)
            bhi = np.where(too_far, bhi, mid)
            best = np.where(too_far[:, None], best, hm)
        vals[active] = np.einsum("ij,ij->i", ga, best)
    out[live] = vals
    return out


def max_linear_localized(set_: SignalSet, center: np.ndarray, t: float,
                         g: np.ndarray, tol: float = 1e-9) -> float:
    g = np.asarray(g, dtype=float)
    return float(max_linear_localized_batch(set_, center, t, g[None, :], tol)[0])
