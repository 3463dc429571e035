import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from siren.errors import InfeasibleCenter, NoConvergence, UnsupportedProjection
from siren.signal_sets import (
    DictionaryImage,
    L1Ball,
    L2Ball,
    PolytopeHull,
    SqrtSparsitySet,
    Subspace,
    dykstra_intersection_project,
    max_linear_localized,
    membership,
    project,
    support_value,
)

from oracles import mesh_localized_max, mesh_project


def _variants_2d():
    return [
        L1Ball(1.0, 2),
        L2Ball(np.array([0.2, -0.1]), 1.3),
        SqrtSparsitySet(1, 2),
        PolytopeHull(np.array([[1.0, 0.0], [0.0, 1.0], [-0.8, -0.5]])),
        Subspace(np.array([[1.0], [0.0]])),
    ]


# ---------------------------------------------------------------------------
# projection


def test_l1_interior_point_fixed():
    r = project(L1Ball(1.0, 2), np.array([0.2, -0.3]))
    assert np.allclose(r.point, [0.2, -0.3])
    assert r.distance == 0.0


def test_l1_projection_thresholds():
    # KKT threshold for (3, 1) onto the unit l1 ball is 2
    r = project(L1Ball(1.0, 2), np.array([3.0, 1.0]))
    assert np.allclose(r.point, [1.0, 0.0], atol=1e-12)


def test_subspace_projection():
    r = project(Subspace(np.array([[1.0], [0.0]])), np.array([3.0, 4.0]))
    assert np.allclose(r.point, [3.0, 0.0])


def test_projection_matches_mesh_oracle():
    # the mesh argmin localizes tangentially only to sqrt(spacing) on curved
    # boundaries, so the oracle comparison is on the attained distance
    gen = np.random.default_rng(3)
    for set_ in _variants_2d():
        for _ in range(4):
            p = gen.uniform(-3, 3, 2)
            res = project(set_, p)
            d_oracle = np.linalg.norm(p - mesh_project(set_, p))
            assert res.distance <= d_oracle + 1e-9, (set_, p)
            assert d_oracle <= res.distance + 1e-4, (set_, p)
            assert membership(set_, res.point, 1e-8)


@given(st.integers(0, 2000), st.sampled_from(range(5)))
def test_projection_idempotent(seed, idx):
    set_ = _variants_2d()[idx]
    gen = np.random.default_rng(seed)
    p = gen.uniform(-4, 4, 2)
    z1 = project(set_, p).point
    z2 = project(set_, z1).point
    assert np.linalg.norm(z1 - z2) <= 1e-9


@given(st.integers(0, 2000), st.sampled_from(range(5)))
def test_projection_nonexpansive(seed, idx):
    set_ = _variants_2d()[idx]
    gen = np.random.default_rng(seed)
    p, q = gen.uniform(-4, 4, 2), gen.uniform(-4, 4, 2)
    zp = project(set_, p).point
    zq = project(set_, q).point
    assert np.linalg.norm(zp - zq) <= np.linalg.norm(p - q) + 1e-9


def test_projection_variational_inequality():
    gen = np.random.default_rng(11)
    set_ = L1Ball(1.5, 6)
    p = gen.uniform(-3, 3, 6)
    z = project(set_, p).point
    # <p - z, q - z> <= 0 for feasible q
    for _ in range(200):
        q = gen.uniform(-1, 1, 6)
        q *= 1.5 / max(np.abs(q).sum(), 1.5)
        assert float((p - z) @ (q - z)) <= 1e-9


# ---------------------------------------------------------------------------
# support values


def test_support_examples():
    assert support_value(L1Ball(2.0, 3), np.array([1.0, -3.0, 2.0])) == pytest.approx(6.0)
    poly = PolytopeHull(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert support_value(poly, np.array([2.0, 5.0])) == pytest.approx(5.0)
    sub = Subspace(np.eye(3)[:, :2])
    assert support_value(sub, np.array([0.5, 0.0, 0.0])) == math.inf
    assert support_value(sub, np.array([0.0, 0.0, 2.0])) == 0.0


def test_l2ball_support_formula():
    c = np.array([0.3, -0.4, 1.0])
    set_ = L2Ball(c, 2.0)
    g = np.array([1.0, 2.0, -0.5])
    assert support_value(set_, g) == pytest.approx(float(g @ c) + 2.0 * np.linalg.norm(g))


def test_sqrt_sparsity_support_against_line_search():
    from scipy.optimize import minimize_scalar

    gen = np.random.default_rng(0)
    for n, s, scale in [(16, 4, 1.0), (32, 3, 0.7), (8, 8, 2.0)]:
        set_ = SqrtSparsitySet(s, n, scale)
        for _ in range(5):
            g = gen.standard_normal(n)
            r1, r2 = scale * math.sqrt(s), scale

            def phi(th):
                soft = np.maximum(np.abs(g) - th, 0.0)
                return th * r1 + r2 * np.linalg.norm(soft)

            ref = minimize_scalar(phi, bounds=(0.0, float(np.max(np.abs(g)))),
                                  method="bounded", options={"xatol": 1e-13}).fun
            assert support_value(set_, g) == pytest.approx(float(ref), abs=1e-9)


@given(st.integers(0, 2000), st.sampled_from([0, 1, 2, 3]))
def test_support_subadditive(seed, idx):
    set_ = _variants_2d()[idx]  # bounded variants only
    gen = np.random.default_rng(seed)
    g1, g2 = gen.standard_normal(2), gen.standard_normal(2)
    lhs = support_value(set_, g1 + g2)
    assert lhs <= support_value(set_, g1) + support_value(set_, g2) + 1e-9


# ---------------------------------------------------------------------------
# membership


def test_membership_examples():
    assert membership(L1Ball(1.0, 2), np.array([0.5, 0.5]), 1e-9)
    assert not membership(L1Ball(1.0, 2), np.array([0.6, 0.6]), 1e-9)
    assert membership(SqrtSparsitySet(1, 2), np.array([1.0, 0.0]), 1e-9)


# ---------------------------------------------------------------------------
# localized linear maximization


def test_localized_ball_interior():
    set_ = L2Ball(np.zeros(4), 50.0)
    g = np.array([3.0, 4.0, 0.0, 1.0])
    val = max_linear_localized(set_, np.zeros(4), 0.5, g)
    assert val == pytest.approx(0.5 * np.linalg.norm(g), rel=1e-8)


def test_localized_subspace():
    sub = Subspace(np.array([[1.0], [0.0]]))
    val = max_linear_localized(sub, np.zeros(2), 1.0, np.array([3.0, 4.0]))
    assert val == pytest.approx(3.0)


def test_localized_zero_scale():
    assert max_linear_localized(L1Ball(1.0, 2), np.zeros(2), 0.0, np.array([1.0, 1.0])) == 0.0


def test_localized_infeasible_center():
    with pytest.raises(InfeasibleCenter):
        max_linear_localized(L1Ball(1.0, 2), np.array([2.0, 2.0]), 0.5, np.ones(2))


def test_localized_matches_mesh_oracle():
    gen = np.random.default_rng(5)
    centers = {
        0: np.array([1.0, 0.0]),       # l1 vertex
        1: np.array([0.2, -0.1]),      # ball center
        2: np.array([1.0, 0.0]),       # sqrt-sparsity vertex (s=1: unit l1 ball)
        3: np.array([1.0, 0.0]),       # polytope vertex
        4: np.array([0.5, 0.0]),       # subspace point
    }
    for idx, set_ in enumerate(_variants_2d()):
        center = centers[idx]
        assert membership(set_, center, 1e-8)
        for _ in range(4):
            g = gen.standard_normal(2)
            t = float(gen.uniform(0.05, 0.6))
            val = max_linear_localized(set_, center, t, g)
            ref = mesh_localized_max(set_, center, t, g)
            assert val == pytest.approx(ref, abs=2e-4), (set_, center, t, g)


@given(st.integers(0, 2000), st.sampled_from([0, 1, 2, 3]))
def test_localized_dominance(seed, idx):
    set_ = _variants_2d()[idx]
    centers = [np.array([1.0, 0.0]), np.array([0.2, -0.1]),
               np.array([1.0, 0.0]), np.array([1.0, 0.0])]
    center = centers[idx]
    gen = np.random.default_rng(seed)
    g = gen.standard_normal(2)
    t = float(gen.uniform(0.01, 2.0))
    val = max_linear_localized(set_, center, t, g)
    cap = min(t * np.linalg.norm(g), support_value(set_, g) - float(g @ center))
    assert val <= cap + 1e-7


# ---------------------------------------------------------------------------
# Dykstra


def test_dykstra_fixed_point():
    a, b = L1Ball(2.0, 2), L2Ball(np.zeros(2), 1.0)
    p = np.array([0.3, 0.2])
    r = dykstra_intersection_project(a, b, p)
    assert np.allclose(r.point, p, atol=1e-10)


def test_dykstra_ball_slab():
    slab = PolytopeHull(np.array([[0.5, -2.0], [0.5, 2.0], [2.0, -2.0], [2.0, 2.0]]))
    ball = L2Ball(np.zeros(2), 1.0)
    r = dykstra_intersection_project(ball, slab, np.array([2.0, 0.0]))
    assert np.allclose(r.point, [1.0, 0.0], atol=1e-7)


def test_dykstra_l1_l2():
    r = dykstra_intersection_project(L1Ball(2.0, 2), L2Ball(np.zeros(2), 1.0),
                                     np.array([3.0, 3.0]))
    assert np.allclose(r.point, [math.sqrt(2) / 2] * 2, atol=1e-8)


def test_dykstra_reports_no_convergence():
    with pytest.raises(NoConvergence) as exc:
        dykstra_intersection_project(L1Ball(2.0, 2), L2Ball(np.zeros(2), 1.0),
                                     np.array([3.0, 3.0]), max_iters=1, tol=1e-15)
    assert exc.value.last_iterate is not None
    assert exc.value.residual is not None


# ---------------------------------------------------------------------------
# dictionary images


def test_dictionary_orthonormal_projection():
    gen = np.random.default_rng(7)
    d_mat, _ = np.linalg.qr(gen.standard_normal((6, 2)))
    inner = L1Ball(1.0, 2)
    set_ = DictionaryImage(d_mat, inner)
    p = gen.standard_normal(6)
    z = project(set_, p).point
    z_ref = d_mat @ project(inner, d_mat.T @ p).point
    assert np.allclose(z, z_ref, atol=1e-12)
    g = gen.standard_normal(6)
    assert support_value(set_, g) == pytest.approx(support_value(inner, d_mat.T @ g))


def test_dictionary_non_orthonormal_rejects_projection():
    d_mat = np.array([[2.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    set_ = DictionaryImage(d_mat, L1Ball(1.0, 2))
    with pytest.raises(UnsupportedProjection):
        project(set_, np.ones(3))
    # support still works through the pullback
    g = np.array([1.0, -1.0, 0.5])
    assert support_value(set_, g) == pytest.approx(
        support_value(L1Ball(1.0, 2), d_mat.T @ g))


def test_dictionary_polytope_inner_materializes():
    d_mat = np.array([[2.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    inner = PolytopeHull(np.array([[1.0, 0.0], [0.0, 1.0]]))
    set_ = DictionaryImage(d_mat, inner)
    z = project(set_, np.array([2.0, 0.0, 0.5])).point
    assert np.allclose(z, [2.0, 0.0, 0.5], atol=1e-6)  # the vertex D v1 itself
