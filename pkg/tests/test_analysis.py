import math

import numpy as np
import pytest
from scipy.stats import norm

from siren.analysis import (
    default_window,
    effective_dimension,
    empirical_rsc,
    local_mean_width_mc,
    mean_width_mc,
    small_ball_q,
    taylor_remainder,
)
from siren.core import RngStream, identity_factor, sample_ensemble
from siren.errors import DegenerateSampling, InfeasibleCenter, InvalidWindow, UnboundedSet
from siren.losses import LogisticPaper, Square
from siren.observations import LinearNoise, NoCorruption, NoisySign, make_observation_set
from siren.signal_sets import L1Ball, L2Ball, PolytopeHull, SqrtSparsitySet, Subspace

from oracles import chi_mean


def _sparse_x0(stream, n, s):
    gen = stream.generator()
    sup = gen.choice(n, size=s, replace=False)
    x = np.zeros(n)
    x[sup] = gen.choice((-1.0, 1.0), size=s) / math.sqrt(s)
    return x


# ---------------------------------------------------------------------------
# widths


def test_width_of_singleton_is_zero():
    w = mean_width_mc(PolytopeHull(np.zeros((1, 5))), 500, RngStream(0))
    assert w.mean == 0.0 and w.std_error == 0.0


def test_width_unit_ball_matches_chi_mean():
    for d in (1, 4, 16):
        w = mean_width_mc(L2Ball(np.zeros(d), 1.0), 10_000, RngStream(1, (d,)))
        assert abs(w.mean - chi_mean(d)) <= 3 * w.std_error


def test_width_segment_is_folded_normal_mean():
    # conv{-e1, +e1}: width E|g_1| = sqrt(2/pi); also the convex-hull invariance
    seg = PolytopeHull(np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]))
    w = mean_width_mc(seg, 20_000, RngStream(2))
    assert abs(w.mean - math.sqrt(2 / math.pi)) <= 3 * w.std_error


def test_width_unbounded_set_rejected():
    with pytest.raises(UnboundedSet):
        mean_width_mc(Subspace(np.eye(3)[:, :1]), 100, RngStream(3))


def test_local_width_subspace_scales_with_chi_mean():
    sub = Subspace(np.eye(24)[:, :4])
    w = local_mean_width_mc(sub, np.zeros(24), 0.1, 10_000, RngStream(4))
    assert abs(w.mean - 0.1 * chi_mean(4)) <= 3 * w.std_error


def test_local_width_below_global():
    sets = [L1Ball(1.0, 8), L2Ball(np.zeros(8), 1.5), SqrtSparsitySet(2, 8)]
    centers = [np.zeros(8), np.zeros(8), np.zeros(8)]
    for set_, c in zip(sets, centers):
        wg = mean_width_mc(set_, 4_000, RngStream(5))
        wl = local_mean_width_mc(set_, c, 0.3, 4_000, RngStream(6))
        joint = 3 * math.hypot(wg.std_error, wl.std_error)
        assert wl.mean <= wg.mean + joint


def test_local_width_saturates_at_large_scale():
    set_ = L1Ball(1.0, 6)
    wg = mean_width_mc(set_, 6_000, RngStream(7))
    wl = local_mean_width_mc(set_, np.zeros(6), 10.0, 6_000, RngStream(7))
    assert wl.mean == pytest.approx(wg.mean, abs=3 * math.hypot(wg.std_error, wl.std_error))


def test_local_width_infeasible_center():
    with pytest.raises(InfeasibleCenter):
        local_mean_width_mc(L1Ball(1.0, 4), np.ones(4), 0.1, 100, RngStream(8))


def test_effective_dimension_subspace():
    sub = Subspace(np.eye(24)[:, :4])
    w = local_mean_width_mc(sub, np.zeros(24), 0.1, 10_000, RngStream(9))
    d = effective_dimension(w)
    # (E||g_4||)^2 = 3.534...; below the algebraic dimension by Jensen
    assert d.value == pytest.approx(chi_mean(4) ** 2, abs=3 * d.std_error)
    assert d.value <= 4.0
    wg = mean_width_mc(L2Ball(np.zeros(3), 2.0), 5_000, RngStream(10))
    dg = effective_dimension(wg)
    assert dg.value == pytest.approx(wg.mean ** 2)
    assert dg.std_error == pytest.approx(2 * wg.mean * wg.std_error)


def test_effective_dimension_l1_log_trend():
    # d_t at a 1-sparse boundary point grows like s log(2n/s), far below n
    vals = {}
    for i, n in enumerate((32, 128)):
        e1 = np.zeros(n)
        e1[0] = 1.0
        w = local_mean_width_mc(L1Ball(1.0, n), e1, 0.5, 3_000, RngStream(11, (i,)))
        vals[n] = effective_dimension(w).value
    assert vals[128] <= 0.5 * 128
    ratio = vals[128] / vals[32]
    # log(2*128) / log(2*32) = 1.333; allow generous sampling slack
    assert ratio <= 2.2


def test_effective_dimension_cone_scale_invariance():
    sub = Subspace(np.eye(16)[:, :3])
    d1 = effective_dimension(local_mean_width_mc(sub, np.zeros(16), 0.2, 8_000, RngStream(12)))
    d2 = effective_dimension(local_mean_width_mc(sub, np.zeros(16), 0.4, 8_000, RngStream(13)))
    assert abs(d1.value - d2.value) <= 3 * math.hypot(d1.std_error, d2.std_error)


# ---------------------------------------------------------------------------
# Taylor remainder and RSC


def _instance(seed, n=24, m=96, model=None):
    r = RngStream(seed)
    x0 = _sparse_x0(r.child(0), n, 3)
    ens = sample_ensemble(m, identity_factor(n), r.child(1))
    obs = make_observation_set(model or LinearNoise(1.0, 0.3), ens, x0,
                               NoCorruption(), r.child(2))
    return x0, ens, obs, r


def test_taylor_remainder_zero_at_base():
    x0, ens, obs, _ = _instance(21)
    assert taylor_remainder(Square(), ens, obs.ytilde, x0, x0) == 0.0


def test_taylor_remainder_square_identity():
    gen = np.random.default_rng(22)
    x0, ens, obs, _ = _instance(22)
    for _ in range(20):
        x = gen.standard_normal(24)
        base = gen.standard_normal(24)
        rem = taylor_remainder(Square(), ens, obs.ytilde, x, base)
        ref = np.linalg.norm(ens.matrix @ (x - base)) ** 2 / (2 * ens.m)
        assert abs(rem - ref) <= 1e-10 * max(1.0, ref)


def test_taylor_remainder_convex_nonnegative():
    gen = np.random.default_rng(23)
    x0, ens, obs, _ = _instance(23, model=NoisySign("logistic", 1.0))
    for _ in range(10):
        x = gen.standard_normal(24)
        base = gen.standard_normal(24)
        assert taylor_remainder(LogisticPaper(), ens, obs.ytilde, x, base) >= -1e-10


def test_rsc_well_conditioned_matches_min_singular_value():
    # K effectively unconstrained: the Hessian-probe direction attains
    # sigma_min(A)^2 / (2m) exactly
    n, m = 16, 80
    x0, ens, obs, r = _instance(24, n=n, m=m)
    ball = L2Ball(np.zeros(n), 50.0)
    rep = empirical_rsc(Square(), ens, obs.ytilde, ball, x0, 0.1, 100, r.child(5))
    smin = np.linalg.svd(ens.matrix, compute_uv=False)[-1]
    ref = smin ** 2 / (2 * m)
    assert rep.min_ratio == pytest.approx(ref, rel=1e-6)
    assert rep.min_ratio >= 0.1
    assert rep.violating_points == 0


def test_rsc_undersampled_ball_has_flat_direction():
    n, m = 64, 16
    x0, ens, obs, r = _instance(25, n=n, m=m)
    ball = L2Ball(np.zeros(n), 50.0)
    rep = empirical_rsc(Square(), ens, obs.ytilde, ball, x0, 0.1, 100, r.child(5))
    assert rep.min_ratio <= 1e-6


def test_rsc_degenerate_sampling():
    x0, ens, obs, r = _instance(26, n=8, m=24)
    singleton = PolytopeHull(np.zeros((1, 8)))
    with pytest.raises(DegenerateSampling):
        empirical_rsc(Square(), ens, obs.ytilde, singleton, np.zeros(8), 0.1, 50, r.child(5))


# ---------------------------------------------------------------------------
# small ball


def test_small_ball_window_precondition():
    with pytest.raises(InvalidWindow):
        small_ball_q(L2Ball(np.zeros(4), 1.0), np.zeros(4), np.zeros(4), t=0.1,
                     m_window=1.0, n_window=math.inf, model=LinearNoise(1.0, 0.0),
                     eps_inf=0.0, h_samples=20, g_samples=100, rng=RngStream(0))


def test_small_ball_q_in_unit_interval():
    n = 8
    x0 = np.zeros(n)
    x0[0] = 1.0
    est = small_ball_q(L2Ball(np.zeros(n), 2.0), x0, x0, t=0.05, m_window=8.0,
                       n_window=8.0, model=NoisySign("logistic", 1.0), eps_inf=0.0,
                       h_samples=30, g_samples=20_000, rng=RngStream(1))
    assert 0.0 <= est.q_hat <= 1.0
    assert 0.0 <= est.q_hat_soft <= 1.0
    assert est.q_hat <= est.q_hat_soft  # hard event is contained in the soft one


def test_small_ball_identity_matches_normal_tail():
    # identity f, N = inf, huge M: the tail event is 4 <= |<g, h/t>| <= M/(4t),
    # whose probability is 2(Phi(M/4t) - Phi(4)) ~= 6.334e-5 per direction
    n = 12
    x0 = np.zeros(n)
    x0[0] = 1.0
    t = 0.01
    est = small_ball_q(L2Ball(np.zeros(n), 100.0), x0, x0, t=t, m_window=1e6,
                       n_window=math.inf, model=LinearNoise(1.0, 0.0), eps_inf=0.0,
                       h_samples=20, g_samples=1_500_000, rng=RngStream(2))
    target = 2 * (norm.cdf(8.0) - norm.cdf(4.0))
    # q_hat is a min over 20 unbiased per-direction estimates; allow the
    # extreme-value bias on top of the binomial noise
    se = math.sqrt(target / est.g_samples)
    assert abs(est.q_hat - target) <= 4 * se
    # the literal soft-hat event at huge M is ~ P[|g| >= 2]
    assert est.q_hat_soft == pytest.approx(2 * (1 - norm.cdf(2.0)), abs=0.003)


def test_default_window():
    m_win, n_win = default_window(0.1, mu=0.5, mean_abs_f=1.0, eps_inf=0.2)
    assert m_win == pytest.approx(max(3.2, 4.0))
    assert n_win == pytest.approx(8.2)
