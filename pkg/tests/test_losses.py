import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from siren.core import RngStream, identity_factor, sample_ensemble
from siren.errors import RangeViolation
from siren.losses import (
    Glm,
    LogisticPaper,
    Square,
    check_conditions,
    empirical_gradient,
    empirical_loss,
    loss_d1,
    loss_d2,
    loss_value,
)

ALL_LOSSES = [Square(), LogisticPaper(), Glm("square"), Glm("logcosh")]


def _labels_for(loss, gen, m):
    if loss.value_range == "sign":
        return gen.choice((-1.0, 1.0), size=m)
    return gen.standard_normal(m)


def test_square_values():
    sq = Square()
    assert loss_value(sq, 2.0, 0.5) == pytest.approx(1.125)
    assert loss_d1(sq, 2.0, 0.5) == pytest.approx(1.5)
    assert loss_d2(sq, 2.0, 0.5) == pytest.approx(1.0)


def test_logistic_values_at_zero():
    lg = LogisticPaper()
    assert loss_value(lg, 0.0, 1.0) == pytest.approx(math.log(2.0))
    assert loss_d1(lg, 0.0, 1.0) == pytest.approx(-1.5)
    assert loss_d2(lg, 0.0, 1.0) == pytest.approx(0.25)


def test_logistic_stable_at_extremes():
    lg = LogisticPaper()
    for v in (-1000.0, -40.0, 40.0, 1000.0):
        for y in (-1.0, 1.0):
            assert np.isfinite(loss_value(lg, v, y))
            assert np.isfinite(loss_d1(lg, v, y))
            assert 0.0 <= loss_d2(lg, v, y) <= 0.25


def test_glm_square_reduces_to_shifted_square():
    glm = Glm("square")
    assert loss_d1(glm, 3.0, 1.0) == pytest.approx(2.0)
    assert loss_d2(glm, 3.0, 1.0) == pytest.approx(1.0)


def test_logistic_rejects_bad_labels():
    with pytest.raises(RangeViolation):
        loss_value(LogisticPaper(), 0.0, 0.5)


def test_empirical_loss_examples():
    gen = np.random.default_rng(0)
    ens = sample_ensemble(5, identity_factor(3), RngStream(1))
    x = gen.standard_normal(3)
    y = ens.matrix @ x
    assert empirical_loss(Square(), ens, y, x) == pytest.approx(0.0, abs=1e-15)

    one = sample_ensemble(1, identity_factor(2), RngStream(2))
    x1 = np.linalg.lstsq(one.matrix, np.array([2.0]), rcond=None)[0]
    assert empirical_loss(Square(), one, np.array([0.0]), x1) == pytest.approx(2.0)

    labels = gen.choice((-1.0, 1.0), size=5)
    ens3 = sample_ensemble(5, identity_factor(3), RngStream(3))
    assert empirical_loss(LogisticPaper(), ens3, labels, np.zeros(3)) == pytest.approx(math.log(2.0))


def test_gradient_square_closed_form():
    gen = np.random.default_rng(4)
    ens = sample_ensemble(12, identity_factor(5), RngStream(4))
    y = gen.standard_normal(12)
    x = gen.standard_normal(5)
    g = empirical_gradient(Square(), ens, y, x)
    ref = ens.matrix.T @ (ens.matrix @ x - y) / 12
    assert np.allclose(g, ref, atol=1e-14)


def test_gradient_vanishes_at_least_squares_solution():
    gen = np.random.default_rng(5)
    ens = sample_ensemble(20, identity_factor(6), RngStream(5))
    y = gen.standard_normal(20)
    xstar = np.linalg.lstsq(ens.matrix, y, rcond=None)[0]
    assert np.linalg.norm(empirical_gradient(Square(), ens, y, xstar)) <= 1e-8


@pytest.mark.parametrize("loss", ALL_LOSSES, ids=lambda l: l.kind)
def test_gradient_matches_finite_differences(loss):
    gen = np.random.default_rng(6)
    ens = sample_ensemble(9, identity_factor(5), RngStream(6))
    y = _labels_for(loss, gen, 9)
    x = 0.5 * gen.standard_normal(5)
    g = empirical_gradient(loss, ens, y, x)
    h = 1e-6
    fd = np.zeros(5)
    for i in range(5):
        e = np.zeros(5)
        e[i] = h
        fd[i] = (empirical_loss(loss, ens, y, x + e) - empirical_loss(loss, ens, y, x - e)) / (2 * h)
    scale = max(np.max(np.abs(g)), 1.0)
    assert np.max(np.abs(g - fd)) / scale <= 1e-5


@given(st.integers(0, 500), st.sampled_from(range(len(ALL_LOSSES))))
def test_derivative_consistency(seed, idx):
    loss = ALL_LOSSES[idx]
    gen = np.random.default_rng(seed)
    v = float(gen.uniform(-3, 3))
    y = float(gen.choice((-1.0, 1.0)) if loss.value_range == "sign" else gen.uniform(-2, 2))
    h = 1e-5
    d1_fd = (loss_value(loss, v + h, y) - loss_value(loss, v - h, y)) / (2 * h)
    d2_fd = (loss_d1(loss, v + h, y) - loss_d1(loss, v - h, y)) / (2 * h)
    assert loss_d1(loss, v, y) == pytest.approx(d1_fd, rel=1e-6, abs=1e-7)
    assert loss_d2(loss, v, y) == pytest.approx(d2_fd, rel=1e-6, abs=1e-6)


@given(st.integers(0, 500), st.sampled_from(range(len(ALL_LOSSES))))
def test_d1_monotone_in_v(seed, idx):
    loss = ALL_LOSSES[idx]
    gen = np.random.default_rng(seed)
    y = float(gen.choice((-1.0, 1.0)) if loss.value_range == "sign" else gen.uniform(-2, 2))
    vs = np.sort(gen.uniform(-5, 5, 25))
    d1s = np.asarray(loss_d1(loss, vs, np.full_like(vs, y)))
    assert np.all(np.diff(d1s) >= -1e-12)


def test_check_conditions_square():
    rep = check_conditions(Square(), 3.0, 2.0)
    assert rep.lipschitz_d1_in_y == pytest.approx(1.0)
    assert rep.local_curvature == pytest.approx(1.0)
    assert rep.convexity_violations == 0


def test_check_conditions_logistic():
    rep = check_conditions(LogisticPaper(), 2.0, 1.0)
    # curvature minimum sits at the box corner v = 2: s(1-s) with s = 1/(1+e^2)
    s = 1.0 / (1.0 + math.exp(2.0))
    assert rep.local_curvature == pytest.approx(s * (1 - s), abs=1e-6)
    assert rep.convexity_violations == 0
    # |d1(v,+1) - d1(v,-1)| = 3 for every v, so the two-point quotient is 1.5
    assert rep.lipschitz_d1_in_y == pytest.approx(1.5, abs=1e-9)


def test_curvature_positive_for_strictly_convex():
    for loss in (LogisticPaper(), Glm("logcosh")):
        rep = check_conditions(loss, 5.0, 1.0, resolution=101)
        assert rep.local_curvature > 0
