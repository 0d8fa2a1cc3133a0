import math

import numpy as np
import pytest

from poincare_linear import datagen
from poincare_linear import geometry as geo
from poincare_linear import svm
from poincare_linear.errors import UsageError


def test_objective_examples():
    v = np.array([[1.0, 0.0]])
    assert svm.svm_objective(np.zeros(2), v, [1], 1.0) == 1.0
    assert svm.svm_objective([1.0, 0.0], v, [1], 1.0) == 0.5
    assert svm.svm_objective([1.0, 0.0], v, [-1], 1.0) == 2.5
    rng = np.random.default_rng(0)
    many = rng.standard_normal((37, 3))
    assert svm.svm_objective(np.zeros(3), many, np.ones(37), 7.0) == 37 * 7.0


def test_objective_convexity_probe():
    rng = np.random.default_rng(1)
    v = rng.standard_normal((200, 4))
    y = rng.choice([-1, 1], 200)
    for _ in range(200):
        w1, w2 = rng.standard_normal(4) * 3, rng.standard_normal(4) * 3
        lam = rng.random()
        lhs = svm.svm_objective(lam * w1 + (1 - lam) * w2, v, y, 5.0)
        rhs = lam * svm.svm_objective(w1, v, y, 5.0) + (1 - lam) * svm.svm_objective(w2, v, y, 5.0)
        assert lhs <= rhs + 1e-9


def test_averaged_sample_gradient_matches_finite_difference():
    rng = np.random.default_rng(2)
    n, C = 150, 3.0
    v = rng.standard_normal((n, 3))
    y = rng.choice([-1, 1], n)
    checked = 0
    while checked < 10:
        w = rng.standard_normal(3)
        if np.min(np.abs(1 - y * (v @ w))) < 1e-3:
            continue  # too close to a hinge kink
        avg = np.mean([svm.sample_gradient(w, v[i], int(y[i]), n, C) for i in range(n)], axis=0)
        h = 1e-6
        fd = np.array(
            [
                (svm.svm_objective(w + h * e, v, y, C) - svm.svm_objective(w - h * e, v, y, C)) / (2 * h)
                for e in np.eye(3)
            ]
        )
        np.testing.assert_allclose(avg, fd, rtol=1e-4, atol=1e-6 * np.abs(fd).max())
        checked += 1


def test_two_symmetric_points_hard_margin_limit():
    v = np.array([[1.0, 0.0], [-1.0, 0.0]])
    w, trace, _, _ = svm.sgd_solve(v, [1, -1], svm.SvmConfig(C=1000.0, max_iter=200_000), seed=0)
    np.testing.assert_allclose(w, [1.0, 0.0], atol=2e-2)
    assert trace[0] == 2 * 1000.0


def test_one_class_with_small_c():
    rng = np.random.default_rng(0)
    x = np.array([0.5, 0.1]) + 0.1 * rng.standard_normal((100, 2))
    p = np.zeros(2)
    C = 1e-3
    model, _ = svm.svm_train(x, np.ones(100), p, svm.SvmConfig(C=C, tol=1e-12, max_iter=200_000), seed=0)
    # every hinge stays active at small C, so the minimiser is C Σ v_i
    exact = C * geo.log_map(p, x).sum(axis=0)
    assert np.linalg.norm(model.w) < 1.0
    np.testing.assert_allclose(model.w, exact, rtol=0.05)
    assert model.accuracy(x, np.ones(100)) == 1.0


def test_hard_margin_feasibility_on_wide_margin_data():
    inst = datagen.sample_separable(1000, 2, 0.19, 0.3, seed=3)
    model, _ = svm.svm_train(inst.points, inst.labels, inst.truth.p, svm.SvmConfig(C=1000.0), seed=0)
    v = geo.log_map(inst.truth.p, inst.points)
    assert np.min(inst.labels * (v @ model.w)) >= 1 - 1e-3


def test_planted_training_accuracy_and_decision_invariance():
    inst = datagen.sample_separable(5000, 2, 0.38, 0.01, seed=4)
    model, trace = svm.svm_train(inst.points, inst.labels, inst.truth.p, seed=1)
    assert model.accuracy(inst.points, inst.labels) == 1.0
    np.testing.assert_array_equal(model.predict(inst.points), geo.decide_ball(inst.points, model.hyperplane))
    assert trace[0] == 5000 * svm.SYNTHETIC_C


def test_euclidean_baseline_near_perfect_at_origin():
    inst = datagen.sample_separable(3000, 2, 0.0, 0.05, 0.6, seed=5)
    model, _ = svm.euclidean_svm_train(inst.points, inst.labels, seed=0)
    assert model.kind == "euclidean"
    assert model.accuracy(inst.points, inst.labels) >= 0.99
    with pytest.raises(UsageError):
        model.hyperplane


def test_training_is_deterministic():
    inst = datagen.sample_separable(1000, 3, 0.19, 0.05, seed=6)
    a, ta = svm.svm_train(inst.points, inst.labels, inst.truth.p, seed=9)
    b, tb = svm.svm_train(inst.points, inst.labels, inst.truth.p, seed=9)
    np.testing.assert_array_equal(a.w, b.w)
    np.testing.assert_array_equal(ta, tb)


def test_max_iter_caps_steps():
    inst = datagen.sample_separable(100, 2, 0.19, 0.05, seed=7)
    model, trace = svm.svm_train(inst.points, inst.labels, inst.truth.p, svm.SvmConfig(max_iter=250), seed=0)
    assert model.steps == 250
    assert len(trace) == 4  # f(0) plus windows of 100, 100, 50


def test_margin_lower_bound():
    assert svm.margin_lower_bound(svm.LinearModel(np.zeros(2), np.array([1.0, 0.0]))) == pytest.approx(2.0, rel=1e-12)
    rng = np.random.default_rng(8)
    for _ in range(50):
        p = rng.standard_normal(3)
        p *= 0.8 * rng.random() / np.linalg.norm(p)
        w = rng.standard_normal(3) * rng.uniform(0.5, 20)
        m = svm.LinearModel(p, w)
        sigma = float(geo.conformal_factor(p))
        assert svm.margin_lower_bound(m) == pytest.approx(sigma / np.linalg.norm(w), rel=1e-12)
        assert svm.margin_lower_bound(svm.LinearModel(p, w / 2)) == pytest.approx(
            2 * svm.margin_lower_bound(m), rel=1e-12
        )
    with pytest.raises(UsageError):
        svm.margin_lower_bound(svm.LinearModel(np.zeros(2), np.zeros(2)))


def test_margin_lower_bound_holds_on_feasible_model():
    inst = datagen.sample_separable(1000, 2, 0.19, 0.3, seed=3)
    model, _ = svm.svm_train(inst.points, inst.labels, inst.truth.p, seed=0)
    v = geo.log_map(inst.truth.p, inst.points)
    ok = inst.labels * (v @ model.w) >= 1
    d = geo.hyperplane_dist(inst.points[ok], model.hyperplane)
    assert d.min() >= svm.margin_lower_bound(model) - 1e-12


def test_config_validation():
    for kwargs in [dict(C=0.0), dict(tol=0.0), dict(max_iter=0), dict(eval_every=0), dict(lr_offset=-1.0)]:
        with pytest.raises(UsageError):
            svm.SvmConfig(**kwargs)
    with pytest.raises(UsageError):
        svm.sgd_solve(np.zeros((0, 2)), [], svm.SvmConfig())
    with pytest.raises(UsageError):
        svm.sgd_solve(np.ones((2, 2)), [1, 2], svm.SvmConfig())
    with pytest.raises(UsageError):
        svm.LinearModel(np.zeros(2), np.array([np.inf, 0.0]))
    with pytest.raises(UsageError):
        svm.LinearModel(np.zeros(2), np.zeros(3))


def test_sample_gradient_branches():
    w = np.array([2.0, 0.0])
    np.testing.assert_array_equal(svm.sample_gradient(w, [1.0, 0.0], 1, 10, 1.0), w)
    np.testing.assert_array_equal(svm.sample_gradient(w, [0.5, 0.0], 1, 10, 1.0), w - 10 * np.array([0.5, 0.0]))
    assert math.isclose(svm.svm_objective(w, [[0.5, 0.0]], [1], 1.0), 2.0)
