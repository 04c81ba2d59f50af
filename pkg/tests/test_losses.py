import math

import numpy as np
import pytest

from stabilab import LabeledExample, certify_loss, make_loss
from stabilab.exceptions import DomainError
from stabilab.losses import margin_slopes, margin_values


def test_margin_values_hand_cases():
    margins = np.array([0.0, 1.0, 2.0, -1.0])
    labels = np.array([1.0, 1.0, 1.0, 1.0])
    hinge = margin_values("hinge", margins, labels)
    assert np.allclose(hinge, [1.0, 0.0, 0.0, 2.0])
    logistic = margin_values("logistic", margins, labels)
    assert logistic[0] == pytest.approx(math.log(2.0))
    assert np.all(np.diff(logistic[:3]) < 0)
    squared = margin_values("squared", margins, np.array([0.5, 0.5, 0.5, 0.5]))
    assert np.allclose(squared, [0.25, 0.25, 2.25, 2.25])


def test_margin_slopes_hand_cases():
    labels = np.ones(3)
    slopes = margin_slopes("hinge", np.array([0.5, 1.0, 1.5]), labels)
    # At the kink (margin exactly 1) the flat piece is active, slope 0.
    assert np.allclose(slopes, [-1.0, 0.0, 0.0])
    lg = margin_slopes("logistic", np.array([0.0]), labels[:1])
    assert lg[0] == pytest.approx(-0.5)
    sq = margin_slopes("squared", np.array([2.0]), np.array([0.5]))
    assert sq[0] == pytest.approx(3.0)


def test_margin_values_rejects_unknown_kind():
    with pytest.raises(ValueError):
        margin_values("absolute", np.zeros(1), np.zeros(1))


@pytest.mark.parametrize(
    "kind,radius,expected_l,expected_m,expected_s",
    [
        ("hinge", 1.0, 1.0, 2.0, None),
        ("logistic", 1.0, 1.0, math.log(1.0 + math.e), 0.25),
        ("squared", 1.0, 4.0, 4.0, 2.0),
        ("squared", 3.0, 8.0, 16.0, 2.0),
    ],
)
def test_certified_constants_table(kind, radius, expected_l, expected_m, expected_s):
    loss = make_loss(kind, 1.0, radius, 1.0)
    consts = loss.constants()
    assert consts.lipschitz == pytest.approx(expected_l)
    assert consts.bound == pytest.approx(expected_m)
    if expected_s is None:
        assert consts.smoothness is None
    else:
        assert consts.smoothness == pytest.approx(expected_s)
    assert consts.strong_convexity == 0.0


def test_ridge_augmentation_shifts_constants():
    base = make_loss("logistic", 2.0, 1.5)
    aug = make_loss("logistic", 2.0, 1.5, ridge_term=0.25)
    cb, ca = base.constants(), aug.constants()
    assert ca.lipschitz == pytest.approx(cb.lipschitz + 2 * 0.25 * 1.5 / 2.0)
    assert ca.bound == pytest.approx(cb.bound + 0.25 * 1.5**2)
    assert ca.smoothness == pytest.approx(cb.smoothness + 0.5)
    assert ca.strong_convexity == pytest.approx(0.5)


def test_value_at_zero():
    assert make_loss("hinge", 1.0, 1.0).value_at_zero() == 1.0
    assert make_loss("logistic", 1.0, 1.0).value_at_zero() == pytest.approx(math.log(2.0))
    assert make_loss("squared", 1.0, 1.0, 0.5).value_at_zero() == pytest.approx(0.25)


def test_classification_label_bound_is_forced_to_one():
    loss = make_loss("hinge", 1.0, 1.0, label_bound=7.0)
    assert loss.label_bound == 1.0


def test_domain_checks():
    loss = make_loss("hinge", 1.0, 0.5)
    with pytest.raises(DomainError):
        loss.check_hypothesis(np.array([0.6, 0.0]))
    with pytest.raises(DomainError):
        loss.check_example(LabeledExample(np.array([2.0, 0.0]), 1.0))
    with pytest.raises(DomainError):
        loss.check_example(LabeledExample(np.array([0.5, 0.0]), 0.5))
    reg = make_loss("squared", 1.0, 1.0, label_bound=0.25)
    with pytest.raises(DomainError):
        reg.check_example(LabeledExample(np.array([0.5, 0.0]), 0.3))


def test_evaluate_and_gradient_single_example():
    loss = make_loss("squared", 1.0, 2.0, label_bound=1.0)
    z = LabeledExample(np.array([1.0, 0.0]), 0.5)
    h = np.array([1.0, 1.0])
    assert loss.evaluate(h, z) == pytest.approx(0.25)
    assert np.allclose(loss.gradient(h, z), [1.0, 0.0])
    aug = make_loss("squared", 1.0, 2.0, label_bound=1.0, ridge_term=0.5)
    assert aug.evaluate(h, z) == pytest.approx(0.25 + 0.5 * 2.0)
    assert np.allclose(aug.gradient(h, z), [2.0, 1.0])


def test_values_raw_matches_evaluate():
    loss = make_loss("logistic", 1.0, 1.0, ridge_term=0.1)
    rng = np.random.default_rng(2)
    h = rng.normal(size=3)
    h *= 0.9 / np.linalg.norm(h)
    X = rng.normal(size=(5, 3))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    y = np.where(rng.random(5) < 0.5, -1.0, 1.0)
    vals = loss.values_raw(h, X, y)
    for j in range(5):
        z = LabeledExample(X[j], float(y[j]))
        assert vals[j] == pytest.approx(loss.evaluate(h, z))


def test_risk_gradient_raw_is_mean_of_example_gradients():
    loss = make_loss("squared", 1.0, 1.0, label_bound=0.5, ridge_term=0.2)
    rng = np.random.default_rng(4)
    h = rng.normal(size=3)
    h *= 0.8 / np.linalg.norm(h)
    X = rng.normal(size=(6, 3))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    y = rng.uniform(-0.5, 0.5, size=6)
    grads = [loss.gradient(h, LabeledExample(X[j], float(y[j]))) for j in range(6)]
    assert np.allclose(loss.risk_gradient_raw(h, X, y), np.mean(grads, axis=0))


@pytest.mark.parametrize("kind", ["hinge", "logistic", "squared"])
@pytest.mark.parametrize("ridge", [0.0, 0.5])
def test_certify_loss_passes(kind, ridge):
    loss = make_loss(kind, 1.0, 1.0, 1.0, ridge_term=ridge)
    report = certify_loss(loss, points=200, triples=2000, seed=11)
    assert report["ok"], report
    assert report["finite_difference"]["max_rel_error"] <= 1e-5
    if kind == "hinge":
        assert report["smoothness"] is None
    else:
        assert report["smoothness"]["ok"]


def test_certify_loss_validates_budgets():
    loss = make_loss("squared", 1.0, 1.0)
    with pytest.raises(ValueError):
        certify_loss(loss, points=0)
