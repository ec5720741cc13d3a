import numpy as np
import pytest

from fundrank import anfis
from fundrank.anfis import AnfisConfig, MembershipFunction, RuleBase, init_rulebase
from fundrank.errors import (
    DegenerateFiring,
    DimensionMismatch,
    NonFiniteLoss,
    RuleCapExceeded,
    UnderDetermined,
)


def _rulebase(d=2, m=2, lo=-2.0, hi=2.0) -> RuleBase:
    X = np.array([[lo] * d, [hi] * d])
    return init_rulebase(AnfisConfig(mfs_per_input=m), X)


class TestMembership:
    def test_unity_at_center(self):
        mf = MembershipFunction(a=1.3, b=2.0, c=0.7)
        assert mf.value(0.7) == 1.0

    def test_half_at_unit_distance(self):
        mf = MembershipFunction(a=1.0, b=1.0, c=0.0)
        assert mf.value(1.0) == pytest.approx(0.5)
        assert mf.value(-1.0) == pytest.approx(0.5)

    def test_vanishes_far_away(self):
        mf = MembershipFunction(a=1.0, b=2.0, c=0.0)
        assert mf.value(1e6) < 1e-20
        rb = _rulebase(d=1)
        mu = anfis.layer1_memberships(rb, np.array([[1e8]]))
        assert np.all(mu >= 0.0) and np.all(mu <= 1.0)

    def test_positive_parameters_enforced(self):
        with pytest.raises(ValueError):
            MembershipFunction(a=0.0, b=1.0, c=0.0)
        with pytest.raises(ValueError):
            MembershipFunction(a=1.0, b=-1.0, c=0.0)

    def test_dimension_checked(self):
        rb = _rulebase(d=3)
        with pytest.raises(DimensionMismatch):
            anfis.layer1_memberships(rb, np.zeros((1, 2)))

    def test_layer1_matches_scalar_definition(self):
        rb = _rulebase(d=2, m=2)
        x = np.array([[0.3, -1.2]])
        mu = anfis.layer1_memberships(rb, x)
        for j, mfs in enumerate(rb.membership_functions):
            for k, mf in enumerate(mfs):
                assert mu[0, j, k] == pytest.approx(mf.value(x[0, j]), rel=1e-12)


class TestFiring:
    def test_all_unity_memberships(self):
        rb = _rulebase(d=2, m=2)
        mu = np.ones((1, 2, 2))
        w = anfis.layer2_firing(rb, mu)
        np.testing.assert_array_equal(w, 1.0)

    def test_single_input_passthrough(self):
        rb = _rulebase(d=1, m=2)
        mu = np.array([[[0.7, 0.2]]])
        w = anfis.layer2_firing(rb, mu)
        np.testing.assert_allclose(np.sort(w[0]), [0.2, 0.7])

    def test_product_of_two(self):
        rb = _rulebase(d=2, m=1)
        mu = np.array([[[0.5], [0.4]]])
        w = anfis.layer2_firing(rb, mu)
        assert w[0, 0] == pytest.approx(0.2)


class TestNormalize:
    def test_symmetric_pair(self):
        np.testing.assert_allclose(anfis.layer3_normalize(np.array([[1.0, 1.0]])), [[0.5, 0.5]])

    def test_single_rule(self):
        np.testing.assert_allclose(anfis.layer3_normalize(np.array([[0.37]])), [[1.0]])

    def test_three_to_one(self):
        np.testing.assert_allclose(anfis.layer3_normalize(np.array([[3.0, 1.0]])), [[0.75, 0.25]])

    def test_rows_sum_to_one_property(self):
        rng = np.random.default_rng(0)
        rb = _rulebase(d=3, m=2)
        X = rng.uniform(-5, 5, size=(1000, 3))
        wbar = anfis.layer3_normalize(anfis.layer2_firing(rb, anfis.layer1_memberships(rb, X)))
        np.testing.assert_allclose(wbar.sum(axis=1), 1.0, atol=1e-12)

    def test_degenerate_total(self):
        with pytest.raises(DegenerateFiring):
            anfis.layer3_normalize(np.array([[0.0, 0.0]]))


class TestOutput:
    def test_single_rule_polynomial(self):
        rb = _rulebase(d=1, m=1)
        rb.consequents[0] = [2.0, 1.0]  # f = 2x + 1
        out = anfis.layer4_5_output(rb, np.array([[1.0]]), np.array([[3.0]]))
        assert out[0] == pytest.approx(7.0)

    def test_constant_consequents_pass_through(self):
        rb = _rulebase(d=2, m=2)
        rb.consequents[:, :] = 0.0
        rb.consequents[:, -1] = 4.25
        rng = np.random.default_rng(1)
        X = rng.uniform(-2, 2, size=(50, 2))
        np.testing.assert_allclose(rb.predict(X), 4.25, atol=1e-12)

    def test_weighted_average(self):
        rb = _rulebase(d=1, m=2)
        wbar = np.array([[0.25, 0.75]])
        rb.consequents[0] = [0.0, 4.0]
        rb.consequents[1] = [0.0, 8.0]
        out = anfis.layer4_5_output(rb, wbar, np.array([[0.0]]))
        assert out[0] == pytest.approx(7.0)

    def test_convex_combination_bounds(self):
        rng = np.random.default_rng(2)
        rb = _rulebase(d=2, m=2)
        rb.consequents[:] = rng.normal(size=rb.consequents.shape)
        X = rng.uniform(-3, 3, size=(200, 2))
        xext = np.hstack([X, np.ones((200, 1))])
        f = xext @ rb.consequents.T
        out = rb.predict(X)
        assert np.all(out <= f.max(axis=1) + 1e-9)
        assert np.all(out >= f.min(axis=1) - 1e-9)


class TestTrain:
    def test_single_rule_recovers_linear_map(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(40, 3))
        y = X @ np.array([1.5, -2.0, 0.25]) + 3.0
        config = AnfisConfig(mfs_per_input=1, epochs=1)
        rb = init_rulebase(config, X)
        trained, report = anfis.train(rb, X, y, config)
        assert report.final_train_rmse < 1e-8
        np.testing.assert_allclose(trained.consequents[0], [1.5, -2.0, 0.25, 3.0], atol=1e-6)

    def test_rule_cap_guards_grid_explosion(self):
        X = np.zeros((10, 21))
        with pytest.raises(RuleCapExceeded):
            init_rulebase(AnfisConfig(mfs_per_input=2, rule_cap=256), X)

    def test_under_determined_rejected(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(10, 2))  # 4 rules * 3 params = 12 > 10
        config = AnfisConfig(mfs_per_input=2)
        rb = init_rulebase(config, X)
        with pytest.raises(UnderDetermined):
            anfis.train(rb, X, np.zeros(10), config)

    def test_premise_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(-2, 2, size=(30, 2))
        y = rng.normal(size=30)
        rb = _rulebase(d=2, m=2)
        rb.consequents[:] = rng.normal(size=rb.consequents.shape) * 0.5

        def loss():
            return float(np.mean((rb.predict(X) - y) ** 2))

        mu = anfis.layer1_memberships(rb, X)
        w = anfis.layer2_firing(rb, mu)
        wbar = anfis.layer3_normalize(w)
        grads = anfis._premise_gradients(rb, X, y, mu, w, wbar)
        h = 1e-6
        for arr, grad in zip((rb.a, rb.b, rb.c), grads):
            numeric = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + h
                up = loss()
                arr[idx] = orig - h
                down = loss()
                arr[idx] = orig
                numeric[idx] = (up - down) / (2 * h)
            err = np.abs(grad - numeric) / np.maximum(
                1e-3, np.maximum(np.abs(grad), np.abs(numeric))
            )
            assert err.max() < 1e-4

    def test_lse_step_never_hurts_fixed_premises(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(-2, 2, size=(60, 2))
        y = np.sin(X[:, 0]) + 0.5 * X[:, 1] + rng.normal(scale=0.1, size=60)
        config = AnfisConfig(mfs_per_input=2, epochs=5)
        rb = init_rulebase(config, X)
        trained, report = anfis.train(rb, X, y, config)
        # re-solving with the trained premises cannot worsen the final MSE
        mse_before = report.final_train_rmse**2
        mu = anfis.layer1_memberships(trained, X)
        wbar = anfis.layer3_normalize(anfis.layer2_firing(trained, mu))
        xext = np.hstack([X, np.ones((60, 1))])
        trained.consequents = anfis._solve_consequents(wbar, xext, y, config.ridge)
        mse_after = float(np.mean((trained.predict(X) - y) ** 2))
        assert mse_after <= mse_before * (1 + 1e-6)

    def test_training_reduces_loss(self):
        rng = np.random.default_rng(7)
        X = rng.uniform(-2, 2, size=(80, 2))
        y = np.tanh(X[:, 0]) * 3.0 - X[:, 1] ** 2 + rng.normal(scale=0.05, size=80)
        config = AnfisConfig(mfs_per_input=2, epochs=40)
        rb = init_rulebase(config, X)
        _, report = anfis.train(rb, X, y, config)
        assert report.loss_trace[-1] <= report.loss_trace[0]

    def test_non_finite_detected(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(30, 2))
        y = np.full(30, np.inf)
        config = AnfisConfig(mfs_per_input=1, epochs=3)
        rb = init_rulebase(config, X)
        with pytest.raises(NonFiniteLoss):
            anfis.train(rb, X, y, config)


def test_serialization_roundtrip():
    rng = np.random.default_rng(9)
    X = rng.uniform(-1, 1, size=(50, 2))
    y = X @ np.array([1.0, -1.0])
    config = AnfisConfig(mfs_per_input=2, epochs=3)
    rb = init_rulebase(config, X)
    trained, _ = anfis.train(rb, X, y, config)
    clone = RuleBase.from_dict(trained.to_dict())
    np.testing.assert_array_equal(trained.predict(X), clone.predict(X))


def test_membership_function_listing():
    rb = _rulebase(d=2, m=3)
    mfs = rb.membership_functions
    assert len(mfs) == 2 and len(mfs[0]) == 3
    assert all(mf.a > 0 and mf.b > 0 for row in mfs for mf in row)
