import numpy as np
import pytest

from qdselect.gp import MaternGPRegressor, matern52, mean_pairwise_distance
from qdselect.persist import load_bundle, save_bundle


def training_set(seed=0, m=60, n=5):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, size=(m, n))
    y = np.sin(3.0 * X[:, 0]) + 0.5 * X[:, 1] ** 2
    return X, y - y.mean()


class TestKernel:
    def test_value_at_zero_is_signal_variance(self):
        assert matern52(0.0, 1.3, 2.5) == pytest.approx(2.5, abs=1e-15)

    def test_strictly_decreasing_on_grid(self):
        r = np.linspace(0.0, 10.0, 200)
        k = matern52(r, 0.8, 1.0)
        assert np.all(np.diff(k) < 0.0)

    def test_positive(self):
        r = np.linspace(0.0, 50.0, 100)
        assert np.all(matern52(r, 2.0, 1.0) > 0.0)


class TestPrior:
    def test_mean_pairwise_distance(self):
        X = np.array([[0.0], [1.0], [2.0]])
        # pairs: 1, 2, 1 -> mean 4/3
        assert mean_pairwise_distance(X) == pytest.approx(4.0 / 3.0)

    def test_identical_inputs_undefined(self):
        with pytest.raises(ValueError):
            mean_pairwise_distance(np.ones((4, 2)))


class TestFitPredict:
    def test_constant_targets_predict_constant(self):
        X = np.random.default_rng(1).uniform(0, 1, (20, 3))
        model = MaternGPRegressor().fit(X, np.full(20, 3.7))
        queries = np.vstack([X[:5], X[:5] + 0.01])
        np.testing.assert_allclose(model.predict(queries), 3.7, atol=1e-9)

    def test_interpolation_residual_within_jitter_band(self):
        X, y = training_set()
        model = MaternGPRegressor(noise_var=1e-6).fit(X, y)
        pred = model.predict(X)
        resid = np.abs(pred - y).max()
        assert resid < 1e-2
        assert resid < 10.0 * np.sqrt(model.noise_var) * max(1.0, np.abs(y).max())

    def test_optimizer_does_not_worsen_likelihood(self):
        X, y = training_set(seed=2)
        model = MaternGPRegressor().fit(X, y)
        assert model.lml_ >= model.lml_at_prior_ - 1e-9

    def test_far_query_reverts_to_prior_mean(self):
        X, y = training_set(seed=3)
        model = MaternGPRegressor().fit(X, y)
        far = np.full((1, X.shape[1]), 1000.0)
        assert abs(model.predict(far)[0] - model.y_mean_) < 1e-6

    def test_identical_queries_identical_predictions(self):
        X, y = training_set(seed=4)
        model = MaternGPRegressor().fit(X, y)
        q = np.vstack([X[3], X[3]])
        p = model.predict(q)
        assert p[0] == p[1]

    def test_prediction_is_linear_in_targets(self):
        X, _ = training_set(seed=5)
        rng = np.random.default_rng(6)
        t1 = rng.normal(size=X.shape[0])
        t2 = rng.normal(size=X.shape[0])
        a, b = 0.7, -1.3
        fixed = dict(length_scale=0.5, signal_std=1.0, optimize=False)
        q = rng.uniform(0, 1, size=(10, X.shape[1]))
        p1 = MaternGPRegressor(**fixed).fit(X, t1).predict(q)
        p2 = MaternGPRegressor(**fixed).fit(X, t2).predict(q)
        p12 = MaternGPRegressor(**fixed).fit(X, a * t1 + b * t2).predict(q)
        np.testing.assert_allclose(p12, a * p1 + b * p2, atol=1e-8)

    def test_dimension_mismatch_error(self):
        X, y = training_set()
        model = MaternGPRegressor().fit(X, y)
        with pytest.raises(ValueError):
            model.predict(np.zeros((2, X.shape[1] + 1)))

    def test_single_query_matches_batch_bitwise(self):
        X, y = training_set(seed=7)
        model = MaternGPRegressor().fit(X, y)
        batch = model.predict(X[:8])
        for i in range(8):
            assert model.predict(X[i:i + 1])[0] == batch[i]


class TestLikelihoodGradient:
    def test_gradient_matches_central_differences(self):
        X, y = training_set(seed=8, m=40)
        model = MaternGPRegressor().fit(X, y)
        rng = np.random.default_rng(9)
        eps = 1e-5
        for _ in range(5):
            theta = np.array([np.log(rng.uniform(0.2, 3.0)),
                              np.log(rng.uniform(0.3, 2.0))])
            _, grad = model.log_marginal_likelihood(theta)
            for k in range(2):
                up, dn = theta.copy(), theta.copy()
                up[k] += eps
                dn[k] -= eps
                fd = (model.log_marginal_likelihood(up)[0]
                      - model.log_marginal_likelihood(dn)[0]) / (2 * eps)
                assert grad[k] == pytest.approx(fd, rel=1e-4, abs=1e-7)


class TestFallbackAndSerialization:
    def test_failed_optimization_keeps_prior(self):
        X, y = training_set(seed=10)

        class Broken(MaternGPRegressor):
            def _lml_and_grad(self, theta, R, yv):
                val, grad = super()._lml_and_grad(theta, R, yv)
                if abs(theta[0] - np.log(self.prior_seen)) > 1e-12:
                    raise RuntimeError("synthetic optimizer breakage")
                return val, grad

        model = Broken()
        model.prior_seen = mean_pairwise_distance(X)
        with pytest.warns(UserWarning):
            model.fit(X, y)
        assert model.fit_warning_ is not None
        assert model.ell_ == pytest.approx(model.prior_ell_)

    def test_roundtrip_is_bitwise(self, tmp_path):
        X, y = training_set(seed=11)
        model = MaternGPRegressor().fit(X, y)
        save_bundle(tmp_path / "gp.npz", **model.to_arrays("g_"))
        again = MaternGPRegressor.from_arrays(load_bundle(tmp_path / "gp.npz"), "g_")
        q = np.random.default_rng(12).uniform(0, 1, (20, X.shape[1]))
        np.testing.assert_array_equal(model.predict(q), again.predict(q))

    def test_estimator_params(self):
        model = MaternGPRegressor(noise_var=1e-5)
        assert model.get_params()["noise_var"] == 1e-5
