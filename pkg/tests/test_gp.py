import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mobo import gp as gpmod
from mobo.gp import (FeatureSample, KernelHyperparams, PRIOR_LOG_LS_MEAN,
                     PRIOR_LOG_SD, matern52)

HP = KernelHyperparams(lengthscales=np.array([0.4, 0.4, 0.4]),
                       amplitude=1.3, noise_variance=1e-4)


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        KernelHyperparams(lengthscales=np.array([0.0]), amplitude=1.0,
                          noise_variance=0.0)
    with pytest.raises(ValueError):
        KernelHyperparams(lengthscales=np.array([1.0]), amplitude=-1.0,
                          noise_variance=0.0)
    with pytest.raises(ValueError):
        KernelHyperparams(lengthscales=np.array([1.0]), amplitude=1.0,
                          noise_variance=-1e-3)


def test_empty_fit_predicts_prior():
    gp = gpmod.fit(np.zeros((0, 3)), np.zeros(0), HP)
    m, v = gpmod.predict(gp, np.array([0.2, 0.5, 0.9]))
    assert m == 0.0
    assert v == pytest.approx(HP.amplitude)


def test_noiseless_interpolation():
    hp = KernelHyperparams(lengthscales=np.array([0.4]), amplitude=1.0,
                           noise_variance=0.0)
    gp = gpmod.fit(np.array([[0.3]]), np.array([0.7]), hp)
    m, v = gpmod.predict(gp, np.array([0.3]))
    assert m == pytest.approx(0.7, abs=1e-6)
    assert v <= 1e-8


def _dense_oracle(X, y, Xq, hp):
    K = matern52(hp, X, X) + hp.noise_variance * np.eye(len(X))
    Ki = np.linalg.inv(K)
    kq = matern52(hp, Xq, X)
    mean = kq @ Ki @ y
    var = np.array([hp.amplitude - kq[i] @ Ki @ kq[i]
                    for i in range(Xq.shape[0])])
    return mean, var


def test_predict_matches_dense_inverse_oracle(rng):
    X = rng.uniform(0, 1, size=(5, 3))
    y = rng.normal(size=5)
    gp = gpmod.fit(X, y, HP)
    Xq = rng.uniform(0, 1, size=(7, 3))
    m, v = gpmod.predict(gp, Xq)
    mo, vo = _dense_oracle(X, y, Xq, HP)
    assert np.allclose(m, mo, atol=1e-8)
    assert np.allclose(v, vo, atol=1e-8)


def test_predict_relative_accuracy_n50(rng):
    X = rng.uniform(0, 1, size=(50, 3))
    y = np.sin(3 * X).sum(axis=1) + 0.01 * rng.normal(size=50)
    gp = gpmod.fit(X, y, HP)
    Xq = rng.uniform(0, 1, size=(10, 3))
    m, v = gpmod.predict(gp, Xq)
    mo, vo = _dense_oracle(X, y, Xq, HP)
    assert np.allclose(m, mo, rtol=1e-8, atol=1e-10)
    assert np.allclose(v, vo, rtol=1e-8, atol=1e-10)


def test_variance_far_from_data(rng):
    X = np.zeros((3, 2))
    hp = KernelHyperparams(lengthscales=np.array([0.05, 0.05]), amplitude=2.0,
                           noise_variance=1e-6)
    gp = gpmod.fit(X, np.ones(3), hp)
    _, v = gpmod.predict(gp, np.array([5.0, 5.0]))  # 100 lengthscales away
    assert abs(v - hp.amplitude) < 1e-6


def test_variance_bounded_by_amplitude(rng):
    X = rng.uniform(0, 1, size=(12, 2))
    y = rng.normal(size=12)
    hp = KernelHyperparams(lengthscales=np.array([0.3, 0.3]), amplitude=0.8,
                           noise_variance=1e-3)
    gp = gpmod.fit(X, y, hp)
    _, v = gpmod.predict(gp, rng.uniform(0, 1, size=(40, 2)))
    assert np.all(v > 0)
    assert np.all(v <= hp.amplitude + 1e-9)


def test_predict_training_point_noiseless(rng):
    X = rng.uniform(0, 1, size=(6, 2))
    y = rng.normal(size=6)
    hp = KernelHyperparams(lengthscales=np.array([0.5, 0.5]), amplitude=1.0,
                           noise_variance=0.0)
    gp = gpmod.fit(X, y, hp)
    m, _ = gpmod.predict(gp, X)
    assert np.allclose(m, y, atol=1e-6)


def test_predict_dimension_mismatch():
    gp = gpmod.fit(np.zeros((1, 2)), np.zeros(1),
                   KernelHyperparams(lengthscales=np.array([1.0, 1.0]),
                                     amplitude=1.0, noise_variance=1e-3))
    with pytest.raises(ValueError):
        gpmod.predict(gp, np.zeros(3))


# -- hyperparameter sampling -------------------------------------------------

def test_sample_hyperparams_count_and_validity(rng):
    X = rng.uniform(0, 1, size=(8, 2))
    y = rng.normal(size=8)
    draws = gpmod.sample_hyperparams(X, y, 10, rng)
    assert len(draws) == 10
    for hp in draws:
        assert np.all(hp.lengthscales > 0)
        assert hp.amplitude > 0
        assert hp.noise_variance >= 0


def test_sample_hyperparams_deterministic(rng):
    X = rng.uniform(0, 1, size=(6, 2))
    y = rng.normal(size=6)
    a = gpmod.sample_hyperparams(X, y, 3, np.random.default_rng(5))
    b = gpmod.sample_hyperparams(X, y, 3, np.random.default_rng(5))
    assert all(np.allclose(x.lengthscales, z.lengthscales)
               and x.amplitude == z.amplitude
               and x.noise_variance == z.noise_variance
               for x, z in zip(a, b))


def test_sample_hyperparams_degenerate_targets(rng):
    X = rng.uniform(0, 1, size=(5, 1))
    y = np.full(5, 2.0)
    draws = gpmod.sample_hyperparams(X, y, 4, rng)
    assert all(d.amplitude > 0 for d in draws)


@pytest.mark.slow
def test_sample_hyperparams_prior_with_no_data():
    rng = np.random.default_rng(0)
    draws = gpmod.sample_hyperparams(np.zeros((0, 1)), np.zeros(0), 2000,
                                     rng, dim=1)
    logls = np.log([d.lengthscales[0] for d in draws])
    stderr = PRIOR_LOG_SD / np.sqrt(len(draws))
    # slice-sampling chain: allow inflated error for autocorrelation
    assert abs(logls.mean() - PRIOR_LOG_LS_MEAN) < 3 * stderr * 5


# -- random-feature posterior draws ------------------------------------------

def test_feature_sample_trivials():
    fs = FeatureSample(frequencies=np.zeros((1, 2)), phases=np.zeros(1),
                       weights=np.zeros(1), amplitude_scale=1.0)
    assert gpmod.eval_feature_sample(fs, np.array([0.4, 0.2])) == 0.0
    fs2 = FeatureSample(frequencies=np.zeros((1, 2)), phases=np.zeros(1),
                        weights=np.array([2.0]), amplitude_scale=0.7)
    val = gpmod.eval_feature_sample(fs2, np.array([0.4, 0.2]))
    assert val == pytest.approx(2.0 * 0.7)


def test_feature_sample_against_reimplementation(rng):
    n_feat, d = 30, 2
    fs = FeatureSample(frequencies=rng.normal(size=(n_feat, d)),
                       phases=rng.uniform(0, 2 * np.pi, n_feat),
                       weights=rng.normal(size=n_feat),
                       amplitude_scale=1.4)
    for x in rng.uniform(0, 1, size=(100, d)):
        direct = fs.amplitude_scale * np.sum(
            fs.weights * np.cos(fs.frequencies @ x + fs.phases))
        assert gpmod.eval_feature_sample(fs, x) == pytest.approx(direct)


def test_feature_sample_dimension_mismatch(rng):
    fs = FeatureSample(frequencies=rng.normal(size=(4, 2)),
                       phases=np.zeros(4), weights=np.ones(4),
                       amplitude_scale=1.0)
    with pytest.raises(ValueError):
        gpmod.eval_feature_sample(fs, np.zeros(3))


def test_draw_deterministic(rng):
    gp = gpmod.fit(np.zeros((0, 2)), np.zeros(0),
                   KernelHyperparams(lengthscales=np.array([0.3, 0.3]),
                                     amplitude=1.0, noise_variance=0.0))
    a = gpmod.draw_posterior_function(gp, 50, np.random.default_rng(3))
    b = gpmod.draw_posterior_function(gp, 50, np.random.default_rng(3))
    assert np.array_equal(a.frequencies, b.frequencies)
    assert np.array_equal(a.weights, b.weights)


@pytest.mark.slow
def test_prior_draw_moments():
    hp = KernelHyperparams(lengthscales=np.array([0.3]), amplitude=1.7,
                           noise_variance=0.0)
    gp = gpmod.fit(np.zeros((0, 1)), np.zeros(0), hp)
    rng = np.random.default_rng(11)
    x = np.array([0.42])
    vals = np.array([gpmod.eval_feature_sample(
        gpmod.draw_posterior_function(gp, 200, rng), x) for _ in range(2000)])
    stderr = np.sqrt(hp.amplitude / len(vals))
    assert abs(vals.mean()) < 3 * stderr
    assert abs(vals.var() - hp.amplitude) < 0.1 * hp.amplitude


@pytest.mark.slow
def test_feature_kernel_matches_matern(rng):
    hp = KernelHyperparams(lengthscales=np.array([0.4, 0.25]), amplitude=1.0,
                           noise_variance=0.0)
    freqs, _, _ = gpmod._draw_features(hp, 5000, rng)
    pairs = rng.uniform(0, 1, size=(10, 2, 2))
    for a, b in pairs:
        # E[2 cos(w a + p) cos(w b + p)] over phases = E[cos(w (a - b))]
        approx = np.mean(np.cos(freqs @ (a - b)))
        exact = matern52(hp, a[None, :], b[None, :])[0, 0]
        assert abs(approx - exact) < 0.05


def test_posterior_draw_tracks_data(rng):
    hp = KernelHyperparams(lengthscales=np.array([0.4]), amplitude=1.0,
                           noise_variance=1e-6)
    X = np.array([[0.2], [0.5], [0.8]])
    y = np.array([0.3, -0.2, 0.6])
    gp = gpmod.fit(X, y, hp)
    vals = np.array([[gpmod.eval_feature_sample(
        gpmod.draw_posterior_function(gp, 500, rng), x) for x in X]
        for _ in range(200)])
    assert np.allclose(vals.mean(axis=0), y, atol=0.1)


def test_permutation_invariant_fit(rng):
    X = rng.uniform(0, 1, size=(9, 2))
    y = rng.normal(size=9)
    perm = rng.permutation(9)
    hp = KernelHyperparams(lengthscales=np.array([0.4, 0.4]), amplitude=1.3,
                           noise_variance=1e-4)
    gp1 = gpmod.fit(X, y, hp)
    gp2 = gpmod.fit(X[perm], y[perm], hp)
    Xq = rng.uniform(0, 1, size=(5, 2))
    m1, v1 = gpmod.predict(gp1, Xq)
    m2, v2 = gpmod.predict(gp2, Xq)
    assert np.allclose(m1, m2, atol=1e-9)
    assert np.allclose(v1, v2, atol=1e-9)
