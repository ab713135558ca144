import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mobo import gp as gpmod
from mobo.baselines import (InfeasibleKError, ScalarizationWeights,
                            ehi_acquisition, ehi_cell_count,
                            expected_improvement, parego_acquisition,
                            parego_scalarize, prob_dominated,
                            random_acquisition, smsego_acquisition,
                            sur_acquisition, sur_integration_points)
from mobo.gp import KernelHyperparams
from mobo.observations import ObservationLog, UnsupportedModeError
from mobo.pareto import FrontSet, hypervolume, non_dominated_mask, pareto_front
from mobo.util import unit_box


# -- scalarization -----------------------------------------------------------

def test_weights_must_be_simplex():
    with pytest.raises(ValueError):
        ScalarizationWeights(theta=np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        ScalarizationWeights(theta=np.array([-0.1, 1.1]))
    ScalarizationWeights(theta=np.array([0.25, 0.75]))


@settings(max_examples=50)
@given(st.integers(0, 10**6))
def test_scalarize_matches_direct_formula(seed):
    rng = np.random.default_rng(seed)
    theta = rng.dirichlet(np.ones(3))
    w = ScalarizationWeights(theta, rho=0.05)
    f = rng.normal(size=3)
    direct = max(theta * f) + 0.05 * np.sum(theta * f)
    assert parego_scalarize(w, f) == pytest.approx(direct)


def test_scalarize_batch_consistent(rng):
    w = ScalarizationWeights(np.array([0.3, 0.7]))
    F = rng.normal(size=(5, 2))
    batch = parego_scalarize(w, F)
    assert np.allclose(batch, [parego_scalarize(w, f) for f in F])


# -- expected improvement ----------------------------------------------------

def test_ei_matches_mc(rng):
    mean, var, best = 0.3, 0.5, 0.6
    y = rng.normal(mean, np.sqrt(var), size=500_000)
    mc = np.maximum(best - y, 0.0)
    assert expected_improvement(mean, var, best) == pytest.approx(
        mc.mean(), abs=3 * mc.std() / np.sqrt(len(y)))


def test_ei_zero_variance_limit():
    assert expected_improvement(1.0, 1e-300, 0.5) == pytest.approx(0.0)
    assert expected_improvement(0.0, 1e-300, 0.5) == pytest.approx(0.5)


def _coupled_log(rng, n=10, d=2, k=2):
    log = ObservationLog(dim=d, n_objectives=k)
    X = rng.uniform(0, 1, size=(n, d))
    for x in X:
        log.add_coupled(x, [np.sum((x - 0.3) ** 2), np.sum((x - 0.7) ** 2)])
    return log


def test_parego_requires_coupled(rng):
    log = ObservationLog(dim=1, n_objectives=2)
    log.add_single(0, [0.5], 1.0)
    with pytest.raises(UnsupportedModeError):
        parego_acquisition(log, 2, rng)


def test_parego_is_finite_and_nonnegative(rng):
    acq = parego_acquisition(_coupled_log(rng), 3, rng)
    vals = acq(rng.uniform(0, 1, size=(40, 2)))
    assert np.all(np.isfinite(vals))
    assert np.all(vals >= 0)


# -- SMSego ------------------------------------------------------------------

def test_smsego_worked_rectangle():
    front = FrontSet(np.array([[2.0, 2.0]]))
    ref = np.array([3.0, 3.0])

    def pf(X):
        return np.array([[1.0, 1.0]]), np.array([[0.0, 0.0]])

    # eps=0 and zero variance: gain = HV{(1,1)} - HV{(2,2)} = 4 - 1 = 3
    out = smsego_acquisition(pf, front, np.zeros((1, 2)), ref, c=1.0, eps=0.0)
    assert out[0] == pytest.approx(3.0)


def test_smsego_dominated_gets_zero():
    front = FrontSet(np.array([[0.0, 0.0]]))
    ref = np.array([1.0, 1.0])

    def pf(X):
        return np.array([[0.5, 0.5]]), np.array([[1e-8, 1e-8]])

    out = smsego_acquisition(pf, front, np.zeros((1, 2)), ref, eps=0.0)
    assert out[0] == 0.0


def test_smsego_uncertainty_helps():
    front = FrontSet(np.array([[0.5, 0.5]]))
    ref = np.array([1.0, 1.0])

    def pf_sure(X):
        return np.array([[0.6, 0.6]]), np.array([[1e-9, 1e-9]])

    def pf_unsure(X):
        return np.array([[0.6, 0.6]]), np.array([[0.04, 0.04]])

    a = smsego_acquisition(pf_sure, front, np.zeros((1, 2)), ref, eps=0.0)
    b = smsego_acquisition(pf_unsure, front, np.zeros((1, 2)), ref, eps=0.0)
    assert b[0] > a[0]


# -- EHI ---------------------------------------------------------------------

def _hv_improvement_mc(front, ref, mean, sd, n, rng):
    hv0 = hypervolume(front, ref)
    y = rng.normal(mean, sd, size=(n, len(mean)))
    vals = np.array([
        hypervolume(FrontSet(np.vstack([front.points, yy[None, :]])), ref) - hv0
        for yy in y])
    return vals.mean(), vals.std(ddof=1) / np.sqrt(n)


def test_ehi_matches_mc_k2(rng):
    front = FrontSet(np.array([[0.2, 0.8], [0.5, 0.5], [0.8, 0.1]]))
    ref = np.array([1.0, 1.0])
    mean = np.array([[0.3, 0.3]])
    var = np.array([[0.04, 0.09]])
    exact = ehi_acquisition(lambda X: (mean, var), front, np.zeros((1, 2)), ref)
    est, se = _hv_improvement_mc(front, ref, mean[0], np.sqrt(var[0]),
                                 20_000, rng)
    assert abs(exact[0] - est) <= 3 * se


def test_ehi_matches_mc_k3(rng):
    front = pareto_front(rng.uniform(0, 1, size=(5, 3)))
    ref = np.full(3, 1.2)
    mean = np.array([[0.4, 0.4, 0.4]])
    var = np.array([[0.02, 0.05, 0.03]])
    exact = ehi_acquisition(lambda X: (mean, var), front, np.zeros((1, 3)), ref)
    est, se = _hv_improvement_mc(front, ref, mean[0], np.sqrt(var[0]),
                                 20_000, rng)
    assert abs(exact[0] - est) <= 3 * se + 1e-6


def test_ehi_cell_count():
    front = FrontSet(np.array([[0.2, 0.8], [0.8, 0.2]]))
    assert ehi_cell_count(front, 2) == 9
    assert ehi_cell_count(front, 3) == 27


def test_ehi_rejects_k4(rng):
    front = pareto_front(rng.uniform(0, 1, size=(4, 4)))
    with pytest.raises(InfeasibleKError):
        ehi_acquisition(lambda X: (np.zeros((1, 4)), np.ones((1, 4))),
                        front, np.zeros((1, 4)), np.full(4, 2.0))


# -- dominance probability and SUR -------------------------------------------

@pytest.mark.parametrize("k", [1, 2, 3])
def test_prob_dominated_vs_mc(k, rng):
    front = pareto_front(rng.uniform(0, 1, size=(6, k))).points
    mu = rng.uniform(0, 1, size=k)
    sd = rng.uniform(0.1, 0.5, size=k)
    exact = prob_dominated(mu, sd, front)
    y = rng.normal(mu, sd, size=(400_000, k))
    dom = np.any(np.all(front[None, :, :] <= y[:, None, :], axis=2), axis=1)
    assert abs(float(exact) - dom.mean()) < 3 * np.sqrt(0.25 / len(y)) + 1e-3


def test_prob_dominated_rejects_k4():
    with pytest.raises(InfeasibleKError):
        prob_dominated(np.zeros(4), np.ones(4), np.zeros((2, 4)))


def _fitted_pair(rng, n=10):
    X = rng.uniform(0, 1, size=(n, 2))
    Y = np.stack([np.sum((X - 0.3) ** 2, axis=1),
                  np.sum((X - 0.7) ** 2, axis=1)], axis=1)
    gps = []
    for k in range(2):
        t = (Y[:, k] - Y[:, k].mean()) / Y[:, k].std()
        hp = KernelHyperparams(lengthscales=np.array([0.3, 0.3]),
                               amplitude=1.0, noise_variance=1e-4)
        gps.append(gpmod.fit(X, t, hp))
    Ystd = (Y - Y.mean(0)) / Y.std(0)
    return gps, FrontSet(Ystd[non_dominated_mask(Ystd)])


def test_sur_nonnegative_and_discriminative(rng):
    gps, front = _fitted_pair(rng)
    Z = sur_integration_points(2, rng, 64)
    Xc = rng.uniform(0, 1, size=(12, 2))
    vals = sur_acquisition(gps, front, Xc, Z)
    # tiny negatives are Gauss-Hermite truncation error
    assert np.all(vals >= -1e-3)
    assert vals.max() > 1e-3


def test_sur_rejects_k4(rng):
    gps, front = _fitted_pair(rng)
    with pytest.raises(InfeasibleKError):
        sur_acquisition(gps * 2, FrontSet(np.zeros((1, 4))),
                        np.zeros((1, 2)), np.zeros((4, 2)))


def test_random_acquisition_in_box(rng):
    box = unit_box(3)
    for _ in range(20):
        assert box.contains(random_acquisition(box, rng))


def test_random_acquisition_uniform(rng):
    box = unit_box(1)
    xs = np.array([random_acquisition(box, rng)[0] for _ in range(2000)])
    assert abs(xs.mean() - 0.5) < 0.04
    assert abs(np.mean(xs < 0.25) - 0.25) < 0.04
