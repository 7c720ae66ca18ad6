"""Closed forms and exact sampling for the subcritical branching diffusion."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from hierarchia import feller
from hierarchia.errors import InvalidParameterError

SEED = 20260402


def test_v_is_cluster_rate_times_cluster_fraction():
    # v(t, lam) = r(t) * lam / (u(t) + lam): the sampler's Laplace exponent
    for c in (0.5, 1.0, 2.0):
        tr = feller.FellerTransition(c)
        for t in (0.2, 1.0, 3.0):
            for lam in (0.1, 1.0, 5.0):
                r, u = tr.cluster_rate(t), tr.cluster_scale(t)
                assert np.isclose(tr.v(t, lam), r * lam / (u + lam), rtol=1e-12)


def test_laplace_identity_monte_carlo():
    rng = np.random.default_rng(SEED)
    for x0, t, c, lam in ((1.0, 1.0, 1.0, 0.5), (2.0, 0.5, 2.0, 1.0)):
        x = feller.fbd_transition_sample(x0, t, c, rng, size=50_000)
        e = np.exp(-lam * x)
        target = math.exp(-x0 * feller.v_laplace(t, lam, c))
        se = e.std(ddof=1) / math.sqrt(e.size)
        assert abs(e.mean() - target) < 4.0 * se


def test_survival_probability_monte_carlo():
    rng = np.random.default_rng(SEED)
    x0, t, c = 0.5, 2.0, 1.0
    x = feller.fbd_transition_sample(x0, t, c, rng, size=50_000)
    p = np.count_nonzero(x) / x.size
    target = feller.survival_probability(x0, t, c)
    se = math.sqrt(target * (1 - target) / x.size)
    assert abs(p - target) < 4.0 * se


def test_semigroup_two_step_composition():
    # sampling t then s from the result has the law of one (t + s) step
    rng = np.random.default_rng(SEED)
    x0, c, t, s = 1.0, 1.0, 0.7, 0.5
    n = 30_000
    one = feller.fbd_transition_sample(x0, t + s, c, rng, size=n)
    mid = feller.fbd_transition_sample(x0, t, c, rng, size=n)
    two = np.array([feller.fbd_transition_sample(m, s, c, rng) if m > 0 else 0.0
                    for m in mid])
    res = stats.ks_2samp(one, two)
    assert res.pvalue > 1e-3


def test_branching_additivity():
    # law from x0 = a + b equals the sum of independent copies from a and b
    rng = np.random.default_rng(SEED)
    c, t, n = 1.0, 1.0, 30_000
    joint = feller.fbd_transition_sample(1.5, t, c, rng, size=n)
    split = (feller.fbd_transition_sample(1.0, t, c, rng, size=n)
             + feller.fbd_transition_sample(0.5, t, c, rng, size=n))
    res = stats.ks_2samp(joint, split)
    assert res.pvalue > 1e-3


def test_euler_scheme_agrees_with_exact_sampler():
    rng = np.random.default_rng(SEED)
    x0, t, c, dt, n = 1.0, 0.5, 1.0, 5e-4, 4000
    exact = feller.fbd_transition_sample(x0, t, c, rng, size=n)
    euler = feller.fbd_euler_sample(x0, t, c, dt, rng, size=n)
    res = stats.ks_2samp(exact, euler)
    assert res.pvalue > 1e-3


def test_kappa_density_total_mass_and_mean():
    # integral of kappa over (0, inf) equals the cluster rate r(t); mean of
    # the normalized density equals 1/u(t)
    for t, c in ((0.5, 1.0), (2.0, 0.7)):
        tr = feller.FellerTransition(c)
        total, _ = integrate.quad(lambda x: feller.kappa_density(t, x, c), 0, np.inf)
        assert np.isclose(total, tr.cluster_rate(t), rtol=1e-8)
        mean, _ = integrate.quad(lambda x: x * feller.kappa_density(t, x, c), 0, np.inf)
        assert np.isclose(mean / total, 1.0 / tr.cluster_scale(t), rtol=1e-8)


def test_gamma_equilibrium_distribution():
    rng = np.random.default_rng(SEED)
    a, c = 1.5, 2.0
    x = feller.gamma_equilibrium_sample(a, c, rng, size=30_000)
    res = stats.kstest(x, "gamma", args=(2 * c * a, 0.0, 1.0 / (2 * c)))
    assert res.pvalue > 1e-3
    assert feller.gamma_equilibrium_sample(0.0, c, rng) == 0.0


def test_mean_decay():
    # E[X_t] = x0 e^{-ct}: first moment from the compound representation
    rng = np.random.default_rng(SEED)
    x0, t, c = 2.0, 1.0, 0.5
    x = feller.fbd_transition_sample(x0, t, c, rng, size=100_000)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - x0 * math.exp(-c * t)) < 4.0 * se


def test_validation():
    with pytest.raises(InvalidParameterError):
        feller.FellerTransition(0.0)
    with pytest.raises(InvalidParameterError):
        feller.survival_probability(1.0, 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        feller.fbd_transition_sample(1.0, -1.0, 1.0, np.random.default_rng(0))
    with pytest.raises(InvalidParameterError):
        feller.kappa_density(1.0, -0.5, 1.0)
    with pytest.raises(InvalidParameterError):
        feller.fbd_euler_sample(1.0, 1.0, 1.0, 0.0, np.random.default_rng(0))
    rng = np.random.default_rng(0)
    assert feller.fbd_transition_sample(0.0, 1.0, 1.0, rng) == 0.0
