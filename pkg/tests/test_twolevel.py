"""Two-level particle system: moments, Gillespie core, equilibrium sampling."""

import math

import numpy as np
import pytest

from hierarchia import twolevel as tl
from hierarchia.errors import InvalidParameterError, ResourceBudgetError

SEED = 20260403


def test_params_validation():
    with pytest.raises(InvalidParameterError):
        tl.FamilyParams(c=0.0, a=1.0, epsilon=0.1)
    with pytest.raises(InvalidParameterError):
        tl.FamilyParams(c=3.0, a=1.0, epsilon=0.5)  # split rate negative
    # epsilon = 0 is legal for moment formulas but not for simulation
    params0 = tl.FamilyParams(c=1.0, a=1.0, epsilon=0.0)
    with pytest.raises(InvalidParameterError):
        tl.simulate(params0, None, 1.0, SEED)


@pytest.mark.parametrize("eps", [0.0, 0.08])
@pytest.mark.parametrize("init", [tl.MomentVector(),
                                  tl.MomentVector(m11=0.3, m21=0.2, m12=0.4)])
def test_closed_forms_solve_the_moment_odes(eps, init):
    params = tl.FamilyParams(c=1.2, a=0.8, epsilon=eps)
    times, traj = tl.moment_ode_solve(5.0, params, init, step=1e-3)
    closed = np.array([tl.moment_closed_forms(t, params, init).to_array()
                       for t in times])
    # m11, m21, m12 have full trajectory formulas
    dev = np.max(np.abs(traj[:, [0, 1, 4]] - closed[:, [0, 1, 4]]))
    assert dev < 1e-8


def test_closed_forms_stationary_limits():
    params = tl.FamilyParams(c=1.0, a=1.0, epsilon=0.05)
    late = tl.moment_closed_forms(60.0, params, tl.MomentVector(m12=2.0))
    a, c, eps = params.a, params.c, params.epsilon
    assert np.isclose(late.m11, a)
    assert np.isclose(late.m21, a / (2 * c) + eps * a / 2)
    assert np.isclose(
        late.m12, a / (4 * c ** 2) + a ** 2 + 3 * a * eps / (4 * c) + eps ** 2 * a / 2)


def test_moment_vector_roundtrip():
    m = tl.MomentVector(m11=1, m21=2, m31=3, m41=4, m12=5, m22=6, M=7, m13=8)
    assert tl.MomentVector.from_array(m.to_array()) == m


def test_family_state_observables():
    params = tl.FamilyParams(c=1.0, a=1.0, epsilon=0.1)
    state = tl.FamilyState(counts=np.array([2, 3]), labels=np.array([0.1, 0.9]),
                           ids=np.array([0, 1]), clock=0.0, params=params)
    assert state.family_count == 2
    assert state.total_individuals == 5
    assert np.isclose(state.zeta, 0.05)
    assert np.allclose(state.rescaled_sizes, [0.2, 0.3])
    # <eta, x> = eps * sum(eps * j) equals zeta
    assert np.isclose(state.eta_moment(1), state.zeta)
    assert np.isclose(state.eta_moment(2), 0.1 ** 3 * (4 + 9))


def test_simulate_is_deterministic_for_fixed_seed():
    params = tl.FamilyParams(c=1.0, a=1.0, epsilon=0.2)
    a = tl.simulate(params, None, 5.0, SEED)[-1]
    b = tl.simulate(params, None, 5.0, SEED)[-1]
    assert a.clock == b.clock
    assert np.array_equal(np.sort(a.counts), np.sort(b.counts))
    assert np.isclose(a.zeta, b.zeta)


def test_simulate_snapshots_and_final_state():
    params = tl.FamilyParams(c=1.0, a=1.0, epsilon=0.2)
    snaps = tl.simulate(params, None, 4.0, SEED, snapshot_times=[1.0, 2.5])
    assert len(snaps) == 3
    assert snaps[0].clock == 1.0 and snaps[1].clock == 2.5
    assert snaps[-1].clock == 4.0
    with pytest.raises(InvalidParameterError):
        tl.simulate(params, None, 4.0, SEED, snapshot_times=[5.0])


def test_budget_abort_carries_partial_state():
    params = tl.FamilyParams(c=1.0, a=1.0, epsilon=0.1)
    with pytest.raises(ResourceBudgetError) as err:
        tl.simulate(params, None, 50.0, SEED, max_events=500)
    assert err.value.partial, "partial states should be attached"


def test_equilibrium_mean_matches_immigration_level():
    params = tl.FamilyParams(c=1.0, a=1.0, epsilon=0.1)
    draws = tl.equilibrium_ensemble(params, 400, SEED)
    z = np.array([s.zeta for s in draws])
    se = z.std(ddof=1) / math.sqrt(z.size)
    assert abs(z.mean() - 1.0) < max(4.0 * se, 0.12)
    assert tl.stationarity_diagnostic(z) < 0.25


def test_equilibrium_sample_burn_in_floor():
    params = tl.FamilyParams(c=1.0, a=1.0, epsilon=0.2)
    with pytest.raises(InvalidParameterError):
        tl.equilibrium_sample(params, 5.0, SEED)


def test_estimate_nu_moments():
    params = tl.FamilyParams(c=1.0, a=1.0, epsilon=0.1)
    with pytest.warns(UserWarning):
        mean, var = tl.estimate_nu_moments(np.ones(10), 1.0, 1.0)
    assert mean == 1.0 and var == 0.0
    with pytest.warns(UserWarning), pytest.raises(InvalidParameterError):
        tl.estimate_nu_moments(np.ones(10), 0.0, 1.0)
    del params


def test_family_count_statistics():
    params = tl.FamilyParams(c=1.0, a=1.0, epsilon=0.25)
    states = tl.simulate(params, None, 12.0, SEED,
                         snapshot_times=[10.0, 11.0, 12.0])[:-1]
    stats = tl.family_count_above([s for s in states if s is not None], 0.25)
    assert stats.count_mean >= 0
    assert set(stats.tail_mass) == {1.0, 2.0, 4.0, 8.0}
    # tail masses are nonincreasing in the threshold
    tm = [stats.tail_mass[K] for K in (1.0, 2.0, 4.0, 8.0)]
    assert all(tm[i] >= tm[i + 1] for i in range(3))


def test_mass_conservation_in_state_arrays():
    params = tl.FamilyParams(c=1.0, a=2.0, epsilon=0.2)
    final = tl.simulate(params, None, 8.0, SEED)[-1]
    assert final.counts.min() >= 1  # empty families are removed
    assert final.total_individuals == final.counts.sum()
    assert np.unique(final.ids).size == final.family_count  # ids never reused
