"""Branching random walks on the truncated group: observables and invariants."""

import math

import numpy as np
import pytest

from hierarchia import spatial, hiergroup as hg
from hierarchia.errors import InvalidParameterError

SEED = 20260406


def _setup(N=2, D=2, c=1.0, b=2.0):
    spec = hg.GroupSpec(N=N, D=D)
    coeffs = hg.CoefficientSequence.geometric(c, b)
    rates = hg.make_rate_table(spec, coeffs, level_exponent=2)
    return spec, rates


def test_init_population_poisson_singletons():
    spec, _ = _setup(N=3, D=3)
    rng = np.random.default_rng(SEED)
    config = spatial.init_population(spec, 2.0, "two_level", rng)
    assert config.population > 0
    assert config.sites.min() >= 0 and config.sites.max() < spec.n_sites
    _, counts = config.family_counts()
    assert np.all(counts == 1)  # everyone starts in their own family
    with pytest.raises(InvalidParameterError):
        spatial.init_population(spec, 0.0, "two_level", rng)
    with pytest.raises(InvalidParameterError):
        spatial.init_population(spec, 1.0, "three_level", rng)


def test_block_average_counts_ball_members():
    spec, _ = _setup(N=4, D=2)
    config = spatial.SpatialConfiguration(
        spec=spec, sites=np.array([0, 1, 3, 4, 15], dtype=np.int64),
        fams=np.arange(5, dtype=np.int64), clock=0.0, mode="one_level")
    # radius-1 ball around 0 is {0,1,2,3}: three members
    assert spatial.block_average(config, 0, 1).value == 3 / 4
    # radius-2 ball is everything
    assert spatial.block_average(config, 0, 2).value == 5 / 16
    # center given as a digit address
    assert spatial.block_average(config, [0, 1], 1).value == 1 / 4


def test_family_size_measure_scaling():
    spec, _ = _setup(N=4, D=2)
    config = spatial.SpatialConfiguration(
        spec=spec, sites=np.array([0, 1, 2, 5], dtype=np.int64),
        fams=np.array([7, 7, 8, 9], dtype=np.int64), clock=0.0, mode="two_level")
    hist = spatial.family_size_measure(config, 0, 1)
    scale = 4 ** -0.5
    assert hist.weight == scale
    # families inside the ball {0..3}: sizes 2 (fam 7) and 1 (fam 8)
    assert np.allclose(np.sort(hist.sizes), np.sort([2 * scale, scale]))
    assert np.isclose(hist.total_mass(), scale * 3 * scale)
    assert hist.count_above(1.5 * scale) == 1
    assert np.isclose(hist.tail_mass(2 * scale), scale * 2 * scale)


def test_simulate_deterministic_and_conserves_bookkeeping():
    spec, rates = _setup()
    rng = np.random.default_rng(SEED)
    config = spatial.init_population(spec, 3.0, "two_level", rng)
    out1 = spatial.simulate_spatial(config, rates, 2.0, "two_level", 99)[-1]
    out2 = spatial.simulate_spatial(config, rates, 2.0, "two_level", 99)[-1]
    assert np.array_equal(out1.sites, out2.sites)
    assert np.array_equal(out1.fams, out2.fams)
    assert out1.sites.size == out1.fams.size
    assert out1.sites.min() >= 0 and out1.sites.max() < spec.n_sites


def test_one_level_population_is_critical():
    # without family-level events the expected population is conserved
    spec, rates = _setup(N=2, D=2)
    totals = []
    seeds = np.random.SeedSequence(SEED).spawn(300)
    expected = 0.0
    for s in seeds:
        rng = np.random.default_rng(s)
        config = spatial.init_population(spec, 3.0, "one_level", rng)
        expected += config.population
        totals.append(spatial.simulate_spatial(config, rates, 2.0,
                                               "one_level", rng)[-1].population)
    totals = np.asarray(totals, dtype=float)
    expected /= len(seeds)
    se = totals.std(ddof=1) / math.sqrt(totals.size)
    assert abs(totals.mean() - expected) < 4.0 * se


def test_snapshot_validation_and_counters():
    spec, rates = _setup()
    rng = np.random.default_rng(SEED)
    config = spatial.init_population(spec, 2.0, "two_level", rng)
    with pytest.raises(InvalidParameterError):
        spatial.simulate_spatial(config, rates, 1.0, "two_level", rng,
                                 snapshot_times=[2.0])
    snaps = spatial.simulate_spatial(config, rates, 3.0, "two_level", rng,
                                     snapshot_times=[1.0, 2.0])
    assert len(snaps) == 3
    final = snaps[-1]
    assert final.arrivals_from_exterior <= final.arrivals_into_block
    assert final.arrivals_into_block >= 0


def test_rate_table_spec_mismatch_rejected():
    spec, _ = _setup(N=2, D=2)
    other_spec, other_rates = _setup(N=4, D=3)
    rng = np.random.default_rng(SEED)
    config = spatial.init_population(spec, 1.0, "one_level", rng)
    with pytest.raises(InvalidParameterError):
        spatial.simulate_spatial(config, other_rates, 1.0, "one_level", rng)
    del other_spec


def test_predicted_exterior_fraction_formula():
    spec, rates = _setup(N=4, D=4, c=2.0, b=2.0)
    q = rates.rates
    for ell in (1, 2):
        expected = q[ell + 1:].sum() / q[ell:].sum()
        assert np.isclose(spatial.predicted_exterior_fraction(rates, ell), expected)
    del spec


def test_ergodic_profile_levels():
    spec, _ = _setup(N=2, D=3)
    config = spatial.SpatialConfiguration(
        spec=spec, sites=np.zeros(4, dtype=np.int64),
        fams=np.arange(4, dtype=np.int64), clock=0.0, mode="one_level")
    profile = spatial.ergodic_profile(config, 0, 3)
    assert [p.level for p in profile] == [1, 2, 3]
    assert np.allclose([p.value for p in profile], [4 / 2, 4 / 4, 4 / 8])
    with pytest.raises(InvalidParameterError):
        spatial.ergodic_profile(config, 0, 4)


def test_window_block_statistics_shapes():
    spec, rates = _setup(N=2, D=2)
    stats = spatial.window_block_statistics(
        spec, rates, 2.0, [1.0, 2.0], replicates=5, seed=SEED,
        mode="two_level", levels=(1, 2), tail_level=2)
    assert stats.zeta.shape == (5, 2, 2)
    assert stats.tail_mass.shape == (5, 2, 4)
    assert np.all(np.isfinite(stats.zeta) | np.isnan(stats.zeta))
    assert stats.n_aborted == 0
    assert np.array_equal(stats.zeta_at(1), stats.zeta[:, :, 0])


def test_migration_jump_stays_within_prescribed_sphere():
    # short two_level run on a bigger group; verify all sites remain valid and
    # the per-individual family labels stay consistent with family_counts
    spec, rates = _setup(N=4, D=3)
    rng = np.random.default_rng(SEED)
    config = spatial.init_population(spec, 1.0, "two_level", rng)
    final = spatial.simulate_spatial(config, rates, 4.0, "two_level", rng)[-1]
    fids, counts = final.family_counts()
    assert counts.sum() == final.population
    assert np.all(counts >= 1)
