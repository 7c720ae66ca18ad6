"""Jump decompositions, labelled forests, and size-biased spines."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from hierarchia import genealogy, cascade
from hierarchia.hiergroup import CoefficientSequence
from hierarchia.errors import InvalidParameterError

SEED = 20260405


def _gamma_density(x, c):
    return 2.0 * c * np.exp(-2.0 * c * x) / x


def test_tail_mass_matches_quadrature():
    for c, delta in ((1.0, 0.05), (2.0, 0.3)):
        quad, _ = integrate.quad(_gamma_density, delta, np.inf, args=(c,))
        assert np.isclose(genealogy.gamma_tail_mass(c, delta), quad, rtol=1e-8)


def test_dust_mean_matches_quadrature():
    c, a, delta = 1.5, 2.0, 0.2
    quad, _ = integrate.quad(lambda x: x * _gamma_density(x, c), 0, delta)
    assert np.isclose(genealogy.dust_mean(c, a, delta), a * quad, rtol=1e-8)


def test_decompose_jump_counts_and_support():
    rng = np.random.default_rng(SEED)
    c, a, delta = 1.0, 1.0, 0.05
    lam = a * genealogy.gamma_tail_mass(c, delta)
    counts = []
    for _ in range(3000):
        js = genealogy.decompose_jumps(c, a, delta, rng)
        counts.append(js.sizes.size)
        assert js.sizes.size == 0 or js.sizes.min() >= delta
        assert js.locations.size == 0 or (0 <= js.locations.min()
                                          and js.locations.max() <= a)
        assert np.isclose(js.dust, genealogy.dust_mean(c, a, delta))
    counts = np.asarray(counts, dtype=float)
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - lam) < 4.0 * se


def test_decompose_conserves_mass_in_expectation():
    rng = np.random.default_rng(SEED)
    c, a, delta = 1.0, 2.0, 0.1
    totals = np.array([genealogy.decompose_jumps(c, a, delta, rng).total
                       for _ in range(4000)])
    se = totals.std(ddof=1) / math.sqrt(totals.size)
    assert abs(totals.mean() - a) < max(5.0 * se, 0.01 * a)


def test_jump_sizes_follow_truncated_tail_law():
    rng = np.random.default_rng(SEED)
    c, a, delta = 1.0, 3.0, 0.1
    sizes = np.concatenate([genealogy.decompose_jumps(c, a, delta, rng).sizes
                            for _ in range(600)])
    tail0 = genealogy.gamma_tail_mass(c, delta)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - np.array([genealogy.gamma_tail_mass(c, max(v, delta))
                               for v in np.atleast_1d(x)]) / tail0

    res = stats.kstest(sizes, cdf)
    assert res.pvalue > 1e-3


def test_size_biased_jump_is_exponential():
    rng = np.random.default_rng(SEED)
    c = 1.5
    x = genealogy.size_biased_jump(c, rng, size=20_000)
    res = stats.kstest(x, "expon", args=(0.0, 1.0 / (2.0 * c)))
    assert res.pvalue > 1e-3


def test_forest_structure_invariants():
    coeffs = CoefficientSequence.geometric(1.0, 2.0)
    spec = cascade.EntranceLawSpec(theta=1.0, coefficients=coeffs,
                                   case="one_level", j_max=4)
    rng = np.random.default_rng(SEED)
    forest = genealogy.build_forest(spec, 1, 4, 0.05, rng)
    ids = {n.node_id for n in forest.nodes}
    assert len(ids) == len(forest.nodes)  # unique ids
    top = forest.at_level(forest.level_hi - 1)
    assert all(n.parent_id == -1 for n in top)  # top level nodes are roots
    by_id = {n.node_id: n for n in forest.nodes}
    for n in forest.nodes:
        if n.parent_id >= 0:
            parent = by_id[n.parent_id]
            assert parent.level == n.level + 1  # each parent one level up
        else:
            assert n.parent_id in (-1, -2)
    assert set(forest.dust_by_level) == {1, 2, 3}


def test_forest_children_mass_below_parent_in_aggregate():
    coeffs = CoefficientSequence.geometric(1.0, 2.0)
    spec = cascade.EntranceLawSpec(theta=2.0, coefficients=coeffs,
                                   case="one_level", j_max=3)
    rng = np.random.default_rng(SEED)
    child_sum = 0.0
    parent_sum = 0.0
    for _ in range(200):
        forest = genealogy.build_forest(spec, 1, 3, 0.05, rng)
        by_id = {n.node_id: n for n in forest.nodes}
        for n in forest.nodes:
            if n.parent_id >= 0:
                child_sum += n.label
        parent_sum += sum(n.label for n in forest.at_level(2))
    # retained children lose the dust share of their parent's image mass
    assert child_sum < parent_sum


def test_forest_bottom_mass_conserved_in_expectation():
    coeffs = CoefficientSequence.geometric(1.0, 2.0)
    spec = cascade.EntranceLawSpec(theta=1.0, coefficients=coeffs,
                                   case="one_level", j_max=4)
    rng = np.random.default_rng(SEED)
    masses = np.array([genealogy.build_forest(spec, 1, 4, 0.05, rng).bottom_mass()
                       for _ in range(400)])
    se = masses.std(ddof=1) / math.sqrt(masses.size)
    assert abs(masses.mean() - 1.0) < max(5.0 * se, 0.02)


def test_edge_list_format_roundtrip():
    coeffs = CoefficientSequence.geometric(1.0, 2.0)
    spec = cascade.EntranceLawSpec(theta=1.0, coefficients=coeffs,
                                   case="one_level", j_max=3)
    rng = np.random.default_rng(SEED)
    forest = genealogy.build_forest(spec, 1, 3, 0.1, rng)
    text = forest.to_edge_list()
    lines = text.strip().split("\n") if text.strip() else []
    assert len(lines) == len(forest.nodes)
    for line, node in zip(lines, forest.nodes):
        level, node_id, parent_id, label = line.split(",")
        assert int(level) == node.level
        assert int(node_id) == node.node_id
        assert int(parent_id) == node.parent_id
        assert float(label) == node.label


def test_spine_depth1_is_gamma_convolution():
    # base Gamma(2ca, 2c) plus an independent Exp(2c) jump: Gamma(2ca+1, 2c)
    coeffs = CoefficientSequence.geometric(1.0, 2.0)
    spec = cascade.EntranceLawSpec(theta=1.0, coefficients=coeffs,
                                   case="one_level", j_max=1)
    rng = np.random.default_rng(SEED)
    totals = np.array([genealogy.spine_sample(spec, 0, rng).total
                       for _ in range(3000)])
    res = stats.kstest(totals, "gamma", args=(3.0, 0.0, 0.5))
    assert res.pvalue > 1e-3


def test_spine_components_present():
    coeffs = CoefficientSequence.geometric(1.0, 2.0)
    spec = cascade.EntranceLawSpec(theta=1.0, coefficients=coeffs,
                                   case="one_level", j_max=4)
    rng = np.random.default_rng(SEED)
    s = genealogy.spine_sample(spec, 1, rng)
    assert set(s.spine) == {1, 2, 3}
    assert set(s.side_masses) == {2, 3}
    assert np.isclose(s.total, s.base + sum(s.side_masses.values()) + s.spine[1])


def test_expected_relatives():
    coeffs = CoefficientSequence.geometric(1.0, 2.0)
    assert np.isclose(genealogy.expected_relatives(1, 3, coeffs, "one_level"),
                      1.0 / (2.0 * coeffs.value(2)))
    with pytest.raises(InvalidParameterError):
        genealogy.expected_relatives(2, 2, coeffs, "one_level")


def test_case_and_parameter_validation():
    coeffs = CoefficientSequence.geometric(1.0, 2.0)
    two = cascade.EntranceLawSpec(theta=1.0, coefficients=coeffs,
                                  case="two_level", epsilon=0.1)
    rng = np.random.default_rng(SEED)
    with pytest.raises(InvalidParameterError):
        genealogy.build_forest(two, 1, 3, 0.1, rng)
    with pytest.raises(InvalidParameterError):
        genealogy.spine_sample(two, 1, rng)
    with pytest.raises(InvalidParameterError):
        genealogy.decompose_jumps(1.0, 1.0, 0.0, rng)
    with pytest.raises(InvalidParameterError):
        genealogy.size_biased_jump(0.0, rng)
    empty = genealogy.decompose_jumps(1.0, 0.0, 0.1, rng)
    assert empty.total == 0.0
