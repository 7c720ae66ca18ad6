"""Jump decompositions, labelled jump forests, and size-biased spines.

The gamma kernel with parameter c has canonical measure
gamma_c(dx) = 2c x^{-1} e^{-2cx} dx, so a subordinator increment over [0, a]
is a Poisson superposition of jumps with intensity a * gamma_c. Jumps above a
threshold delta are sampled exactly; the sub-threshold part is replaced by its
mean a * (1 - e^{-2 c delta}) ("dust").

Size-biasing gamma_c gives x * gamma_c(dx) = 2c e^{-2cx} dx, an
Exponential(2c) law, which drives the spine constructions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import exp1

from .errors import InvalidParameterError
from .cascade import EntranceLawSpec, entrance_law_sample, iterate, make_kernels, m_value

_TAIL_GRID_POINTS = 4096


def gamma_tail_mass(c: float, delta: float) -> float:
    """gamma_c([delta, inf)) = 2c * E1(2c delta)."""
    assert c > 0 and delta > 0
    return float(2.0 * c * exp1(2.0 * c * delta))


def dust_mean(c: float, a: float, delta: float) -> float:
    """Mean mass of jumps below delta: a * int_0^delta x gamma_c(dx)."""
    return a * (-math.expm1(-2.0 * c * delta))


@dataclass(frozen=True)
class JumpSet:
    locations: np.ndarray  # tau_i in [0, domain]
    sizes: np.ndarray  # y_i >= threshold
    dust: float
    threshold: float
    domain: float  # total increment-axis length a

    @property
    def total(self) -> float:
        """Sum of retained jump sizes plus the dust mean."""
        return float(self.sizes.sum() + self.dust)


def _tail_inverse_table(c: float, delta: float):
    """Inverse-CDF table for the normalized gamma_c restriction to [delta, inf)."""
    x_hi = delta + 45.0 / (2.0 * c)
    x = np.geomspace(delta, x_hi, _TAIL_GRID_POINTS)
    tail = 2.0 * c * exp1(2.0 * c * x)
    cdf = 1.0 - tail / tail[0]
    cdf[0] = 0.0
    cdf[-1] = 1.0
    return cdf, x


def decompose_jumps(c: float, a: float, delta: float,
                    rng: np.random.Generator) -> JumpSet:
    """Jumps of size >= delta of a gamma_c increment over [0, a]."""
    if delta <= 0:
        raise InvalidParameterError("threshold delta must be positive")
    if a < 0:
        raise InvalidParameterError("mass a must be nonnegative")
    if a == 0.0:
        return JumpSet(np.zeros(0), np.zeros(0), 0.0, delta, 0.0)
    lam = a * gamma_tail_mass(c, delta)
    n = int(rng.poisson(lam)) if lam > 0 else 0
    locations = np.sort(rng.uniform(0.0, a, size=n))
    if n > 0:
        cdf, x = _tail_inverse_table(c, delta)
        sizes = np.interp(rng.random(n), cdf, x)
    else:
        sizes = np.zeros(0)
    return JumpSet(locations=locations, sizes=sizes,
                   dust=dust_mean(c, a, delta), threshold=delta, domain=a)


def size_biased_jump(c: float, rng: np.random.Generator, size=None):
    """Draw from the size-biasing of gamma_c: Exponential(rate 2c)."""
    if c <= 0:
        raise InvalidParameterError(f"c must be positive, got {c}")
    draw = rng.exponential(1.0 / (2.0 * c), size=size)
    return float(draw) if size is None else draw


@dataclass(frozen=True)
class ForestNode:
    level: int
    node_id: int
    parent_id: int  # -1 root (top level), -2 landed in a dust gap
    label: float  # jump size (mass)
    location: float  # tau on the level's increment axis


@dataclass(frozen=True)
class JumpForest:
    level_lo: int
    level_hi: int
    nodes: tuple  # ForestNode, all levels
    dust_by_level: dict
    threshold: float

    def at_level(self, level: int) -> list:
        return [n for n in self.nodes if n.level == level]

    def roots(self) -> list:
        return [n for n in self.nodes if n.parent_id == -1]

    def children(self, node_id: int) -> list:
        return [n for n in self.nodes if n.parent_id == node_id]

    def bottom_mass(self) -> float:
        """Total label mass at the lowest level plus its dust."""
        return sum(n.label for n in self.at_level(self.level_lo)) \
            + self.dust_by_level[self.level_lo]

    def to_edge_list(self) -> str:
        """Stable interchange format: one line per node 'level,node_id,parent_id,label'."""
        lines = [f"{n.level},{n.node_id},{n.parent_id},{n.label!r}" for n in self.nodes]
        return "\n".join(lines) + ("\n" if lines else "")


def build_forest(spec: EntranceLawSpec, level_lo: int, level_hi: int,
                 delta: float, rng: np.random.Generator) -> JumpForest:
    """Labelled forest of cascade jumps over levels level_lo..level_hi.

    Nodes at level k are the retained jumps of the level-k kernel applied to
    the accumulated increment from level k+1 (theta at the top). A level-k
    jump's parent is the level-(k+1) jump whose image interval contains its
    location; dust spreads uniformly along the location axis, and jumps
    landing in dust gaps carry parent_id -2.
    """
    if spec.case != "one_level":
        raise InvalidParameterError("forest construction needs the gamma (one_level) case")
    if level_hi <= level_lo:
        raise InvalidParameterError("level_hi must exceed level_lo")
    nodes: list[ForestNode] = []
    dust_by_level: dict[int, float] = {}
    next_id = 0

    parent_set: JumpSet | None = None
    parent_ids: np.ndarray | None = None
    for k in range(level_hi - 1, level_lo - 1, -1):
        c_k = spec.coefficients.value(k)
        domain = spec.theta if parent_set is None else parent_set.total
        js = decompose_jumps(c_k, domain, delta, rng)
        dust_by_level[k] = js.dust
        ids = np.arange(next_id, next_id + js.sizes.size)
        next_id += js.sizes.size

        if parent_set is None:
            parents = np.full(js.sizes.size, -1, dtype=np.int64)
        else:
            parents = _assign_parents(js.locations, parent_set, parent_ids)
        for i in range(js.sizes.size):
            nodes.append(ForestNode(level=k, node_id=int(ids[i]),
                                    parent_id=int(parents[i]),
                                    label=float(js.sizes[i]),
                                    location=float(js.locations[i])))
        parent_set, parent_ids = js, ids

    return JumpForest(level_lo=level_lo, level_hi=level_hi, nodes=tuple(nodes),
                      dust_by_level=dust_by_level, threshold=delta)


def _assign_parents(locations: np.ndarray, parent_set: JumpSet,
                    parent_ids: np.ndarray) -> np.ndarray:
    """Map child locations on [0, parent_set.total] to parent image intervals.

    Parents are ordered by their own location; parent i's image interval is
    [start_i, start_i + y_i) with start_i = dust * (tau_i / domain) +
    sum of earlier parents' sizes. Locations outside every interval get -2.
    """
    y = parent_set.sizes
    if y.size == 0:
        return np.full(locations.size, -2, dtype=np.int64)
    dom = parent_set.domain if parent_set.domain > 0 else 1.0
    starts = (parent_set.dust * (parent_set.locations / dom)
              + np.concatenate(([0.0], np.cumsum(y)[:-1])))
    ends = starts + y
    out = np.full(locations.size, -2, dtype=np.int64)
    idx = np.searchsorted(starts, locations, side="right") - 1
    valid = (idx >= 0) & (locations < ends[np.clip(idx, 0, y.size - 1)])
    out[valid] = parent_ids[idx[valid]]
    return out


@dataclass(frozen=True)
class SpineSample:
    base: float  # unbiased entrance-law (or truncated cascade) contribution
    spine: dict  # level k -> size-biased jump Y_hat_k
    side_masses: dict  # level k (> level_lo) -> cascaded side contribution
    total: float


def spine_sample(spec: EntranceLawSpec, level: int, rng) -> SpineSample:
    """Size-biased representation: base + sum of cascaded side masses + Y_hat_level.

    Y_hat_k is drawn from the size-biasing of the level-k canonical measure;
    its contribution at `level` is an independent cascade of the kernels
    between. The total realizes the size-biasing of the (truncated)
    entrance-law at `level`.
    """
    if spec.case != "one_level":
        raise InvalidParameterError("spine construction needs the gamma (one_level) case")
    j = spec.resolve_j_max(level)
    base = entrance_law_sample(spec, level, rng).value
    kernels = make_kernels(spec.coefficients, range(level, j), kind="gamma")
    spine: dict[int, float] = {}
    side: dict[int, float] = {}
    total = base
    for k in range(level + 1, j):
        y_hat = size_biased_jump(spec.coefficients.value(k), rng)
        spine[k] = y_hat
        side[k] = iterate([kernels[m] for m in range(level, k)], y_hat, rng)
        total += side[k]
    y_hat_ell = size_biased_jump(spec.coefficients.value(level), rng)
    spine[level] = y_hat_ell
    total += y_hat_ell
    return SpineSample(base=base, spine=spine, side_masses=side, total=total)


def expected_relatives(level_lo: int, j: int, coeffs, case: str) -> float:
    """Expected normalized mass sharing a closest common ancestor at distance j."""
    if j <= level_lo:
        raise InvalidParameterError("j must exceed level_lo")
    return m_value(coeffs, case, j - 1)
