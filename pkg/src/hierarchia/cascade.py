"""Subordinator kernels, their iteration, and the entrance law.

A level-k kernel maps a mass a to a random mass with mean a and variance
a*m_k, where m_k = 1/(2 c_k) for the gamma kind and 1/(4 c_k^2) for the
two_level kind. Iterating kernels downward from a high level j with a fixed
seed mass theta converges in L^2 to the entrance law, whose variance at level
l is theta * sum_{k >= l} m_k.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .hiergroup import CoefficientSequence
from . import twolevel as _twolevel

KINDS = ("gamma", "two_level")


@dataclass(frozen=True)
class LevyDescriptor:
    kind: str
    c: float
    epsilon: float | None = None  # particle scale, two_level only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown kernel kind {self.kind!r}")
        if self.c <= 0:
            raise InvalidParameterError(f"c must be positive, got {self.c}")
        if self.kind == "two_level":
            eps = self.epsilon
            if eps is None or not 0 < eps <= 1 or eps * self.c > 1.0:
                raise InvalidParameterError(
                    "two_level kernel needs 0 < epsilon <= min(1, 1/c)")

    @property
    def second_moment(self) -> float:
        """m: second moment of the canonical measure (analytic in both kinds)."""
        if self.kind == "gamma":
            return 1.0 / (2.0 * self.c)
        return 1.0 / (4.0 * self.c ** 2)


@dataclass(frozen=True)
class SubordinatorKernel:
    descriptor: LevyDescriptor
    burn_in: float | None = None  # two_level Gillespie burn-in, default 20/c

    def sample(self, a: float, rng: np.random.Generator, size=None):
        if a < 0:
            raise InvalidParameterError("mass must be nonnegative")
        d = self.descriptor
        if a == 0.0:
            return 0.0 if size is None else np.zeros(size)
        if d.kind == "gamma":
            draw = rng.gamma(2.0 * d.c * a, 1.0 / (2.0 * d.c), size=size)
            return float(draw) if size is None else draw
        burn = self.burn_in if self.burn_in is not None else 20.0 / d.c
        params = _twolevel.FamilyParams(c=d.c, a=a, epsilon=d.epsilon)
        if size is None:
            z, _ = _twolevel.equilibrium_sample(params, burn, rng)
            return z
        return np.array([_twolevel.equilibrium_sample(params, burn, rng)[0]
                         for _ in range(size)])


def kernel_sample(kernel: SubordinatorKernel, a: float, rng, size=None):
    return kernel.sample(a, rng, size=size)


def default_epsilon(c: float, floor: float = 0.05) -> float:
    """Particle scale for a two_level kernel at level coefficient c."""
    return min(floor, 1.0 / (2.0 * c))


def make_kernels(coeffs: CoefficientSequence, levels, kind: str = "gamma",
                 epsilon: float | None = None) -> dict:
    """Kernels keyed by level k, with c_k = coeffs.value(k)."""
    out = {}
    for k in levels:
        c_k = coeffs.value(k)
        eps = None
        if kind == "two_level":
            eps = epsilon if epsilon is not None else default_epsilon(c_k)
            eps = min(eps, 1.0 / (2.0 * c_k))
        out[k] = SubordinatorKernel(LevyDescriptor(kind=kind, c=c_k, epsilon=eps))
    return out


def iterate(kernels, a: float, rng) -> float:
    """S_l^j(a): apply the highest-level kernel first, composing downward."""
    if not kernels:
        raise InvalidParameterError("iterate needs at least one kernel")
    if isinstance(kernels, dict):
        ordered = [kernels[k] for k in sorted(kernels)]
    else:
        ordered = list(kernels)
    x = a
    for kern in reversed(ordered):
        x = kern.sample(x, rng)
    return x


def m_value(coeffs: CoefficientSequence, case: str, k: int) -> float:
    if case == "one_level":
        return 1.0 / (2.0 * coeffs.value(k))
    if case == "two_level":
        return 1.0 / (4.0 * coeffs.value(k) ** 2)
    raise InvalidParameterError(f"unknown case {case!r}")


def m_tail(coeffs: CoefficientSequence, case: str, j: int) -> float:
    """sum_{k >= j} m_k; closed form for geometric coefficients."""
    e = 1 if case == "one_level" else 2
    scale = 2.0 if case == "one_level" else 4.0
    if coeffs.form == "geometric":
        if coeffs.b <= 1.0:
            return math.inf
        first = 1.0 / (scale * coeffs.value(j) ** e)
        return first / (1.0 - coeffs.b ** (-e))
    total = coeffs.inverse_power_sum(e)
    if total is None:
        raise InvalidParameterError(
            "explicit coefficients need a tail rule to bound the m-series")
    if math.isinf(total):
        return math.inf
    head = sum(coeffs.value(i) ** (-e) for i in range(j))
    return (total - head) / scale


@dataclass(frozen=True)
class EntranceLawSpec:
    theta: float
    coefficients: CoefficientSequence
    case: str  # one_level or two_level
    j_max: int | None = None
    epsilon: float | None = None  # two_level particle scale override

    def __post_init__(self):
        if self.theta < 0:
            raise InvalidParameterError("theta must be nonnegative")
        if self.case not in ("one_level", "two_level"):
            raise InvalidParameterError(f"unknown case {self.case!r}")

    def resolve_j_max(self, level: int, tol: float = 1e-4) -> int:
        """Smallest truncation level with variance tail below tol*theta."""
        if self.j_max is not None:
            if self.j_max <= level:
                raise InvalidParameterError("j_max must exceed the target level")
            return self.j_max
        j = level + 1
        while m_tail(self.coefficients, self.case, j) >= tol:
            j += 1
            if j > level + 200:
                raise InvalidParameterError(
                    "m-series tail does not reach the truncation tolerance; "
                    "entrance law may not exist")
        return j

    def kernel_kind(self) -> str:
        return "gamma" if self.case == "one_level" else "two_level"


@dataclass(frozen=True)
class EntranceSample:
    value: float
    truncation_sd: float
    j_max: int


def _check_convergent(spec: EntranceLawSpec, level: int) -> float:
    """Variance tail at the truncation level; error when the series diverges."""
    tail_total = m_tail(spec.coefficients, spec.case, level)
    if math.isinf(tail_total):
        raise InvalidParameterError(
            "sum of canonical second moments diverges; no entrance law")
    return tail_total


def entrance_law_sample(spec: EntranceLawSpec, level: int, rng,
                        kernels: dict | None = None) -> EntranceSample:
    """One draw of the level-`level` entrance-law value, truncated at j_max."""
    _check_convergent(spec, level)
    j = spec.resolve_j_max(level)
    if kernels is None:
        kernels = make_kernels(spec.coefficients, range(level, j),
                               kind=spec.kernel_kind(), epsilon=spec.epsilon)
    value = iterate([kernels[k] for k in range(level, j)], spec.theta, rng)
    tail_var = spec.theta * m_tail(spec.coefficients, spec.case, j)
    return EntranceSample(value=value, truncation_sd=math.sqrt(tail_var), j_max=j)


def entrance_law_ensemble(spec: EntranceLawSpec, level: int, n: int, rng) -> np.ndarray:
    """n independent entrance-law draws (kernels built once)."""
    _check_convergent(spec, level)
    j = spec.resolve_j_max(level)
    kernels = make_kernels(spec.coefficients, range(level, j),
                           kind=spec.kernel_kind(), epsilon=spec.epsilon)
    ordered = [kernels[k] for k in range(level, j)]
    return np.array([iterate(ordered, spec.theta, rng) for _ in range(n)])


def backward_chain_sample(spec: EntranceLawSpec, levels, rng) -> np.ndarray:
    """Joint draw (zeta_j, ..., zeta_1) along descending consecutive levels.

    The top level is seeded by an entrance-law draw; each step down applies
    that level's kernel to the value above it.
    """
    levels = list(levels)
    if not levels or any(levels[i] - levels[i + 1] != 1 for i in range(len(levels) - 1)):
        raise InvalidParameterError("levels must be consecutive and descending")
    top = levels[0]
    if spec.theta == 0.0:
        return np.zeros(len(levels))
    sample = entrance_law_sample(spec, top, rng)
    kernels = make_kernels(spec.coefficients, levels[1:],
                           kind=spec.kernel_kind(), epsilon=spec.epsilon)
    out = np.empty(len(levels))
    out[0] = sample.value
    for i, lev in enumerate(levels[1:], start=1):
        out[i] = kernels[lev].sample(out[i - 1], rng)
    return out


def backward_chain_ensemble(spec: EntranceLawSpec, levels, n: int, rng) -> np.ndarray:
    """n joint draws, shape (n, len(levels)); kernels built once."""
    levels = list(levels)
    if not levels or any(levels[i] - levels[i + 1] != 1 for i in range(len(levels) - 1)):
        raise InvalidParameterError("levels must be consecutive and descending")
    top = levels[0]
    _check_convergent(spec, top)
    j = spec.resolve_j_max(top)
    top_kernels = make_kernels(spec.coefficients, range(top, j),
                               kind=spec.kernel_kind(), epsilon=spec.epsilon)
    ordered = [top_kernels[k] for k in range(top, j)]
    down = make_kernels(spec.coefficients, levels[1:],
                        kind=spec.kernel_kind(), epsilon=spec.epsilon)
    out = np.empty((n, len(levels)))
    for r in range(n):
        x = iterate(ordered, spec.theta, rng)
        out[r, 0] = x
        for i, lev in enumerate(levels[1:], start=1):
            x = down[lev].sample(x, rng)
            out[r, i] = x
    return out
