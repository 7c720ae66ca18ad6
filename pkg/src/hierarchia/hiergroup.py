"""Hierarchical group geometry, walk rates, transience, and the Green operator.

Sites are digit vectors of length D with entries in {0..N-1}; index k of the
vector is the level-(k+1) digit, so the most significant level sits last.
Distance between two sites is the highest differing index plus one (an
ultrametric). The walk jumps a distance ell at rate q_ell and lands uniformly
on the radius-ell sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, SingularSystemError

TAIL_RULES = ("repeat_last_ratio", "power_law")


@dataclass(frozen=True)
class GroupSpec:
    """Truncated hierarchical group of order N and depth D."""

    N: int
    D: int

    def __post_init__(self):
        if self.N < 2:
            raise InvalidParameterError(f"N must be >= 2, got {self.N}")
        if self.D < 1:
            raise InvalidParameterError(f"D must be >= 1, got {self.D}")

    @property
    def n_sites(self) -> int:
        return self.N ** self.D

    def ball_size(self, ell: int) -> int:
        assert 0 <= ell <= self.D
        return self.N ** ell

    def sphere_size(self, ell: int) -> int:
        assert 0 <= ell <= self.D
        if ell == 0:
            return 1
        return (self.N - 1) * self.N ** (ell - 1)

    def sphere_sizes(self) -> np.ndarray:
        """Cardinality of each distance class 0..D."""
        return np.array([self.sphere_size(d) for d in range(self.D + 1)])

    def encode(self, digits: np.ndarray) -> int:
        """Digit vector -> integer site id (level-1 digit least significant)."""
        digits = np.asarray(digits)
        assert digits.shape == (self.D,)
        return int(np.dot(digits, self.N ** np.arange(self.D)))

    def decode(self, site: int) -> np.ndarray:
        out = np.empty(self.D, dtype=np.int64)
        for k in range(self.D):
            out[k] = site % self.N
            site //= self.N
        return out


@dataclass(frozen=True)
class CoefficientSequence:
    """Migration coefficients c_0, c_1, ...

    Either geometric c_i = c * b**i (stored exactly) or an explicit finite
    list. Explicit lists may declare a tail rule used to extrapolate series
    sums; without one, transience classification is undetermined.
    """

    form: str  # "geometric" or "explicit"
    c: float = 1.0
    b: float = 1.0
    values: tuple = ()
    tail_rule: str | None = None

    @classmethod
    def geometric(cls, c: float, b: float) -> "CoefficientSequence":
        if c <= 0 or b <= 0:
            raise InvalidParameterError("geometric coefficients need c > 0, b > 0")
        return cls(form="geometric", c=float(c), b=float(b))

    @classmethod
    def explicit(cls, values, tail_rule: str | None = None) -> "CoefficientSequence":
        vals = tuple(float(v) for v in values)
        if not vals or any(v <= 0 for v in vals):
            raise InvalidParameterError("explicit coefficients must be positive and nonempty")
        if tail_rule is not None and tail_rule not in TAIL_RULES:
            raise InvalidParameterError(f"unknown tail rule {tail_rule!r}")
        return cls(form="explicit", values=vals, tail_rule=tail_rule)

    def value(self, i: int) -> float:
        assert i >= 0
        if self.form == "geometric":
            return self.c * self.b ** i
        if i < len(self.values):
            return self.values[i]
        if self.tail_rule == "repeat_last_ratio" and len(self.values) >= 2:
            r = self.values[-1] / self.values[-2]
            return self.values[-1] * r ** (i - len(self.values) + 1)
        if self.tail_rule == "power_law" and len(self.values) >= 2:
            p = self._power_exponent()
            L = len(self.values)
            return self.values[-1] * ((i + 1) / L) ** p
        raise InvalidParameterError(
            f"coefficient index {i} beyond explicit list of length {len(self.values)} "
            "and no tail rule declared"
        )

    def _power_exponent(self) -> float:
        L = len(self.values)
        assert L >= 2
        return math.log(self.values[-1] / self.values[-2]) / math.log(L / (L - 1))

    def inverse_power_sum(self, e: int) -> float | None:
        """sum_{i>=0} c_i^{-e}, in closed form where possible.

        Returns math.inf when divergent and None when undetermined (explicit
        list without a tail rule).
        """
        assert e in (1, 2)
        if self.form == "geometric":
            if self.b <= 1.0:
                return math.inf
            return self.c ** (-e) / (1.0 - self.b ** (-e))
        partial = sum(v ** (-e) for v in self.values)
        if self.tail_rule is None:
            return None
        if self.tail_rule == "repeat_last_ratio":
            if len(self.values) < 2:
                return None
            r = self.values[-1] / self.values[-2]
            if r <= 1.0:
                return math.inf
            return partial + self.values[-1] ** (-e) * (r ** (-e) / (1.0 - r ** (-e)))
        # power_law: c_i ~ A * (i+1)^p, so sum c_i^{-e} behaves like an
        # integral of x^{-e p}; converges iff e*p > 1.
        p = self._power_exponent()
        if e * p <= 1.0:
            return math.inf
        L = len(self.values)
        A = self.values[-1] / L ** p
        tail = A ** (-e) * L ** (1.0 - e * p) / (e * p - 1.0)
        return partial + tail

    def growth_ratio(self) -> float:
        """limsup c_{i+1}/c_i proxy: exact for geometric, max observed ratio otherwise."""
        if self.form == "geometric":
            return self.b
        if len(self.values) == 1:
            return 1.0
        v = self.values
        return max(v[i + 1] / v[i] for i in range(len(v) - 1))


@dataclass(frozen=True)
class RateTable:
    """Per-distance jump rates q_1..q_D of the hierarchical walk."""

    level_exponent: int
    rates: np.ndarray  # rates[ell-1] = q_ell
    residual_rate: float  # total rate of dropped jumps of distance > D
    N: int
    D: int

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())

    def probabilities(self) -> np.ndarray:
        return self.rates / self.rates.sum()


@dataclass(frozen=True)
class TransienceReport:
    classification: str
    degree: float | None
    degree_interval: tuple | None
    criterion_value: float | None
    level_exponent: int
    walk_growth_bound_ok: bool
    note: str = ""


@dataclass(frozen=True)
class GreenOperator:
    """Expected per-site occupation g(d) of the truncated walk by distance class.

    The distance-from-origin process is a finite Markov chain on {0..D}; the
    depth-D class is treated as absorbing so that occupation times are finite,
    giving g(D) = 0. Under strongly transient coefficients the low-d values
    stabilize as D grows.
    """

    radial_values: np.ndarray  # g(0..D)
    spec: GroupSpec = field(repr=False, default=None)

    def __call__(self, d: int) -> float:
        return float(self.radial_values[d])


def make_rate_table(spec: GroupSpec, coeffs: CoefficientSequence,
                    level_exponent: int) -> RateTable:
    """Walk rates q_ell = c_{ell-1} * N^{-(ell-1)/level_exponent'}.

    level_exponent 1 divides by N^(ell-1), level_exponent 2 by N^((ell-1)/2).
    """
    if level_exponent not in (1, 2):
        raise InvalidParameterError(f"level_exponent must be 1 or 2, got {level_exponent}")
    N, D = spec.N, spec.D
    scale = N if level_exponent == 1 else math.sqrt(N)
    vals = np.array([coeffs.value(i) for i in range(D)], dtype=float)
    if np.any(vals <= 0):
        raise InvalidParameterError("coefficients must be strictly positive")
    rates = vals * scale ** (-np.arange(D, dtype=float))

    if coeffs.form == "geometric":
        rho = coeffs.b / scale
        residual = math.inf if rho >= 1.0 else float(rates[-1] * rho / (1.0 - rho))
    elif coeffs.tail_rule is not None and len(coeffs.values) >= 2:
        r_q = (coeffs.values[-1] / coeffs.values[-2]) / scale
        residual = math.inf if r_q >= 1.0 else float(rates[-1] * r_q / (1.0 - r_q))
    else:
        residual = math.nan
    return RateTable(level_exponent=level_exponent, rates=rates,
                     residual_rate=residual, N=N, D=D)


def hierarchical_distance(x: np.ndarray, y: np.ndarray) -> int:
    """Highest differing digit index plus one; 0 iff x == y."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise InvalidParameterError(f"address depth mismatch: {x.shape} vs {y.shape}")
    diff = np.nonzero(x != y)[0]
    if diff.size == 0:
        return 0
    return int(diff[-1]) + 1


def sample_jump(x: np.ndarray, rates: RateTable, rng: np.random.Generator) -> np.ndarray:
    """One walk jump from x: distance ell w.p. q_ell/sum q, uniform on the sphere."""
    x = np.asarray(x)
    N, D = rates.N, rates.D
    assert x.shape == (D,)
    cum = np.cumsum(rates.rates)
    ell = int(np.searchsorted(cum, rng.random() * cum[-1], side="right")) + 1
    u = np.zeros(D, dtype=x.dtype)
    if ell > 1:
        u[: ell - 1] = rng.integers(0, N, size=ell - 1)
    u[ell - 1] = rng.integers(1, N)
    return (x + u) % N


def classify_transience(coeffs: CoefficientSequence, level_exponent: int,
                        N: int) -> TransienceReport:
    """Series test sum c_i^{-1} (level 1) or sum c_i^{-2} (level 2)."""
    if level_exponent not in (1, 2):
        raise InvalidParameterError(f"level_exponent must be 1 or 2, got {level_exponent}")
    bound = N if level_exponent == 1 else math.sqrt(N)
    ratio = coeffs.growth_ratio()
    growth_ok = ratio < bound

    s = coeffs.inverse_power_sum(level_exponent)
    if s is None:
        return TransienceReport(
            classification="undetermined", degree=None, degree_interval=None,
            criterion_value=None, level_exponent=level_exponent,
            walk_growth_bound_ok=growth_ok,
            note="explicit coefficient list without a declared tail rule; "
                 "series sum cannot be extrapolated")
    converges = math.isfinite(s)
    if level_exponent == 1:
        classification = "transient" if converges else "not transient"
    else:
        classification = "strongly transient" if converges else "not strongly transient"

    degree = None
    degree_interval = None
    note = ""
    if converges:
        if coeffs.form == "geometric" and 1.0 < coeffs.b < bound:
            degree = degree_of_transience(coeffs.b, N, level_exponent)
        elif 1.0 < ratio < bound:
            lo = 0.0 if level_exponent == 1 else 1.0
            degree_interval = (lo, degree_of_transience(ratio, N, level_exponent))
        else:
            note = ("growth ratio outside (1, N^(1/level_exponent)); "
                    "degree formula not applicable")
    if not growth_ok and not note:
        note = "coefficient growth reaches the N-dependent bound; the untruncated walk is not well defined"
    return TransienceReport(
        classification=classification, degree=degree, degree_interval=degree_interval,
        criterion_value=float(s), level_exponent=level_exponent,
        walk_growth_bound_ok=growth_ok, note=note)


def degree_of_transience(c: float, N: int, level_exponent: int) -> float:
    """Closed-form degree for pure-power coefficients with ratio c."""
    if level_exponent == 1:
        if not 1.0 < c < N:
            raise InvalidParameterError(f"level 1 degree needs 1 < c < N, got c={c}, N={N}")
        return math.log(c) / (math.log(N) - math.log(c))
    if level_exponent == 2:
        if not 1.0 < c < math.sqrt(N):
            raise InvalidParameterError(
                f"level 2 degree needs 1 < c < sqrt(N), got c={c}, N={N}")
        return (math.log(N) + 2.0 * math.log(c)) / (math.log(N) - 2.0 * math.log(c))
    raise InvalidParameterError(f"level_exponent must be 1 or 2, got {level_exponent}")


def _radial_transition_rates(rates: RateTable):
    """Off-diagonal rates of the distance chain on {0..D}, D absorbing.

    Returns (A, absorb) where A[d, k] is the rate d -> k over transient states
    d, k in {0..D-1} (self-loops excluded) and absorb[d] is the rate into the
    absorbing class D.
    """
    N, D = rates.N, rates.D
    q = rates.rates
    A = np.zeros((D, D))
    absorb = np.zeros(D)
    for d in range(D):
        for ell in range(d + 1, D + 1):
            if ell == D:
                absorb[d] += q[D - 1]
            else:
                A[d, ell] += q[ell - 1]
        if d >= 1:
            # a distance-d jump from a distance-d site: stays at d with
            # probability (N-2)/(N-1), otherwise descends
            for k in range(1, d):
                A[d, k] += q[d - 1] * N ** (k - d)
            A[d, 0] += q[d - 1] / ((N - 1) * N ** (d - 1))
        # jumps of size < d leave the distance unchanged (self-loop)
    return A, absorb


def green_operator(rates: RateTable, spec: GroupSpec) -> GreenOperator:
    """Radial linear solve for expected occupation, started at the origin."""
    D = spec.D
    A, absorb = _radial_transition_rates(rates)
    gen = A.copy()
    np.fill_diagonal(gen, -(A.sum(axis=1) + absorb))
    e0 = np.zeros(D)
    e0[0] = 1.0
    try:
        occ = np.linalg.solve(gen.T, -e0)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "radial occupation system is singular; truncated walk has no "
            "absorbing escape route") from exc
    if np.any(occ < -1e-12):
        raise SingularSystemError("radial occupation solve produced negative times")
    g = np.zeros(D + 1)
    g[:D] = occ / spec.sphere_sizes()[:D]
    return GreenOperator(radial_values=g, spec=spec)


def mc_origin_occupation(rates: RateTable, spec: GroupSpec, n_paths: int,
                         rng: np.random.Generator) -> tuple:
    """Monte Carlo oracle for g(0): mean occupation time of the origin.

    Simulates the same absorbed distance chain as green_operator, with
    exponential holding times, vectorized over paths. Returns (mean, stderr).
    """
    N, D = spec.N, spec.D
    q = rates.rates
    R = q.sum()
    cum = np.cumsum(q) / R
    state = np.zeros(n_paths, dtype=np.int64)
    occ = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    p_stay = (N - 2) / (N - 1)
    while alive.any():
        idx = np.nonzero(alive)[0]
        occ[idx] += np.where(state[idx] == 0, rng.exponential(1.0 / R, size=idx.size), 0.0)
        ell = np.searchsorted(cum, rng.random(idx.size), side="right") + 1
        s = state[idx]
        new = s.copy()
        up = ell > s
        new[up] = ell[up]
        same = ell == s
        if same.any():
            js = np.nonzero(same)[0]
            u = rng.random(js.size)
            for j, uu in zip(js, u):
                d = int(s[j])
                if uu < p_stay:
                    continue
                # descend: conditional law over {0..d-1}
                w = (uu - p_stay) / (1.0 - p_stay)
                acc = 0.0
                target = 0
                for k in range(d - 1, 0, -1):
                    acc += (N - 1) * N ** (k - d)
                    if w < acc:
                        target = k
                        break
                new[j] = target
        state[idx] = new
        alive[idx] = new < D
    mean = float(occ.mean())
    stderr = float(occ.std(ddof=1) / math.sqrt(n_paths))
    return mean, stderr


def apply_green_radial(green: GreenOperator, f: np.ndarray) -> np.ndarray:
    """(G f)(d) for a radial function f(0..D) around the same center.

    Uses sphere-count algebra: for |x| = r the sites at distance s from x have
    known distance-from-origin profiles, so the convolution is O(D^2).
    """
    spec = green.spec
    N, D = spec.N, spec.D
    g = green.radial_values
    f = np.asarray(f, dtype=float)
    assert f.shape == (D + 1,)
    ball_prefix = np.array(
        [f[0]] + [(N - 1) * N ** (k - 1) * f[k] for k in range(1, D + 1)])
    ball_cum = np.cumsum(ball_prefix)  # sum over the ball of radius k of f(|y|)
    out = np.zeros(D + 1)
    for r in range(D + 1):
        total = g[0] * f[r]
        for s in range(1, D + 1):
            if s != r:
                total += g[s] * spec.sphere_size(s) * f[max(r, s)]
            else:
                # the distance-r sphere around x splits into (N-2)N^(r-1)
                # sites still at distance r from the origin plus one copy of
                # the full radius-(r-1) ball
                total += g[s] * ((N - 2) * N ** (r - 1) * f[r] + ball_cum[r - 1])
        out[r] = total
    return out


def radial_inner(spec: GroupSpec, f1: np.ndarray, f2: np.ndarray) -> float:
    """<f1, f2> = sum over sites, for radial functions given by distance class."""
    s = spec.sphere_sizes()
    return float(np.dot(s, np.asarray(f1) * np.asarray(f2)))


def block_indicator(spec: GroupSpec, ell: int) -> np.ndarray:
    """phi = N^{-ell} 1_{B_ell} as a radial vector."""
    assert 0 <= ell <= spec.D
    phi = np.zeros(spec.D + 1)
    phi[: ell + 1] = spec.N ** (-float(ell))
    return phi


def green_pairings(green: GreenOperator, ell: int) -> tuple:
    """(<phi,phi>, <phi,G phi>, <phi,G^2 phi>) for phi = N^{-ell} 1_{B_ell}."""
    spec = green.spec
    phi = block_indicator(spec, ell)
    gphi = apply_green_radial(green, phi)
    g2phi = apply_green_radial(green, gphi)
    return (radial_inner(spec, phi, phi),
            radial_inner(spec, phi, gphi),
            radial_inner(spec, phi, g2phi))
