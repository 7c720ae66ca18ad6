"""Two-level branching particle system with individual immigration.

The rescaled system carries families of individuals; each individual has mass
eps and each family's contribution to the family-size measure has weight eps.
Event rates per current state:

- immigration of a new single-individual family at total rate c*a/eps^2,
  immigrant label uniform on [0,1];
- each family is copied at rate 1/(2 eps) and deleted at rate 1/(2 eps);
- each individual splits at rate (1 - eps*c)/(2 eps) and dies at rate
  (1 + eps*c)/(2 eps).

Aggregated mass zeta = eps^2 * (number of individuals); family-size measure
eta places weight eps at eps*j for each family of j individuals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InvalidParameterError, ResourceBudgetError

DEFAULT_MAX_EVENTS = 2_000_000_000
SNAP_DETAIL_BUDGET = 2_000_000


@dataclass(frozen=True)
class ParticleScale:
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise InvalidParameterError(f"epsilon must be in (0,1], got {self.epsilon}")


@dataclass(frozen=True)
class FamilyParams:
    c: float
    a: float
    epsilon: float

    def __post_init__(self):
        if self.c <= 0:
            raise InvalidParameterError(f"c must be positive, got {self.c}")
        if self.a < 0:
            raise InvalidParameterError(f"a must be nonnegative, got {self.a}")
        # epsilon 0 is legal for the moment formulas; simulation rejects it
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidParameterError(f"epsilon must be in [0,1], got {self.epsilon}")
        if self.epsilon * self.c > 1.0:
            raise InvalidParameterError(
                f"split rate (1 - eps*c)/(2 eps) negative: eps*c = {self.epsilon * self.c}")


@dataclass
class FamilyState:
    """Snapshot of the family population."""

    counts: np.ndarray  # individuals per family, all >= 1
    labels: np.ndarray  # immigrant label in [0,1] per family
    ids: np.ndarray  # monotone family ids, never reused
    clock: float
    params: FamilyParams

    @property
    def family_count(self) -> int:
        return int(self.counts.size)

    @property
    def total_individuals(self) -> int:
        return int(self.counts.sum())

    @property
    def zeta(self) -> float:
        return self.params.epsilon ** 2 * self.total_individuals

    @property
    def rescaled_sizes(self) -> np.ndarray:
        """Atom locations of eta: eps*j per family (each with weight eps)."""
        return self.params.epsilon * self.counts.astype(float)

    @property
    def eta_weight(self) -> float:
        return self.params.epsilon

    def eta_moment(self, j: int) -> float:
        """<eta, x^j> = eps * sum (eps*count)^j."""
        eps = self.params.epsilon
        return float(eps ** (1 + j) * np.sum(self.counts.astype(float) ** j))


@dataclass(frozen=True)
class MomentVector:
    m11: float = 0.0
    m21: float = 0.0
    m31: float = 0.0
    m41: float = 0.0
    m12: float = 0.0
    m22: float = 0.0
    M: float = 0.0
    m13: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([self.m11, self.m21, self.m31, self.m41,
                         self.m12, self.m22, self.M, self.m13])

    @classmethod
    def from_array(cls, arr) -> "MomentVector":
        return cls(*(float(v) for v in arr))


# ---------------------------------------------------------------------------
# jitted Gillespie core


@njit(cache=True)
def _fen_add(tree, i, delta, cap):
    i += 1
    while i <= cap:
        tree[i] += delta
        i += i & (-i)


@njit(cache=True)
def _fen_find(tree, u, cap, top_bit):
    """Smallest 0-based slot s with prefix sum over 0..s exceeding u."""
    pos = 0
    bit = top_bit
    while bit > 0:
        nxt = pos + bit
        if nxt <= cap and tree[nxt] <= u:
            pos = nxt
            u -= tree[nxt]
        bit >>= 1
    return pos


@njit(cache=True)
def _remove_slot(s, counts, labels, ids, tree, cap, F):
    _fen_add(tree, s, -float(counts[s]), cap)
    last = F - 1
    if s != last:
        _fen_add(tree, s, float(counts[last]), cap)
        _fen_add(tree, last, -float(counts[last]), cap)
        counts[s] = counts[last]
        labels[s] = labels[last]
        ids[s] = ids[last]
    counts[last] = 0
    return F - 1


@njit(cache=True)
def _twolevel_core(c, a, eps, seed, t_start, t_end, snap_times,
                   counts, labels, ids, state, tree, top_bit,
                   max_events, max_individuals,
                   snap_W, snap_F, snap_sumj2, snap_counts, snap_offsets):
    """Event loop. state = [F, W, next_id, n_events, status]; returns final clock.

    status 0 = completed, 1 = event/population budget exceeded,
    2 = family slot capacity exhausted.
    """
    np.random.seed(seed)
    cap = counts.shape[0]
    F = state[0]
    W = state[1]
    next_id = state[2]
    n_events = state[3]
    tree[:] = 0.0
    for k in range(F):
        _fen_add(tree, k, float(counts[k]), cap)

    r_imm = c * a / (eps * eps)
    p_birth = (1.0 - eps * c) / 2.0
    t = t_start
    si = 0
    nsnap = snap_times.shape[0]
    status = 0
    while True:
        R = r_imm + F / eps + W / eps
        if R <= 0.0:
            t_next = t_end + 1.0
        else:
            t_next = t + np.random.exponential(1.0 / R)
        while si < nsnap and snap_times[si] <= t_next:
            snap_W[si] = W
            snap_F[si] = F
            s2 = 0.0
            for k in range(F):
                s2 += float(counts[k]) * float(counts[k])
            snap_sumj2[si] = s2
            off = snap_offsets[si]
            if off + F <= snap_counts.shape[0]:
                for k in range(F):
                    snap_counts[off + k] = counts[k]
                snap_offsets[si + 1] = off + F
            else:
                snap_offsets[si + 1] = off
            si += 1
        if t_next > t_end:
            t = t_end
            break
        t = t_next

        u = np.random.random() * R
        if u < r_imm:
            if F >= cap:
                status = 2
                break
            counts[F] = 1
            labels[F] = np.random.random()
            ids[F] = next_id
            next_id += 1
            _fen_add(tree, F, 1.0, cap)
            F += 1
            W += 1
        else:
            u -= r_imm
            half_f = F / (2.0 * eps)
            if u < half_f:
                # family copy
                s = int(np.random.random() * F)
                if s >= F:
                    s = F - 1
                if F >= cap:
                    status = 2
                    break
                counts[F] = counts[s]
                labels[F] = labels[s]
                ids[F] = next_id
                next_id += 1
                _fen_add(tree, F, float(counts[s]), cap)
                W += counts[s]
                F += 1
            elif u < 2.0 * half_f:
                # family delete
                s = int(np.random.random() * F)
                if s >= F:
                    s = F - 1
                W -= counts[s]
                F = _remove_slot(s, counts, labels, ids, tree, cap, F)
            else:
                # individual event in a family chosen proportionally to size
                v = np.random.random() * W
                s = _fen_find(tree, v, cap, top_bit)
                if s >= F:
                    s = F - 1
                if np.random.random() < p_birth:
                    counts[s] += 1
                    _fen_add(tree, s, 1.0, cap)
                    W += 1
                else:
                    counts[s] -= 1
                    _fen_add(tree, s, -1.0, cap)
                    W -= 1
                    if counts[s] == 0:
                        F = _remove_slot(s, counts, labels, ids, tree, cap, F)

        n_events += 1
        if n_events >= max_events or W > max_individuals:
            status = 1
            break

    state[0] = F
    state[1] = W
    state[2] = next_id
    state[3] = n_events
    state[4] = status
    return t


def _top_bit(cap: int) -> int:
    b = 1
    while b * 2 <= cap:
        b *= 2
    return b


def _as_seed(rng_or_seed) -> int:
    if isinstance(rng_or_seed, np.random.Generator):
        return int(rng_or_seed.integers(1, 2 ** 31 - 1))
    return int(np.random.SeedSequence(rng_or_seed).generate_state(1)[0] % (2 ** 31 - 2)) + 1


def _empty_state(params: FamilyParams) -> FamilyState:
    return FamilyState(counts=np.zeros(0, dtype=np.int64),
                       labels=np.zeros(0), ids=np.zeros(0, dtype=np.int64),
                       clock=0.0, params=params)


def simulate(params: FamilyParams, init: FamilyState | None, t_end: float,
             rng, snapshot_times=None, max_events: int = DEFAULT_MAX_EVENTS,
             capacity: int | None = None,
             max_individuals: int | None = None) -> list[FamilyState]:
    """Exact event-driven simulation; returns snapshots plus the final state.

    rng may be a numpy Generator or an integer seed. Snapshot times must lie
    in (t_start, t_end]; the final state at t_end is always appended.
    """
    if t_end < 0:
        raise InvalidParameterError("t_end must be nonnegative")
    if params.epsilon <= 0.0:
        raise InvalidParameterError("simulation needs a positive particle scale epsilon")
    if init is None:
        init = _empty_state(params)
    t_start = init.clock
    if t_end < t_start:
        raise InvalidParameterError("t_end precedes the initial clock")
    snap = np.asarray([] if snapshot_times is None else snapshot_times, dtype=float)
    if snap.size and (snap.min() <= t_start or snap.max() > t_end or
                      np.any(np.diff(snap) < 0)):
        raise InvalidParameterError("snapshot times must be sorted within (t_start, t_end]")

    eps = params.epsilon
    guess = int(16 * max(params.a, init.zeta, 0.1) / eps ** 2) + 4096
    cap = capacity if capacity is not None else guess
    if max_individuals is None:
        max_individuals = 64 * int(max(params.a, init.zeta, 1.0) / eps ** 2) + 10 ** 6

    counts = np.zeros(cap, dtype=np.int64)
    labels = np.zeros(cap)
    ids = np.zeros(cap, dtype=np.int64)
    F0 = init.family_count
    if F0 > cap:
        raise InvalidParameterError("initial state exceeds capacity")
    counts[:F0] = init.counts
    labels[:F0] = init.labels
    ids[:F0] = init.ids
    next_id = int(init.ids.max()) + 1 if F0 else 0
    state = np.array([F0, int(init.counts.sum()), next_id, 0, 0], dtype=np.int64)
    tree = np.zeros(cap + 1)

    nsnap = snap.size
    snap_W = np.zeros(nsnap, dtype=np.int64)
    snap_F = np.zeros(nsnap, dtype=np.int64)
    snap_sumj2 = np.zeros(nsnap)
    snap_counts = np.zeros(min(SNAP_DETAIL_BUDGET, max(1, nsnap * cap)), dtype=np.int64)
    snap_offsets = np.zeros(nsnap + 1, dtype=np.int64)

    t = _twolevel_core(params.c, params.a, eps, _as_seed(rng), t_start, float(t_end),
                       snap, counts, labels, ids, state, tree, _top_bit(cap),
                       int(max_events), int(max_individuals),
                       snap_W, snap_F, snap_sumj2, snap_counts, snap_offsets)

    out = []
    for i in range(nsnap):
        lo, hi = snap_offsets[i], snap_offsets[i + 1]
        if hi > lo or snap_F[i] == 0:
            out.append(FamilyState(counts=snap_counts[lo:hi].copy(),
                                   labels=np.full(hi - lo, np.nan),
                                   ids=np.full(hi - lo, -1, dtype=np.int64),
                                   clock=float(snap[i]), params=params))
        else:
            out.append(None)  # detail budget overflow for this snapshot
    F = int(state[0])
    final = FamilyState(counts=counts[:F].copy(), labels=labels[:F].copy(),
                        ids=ids[:F].copy(), clock=float(t), params=params)
    status = int(state[4])
    if status != 0:
        reason = "event/population budget exceeded" if status == 1 \
            else "family slot capacity exhausted"
        raise ResourceBudgetError(
            f"twolevel simulation stopped at t={t:.4g}: {reason}",
            partial=out + [final])
    out.append(final)
    return out


def equilibrium_sample(params: FamilyParams, burn_in: float, rng,
                       **kwargs) -> tuple[float, FamilyState]:
    """(zeta, state) after burn_in from the empty state. Needs burn_in >= 10/c."""
    if burn_in < 10.0 / params.c:
        raise InvalidParameterError(
            f"burn_in {burn_in} below the 10/c floor ({10.0 / params.c})")
    final = simulate(params, None, burn_in, rng, **kwargs)[-1]
    return final.zeta, final


def equilibrium_ensemble(params: FamilyParams, n_draws: int, seed,
                         burn_in: float | None = None,
                         spacing: float | None = None,
                         draws_per_chain: int = 50,
                         **kwargs) -> list[FamilyState]:
    """Independent-ish equilibrium draws: several chains, spaced snapshots.

    Each chain burns in from empty for burn_in (default 20/c) and then
    records draws_per_chain snapshots spaced by `spacing` (default 3/c).
    Chains use independent streams derived from `seed`.
    """
    c = params.c
    if burn_in is None:
        burn_in = 20.0 / c
    if spacing is None:
        spacing = 3.0 / c
    if burn_in < 10.0 / c:
        raise InvalidParameterError("burn_in below the 10/c floor")
    n_chains = -(-n_draws // draws_per_chain)
    from .seeding import seed_sequence
    chain_seeds = seed_sequence(seed).generate_state(n_chains, dtype=np.uint64)
    draws: list[FamilyState] = []
    for ch in range(n_chains):
        want = min(draws_per_chain, n_draws - len(draws))
        times = burn_in + spacing * np.arange(want + 1)[1:]
        t_end = float(times[-1]) if want else burn_in
        snaps = simulate(params, None, t_end, int(chain_seeds[ch] % (2 ** 63)),
                         snapshot_times=times[:-1] if want else None, **kwargs)
        draws.extend(s for s in snaps[:-1] if s is not None)
        draws.append(snaps[-1])
    return draws[:n_draws]


def stationarity_diagnostic(values) -> float:
    """Relative gap between the means of the two halves of a sample window."""
    v = np.asarray(values, dtype=float)
    if v.size < 4:
        return math.nan
    half = v.size // 2
    m1, m2 = v[:half].mean(), v[half:].mean()
    denom = abs(v.mean()) if v.mean() != 0 else 1.0
    return abs(m2 - m1) / denom


# ---------------------------------------------------------------------------
# moment formulas


def moment_closed_forms(t: float, params: FamilyParams,
                        init: MomentVector) -> MomentVector:
    """Closed-form moments; entries without a full trajectory formula get
    their stationary principal value.

    m12 is the exact solution of its linear moment equation (variation of
    constants; the e^{-2ct} mode is resonant with the m21 forcing, producing
    the t e^{-2ct} term), valid for every epsilon and initial condition.
    """
    c, a, eps = params.c, params.a, params.epsilon
    E = math.exp(-c * t)
    E2 = math.exp(-2.0 * c * t)
    m11_0, m21_0, m12_0 = init.m11, init.m21, init.m12

    m11 = a * (1.0 - E) + E * m11_0
    m21 = (a / (2.0 * c) * (1.0 - 2.0 * E + E2) + m21_0 * E2
           + m11_0 / c * (E - E2) + eps * a / 2.0 * (1.0 - E2))
    p0 = a / (4.0 * c ** 2) + a ** 2 + 3.0 * a * eps / (4.0 * c) + eps ** 2 * a / 2.0
    p1 = (m11_0 - a) * (1.0 / c ** 2 + 2.0 * a + eps / c)
    res = m21_0 - a / (2.0 * c) - a * eps / 2.0 - (m11_0 - a) / c
    m12 = p0 + p1 * E + res * t * E2 + (m12_0 - p0 - p1) * E2
    return MomentVector(
        m11=m11, m21=m21,
        m31=a / (2.0 * c ** 2),
        m41=3.0 * a / (4.0 * c ** 3),
        m12=m12,
        m22=3.0 * a / (16.0 * c ** 4),
        M=a / (4.0 * c ** 3) + a ** 2 / (2.0 * c),
        m13=3.0 * a ** 2 / (4.0 * c ** 2) + a ** 3 + a / (12.0 * c ** 4))


def _moment_rhs(m: np.ndarray, c: float, a: float, eps: float) -> np.ndarray:
    m11, m21, m31, m41, m12, m22, M, m13 = m
    return np.array([
        c * a - c * m11,
        m11 - 2.0 * c * m21 + c * a * eps,
        c * a * eps ** 2 + 3.0 * m21 - 3.0 * c * m31,
        c * a * eps ** 3 + 6.0 * m31 - 4.0 * c * m41,
        m21 - 2.0 * c * m12 + (2.0 * c * a + eps) * m11 + eps ** 2 * c * a,
        m41 - 4.0 * c * m22,
        c * a * m21 + m31 + m12 - 3.0 * c * M,
        3.0 * c * a * m12 + 3.0 * M - 3.0 * c * m13,
    ])


def moment_ode_solve(t_end: float, params: FamilyParams, init: MomentVector,
                     step: float) -> tuple[np.ndarray, np.ndarray]:
    """Classic fourth-order Runge-Kutta on the moment system.

    Returns (times, trajectory) with trajectory[i] the MomentVector array at
    times[i]; vanishing-with-eps correction terms are set to zero.
    """
    if step <= 0:
        raise InvalidParameterError("step must be positive")
    c, a, eps = params.c, params.a, params.epsilon
    n = int(math.ceil(t_end / step))
    times = np.linspace(0.0, n * step, n + 1)
    traj = np.empty((n + 1, 8))
    m = init.to_array().astype(float)
    traj[0] = m
    h = step
    for i in range(n):
        k1 = _moment_rhs(m, c, a, eps)
        k2 = _moment_rhs(m + 0.5 * h * k1, c, a, eps)
        k3 = _moment_rhs(m + 0.5 * h * k2, c, a, eps)
        k4 = _moment_rhs(m + h * k3, c, a, eps)
        m = m + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        traj[i + 1] = m
    return times, traj


# ---------------------------------------------------------------------------
# equilibrium statistics


def estimate_nu_moments(samples, a: float, c: float) -> tuple[float, float]:
    """Canonical-measure moment estimates from equilibrium zeta samples.

    zeta is infinitely divisible with canonical measure a*nu_c, so
    mean/a estimates the first moment of nu_c (target 1) and variance/a its
    second moment (target 1/(4c^2)).
    """
    z = np.asarray([s.zeta if isinstance(s, FamilyState) else float(s)
                    for s in samples], dtype=float)
    if z.size < 1000:
        warnings.warn(f"only {z.size} samples; nu moment estimates are underpowered",
                      stacklevel=2)
    if a <= 0:
        raise InvalidParameterError("a must be positive to normalize")
    if np.all(z == 0.0):
        warnings.warn("all-zero equilibrium samples", stacklevel=2)
        return 0.0, 0.0
    return float(z.mean() / a), float(z.var(ddof=1) / a)


@dataclass(frozen=True)
class FamilyCountStats:
    threshold: float
    count_mean: float
    count_se: float
    tail_mass: dict = field(default_factory=dict)  # K -> mean of int_K^inf x eta(dx)


def family_count_above(samples, delta: float, tail_ks=(1.0, 2.0, 4.0, 8.0)) -> FamilyCountStats:
    """Families with rescaled mass >= delta, and tail-mass statistics."""
    if delta <= 0:
        raise InvalidParameterError("delta must be positive")
    counts = []
    tails = {float(K): [] for K in tail_ks}
    for s in samples:
        sizes = s.rescaled_sizes
        w = s.eta_weight
        counts.append(int(np.sum(sizes >= delta)))
        for K in tails:
            tails[K].append(float(w * sizes[sizes >= K].sum()))
    cnt = np.asarray(counts, dtype=float)
    se = float(cnt.std(ddof=1) / math.sqrt(cnt.size)) if cnt.size > 1 else math.nan
    return FamilyCountStats(threshold=delta, count_mean=float(cnt.mean()), count_se=se,
                            tail_mass={K: float(np.mean(v)) for K, v in tails.items()})
