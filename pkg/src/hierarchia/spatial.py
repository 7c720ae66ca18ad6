"""Branching random walks on the truncated hierarchical group.

Sites are integers in [0, N^D); the level-(k+1) digit is digit k in base N,
so the radius-ell ball around 0 is {0 .. N^ell - 1} and block membership is an
integer-division test. Dynamics per individual: critical binary branching at
rate 1 (remove or split, probability 1/2 each) and migration at total rate
sum q_ell (distance ell with probability q_ell / sum q, landing uniformly on
the sphere). In two_level mode each family additionally vanishes or is
duplicated in place at rate 1 (probability 1/2 each); duplicates get fresh
family ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import stats as _stats

from .errors import InvalidParameterError, ResourceBudgetError
from .hiergroup import GroupSpec, RateTable
from . import cascade as _cascade

DEFAULT_MAX_EVENTS = 2_000_000_000
DEFAULT_MAX_INDIVIDUALS = 1_000_000


@dataclass
class SpatialConfiguration:
    spec: GroupSpec
    sites: np.ndarray  # int64 site per individual
    fams: np.ndarray  # int64 family id per individual
    clock: float
    mode: str  # one_level or two_level
    arrivals_into_block: int = 0  # migration arrivals into B_ell0 from outside it
    arrivals_from_exterior: int = 0  # ... whose origin lies outside B_{ell0+1}
    ell0: int = 1

    @property
    def population(self) -> int:
        return int(self.sites.size)

    def family_counts(self):
        fids, counts = np.unique(self.fams, return_counts=True)
        return fids, counts


@dataclass(frozen=True)
class BlockAverage:
    level: int
    value: float


@dataclass(frozen=True)
class FamilySizeHistogram:
    level: int
    sizes: np.ndarray  # rescaled sizes j * N^{-ell/2}, one entry per family
    weight: float  # weight N^{-ell/2} per entry

    def total_mass(self) -> float:
        """<eta, x> which equals the block average."""
        return float(self.weight * self.sizes.sum())

    def tail_mass(self, K: float) -> float:
        return float(self.weight * self.sizes[self.sizes >= K].sum())

    def count_above(self, delta: float) -> int:
        return int(np.sum(self.sizes >= delta))


@njit(cache=True)
def _sample_site_jump(site, ell, N, pow_n):
    """Uniform landing site at distance ell from `site`."""
    base = (site // pow_n[ell]) * pow_n[ell]
    low = site % pow_n[ell]
    top_old = low // pow_n[ell - 1]
    # top digit must differ
    d = int(np.random.random() * (N - 1))
    if d >= top_old:
        d += 1
    rest = int(np.random.random() * pow_n[ell - 1])
    return base + d * pow_n[ell - 1] + rest


@njit(cache=True)
def _spatial_core(seed, t_start, t_end, N, D, q, two_level,
                  site, fam, fcount, alive_f, fpos, state,
                  max_events, max_individuals, ell0, pow_n):
    """Advance the configuration to t_end.

    state = [M, F, next_fid, n_events, status, arrivals_in, arrivals_ext].
    status: 0 done, 1 event/population budget, 2 family-id capacity.
    """
    np.random.seed(seed)
    M = state[0]
    F = state[1]
    next_fid = state[2]
    n_events = state[3]
    arr_in = state[5]
    arr_ext = state[6]
    cap_i = site.shape[0]
    cap_f = fcount.shape[0]
    Qtot = 0.0
    for k in range(D):
        Qtot += q[k]
    b_in = pow_n[ell0]
    b_out = pow_n[ell0 + 1] if ell0 + 1 <= D else pow_n[D]
    status = 0
    t = t_start
    while True:
        R = M * (1.0 + Qtot)
        if two_level:
            R += F
        if R <= 0.0:
            t = t_end
            break
        t += np.random.exponential(1.0 / R)
        if t > t_end:
            t = t_end
            break
        u = np.random.random() * R
        if u < M:
            # individual branch
            i = int(u)
            if i >= M:
                i = M - 1
            if np.random.random() < 0.5:
                # remove
                f = fam[i]
                site[i] = site[M - 1]
                fam[i] = fam[M - 1]
                M -= 1
                fcount[f] -= 1
                if fcount[f] == 0:
                    j = fpos[f]
                    last = alive_f[F - 1]
                    alive_f[j] = last
                    fpos[last] = j
                    F -= 1
            else:
                if M >= cap_i or M + 1 > max_individuals:
                    status = 1
                    break
                site[M] = site[i]
                fam[M] = fam[i]
                fcount[fam[i]] += 1
                M += 1
        elif u < M * (1.0 + Qtot):
            # migration
            i = int(np.random.random() * M)
            if i >= M:
                i = M - 1
            w = np.random.random() * Qtot
            ell = 1
            acc = q[0]
            while w > acc and ell < D:
                acc += q[ell]
                ell += 1
            origin = site[i]
            dest = _sample_site_jump(origin, ell, N, pow_n)
            site[i] = dest
            if dest < b_in and origin >= b_in:
                arr_in += 1
                if origin >= b_out:
                    arr_ext += 1
        else:
            # family event
            jf = int(np.random.random() * F)
            if jf >= F:
                jf = F - 1
            f = alive_f[jf]
            if np.random.random() < 0.5:
                # vanish: compact the individual arrays
                w = 0
                for i in range(M):
                    if fam[i] != f:
                        site[w] = site[i]
                        fam[w] = fam[i]
                        w += 1
                M = w
                fcount[f] = 0
                last = alive_f[F - 1]
                alive_f[jf] = last
                fpos[last] = jf
                F -= 1
            else:
                # duplicate in place with a fresh id
                cnt = fcount[f]
                if next_fid >= cap_f or M + cnt > cap_i or M + cnt > max_individuals:
                    status = 1 if next_fid < cap_f else 2
                    break
                nf = next_fid
                next_fid += 1
                w = M
                for i in range(M):
                    if fam[i] == f:
                        site[w] = site[i]
                        fam[w] = nf
                        w += 1
                M = w
                fcount[nf] = cnt
                alive_f[F] = nf
                fpos[nf] = F
                F += 1
        n_events += 1
        if n_events >= max_events:
            status = 1
            break

    state[0] = M
    state[1] = F
    state[2] = next_fid
    state[3] = n_events
    state[4] = status
    state[5] = arr_in
    state[6] = arr_ext
    return t


def _as_seed(rng) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(1, 2 ** 31 - 1))
    return int(np.random.SeedSequence(rng).generate_state(1)[0] % (2 ** 31 - 2)) + 1


def init_population(spec: GroupSpec, theta: float, mode: str,
                    rng: np.random.Generator) -> SpatialConfiguration:
    """Poisson(theta) singleton families at every site."""
    if theta <= 0:
        raise InvalidParameterError("theta must be positive")
    if mode not in ("one_level", "two_level"):
        raise InvalidParameterError(f"unknown mode {mode!r}")
    counts = rng.poisson(theta, size=spec.n_sites)
    sites = np.repeat(np.arange(spec.n_sites, dtype=np.int64), counts)
    fams = np.arange(sites.size, dtype=np.int64)
    return SpatialConfiguration(spec=spec, sites=sites, fams=fams, clock=0.0, mode=mode)


def simulate_spatial(config: SpatialConfiguration, rates: RateTable, t_end: float,
                     mode: str, rng, snapshot_times=None,
                     max_events: int = DEFAULT_MAX_EVENTS,
                     max_individuals: int = DEFAULT_MAX_INDIVIDUALS,
                     ell0: int = 1) -> list[SpatialConfiguration]:
    """Snapshots at the given times plus the final state at t_end."""
    spec = config.spec
    if mode not in ("one_level", "two_level"):
        raise InvalidParameterError(f"unknown mode {mode!r}")
    if rates.N != spec.N or rates.D != spec.D:
        raise InvalidParameterError("rate table does not match the group spec")
    t0 = config.clock
    snap = list(snapshot_times) if snapshot_times is not None else []
    if any(s <= t0 or s > t_end for s in snap) or snap != sorted(snap):
        raise InvalidParameterError("snapshot times must be sorted within (t_start, t_end]")
    targets = snap + [t_end]

    M0 = config.population
    cap_i = int(max(8 * max(M0, 1), 65536))
    cap_i = min(cap_i, max_individuals + 64)
    site = np.zeros(cap_i, dtype=np.int64)
    fam = np.zeros(cap_i, dtype=np.int64)
    site[:M0] = config.sites
    fam[:M0] = config.fams

    next_fid = int(config.fams.max()) + 1 if M0 else 0
    cap_f = next_fid + max(1_000_000, 64 * max(M0, 1))
    fcount = np.zeros(cap_f, dtype=np.int64)
    for f in config.fams:
        fcount[f] += 1
    alive = np.nonzero(fcount[:next_fid])[0]
    alive_f = np.zeros(cap_f, dtype=np.int64)
    fpos = np.zeros(cap_f, dtype=np.int64)
    alive_f[: alive.size] = alive
    fpos[alive] = np.arange(alive.size)
    F0 = alive.size

    state = np.array([M0, F0, next_fid, 0, 0,
                      config.arrivals_into_block, config.arrivals_from_exterior],
                     dtype=np.int64)
    pow_n = spec.N ** np.arange(spec.D + 1, dtype=np.int64)
    two = mode == "two_level"

    out: list[SpatialConfiguration] = []
    t = t0
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    for target in targets:
        t = _spatial_core(_as_seed(rng), t, float(target), spec.N, spec.D,
                          rates.rates, two, site, fam, fcount, alive_f, fpos,
                          state, int(max_events), int(max_individuals),
                          int(ell0), pow_n)
        M = int(state[0])
        snapshot = SpatialConfiguration(
            spec=spec, sites=site[:M].copy(), fams=fam[:M].copy(), clock=t,
            mode=mode, arrivals_into_block=int(state[5]),
            arrivals_from_exterior=int(state[6]), ell0=ell0)
        out.append(snapshot)
        if state[4] != 0:
            reason = ("event/population budget exceeded" if state[4] == 1
                      else "family id capacity exhausted")
            raise ResourceBudgetError(
                f"spatial simulation stopped at t={t:.4g}: {reason}", partial=out)
    return out


def block_average(config: SpatialConfiguration, center, ell: int) -> BlockAverage:
    """zeta_ell: count in the radius-ell ball around center divided by N^ell."""
    spec = config.spec
    if not 0 <= ell <= spec.D:
        raise InvalidParameterError("level out of range")
    c = int(center) if np.ndim(center) == 0 else spec.encode(center)
    p = spec.N ** ell
    count = int(np.sum(config.sites // p == c // p))
    return BlockAverage(level=ell, value=count / p)


def family_size_measure(config: SpatialConfiguration, center, ell: int) -> FamilySizeHistogram:
    """Per-family member counts in the block, rescaled by N^{-ell/2} twice."""
    spec = config.spec
    if not 0 <= ell <= spec.D:
        raise InvalidParameterError("level out of range")
    c = int(center) if np.ndim(center) == 0 else spec.encode(center)
    p = spec.N ** ell
    mask = config.sites // p == c // p
    scale = spec.N ** (-ell / 2.0)
    if not mask.any():
        return FamilySizeHistogram(level=ell, sizes=np.zeros(0), weight=scale)
    _, counts = np.unique(config.fams[mask], return_counts=True)
    return FamilySizeHistogram(level=ell, sizes=counts * scale, weight=scale)


def ergodic_profile(config: SpatialConfiguration, center, ell_max: int) -> list:
    if ell_max > config.spec.D:
        raise InvalidParameterError("ell_max exceeds the truncation depth")
    return [block_average(config, center, ell) for ell in range(1, ell_max + 1)]


def predicted_exterior_fraction(rates: RateTable, ell: int) -> float:
    """Mean-level fraction of block arrivals originating outside B_{ell+1}.

    At uniform density the arrival rate into B_ell from the distance-s class
    is proportional to q_s for every s > ell, so the fraction is
    sum_{s >= ell+2} q_s / sum_{s >= ell+1} q_s (truncated at D).
    """
    q = rates.rates
    denom = q[ell:].sum()
    num = q[ell + 1:].sum()
    return float(num / denom) if denom > 0 else math.nan


@dataclass(frozen=True)
class MeanFieldRow:
    N: int
    ks_stat: float
    ks_pvalue: float
    mean_sim: float
    mean_gap: float
    second_moment_sim: float
    exterior_fraction: float
    exterior_predicted: float
    n_samples: int


def collect_block_samples(spec: GroupSpec, rates: RateTable, theta: float,
                          ell: int, replicates: int, seed,
                          burn_in: float = 30.0, n_snapshots: int = 6,
                          spacing: float = 5.0, mode: str = "two_level",
                          max_individuals: int = DEFAULT_MAX_INDIVIDUALS):
    """Equilibrium zeta_ell samples plus arrival counters from replicate runs.

    Returns (zeta samples, histograms, exterior fraction) where the exterior
    fraction is computed from arrivals accumulated after burn-in.
    """
    times = burn_in + spacing * np.arange(1, n_snapshots + 1)
    from .seeding import seed_sequence
    seeds = seed_sequence(seed).spawn(replicates)
    zetas = []
    hists = []
    arr_in = 0
    arr_ext = 0
    for r in range(replicates):
        rng = np.random.default_rng(seeds[r])
        config = init_population(spec, theta, mode, rng)
        try:
            snaps = simulate_spatial(config, rates, float(times[-1]), mode, rng,
                                     snapshot_times=times[:-1], ell0=ell,
                                     max_individuals=max_individuals)
        except ResourceBudgetError as exc:
            snaps = exc.partial
        base = None
        for s in snaps:
            if s.clock < burn_in:
                continue
            if base is None:
                base = (s.arrivals_into_block, s.arrivals_from_exterior)
            zetas.append(block_average(s, 0, ell).value)
            hists.append(family_size_measure(s, 0, ell))
        if snaps and base is not None:
            arr_in += snaps[-1].arrivals_into_block - base[0]
            arr_ext += snaps[-1].arrivals_from_exterior - base[1]
    frac = arr_ext / arr_in if arr_in else math.nan
    return np.asarray(zetas), hists, frac


@dataclass(frozen=True)
class WindowStatistics:
    """Per-replicate, per-snapshot block statistics over a measurement window."""

    times: np.ndarray  # snapshot times
    levels: tuple  # levels measured
    zeta: np.ndarray  # (replicates, n_times, n_levels); NaN after an abort
    tail_ks: tuple  # thresholds K for tail masses, or ()
    tail_level: int | None
    tail_mass: np.ndarray | None  # (replicates, n_times, n_K)
    exterior_fraction: float
    n_aborted: int

    def zeta_at(self, level: int) -> np.ndarray:
        return self.zeta[:, :, self.levels.index(level)]


def window_block_statistics(spec: GroupSpec, rates: RateTable, theta: float,
                            snapshot_times, replicates: int, seed,
                            mode: str = "two_level", levels=(1, 2, 3, 4),
                            tail_level: int | None = None,
                            tail_ks=(1.0, 2.0, 4.0, 8.0), ell0: int = 1,
                            max_individuals: int = DEFAULT_MAX_INDIVIDUALS) -> WindowStatistics:
    """zeta_ell (and optional level tail masses) at fixed snapshot times.

    Each replicate starts from an independent Poisson(theta) configuration and
    is advanced once through all snapshot times. Replicates aborted by the
    population budget contribute NaN from the abort onward.
    """
    times = np.asarray(sorted(snapshot_times), dtype=float)
    levels = tuple(levels)
    from .seeding import seed_sequence
    seeds = seed_sequence(seed).spawn(replicates)
    zeta = np.full((replicates, times.size, len(levels)), np.nan)
    tmass = (np.full((replicates, times.size, len(tail_ks)), np.nan)
             if tail_level is not None else None)
    arr_in = 0
    arr_ext = 0
    n_aborted = 0
    for r in range(replicates):
        rng = np.random.default_rng(seeds[r])
        config = init_population(spec, theta, mode, rng)
        try:
            snaps = simulate_spatial(config, rates, float(times[-1]), mode, rng,
                                     snapshot_times=times[:-1], ell0=ell0,
                                     max_individuals=max_individuals)
        except ResourceBudgetError as exc:
            snaps = exc.partial
            n_aborted += 1
        for i, s in enumerate(snaps[: times.size]):
            for j, ell in enumerate(levels):
                zeta[r, i, j] = block_average(s, 0, ell).value
            if tmass is not None:
                hist = family_size_measure(s, 0, tail_level)
                for k, K in enumerate(tail_ks):
                    tmass[r, i, k] = hist.tail_mass(K)
        if snaps:
            arr_in += snaps[-1].arrivals_into_block
            arr_ext += snaps[-1].arrivals_from_exterior
    frac = arr_ext / arr_in if arr_in else math.nan
    return WindowStatistics(times=times, levels=levels, zeta=zeta,
                            tail_ks=tuple(float(K) for K in tail_ks),
                            tail_level=tail_level, tail_mass=tmass,
                            exterior_fraction=float(frac), n_aborted=n_aborted)


def mean_field_experiment(theta: float, coeffs, N_list, ell: int,
                          replicates: int, seed, D: int = 4,
                          cascade_samples: np.ndarray | None = None,
                          n_cascade: int = 2000, burn_in: float = 30.0,
                          n_snapshots: int = 6, spacing: float = 5.0) -> list:
    """KS and moment distances to the cascade entrance law, per N."""
    from .hiergroup import make_rate_table  # local to avoid cycles

    if replicates * n_snapshots < 30:
        import warnings
        warnings.warn("few replicates; mean-field distances are underpowered",
                      stacklevel=2)
    from .seeding import seed_sequence
    master = seed_sequence(seed)
    if cascade_samples is None:
        spec_c = _cascade.EntranceLawSpec(theta=theta, coefficients=coeffs,
                                          case="two_level")
        rng_c = np.random.default_rng(master.spawn(1)[0])
        cascade_samples = _cascade.entrance_law_ensemble(spec_c, ell, n_cascade, rng_c)
    rows = []
    for i, N in enumerate(N_list):
        spec = GroupSpec(N=N, D=D)
        rates = make_rate_table(spec, coeffs, level_exponent=2)
        zetas, _, frac = collect_block_samples(
            spec, rates, theta, ell, replicates,
            master.spawn(i + 2)[0], burn_in=burn_in,
            n_snapshots=n_snapshots, spacing=spacing)
        ks = _stats.ks_2samp(zetas, cascade_samples)
        rows.append(MeanFieldRow(
            N=N, ks_stat=float(ks.statistic), ks_pvalue=float(ks.pvalue),
            mean_sim=float(zetas.mean()), mean_gap=float(zetas.mean() - theta),
            second_moment_sim=float(np.mean(zetas ** 2)),
            exterior_fraction=float(frac),
            exterior_predicted=predicted_exterior_fraction(rates, ell),
            n_samples=int(zetas.size)))
    return rows
