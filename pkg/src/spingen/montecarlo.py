"""Metropolis sampling of the replica model and ergodicity diagnostics.

Dynamics: single-spin-flip Metropolis over the 2 N_r spins, one uniformly
chosen site per proposal, acceptance min(1, exp(-dE/T)); one time step is
one sweep of 2 N_r proposals.  The group sums a = sum(xi), b = sum(zeta)
make each proposal O(1).

Randomness comes from a counter-based Philox generator keyed by the chain
seed, so identical seeds give bit-identical trajectories and independent
chains can run concurrently (the hot loop is compiled and releases the
GIL).  Recorded snapshots pack the spins into one 64-bit word per sample,
which turns the spin overlap behind the single-spin autocorrelation into
an XOR plus popcount.

Below the critical coupling ratio the single-spin autocorrelation decays in
one stage; above it, a plateau appears near the squared minimum location of
the reduced free energy, and the escape time between the two minima grows
rapidly with system size.  The escape estimator counts dead-band crossings
of the group sum so intra-minimum recrossings are not mistaken for
transitions.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .meanfield import critical_magnetization
from .replica import ReplicaModel

RNG_ALGORITHM = "philox4x64"

# proposals per compiled-kernel call; bounds the random-number buffers
_BLOCK_PROPOSALS = 1 << 22


@dataclass(frozen=True)
class ChainConfig:
    """One chain: model, seed, length, burn-in, and recording stride."""

    model: ReplicaModel
    seed: int
    n_sweeps: int
    burn_in: int = 0
    thinning: int = 1

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_sweeps:
            raise ValueError("need n_sweeps > burn_in >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.model.n_spins_total > 64:
            raise ValueError("chain recording packs spins into 64-bit words")

    @property
    def n_samples(self) -> int:
        return (self.n_sweeps - self.burn_in) // self.thinning


@dataclass(frozen=True)
class ChainResult:
    """Recorded trajectory: packed spin words and group sums per sample."""

    config: ChainConfig
    sweep_index: np.ndarray
    states: np.ndarray  # uint64, bit s set <-> spin s is up
    a: np.ndarray  # sum over the first group
    b: np.ndarray  # sum over the second group
    acceptance_rate: float
    rng_algorithm: str = RNG_ALGORITHM


@njit(cache=True, nogil=True)
def _pack(spins):
    word = np.uint64(0)
    one = np.uint64(1)
    for s in range(spins.size):
        if spins[s] > 0:
            word |= one << np.uint64(s)
    return word


@njit(cache=True, nogil=True)
def _metropolis_block(spins, n_replicas, scaled_coupling, sites, urand, a, b,
                      countdown, stride, out_states, out_a, out_b, out_pos):
    """Run len(sites) proposals in place; record every `stride` proposals.

    scaled_coupling = J / (N_r T); countdown proposals remain until the next
    record.  Returns (a, b, countdown, out_pos, n_accepted).
    """
    accepted = 0
    for p in range(sites.size):
        s = sites[p]
        if s < n_replicas:
            delta = scaled_coupling * (-2.0 * spins[s]) * b
        else:
            delta = scaled_coupling * (-2.0 * spins[s]) * a
        if delta <= 0.0 or urand[p] < np.exp(-delta):
            if s < n_replicas:
                a -= 2 * spins[s]
            else:
                b -= 2 * spins[s]
            spins[s] = -spins[s]
            accepted += 1
        if stride > 0:
            countdown -= 1
            if countdown == 0:
                out_states[out_pos] = _pack(spins)
                out_a[out_pos] = a
                out_b[out_pos] = b
                out_pos += 1
                countdown = stride
    return a, b, countdown, out_pos, accepted


@njit(cache=True, nogil=True)
def _metropolis_transition_counts(spins, n_replicas, scaled_coupling, sites,
                                  urand, a, b, state, counts):
    """Per-proposal transition tally over packed states (tiny systems only)."""
    one = np.uint64(1)
    for p in range(sites.size):
        s = sites[p]
        if s < n_replicas:
            delta = scaled_coupling * (-2.0 * spins[s]) * b
        else:
            delta = scaled_coupling * (-2.0 * spins[s]) * a
        new_state = state
        if delta <= 0.0 or urand[p] < np.exp(-delta):
            if s < n_replicas:
                a -= 2 * spins[s]
            else:
                b -= 2 * spins[s]
            spins[s] = -spins[s]
            new_state = state ^ (one << np.uint64(s))
        counts[state, new_state] += 1
        state = new_state
    return a, b, state


def _chain_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def run_chain(config: ChainConfig) -> ChainResult:
    """Run one chain and record every `thinning`-th post-burn-in sweep."""
    model = config.model
    n_total = model.n_spins_total
    rng = _chain_rng(config.seed)
    spins = np.where(rng.random(n_total) < 0.5, -1, 1).astype(np.int8)
    a = int(spins[: model.n_replicas].sum())
    b = int(spins[model.n_replicas :].sum())
    scaled = model.coupling / (model.n_replicas * model.temperature)

    n_samples = config.n_samples
    out_states = np.empty(n_samples, dtype=np.uint64)
    out_a = np.empty(n_samples, dtype=np.int32)
    out_b = np.empty(n_samples, dtype=np.int32)
    stride = config.thinning * n_total
    accepted = 0

    def run_proposals(n_proposals, countdown, stride_now, out_pos):
        nonlocal a, b, accepted
        done = 0
        while done < n_proposals:
            chunk = min(_BLOCK_PROPOSALS, n_proposals - done)
            sites = rng.integers(0, n_total, size=chunk, dtype=np.int64)
            urand = rng.random(chunk)
            a, b, countdown, out_pos, acc = _metropolis_block(
                spins, model.n_replicas, scaled, sites, urand, a, b,
                countdown, stride_now, out_states, out_a, out_b, out_pos,
            )
            accepted += acc
            done += chunk
        return countdown, out_pos

    run_proposals(config.burn_in * n_total, -1, 0, 0)
    _, out_pos = run_proposals(
        (config.n_sweeps - config.burn_in) * n_total, stride, stride, 0
    )
    assert out_pos == n_samples
    sweeps = config.burn_in + config.thinning * np.arange(1, n_samples + 1)
    return ChainResult(
        config=config,
        sweep_index=sweeps,
        states=out_states,
        a=out_a,
        b=out_b,
        acceptance_rate=accepted / (config.n_sweeps * n_total),
    )


def run_chains(configs, max_workers: int | None = None) -> list[ChainResult]:
    """Run chains concurrently; results come back in input order."""
    configs = list(configs)
    if len(configs) == 1:
        return [run_chain(configs[0])]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(run_chain, configs))


def spawn_seeds(seed: int, n_chains: int) -> list[int]:
    """Independent 64-bit chain seeds derived from one master seed."""
    seq = np.random.SeedSequence(seed)
    return [int(s.generate_state(1, np.uint64)[0]) for s in seq.spawn(n_chains)]


def transition_counts(model: ReplicaModel, n_sweeps: int, seed: int) -> np.ndarray:
    """Per-proposal transition-count matrix over all packed states.

    Only for tiny systems (at most 12 spins total); used to check detailed
    balance against the stationary distribution.
    """
    n_total = model.n_spins_total
    if n_total > 12:
        raise ValueError("transition counting enumerates all 2^(2 N_r) states")
    rng = _chain_rng(seed)
    spins = np.where(rng.random(n_total) < 0.5, -1, 1).astype(np.int8)
    a = int(spins[: model.n_replicas].sum())
    b = int(spins[model.n_replicas :].sum())
    state = np.uint64(0)
    for s in range(n_total):
        if spins[s] > 0:
            state |= np.uint64(1) << np.uint64(s)
    counts = np.zeros((1 << n_total, 1 << n_total), dtype=np.int64)
    scaled = model.coupling / (model.n_replicas * model.temperature)
    remaining = n_sweeps * n_total
    while remaining > 0:
        chunk = min(_BLOCK_PROPOSALS, remaining)
        sites = rng.integers(0, n_total, size=chunk, dtype=np.int64)
        urand = rng.random(chunk)
        a, b, state = _metropolis_transition_counts(
            spins, model.n_replicas, scaled, sites, urand, a, b, state, counts
        )
        remaining -= chunk
    return counts


@dataclass(frozen=True)
class AutocorrResult:
    """Autocorrelation on strictly increasing lags, with naive error bars."""

    lags: np.ndarray
    values: np.ndarray
    estimator_variance: np.ndarray

    def at(self, lag: int) -> float:
        index = int(np.searchsorted(self.lags, lag))
        if index >= self.lags.size or self.lags[index] != lag:
            raise ValueError(f"lag {lag} was not computed")
        return float(self.values[index])


def log_lags(n_samples: int, per_decade: int = 16, max_fraction: float = 0.2):
    """Logarithmically spaced integer lags in [0, max_fraction * n)."""
    top = max(int(n_samples * max_fraction), 2)
    raw = 10.0 ** (np.arange(0, per_decade * 12) / per_decade)
    lags = np.unique(np.concatenate([[0, 1], raw.astype(np.int64)]))
    return lags[lags < top]


def spin_autocorrelation(states, n_spins_total: int, lags=None) -> AutocorrResult:
    """C(t) = <spin overlap between samples t apart>, averaged over windows.

    states are packed words; the overlap is 1 - 2 * hamming/n per pair.
    C(0) = 1 identically.
    """
    states = np.asarray(states, dtype=np.uint64)
    if lags is None:
        lags = log_lags(states.size)
    lags = np.asarray(lags, dtype=np.int64)
    if np.any(np.diff(lags) <= 0):
        raise ValueError("lags must be strictly increasing")
    if lags.size and lags[-1] >= states.size:
        raise ValueError("largest lag must be smaller than the sample count")
    values = np.empty(lags.size)
    variances = np.empty(lags.size)
    n = states.size
    for i, lag in enumerate(lags):
        upper = n - lag
        hamming = np.bitwise_count(states[lag:] ^ states[:upper])
        overlap = 1.0 - 2.0 * hamming / n_spins_total
        values[i] = overlap.mean()
        variances[i] = overlap.var() / upper
    return AutocorrResult(lags=lags, values=values, estimator_variance=variances)


def magnetization_autocorrelation(a, n_replicas: int, lags=None) -> AutocorrResult:
    """C(t) = <m(t0 + t) m(t0)> with m = a / N_r (not normalized at t = 0)."""
    a = np.asarray(a, dtype=np.float64) / n_replicas
    if lags is None:
        lags = log_lags(a.size)
    lags = np.asarray(lags, dtype=np.int64)
    if np.any(np.diff(lags) <= 0):
        raise ValueError("lags must be strictly increasing")
    if lags.size and lags[-1] >= a.size:
        raise ValueError("largest lag must be smaller than the sample count")
    values = np.empty(lags.size)
    variances = np.empty(lags.size)
    n = a.size
    for i, lag in enumerate(lags):
        products = a[lag:] * a[: n - lag]
        values[i] = products.mean()
        variances[i] = products.var() / products.size
    return AutocorrResult(lags=lags, values=values, estimator_variance=variances)


MIN_AUTOCORR_SAMPLES = 10_000


def autocorrelation(result: ChainResult, observable: str,
                    lags=None) -> AutocorrResult:
    """Autocorrelation of a recorded chain; lags are in recorded samples."""
    if result.states.size < MIN_AUTOCORR_SAMPLES:
        raise ValueError(
            f"autocorrelation needs at least {MIN_AUTOCORR_SAMPLES} samples, "
            f"got {result.states.size}"
        )
    if observable == "single_spin":
        return spin_autocorrelation(
            result.states, result.config.model.n_spins_total, lags
        )
    if observable == "magnetization":
        return magnetization_autocorrelation(
            result.a, result.config.model.n_replicas, lags
        )
    raise ValueError("observable must be 'single_spin' or 'magnetization'")


def plateau_level(result: AutocorrResult, window: tuple[int, int]) -> float:
    """Plateau height with the slow escape decay removed.

    Over a window past the vibrational transient the autocorrelation is the
    plateau times a slow exponential in the escape time; fitting ln C
    linearly in the lag and reading the intercept recovers the limiting
    height the plateau would have if escapes were infinitely rare.  For a
    genuinely flat window this reduces to the window mean.
    """
    mask = (
        (result.lags >= window[0])
        & (result.lags <= window[1])
        & (result.values > 0)
    )
    if mask.sum() < 2:
        raise ValueError("need at least two positive lags inside the window")
    slope_and_intercept = np.polyfit(
        result.lags[mask], np.log(result.values[mask]), 1
    )
    return float(np.exp(slope_and_intercept[1]))


@dataclass(frozen=True)
class EscapeEstimate:
    """Mean time between minima, or censored when crossings are too rare."""

    mean_time: float
    n_transitions: int
    threshold: float
    censored: bool


def escape_time(a, model: ReplicaModel | None = None, threshold: float | None = None,
                dt: float = 1.0, min_visits: int = 20) -> EscapeEstimate:
    """Mean first-passage time between sign changes of the group sum.

    A transition counts only when the trajectory crosses from beyond one
    dead-band edge to beyond the other, so vibrational recrossings near
    zero are ignored.  The default dead band is half the reduced-model
    minimum, N_r m0 / 2; supply `threshold` explicitly for models without a
    bistable reduced description.  The estimate is censored unless each
    minimum is visited at least `min_visits` times.
    """
    a = np.asarray(a, dtype=np.float64)
    if threshold is None:
        if model is None:
            raise ValueError("need either a model or an explicit threshold")
        m0 = critical_magnetization(model.coupling, model.temperature)
        if m0 is None:
            raise ValueError(
                "model has no bistable reduced description; pass a threshold"
            )
        threshold = 0.5 * model.n_replicas * m0
    beyond = np.where(a >= threshold, 1, np.where(a <= -threshold, -1, 0))
    occupied = np.flatnonzero(beyond)
    if occupied.size == 0:
        return EscapeEstimate(np.nan, 0, threshold, True)
    signs = beyond[occupied]
    flips = occupied[1:][signs[1:] != signs[:-1]]
    n_transitions = int(flips.size)
    # each minimum is entered roughly every other transition
    censored = n_transitions < 2 * min_visits
    if n_transitions < 2:
        return EscapeEstimate(np.nan, n_transitions, threshold, True)
    mean_time = float(np.mean(np.diff(flips)) * dt)
    return EscapeEstimate(mean_time, n_transitions, threshold, censored)
