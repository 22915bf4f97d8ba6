"""Spin configurations, coupling vectors, and the exact energy<->coupling transform.

A system of N Ising spins sigma_alpha = +-1 (alpha = 1..N) has 2^N
configurations, identified with integer bitmasks: bit alpha-1 set means
sigma_alpha = +1.  The most general energy function is multilinear,

    E(sigma) = -sum_k J_k * prod_{alpha in k} sigma_alpha,

with one coupling J_k per subset bitmask k.  Component ordering follows the
Kronecker product of (1, sigma_alpha) pairs with the spin label increasing
right to left, so for three spins the coupling vector reads
(J0, J1, J2, J12, J3, J13, J23, J123).

Because the character vectors are mutually orthogonal, the linear system
E(sigma_i) = E_i always has the unique solution

    J_k = -2^{-N} sum_i chi_k(i) E_i,

where chi_k(i) is the spin product of subset k in configuration i.  Both
directions are available as an O(N 2^N) in-place butterfly; a quadratic-cost
direct evaluation of the same sums is kept as a reference for tests.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import TableSizeError

# Full-table operations allocate 2^N doubles; 2^24 is ~134 MB and is the
# largest size this package agrees to enumerate.
MAX_FULL_TABLE_SPINS = 24


def n_configs(n_spins: int) -> int:
    """Number of configurations (and coupling components) for n_spins spins."""
    return 1 << n_spins


def _check_n_spins(n_spins: int) -> None:
    if n_spins < 1:
        raise ValueError(f"n_spins must be >= 1, got {n_spins}")
    if n_spins > MAX_FULL_TABLE_SPINS:
        raise TableSizeError(
            f"full-table operations support at most {MAX_FULL_TABLE_SPINS} "
            f"spins, got {n_spins}"
        )


def _check_table(values: np.ndarray, n_spins: int, what: str) -> None:
    if values.ndim != 1 or values.size != n_configs(n_spins):
        raise ValueError(
            f"{what} must have exactly 2^{n_spins} = {n_configs(n_spins)} "
            f"entries, got shape {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} entries must all be finite")


@dataclass(frozen=True)
class SpinConfig:
    """One corner of the Hamming hypercube, stored as an N-bit index."""

    index: int
    n_spins: int

    def __post_init__(self):
        _check_n_spins(self.n_spins)
        if not 0 <= self.index < n_configs(self.n_spins):
            raise ValueError(
                f"index {self.index} out of range for {self.n_spins} spins"
            )

    def spin(self, site: int) -> int:
        """Value (+1 or -1) of spin at site alpha in 1..N."""
        if not 1 <= site <= self.n_spins:
            raise ValueError(f"site {site} out of range 1..{self.n_spins}")
        return 1 if self.index >> (site - 1) & 1 else -1

    def spins(self) -> np.ndarray:
        """All spin values as an array of +-1, site 1 first."""
        bits = (self.index >> np.arange(self.n_spins)) & 1
        return np.where(bits == 1, 1, -1).astype(np.int8)

    @classmethod
    def from_spins(cls, spins) -> "SpinConfig":
        """Build from a sequence of +-1 values, site 1 first."""
        spins = np.asarray(spins)
        index = int(np.sum((spins > 0).astype(np.int64) << np.arange(spins.size)))
        return cls(index=index, n_spins=spins.size)


@dataclass(frozen=True)
class CouplingVector:
    """The 2^N coupling coefficients J_k in Kronecker ordering."""

    values: np.ndarray
    n_spins: int

    def __post_init__(self):
        _check_n_spins(self.n_spins)
        object.__setattr__(
            self, "values", np.array(self.values, dtype=np.float64, copy=True)
        )
        _check_table(self.values, self.n_spins, "coupling vector")
        self.values.setflags(write=False)

    @classmethod
    def zeros(cls, n_spins: int) -> "CouplingVector":
        return cls(values=np.zeros(n_configs(n_spins)), n_spins=n_spins)

    def with_component(self, subset: int, value: float) -> "CouplingVector":
        """Copy with component `subset` replaced by `value`."""
        values = np.array(self.values)
        values[subset] = value
        return CouplingVector(values=values, n_spins=self.n_spins)


@dataclass(frozen=True)
class EnergyTable:
    """Per-configuration energies indexed by SpinConfig.index."""

    values: np.ndarray
    n_spins: int

    def __post_init__(self):
        _check_n_spins(self.n_spins)
        object.__setattr__(
            self, "values", np.array(self.values, dtype=np.float64, copy=True)
        )
        _check_table(self.values, self.n_spins, "energy table")
        self.values.setflags(write=False)


def character(config: SpinConfig, subset: int) -> int:
    """Spin product prod_{alpha in subset} sigma_alpha for one configuration.

    The empty subset gives +1.  The sign is -1 iff an odd number of the
    subset's spins are down, i.e. popcount(subset & ~index) is odd.
    """
    if not 0 <= subset < n_configs(config.n_spins):
        raise ValueError(
            f"subset {subset} out of range for {config.n_spins} spins"
        )
    down = subset & ~config.index & (n_configs(config.n_spins) - 1)
    return -1 if bin(down).count("1") & 1 else 1


def spin_signs(n_spins: int, site: int) -> np.ndarray:
    """sigma_site over all 2^N configuration indices, as +-1.0 floats."""
    _check_n_spins(n_spins)
    if not 1 <= site <= n_spins:
        raise ValueError(f"site {site} out of range 1..{n_spins}")
    idx = np.arange(n_configs(n_spins), dtype=np.uint32)
    return np.where(idx >> (site - 1) & 1, 1.0, -1.0)


@functools.lru_cache(maxsize=8)
def character_matrix(n_spins: int) -> np.ndarray:
    """Dense matrix X[i, k] = chi_k(i) over all configurations and subsets.

    Cached; used by the quadratic-cost reference transforms and by tests.
    """
    _check_n_spins(n_spins)
    size = n_configs(n_spins)
    idx = np.arange(size, dtype=np.uint32)
    down = np.bitwise_and(idx[None, :], np.bitwise_not(idx)[:, None])
    chi = np.where(np.bitwise_count(down) & 1, -1.0, 1.0)
    chi.setflags(write=False)
    return chi


def energy_of(couplings: CouplingVector, config: SpinConfig) -> float:
    """Energy -sum_k J_k chi_k(config) of a single configuration."""
    if couplings.n_spins != config.n_spins:
        raise ValueError(
            f"spin-count mismatch: couplings have {couplings.n_spins}, "
            f"config has {config.n_spins}"
        )
    total = 0.0
    for subset, j in enumerate(couplings.values):
        if j != 0.0:
            total += j * character(config, subset)
    return -total


def _butterfly(values: np.ndarray, forward: bool) -> np.ndarray:
    """Apply the character matrix (forward) or its transpose along one axis.

    Per bit the 2x2 stage is (lo, hi) -> (lo - hi, lo + hi) forward and
    (lo, hi) -> (lo + hi, hi - lo) transposed; stages commute across bits.
    """
    out = np.array(values, dtype=np.float64)
    size = out.size
    half = 1
    while half < size:
        pairs = out.reshape(-1, 2, half)
        lo = pairs[:, 0, :]
        hi = pairs[:, 1, :]
        if forward:
            lo, hi = lo - hi, lo + hi
        else:
            lo, hi = lo + hi, hi - lo
        pairs[:, 0, :] = lo
        pairs[:, 1, :] = hi
        half *= 2
    return out


def energies_from_couplings(couplings: CouplingVector) -> EnergyTable:
    """All 2^N energies E_i = -sum_k J_k chi_k(i), via the fast butterfly."""
    values = -_butterfly(couplings.values, forward=True)
    return EnergyTable(values=values, n_spins=couplings.n_spins)


def couplings_from_energies(energies: EnergyTable) -> CouplingVector:
    """Exact couplings J_k = -2^{-N} sum_i chi_k(i) E_i, via the fast butterfly."""
    scale = -1.0 / n_configs(energies.n_spins)
    values = scale * _butterfly(energies.values, forward=False)
    return CouplingVector(values=values, n_spins=energies.n_spins)


def energies_from_couplings_direct(couplings: CouplingVector) -> EnergyTable:
    """Quadratic-cost reference for energies_from_couplings (testing only)."""
    chi = character_matrix(couplings.n_spins)
    return EnergyTable(values=-chi @ couplings.values, n_spins=couplings.n_spins)


def couplings_from_energies_direct(energies: EnergyTable) -> CouplingVector:
    """Quadratic-cost reference for couplings_from_energies (testing only).

    Evaluates the defining orthogonality sums one component at a time;
    this is the convention anchor all sign-sensitive tests go through.
    """
    chi = character_matrix(energies.n_spins)
    scale = -1.0 / n_configs(energies.n_spins)
    return CouplingVector(
        values=scale * (chi.T @ energies.values), n_spins=energies.n_spins
    )
