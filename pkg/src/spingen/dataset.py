"""Dataset ingestion, calibration gauge, and the log-ratio learning rule.

A dataset assigns a nonnegative real count Z_i to some of the 2^N
configurations.  Standardizing fixes the calibration gauge

    E_i = -T_gauge * ln Z_i

for every configuration, which requires a policy for the unrepresented
ones: either a small floor count (placing them far above the represented
states) or explicitly supplied energies.  The resulting standard model
carries the reference weights, energies, and exact couplings.

Counts are reals, not integers: weights are mole-fraction-like bookkeeping,
so fractional or rescaled counts are legitimate inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .spinspace import (
    CouplingVector,
    EnergyTable,
    couplings_from_energies,
    n_configs,
)

DEFAULT_GAUGE_TEMPERATURE = 1.0

# Floor counts default to this fraction of the largest count: far above the
# represented states energy-wise, yet with finite logarithms throughout.
DEFAULT_FLOOR_FRACTION = 1e-9


@dataclass(frozen=True)
class Dataset:
    """Configuration counts plus the gauge constant T_gauge.

    `counts` maps configuration index -> count; absent means unrepresented.
    """

    n_spins: int
    counts: dict = field(default_factory=dict)
    gauge_temperature: float = DEFAULT_GAUGE_TEMPERATURE

    def __post_init__(self):
        if self.gauge_temperature <= 0:
            raise ValueError("gauge temperature must be positive")
        size = n_configs(self.n_spins)
        cleaned = {}
        for index, count in self.counts.items():
            index = int(index)
            if not 0 <= index < size:
                raise ValueError(f"configuration index {index} out of range")
            count = float(count)
            if not np.isfinite(count) or count < 0:
                raise ValueError(f"count for configuration {index} must be finite and >= 0")
            cleaned[index] = count
        if not any(c > 0 for c in cleaned.values()):
            raise ValueError("dataset needs at least one strictly positive count")
        object.__setattr__(self, "counts", cleaned)

    def max_count(self) -> float:
        return max(self.counts.values())


@dataclass(frozen=True)
class StandardModel:
    """Reference weights, energies, and couplings of a standardized dataset."""

    n_spins: int
    gauge_temperature: float
    standard_energies: EnergyTable
    standard_log_weights: np.ndarray  # ln Z_i, one per configuration
    standard_weights: np.ndarray  # x_i, sums to 1
    standard_couplings: CouplingVector

    def __post_init__(self):
        lw = np.asarray(self.standard_log_weights, dtype=np.float64)
        w = np.asarray(self.standard_weights, dtype=np.float64)
        object.__setattr__(self, "standard_log_weights", lw)
        object.__setattr__(self, "standard_weights", w)
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("standard weights must sum to 1")
        if np.any(w <= 0):
            raise ValueError("every configuration needs a positive standard weight")

    @property
    def log_partition(self) -> float:
        """ln of the total standard weight, ln sum_i Z_i."""
        return float(logsumexp(self.standard_log_weights))


def standardize(dataset: Dataset, floor: float | None = None,
                explicit_energies: dict | None = None) -> StandardModel:
    """Fix the gauge E_i = -T_gauge ln Z_i and build the standard model.

    Unrepresented configurations get either the floor count (default
    DEFAULT_FLOOR_FRACTION of the largest count) or energies supplied in
    `explicit_energies` (index -> energy, which must cover every missing
    configuration).  The two policies are mutually exclusive.
    """
    size = n_configs(dataset.n_spins)
    t_gauge = dataset.gauge_temperature
    log_z = np.full(size, np.nan)
    for index, count in dataset.counts.items():
        if count > 0:
            log_z[index] = np.log(count)

    missing = np.isnan(log_z)
    if explicit_energies is not None:
        if floor is not None:
            raise ValueError("give either a floor or explicit energies, not both")
        for index, energy in explicit_energies.items():
            index = int(index)
            if not 0 <= index < size:
                raise ValueError(f"configuration index {index} out of range")
            if not missing[index]:
                raise ValueError(
                    f"configuration {index} is already represented in the dataset"
                )
            log_z[index] = -float(energy) / t_gauge
        still_missing = np.flatnonzero(np.isnan(log_z))
        if still_missing.size:
            raise ValueError(
                f"explicit energies leave {still_missing.size} configurations "
                f"undefined (first: {still_missing[0]})"
            )
    else:
        if floor is None:
            floor = DEFAULT_FLOOR_FRACTION * dataset.max_count()
        if floor <= 0:
            raise ValueError("floor count must be positive")
        log_z[missing] = np.log(floor)

    energies = EnergyTable(values=-t_gauge * log_z, n_spins=dataset.n_spins)
    weights = np.exp(log_z - logsumexp(log_z))
    weights /= weights.sum()
    return StandardModel(
        n_spins=dataset.n_spins,
        gauge_temperature=t_gauge,
        standard_energies=energies,
        standard_log_weights=log_z,
        standard_weights=weights,
        standard_couplings=couplings_from_energies(energies),
    )


def learning_update(couplings: CouplingVector, old_counts, new_counts,
                    temperature: float) -> CouplingVector:
    """Non-Hebbian update J_k += (T/2^N) sum_i chi_k(i) ln(Z_i / Z_i_old).

    Couplings move by the log-ratio of counts, so repeating an update is not
    the same as presenting the combined counts once.  Both count tables must
    be strictly positive everywhere (apply a floor first).
    """
    old = np.asarray(old_counts, dtype=np.float64)
    new = np.asarray(new_counts, dtype=np.float64)
    size = n_configs(couplings.n_spins)
    if old.shape != (size,) or new.shape != (size,):
        raise ValueError(f"count tables must have shape ({size},)")
    if np.any(old <= 0) or np.any(new <= 0):
        raise ValueError("learning update requires strictly positive counts")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    log_ratio = EnergyTable(values=np.log(new / old), n_spins=couplings.n_spins)
    # (T/2^N) sum_i chi_k ln r = -T * (coupling transform of the log-ratios)
    delta = -temperature * couplings_from_energies(log_ratio).values
    return CouplingVector(values=couplings.values + delta, n_spins=couplings.n_spins)


def config_label(index: int, n_spins: int) -> str:
    """Bit-string label, leftmost character = spin N (Kronecker order)."""
    return format(index, f"0{n_spins}b")


def parse_config_label(label: str, n_spins: int | None) -> tuple[int, int]:
    """Parse a config column entry; returns (index, n_spins).

    Accepts a length-N string over {0,1} (leftmost char = spin N) or a
    decimal index (which requires n_spins to be known).
    """
    label = label.strip()
    if set(label) <= {"0", "1"} and (n_spins is None or len(label) == n_spins):
        return int(label, 2), len(label)
    if n_spins is None:
        raise ValueError(
            f"cannot infer spin count from config label {label!r}; "
            "pass n_spins for decimal indices"
        )
    return int(label, 10), n_spins


def read_dataset_csv(path, n_spins: int | None = None,
                     gauge_temperature: float = DEFAULT_GAUGE_TEMPERATURE) -> Dataset:
    """Read a `config,count` CSV; rejects duplicate configurations."""
    counts: dict[int, float] = {}
    inferred = n_spins
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(row for row in handle if not row.startswith("#"))
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["config", "count"]:
            raise ValueError(f"{path}: expected header 'config,count'")
        for row in reader:
            if not row or not "".join(row).strip():
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: malformed row {row!r}")
            index, inferred = parse_config_label(row[0], inferred)
            if index in counts:
                raise ValueError(f"{path}: duplicate configuration {row[0]!r}")
            counts[index] = float(row[1])
    if inferred is None:
        raise ValueError(f"{path}: empty dataset")
    return Dataset(n_spins=inferred, counts=counts, gauge_temperature=gauge_temperature)
