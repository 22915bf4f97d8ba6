"""Two-phase stability analysis of represented vs unrepresented configurations.

The configurations a dataset actually contains ("true states") and the
vastly more numerous missing ones ("false states") are treated as two
phases, each described by a discrete spectrum of (energy, log-degeneracy)
levels.  Retrieval is robust only while the true phase is the stable one:

    A_true(T) <= A_false(T)   <=>   Z_false / Z_true <= 1,

which at the gauge temperature reduces to an extensive-gap condition
between the canonical energies.  The mutual-equilibrium temperature T0
solves A_true(T0) = A_false(T0); above it the represented states are only
metastable and a retrieval run will drift into the unrepresented
continuum.

A tilted potential F(E) = E - T S(E), built on the parametric
microcanonical curve S(E), visualizes the competition: each phase owns one
minimum, the deeper minimum marks the stable phase, and the depths cross
exactly at T0.

Level spectra read and write as CSV `energy,log_degeneracy,label`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, minimize_scalar
from scipy.special import logsumexp

from .errors import NumericDomainError

TRUE_LABEL = "true_states"
FALSE_LABEL = "false_states"

# parametric microcanonical sweeps use a geometric temperature grid with
# this resolution
POINTS_PER_DECADE = 400


@dataclass(frozen=True)
class Spectrum:
    """Discrete (energy, log-degeneracy) levels of one phase."""

    energies: np.ndarray
    log_degeneracies: np.ndarray
    label: str = TRUE_LABEL

    def __post_init__(self):
        e = np.array(self.energies, dtype=np.float64, copy=True)
        ld = np.array(self.log_degeneracies, dtype=np.float64, copy=True)
        if e.ndim != 1 or e.size < 1 or ld.shape != e.shape:
            raise ValueError("need matching 1-D energy and log-degeneracy arrays")
        if not (np.all(np.isfinite(e)) and np.all(np.isfinite(ld))):
            raise ValueError("levels must be finite")
        if np.any(np.diff(e) <= 0):
            raise ValueError("energies must be strictly increasing")
        e.setflags(write=False)
        ld.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "log_degeneracies", ld)

    @property
    def log_count(self) -> float:
        """ln of the total number of states."""
        return float(logsumexp(self.log_degeneracies))

    def shifted(self, offset: float) -> "Spectrum":
        return Spectrum(self.energies + offset, self.log_degeneracies, self.label)


def merge_spectra(first: Spectrum, second: Spectrum, label: str = "equilibrium") -> Spectrum:
    """Union of two level sets; coinciding energies add their degeneracies."""
    energies = np.concatenate([first.energies, second.energies])
    log_deg = np.concatenate([first.log_degeneracies, second.log_degeneracies])
    order = np.argsort(energies, kind="stable")
    energies, log_deg = energies[order], log_deg[order]
    out_e, out_ld = [energies[0]], [log_deg[0]]
    for e, ld in zip(energies[1:], log_deg[1:]):
        if e == out_e[-1]:
            out_ld[-1] = np.logaddexp(out_ld[-1], ld)
        else:
            out_e.append(e)
            out_ld.append(ld)
    return Spectrum(np.array(out_e), np.array(out_ld), label)


@dataclass(frozen=True)
class PhasePair:
    """True and false spectra plus the spin count for per-spin bookkeeping."""

    true_states: Spectrum
    false_states: Spectrum
    n_spins: int

    def __post_init__(self):
        total = np.logaddexp(
            self.true_states.log_count, self.false_states.log_count
        )
        if total > self.n_spins * np.log(2.0) + 1e-9:
            raise ValueError("spectra hold more states than 2^N")

    def merged(self) -> Spectrum:
        return merge_spectra(self.true_states, self.false_states)


@dataclass(frozen=True)
class CanonicalQuantities:
    free_energy: float
    energy: float
    entropy: float
    heat_capacity: float


def canonical_quantities(spec: Spectrum, temperature: float) -> CanonicalQuantities:
    """A, E, S, C of one spectrum at temperature T (logsumexp throughout)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    logw = spec.log_degeneracies - spec.energies / temperature
    log_z = float(logsumexp(logw))
    p = np.exp(logw - log_z)
    energy = float(np.sum(p * spec.energies))
    free_energy = -temperature * log_z
    entropy = (energy - free_energy) / temperature
    heat_capacity = float(np.sum(p * (spec.energies - energy) ** 2)) / temperature**2
    return CanonicalQuantities(free_energy, energy, entropy, heat_capacity)


@dataclass(frozen=True)
class StabilityResult:
    state: str  # stable_true | stable_false | coexistence
    log_weight_ratio: float  # ln(Z_false / Z_true)
    free_energy_true: float
    free_energy_false: float


def stability_check(pair: PhasePair, temperature: float) -> StabilityResult:
    """Compare restricted free energies; ties (to rounding) are coexistence.

    The free-energy comparison and the weight-ratio criterion are the same
    statement; both are computed and must agree to rounding.
    """
    a_true = canonical_quantities(pair.true_states, temperature).free_energy
    a_false = canonical_quantities(pair.false_states, temperature).free_energy
    log_ratio = -(a_false - a_true) / temperature
    gap = a_false - a_true
    scale = max(1.0, abs(a_true), abs(a_false))
    if abs(gap) <= 1e-12 * scale:
        state = "coexistence"
    else:
        state = "stable_true" if gap > 0 else "stable_false"
    # the two criteria are equivalent by construction; guard against drift
    assert (gap >= 0) == (log_ratio <= 0) or abs(gap) <= 1e-12 * scale
    return StabilityResult(
        state=state,
        log_weight_ratio=log_ratio,
        free_energy_true=a_true,
        free_energy_false=a_false,
    )


def gap_criterion_residual(pair: PhasePair, gauge_temperature: float) -> float:
    """[E_F - E_T]/T_gauge - [S_F - S_T] at the gauge temperature.

    Nonnegative iff the true phase is stable there; zero marks the
    borderline parameterization.
    """
    q_true = canonical_quantities(pair.true_states, gauge_temperature)
    q_false = canonical_quantities(pair.false_states, gauge_temperature)
    return (q_false.energy - q_true.energy) / gauge_temperature - (
        q_false.entropy - q_true.entropy
    )


def solve_coexistence_temperature(pair: PhasePair,
                                  t_range: tuple[float, float] = (1e-2, 1e3),
                                  n_scan: int = 200) -> float | None:
    """Temperature where the two phases have equal free energy, or None.

    Scans a geometric grid for a sign change of ln Z_true - ln Z_false and
    polishes with Brent to relative 1e-10.
    """

    def gap(t):
        a_true = canonical_quantities(pair.true_states, t).free_energy
        a_false = canonical_quantities(pair.false_states, t).free_energy
        return (a_false - a_true) / t  # = ln(Z_T/Z_F), well scaled in T

    grid = np.geomspace(t_range[0], t_range[1], n_scan)
    values = np.array([gap(t) for t in grid])
    if values[0] == 0.0:
        return float(grid[0])
    sign_change = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0)[0]
    if sign_change.size == 0:
        return None
    lo, hi = grid[sign_change[0]], grid[sign_change[0] + 1]
    return float(brentq(gap, lo, hi, rtol=1e-10, xtol=1e-14))


def microcanonical_curve(spec: Spectrum, t_range: tuple[float, float],
                         points_per_decade: int = POINTS_PER_DECADE):
    """Parametric (E(T'), S(T')) along a geometric temperature sweep."""
    if not 0 < t_range[0] < t_range[1]:
        raise ValueError("need 0 < t_lo < t_hi")
    decades = np.log10(t_range[1] / t_range[0])
    n = max(int(np.ceil(decades * points_per_decade)) + 1, 16)
    ts = np.geomspace(t_range[0], t_range[1], n)
    energies = np.empty(n)
    entropies = np.empty(n)
    for i, t in enumerate(ts):
        q = canonical_quantities(spec, t)
        energies[i] = q.energy
        entropies[i] = q.entropy
    return ts, energies, entropies


@dataclass(frozen=True)
class TiltedPotential:
    """F(E) = E - T S(E) on a grid, plus its polished minimum."""

    energies: np.ndarray
    values: np.ndarray
    minimizer: float
    minimum: float
    temperature: float


def tilted_potential(spec: Spectrum, temperature: float, energy_grid,
                     t_range: tuple[float, float] | None = None) -> TiltedPotential:
    """Tilted potential at externally fixed T over an energy grid.

    S(E) comes from the parametric sweep (monotone cubic interpolation);
    the minimum is located by Brent search over the sweep parameter, where
    the stationarity condition dS/dE = 1/T holds and the depth equals the
    canonical free energy A(T).
    """
    if t_range is None:
        t_range = (temperature / 100.0, temperature * 100.0)
    energy_grid = np.atleast_1d(np.asarray(energy_grid, dtype=np.float64))
    ts, energies, entropies = microcanonical_curve(spec, t_range)
    # keep a strictly increasing subsequence (roundoff can stall the sweep
    # at the spectrum edges)
    keep = [0]
    for i in range(1, energies.size):
        if energies[i] > energies[keep[-1]] + 1e-13:
            keep.append(i)
    e_nodes, s_nodes = energies[keep], entropies[keep]
    if e_nodes.size < 4:
        raise NumericDomainError("spectrum is too degenerate for an S(E) curve")
    if np.any(energy_grid < e_nodes[0]) or np.any(energy_grid > e_nodes[-1]):
        raise NumericDomainError(
            f"energy grid leaves the canonical range "
            f"[{e_nodes[0]:.6g}, {e_nodes[-1]:.6g}] of the sweep"
        )
    entropy_of = PchipInterpolator(e_nodes, s_nodes)
    values = energy_grid - temperature * entropy_of(energy_grid)

    def depth(log_t):
        q = canonical_quantities(spec, float(np.exp(log_t)))
        return q.energy - temperature * q.entropy

    bracket = (np.log(t_range[0]), np.log(temperature), np.log(t_range[1]))
    result = minimize_scalar(
        depth, bracket=None, bounds=(bracket[0], bracket[2]), method="bounded",
        options={"xatol": 1e-12},
    )
    t_star = float(np.exp(result.x))
    q_star = canonical_quantities(spec, t_star)
    return TiltedPotential(
        energies=energy_grid,
        values=values,
        minimizer=q_star.energy,
        minimum=q_star.energy - temperature * q_star.entropy,
        temperature=temperature,
    )


@dataclass(frozen=True)
class TwoPhaseCurves:
    """Restricted and equilibrium canonical curves on a temperature grid."""

    temperatures: np.ndarray
    energy_true: np.ndarray
    energy_false: np.ndarray
    energy_equilibrium: np.ndarray
    entropy_true: np.ndarray
    entropy_false: np.ndarray
    entropy_equilibrium: np.ndarray
    heat_capacity_equilibrium: np.ndarray


def equilibrium_two_phase(pair: PhasePair, temperatures) -> TwoPhaseCurves:
    """Canonical E(T), S(T) for each phase and for the merged spectrum."""
    temperatures = np.atleast_1d(np.asarray(temperatures, dtype=np.float64))
    merged = pair.merged()
    columns = {name: np.empty(temperatures.shape) for name in (
        "et", "ef", "ee", "st", "sf", "se", "ce")}
    for i, t in enumerate(temperatures):
        q_true = canonical_quantities(pair.true_states, t)
        q_false = canonical_quantities(pair.false_states, t)
        q_eq = canonical_quantities(merged, t)
        columns["et"][i] = q_true.energy
        columns["ef"][i] = q_false.energy
        columns["ee"][i] = q_eq.energy
        columns["st"][i] = q_true.entropy
        columns["sf"][i] = q_false.entropy
        columns["se"][i] = q_eq.entropy
        columns["ce"][i] = q_eq.heat_capacity
    return TwoPhaseCurves(
        temperatures=temperatures,
        energy_true=columns["et"],
        energy_false=columns["ef"],
        energy_equilibrium=columns["ee"],
        entropy_true=columns["st"],
        entropy_false=columns["sf"],
        entropy_equilibrium=columns["se"],
        heat_capacity_equilibrium=columns["ce"],
    )


def binomial_block(n_levels: int, spacing: float, offset: float,
                   label: str, log_scale: float = 0.0) -> Spectrum:
    """Equally spaced levels with binomial log-degeneracies ln C(n, k).

    Total state count is 2^n_levels * exp(log_scale); the block has
    positive heat capacity throughout.
    """
    from scipy.special import gammaln

    k = np.arange(n_levels + 1, dtype=np.float64)
    log_deg = (
        gammaln(n_levels + 1.0) - gammaln(k + 1.0) - gammaln(n_levels - k + 1.0)
        + log_scale
    )
    return Spectrum(offset + spacing * k, log_deg, label)


def borderline_pair(n_spins: int = 64, true_spacing: float = 1.0,
                    false_spacing: float = 1.0, true_offset: float = 0.0,
                    gauge_temperature: float = 1.0) -> tuple[PhasePair, dict]:
    """Reference construction with the two phases in equilibrium at T_gauge.

    The true block holds 2^(N/2) states with binomial degeneracies starting
    at `true_offset`; the false block holds the remaining 2^N - 2^(N/2)
    states, and its energy offset is solved so the free energies cross
    exactly at the gauge temperature.  Returns the pair plus the parameters
    needed to regenerate it.
    """
    if n_spins % 2:
        raise ValueError("n_spins must be even so the true block holds 2^(N/2) states")
    n_half = n_spins // 2
    true_block = binomial_block(n_half, true_spacing, true_offset, TRUE_LABEL)
    # scale the full binomial block down to 2^N - 2^(N/2) states
    deficit = np.log1p(-(2.0 ** (n_half - n_spins)))
    a_true = canonical_quantities(true_block, gauge_temperature).free_energy

    def gap(offset):
        false_block = binomial_block(
            n_spins, false_spacing, offset, FALSE_LABEL, log_scale=deficit
        )
        return canonical_quantities(false_block, gauge_temperature).free_energy - a_true

    lo = true_offset - 2.0 * n_spins * max(true_spacing, false_spacing)
    hi = true_offset + 2.0 * n_spins * max(true_spacing, false_spacing)
    offset = brentq(gap, lo, hi, rtol=8.9e-16, xtol=1e-13)
    false_block = binomial_block(
        n_spins, false_spacing, offset, FALSE_LABEL, log_scale=deficit
    )
    pair = PhasePair(true_states=true_block, false_states=false_block, n_spins=n_spins)
    metadata = {
        "n_spins": n_spins,
        "true_levels": n_half + 1,
        "true_spacing": true_spacing,
        "true_offset": true_offset,
        "false_levels": n_spins + 1,
        "false_spacing": false_spacing,
        "false_offset": float(offset),
        "false_log_scale": float(deficit),
        "gauge_temperature": gauge_temperature,
    }
    return pair, metadata


def read_spectra_csv(path) -> dict[str, Spectrum]:
    """Read `energy,log_degeneracy,label` rows into one Spectrum per label."""
    groups: dict[str, list[tuple[float, float]]] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(row for row in handle if not row.startswith("#"))
        header = next(reader, None)
        expected = ["energy", "log_degeneracy", "label"]
        if header is None or [h.strip().lower() for h in header[:3]] != expected:
            raise ValueError(f"{path}: expected header 'energy,log_degeneracy,label'")
        for row in reader:
            if not row or not "".join(row).strip():
                continue
            if len(row) < 3:
                raise ValueError(f"{path}: malformed row {row!r}")
            groups.setdefault(row[2].strip(), []).append(
                (float(row[0]), float(row[1]))
            )
    spectra = {}
    for label, levels in groups.items():
        levels.sort()
        energies = np.array([e for e, _ in levels])
        log_deg = np.array([ld for _, ld in levels])
        spectra[label] = Spectrum(energies, log_deg, label)
    return spectra


def write_spectra_csv(path, spectra) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["energy", "log_degeneracy", "label"])
        for spec in spectra:
            for e, ld in zip(spec.energies, spec.log_degeneracies):
                writer.writerow([repr(float(e)), repr(float(ld)), spec.label])


def read_phase_pair_csv(path, n_spins: int) -> PhasePair:
    spectra = read_spectra_csv(path)
    try:
        return PhasePair(
            true_states=spectra[TRUE_LABEL],
            false_states=spectra[FALSE_LABEL],
            n_spins=n_spins,
        )
    except KeyError as exc:
        raise ValueError(
            f"{path}: needs both '{TRUE_LABEL}' and '{FALSE_LABEL}' labels"
        ) from exc
