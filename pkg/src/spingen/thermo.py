"""Contextual-ensemble thermodynamics: free energies, entropy, source fields.

The ensemble drives per-configuration weights relative to standard values,

    Z_i = Z_i_std * exp(-(E_i - E_i_std)/T),

optionally biased by an onsite source field h through exp(<h|sigma_i>/T).
Every partition sum here goes through max-shifted exponentials, so couplings
of order J/T ~ hundreds stay finite.

The potentials:

  free_energy            A  = -T ln sum_i Z_i
  gibbs_energy           G  = -T ln sum_i Z_i exp(<h|sigma_i>/T)
  learning_potential     restricted entropy-only transform of A over a
                         chosen subset of weights; uniquely minimized at the
                         standard weights, where it equals -T ln Z_std
  tilde (constrained) counterparts subtract sum_i x_i (E_i - E_i_std)

Hard retrieval cues pin spins outright: a pinned site restricts the
configuration sum instead of using a large finite field, so there is no
overflow and the magnetization of a pinned site is exactly +-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .dataset import StandardModel
from .errors import NumericDomainError
from .spinspace import EnergyTable, n_configs, spin_signs

FD_STEP = 1e-5  # central-difference step for the derivative checks


@dataclass(frozen=True)
class SourceField:
    """Onsite fields h_alpha plus per-site pin flags (-1, 0, +1).

    Finite biases go in `h`; an infinitely rigid cue is expressed by the pin
    flag, which removes incompatible configurations from every sum.
    """

    h: np.ndarray
    pinned: np.ndarray | None = None

    def __post_init__(self):
        h = np.array(self.h, dtype=np.float64, copy=True)
        if h.ndim != 1:
            raise ValueError("field must be a 1-D array of onsite values")
        if not np.all(np.isfinite(h)):
            raise ValueError("field entries must be finite; use pins for +-infinity")
        pinned = self.pinned
        if pinned is None:
            pinned = np.zeros(h.size, dtype=np.int8)
        else:
            pinned = np.array(pinned, dtype=np.int8, copy=True)
            if pinned.shape != h.shape or not np.all(np.isin(pinned, (-1, 0, 1))):
                raise ValueError("pin flags must be -1, 0, or +1 per site")
        h.setflags(write=False)
        pinned.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "pinned", pinned)

    @classmethod
    def zeros(cls, n_spins: int) -> "SourceField":
        return cls(h=np.zeros(n_spins))

    @classmethod
    def from_values(cls, values) -> "SourceField":
        """Build from values that may contain +-inf (converted to pins)."""
        values = np.asarray(values, dtype=np.float64)
        pinned = np.where(np.isposinf(values), 1, np.where(np.isneginf(values), -1, 0))
        h = np.where(pinned != 0, 0.0, values)
        return cls(h=h, pinned=pinned.astype(np.int8))

    def replace(self, site: int, value: float) -> "SourceField":
        h = np.array(self.h)
        h[site - 1] = value
        return SourceField(h=h, pinned=np.array(self.pinned))


@dataclass(frozen=True)
class Ensemble:
    """Standard reference data, live energies, and the drive temperature."""

    n_spins: int
    standard_energies: EnergyTable
    standard_log_weights: np.ndarray
    live_energies: EnergyTable
    temperature: float

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        lw = np.asarray(self.standard_log_weights, dtype=np.float64)
        if lw.shape != (n_configs(self.n_spins),) or not np.all(np.isfinite(lw)):
            raise ValueError("standard log-weights must be finite, one per configuration")
        object.__setattr__(self, "standard_log_weights", lw)
        for table in (self.standard_energies, self.live_energies):
            if table.n_spins != self.n_spins:
                raise ValueError("energy tables must match the ensemble spin count")

    @classmethod
    def standard_state(cls, model: StandardModel, temperature: float) -> "Ensemble":
        """Ensemble with live energies equal to the standards."""
        return cls(
            n_spins=model.n_spins,
            standard_energies=model.standard_energies,
            standard_log_weights=model.standard_log_weights,
            live_energies=model.standard_energies,
            temperature=temperature,
        )

    @classmethod
    def driven(cls, model: StandardModel, live_energies: EnergyTable,
               temperature: float) -> "Ensemble":
        """Ensemble with live energies shifted away from the standards."""
        return cls(
            n_spins=model.n_spins,
            standard_energies=model.standard_energies,
            standard_log_weights=model.standard_log_weights,
            live_energies=live_energies,
            temperature=temperature,
        )

    def log_weights_raw(self) -> np.ndarray:
        """Unnormalized ln Z_i = ln Z_i_std - (E_i - E_i_std)/T."""
        shift = self.live_energies.values - self.standard_energies.values
        return self.standard_log_weights - shift / self.temperature

    def with_energies(self, live_energies: EnergyTable) -> "Ensemble":
        return Ensemble(
            n_spins=self.n_spins,
            standard_energies=self.standard_energies,
            standard_log_weights=self.standard_log_weights,
            live_energies=live_energies,
            temperature=self.temperature,
        )


def field_energies(n_spins: int, field: SourceField) -> np.ndarray:
    """<h|sigma_i> over all configurations (pins contribute nothing here)."""
    if field.h.size != n_spins:
        raise ValueError(f"field has {field.h.size} sites, ensemble has {n_spins}")
    total = np.zeros(n_configs(n_spins))
    for site in range(1, n_spins + 1):
        value = field.h[site - 1]
        if value != 0.0:
            total += value * spin_signs(n_spins, site)
    return total


def pin_mask(n_spins: int, field: SourceField | None) -> np.ndarray | None:
    """Boolean mask of configurations compatible with the pins, or None."""
    if field is None or not np.any(field.pinned):
        return None
    mask = np.ones(n_configs(n_spins), dtype=bool)
    for site in range(1, n_spins + 1):
        pin = field.pinned[site - 1]
        if pin:
            mask &= spin_signs(n_spins, site) == float(pin)
    return mask


def _biased_log_weights(ens: Ensemble, field: SourceField | None) -> np.ndarray:
    logw = ens.log_weights_raw()
    if field is not None:
        logw = logw + field_energies(ens.n_spins, field) / ens.temperature
        mask = pin_mask(ens.n_spins, field)
        if mask is not None:
            if not mask.any():
                raise NumericDomainError("pins exclude every configuration")
            logw = np.where(mask, logw, -np.inf)
    return logw


def log_weights(ens: Ensemble, field: SourceField | None = None) -> np.ndarray:
    """Normalized ln x_i, field bias and pins included."""
    logw = _biased_log_weights(ens, field)
    return logw - logsumexp(logw)


def weights(ens: Ensemble, field: SourceField | None = None) -> np.ndarray:
    """Normalized weights x_i; sums to 1 by construction."""
    x = np.exp(log_weights(ens, field))
    return x / x.sum()


def free_energy(ens: Ensemble) -> float:
    """A = -T ln sum_i Z_i."""
    return -ens.temperature * float(logsumexp(ens.log_weights_raw()))


def gibbs_energy(ens: Ensemble, field: SourceField | None = None) -> float:
    """G = -T ln sum_i Z_i exp(<h|sigma_i>/T), restricted to unpinned space."""
    return -ens.temperature * float(logsumexp(_biased_log_weights(ens, field)))


def entropy_energy_heat_capacity(ens: Ensemble) -> tuple[float, float, float]:
    """Constrained entropy, energy, and heat capacity of the ensemble.

    S = ln Z_std - KL(x || x_std), E = sum_i x_i (E_i - E_i_std),
    C = sum_i x_i [(E_i - E_i_std)^2 - E^2] / T^2.  A + T S = E holds
    identically.
    """
    log_x = log_weights(ens)
    x = np.exp(log_x)
    x /= x.sum()
    log_norm_std = logsumexp(ens.standard_log_weights)
    log_x_std = ens.standard_log_weights - log_norm_std
    entropy = float(log_norm_std - np.sum(x * (log_x - log_x_std)))
    shift = ens.live_energies.values - ens.standard_energies.values
    energy = float(np.sum(x * shift))
    heat_capacity = float(np.sum(x * (shift - energy) ** 2) / ens.temperature**2)
    return entropy, energy, heat_capacity


def learning_potential_explicit(x, standard_log_weights, temperature: float,
                                subset=None) -> float:
    """Entropy-only potential over a chosen subset of weights.

    For a strict subset the remainder 1 - sum(x) enters as one lumped
    component against the standard complement weight; for the full set the
    remainder term is absent.  Minimum value is -T ln Z_std, attained only
    at the standard weights.
    """
    standard_log_weights = np.asarray(standard_log_weights, dtype=np.float64)
    log_norm_std = logsumexp(standard_log_weights)
    x = np.asarray(x, dtype=np.float64)
    if subset is None:
        if x.shape != standard_log_weights.shape:
            raise ValueError("full-set potential needs one weight per configuration")
        if abs(x.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        log_x_std = standard_log_weights - log_norm_std
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(x > 0, x * (np.log(x) - log_x_std), 0.0)
        return temperature * (float(np.sum(terms)) - float(log_norm_std))

    subset = np.asarray(subset, dtype=np.int64)
    if subset.size != x.size:
        raise ValueError("one weight per subset configuration required")
    if subset.size >= standard_log_weights.size:
        raise ValueError("subset must be strictly smaller than the full set")
    if np.unique(subset).size != subset.size:
        raise ValueError("subset indices must be distinct")
    remainder = 1.0 - x.sum()
    if np.any(x < 0) or remainder < 0:
        raise ValueError("weights must be nonnegative with sum at most 1")
    log_x_std = standard_log_weights - log_norm_std
    x_std_sub = np.exp(log_x_std[subset])
    complement_std = max(1.0 - float(x_std_sub.sum()), 0.0)
    if complement_std <= 0:
        raise NumericDomainError("standard complement weight underflows to zero")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(x > 0, x * (np.log(x) - log_x_std[subset]), 0.0)
    total = float(np.sum(terms))
    if remainder > 0:
        total += remainder * (np.log(remainder) - np.log(complement_std))
    return temperature * (total - float(log_norm_std))


def learning_potential(ens: Ensemble, field: SourceField | None = None,
                       subset=None) -> float:
    """Learning potential evaluated at the ensemble's current weights."""
    x = weights(ens, field)
    if subset is not None:
        x = x[np.asarray(subset, dtype=np.int64)]
    return learning_potential_explicit(
        x, ens.standard_log_weights, ens.temperature, subset=subset
    )


def gibbs_inequality_residual(trial_energies: EnergyTable, standard: StandardModel,
                              temperature: float) -> float:
    """A_trial + sum_i x_trial_i (E_std_i - E_trial_i) - A_std, always >= 0.

    Zero iff the trial weights equal the standard weights (e.g. when the
    trial table is a uniform shift of the standards).
    """
    ens = Ensemble.driven(standard, trial_energies, temperature)
    a_trial = free_energy(ens)
    x = weights(ens)
    cross = float(np.sum(x * (standard.standard_energies.values - trial_energies.values)))
    a_std = -temperature * standard.log_partition
    return a_trial + cross - a_std


def magnetizations(ens: Ensemble, field: SourceField | None = None) -> np.ndarray:
    """m_alpha = sum_i x_i sigma_alpha(i); pinned sites give exactly +-1."""
    x = weights(ens, field)
    m = np.empty(ens.n_spins)
    for site in range(1, ens.n_spins + 1):
        m[site - 1] = float(np.sum(x * spin_signs(ens.n_spins, site)))
    if field is not None:
        pinned = field.pinned != 0
        m[pinned] = field.pinned[pinned]
    return m


def tilde_correction(ens: Ensemble, field: SourceField | None = None) -> float:
    """sum_i x_i (E_i - E_i_std) with field-biased weights."""
    x = weights(ens, field)
    shift = ens.live_energies.values - ens.standard_energies.values
    return float(np.sum(x * shift))


def tilde_gibbs_energy(ens: Ensemble, field: SourceField | None = None) -> float:
    """Constrained Gibbs energy G - sum_i x_i (E_i - E_i_std)."""
    return gibbs_energy(ens, field) - tilde_correction(ens, field)


@dataclass(frozen=True)
class ConjointDiagnostics:
    """Cross-checks of the conjoint potential structure at one field point."""

    helmholtz: float
    gibbs: float
    tilde_helmholtz: float
    tilde_gibbs: float
    magnetizations: np.ndarray
    legendre_residual: float
    gibbs_derivative_residual: float
    helmholtz_derivative_residual: float

    @property
    def max_residual(self) -> float:
        return max(
            self.legendre_residual,
            self.gibbs_derivative_residual,
            self.helmholtz_derivative_residual,
        )


def conjoint_check(ens: Ensemble, field: SourceField,
                   step: float = FD_STEP) -> ConjointDiagnostics:
    """Verify the Legendre structure tying A, G, and their constrained forms.

    Checks (i) the identity tilde-A = tilde-G + sum h_alpha m_alpha, with
    tilde-A evaluated independently through the explicit weight form,
    (ii) m_alpha = -d(tilde-G)/dh_alpha, and (iii) h recovered from the
    gradient of tilde-A through the magnetization Jacobian.  The derivative
    checks hold when the live energies sit at the standards (retrieval from
    the standard model); driving E off-standard adds weight-relaxation terms.
    """
    if np.any(field.pinned):
        raise ValueError("derivative checks need finite fields, not pins")
    n = ens.n_spins
    g = gibbs_energy(ens, field)
    m = magnetizations(ens, field)
    hm = float(np.dot(field.h, m))
    a = g + hm
    correction = tilde_correction(ens, field)
    tilde_a = a - correction
    tilde_g = g - correction
    # tilde-A from the explicit weight formula must agree with the Legendre
    # route G + sum(h m) - correction for any live energies
    explicit = learning_potential(ens, field)
    legendre_residual = abs(tilde_a - explicit)

    # central differences of tilde-G and of tilde-A(m(h)) over the field
    grad_tg = np.empty(n)
    grad_ta = np.empty(n)
    jac = np.empty((n, n))  # jac[alpha, beta] = d m_beta / d h_alpha
    for alpha in range(1, n + 1):
        up = field.replace(alpha, field.h[alpha - 1] + step)
        down = field.replace(alpha, field.h[alpha - 1] - step)
        grad_tg[alpha - 1] = (
            tilde_gibbs_energy(ens, up) - tilde_gibbs_energy(ens, down)
        ) / (2 * step)
        grad_ta[alpha - 1] = (
            learning_potential(ens, up) - learning_potential(ens, down)
        ) / (2 * step)
        jac[alpha - 1] = (magnetizations(ens, up) - magnetizations(ens, down)) / (
            2 * step
        )
    gibbs_residual = float(np.max(np.abs(grad_tg + m)))
    # grad_ta[alpha] = sum_beta jac[alpha, beta] h_beta when E = E_std
    try:
        h_recovered = np.linalg.solve(jac, grad_ta)
        helmholtz_residual = float(np.max(np.abs(h_recovered - field.h)))
    except np.linalg.LinAlgError:
        helmholtz_residual = np.inf
    return ConjointDiagnostics(
        helmholtz=a,
        gibbs=g,
        tilde_helmholtz=tilde_a,
        tilde_gibbs=tilde_g,
        magnetizations=m,
        legendre_residual=legendre_residual,
        gibbs_derivative_residual=gibbs_residual,
        helmholtz_derivative_residual=helmholtz_residual,
    )
