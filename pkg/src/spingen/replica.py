"""Interacting-replica realization of the factorization constraint.

Two groups of N_r spins (xi_1..xi_Nr, zeta_1..zeta_Nr) interact through

    E(xi, zeta) = (J / N_r) * (sum_s xi_s) * (sum_q zeta_q),

so every thermodynamic sum collapses onto the sector sums a = sum xi and
b = sum zeta with binomial multiplicities.  That makes the exact canonical
treatment O(N_r^2): binomials live in log space via gammaln, sums go
through logsumexp, and N_r up to 2000 is routine.

Per-spin quantities divide extensive values by the total spin count 2 N_r.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, logsumexp

from .errors import NumericDomainError

MAX_REPLICAS = 2000


@dataclass(frozen=True)
class ReplicaModel:
    """Pair coupling J, temperature, and the replica count per group."""

    coupling: float
    temperature: float
    n_replicas: int

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 1 <= self.n_replicas <= MAX_REPLICAS:
            raise ValueError(f"n_replicas must be in 1..{MAX_REPLICAS}")

    @property
    def n_spins_total(self) -> int:
        return 2 * self.n_replicas


@functools.lru_cache(maxsize=32)
def _log_binomials(n: int) -> np.ndarray:
    """ln C(n, k) for k = 0..n."""
    k = np.arange(n + 1, dtype=np.float64)
    values = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    values.setflags(write=False)
    return values


def sector_sums(model: ReplicaModel) -> np.ndarray:
    """The N_r + 1 group-sum values a = -N_r, -N_r + 2, ..., N_r."""
    return np.arange(-model.n_replicas, model.n_replicas + 1, 2, dtype=np.float64)


def _check_sector(model: ReplicaModel, value: float, name: str) -> int:
    k2 = value + model.n_replicas
    k = int(round(k2 / 2.0))
    if abs(k2 - 2 * k) > 1e-9 or not 0 <= k <= model.n_replicas:
        raise ValueError(
            f"{name} = {value} is not a reachable group sum for "
            f"N_r = {model.n_replicas}"
        )
    return k


def sector_log_weight(model: ReplicaModel, a, b, h1: float = 0.0,
                      h2: float = 0.0) -> float:
    """ln[C C exp(-J a b/(N_r T) + (h1 a + h2 b)/T)] for one (a, b) sector."""
    ka = _check_sector(model, a, "a")
    kb = _check_sector(model, b, "b")
    lb = _log_binomials(model.n_replicas)
    t = model.temperature
    energy = model.coupling * float(a) * float(b) / model.n_replicas
    return float(lb[ka] + lb[kb] - energy / t + (h1 * a + h2 * b) / t)


def _log_weight_table(model: ReplicaModel, h1: float, h2: float) -> np.ndarray:
    """Log weights of all (N_r+1)^2 sectors; row index a, column index b."""
    a = sector_sums(model)
    lb = _log_binomials(model.n_replicas)
    t = model.temperature
    energy = model.coupling * np.outer(a, a) / model.n_replicas
    return (lb[:, None] + lb[None, :] - energy / t
            + (h1 * a[:, None] + h2 * a[None, :]) / t)


def log_partition(model: ReplicaModel, h1: float = 0.0, h2: float = 0.0) -> float:
    return float(logsumexp(_log_weight_table(model, h1, h2)))


def equilibrium_gibbs(model: ReplicaModel, h1: float = 0.0, h2: float = 0.0) -> float:
    """Equilibrium Gibbs energy -T ln Z over all sectors (total, not per spin)."""
    return -model.temperature * log_partition(model, h1, h2)


def equilibrium_gibbs_per_spin(model: ReplicaModel, h1: float = 0.0,
                               h2: float = 0.0) -> float:
    return equilibrium_gibbs(model, h1, h2) / model.n_spins_total


def equilibrium_magnetization(model: ReplicaModel, h: float) -> float:
    """Per-spin magnetization <a>/N_r along the diagonal field (h, -h)."""
    logw = _log_weight_table(model, h, -h)
    logw = logw - logsumexp(logw)
    weights = np.exp(logw)
    a = sector_sums(model)
    return float(np.sum(weights.sum(axis=1) * a) / model.n_replicas)


def magnetization_curve(model: ReplicaModel, h_values) -> np.ndarray:
    h_values = np.atleast_1d(np.asarray(h_values, dtype=np.float64))
    return np.array([equilibrium_magnetization(model, h) for h in h_values])


def log_density_of_states(model: ReplicaModel, m: float) -> float:
    """ln N(m): Boltzmann-weighted count of the fixed-magnetization sector.

    The sector is a = N_r m, b = -N_r m, so N_r m must be an integer of the
    same parity as N_r.
    """
    a = model.n_replicas * m
    if abs(a - round(a)) > 1e-9:
        raise ValueError(
            f"m = {m} does not hit a sector for N_r = {model.n_replicas}"
        )
    a = float(round(a))
    ka = _check_sector(model, a, "N_r m")
    lb = _log_binomials(model.n_replicas)
    t = model.temperature
    return float(2.0 * lb[ka] + model.coupling * a * a / (model.n_replicas * t))


def density_cost_per_spin(model: ReplicaModel, m: float) -> float:
    """-T ln N(m) / (2 N_r), the per-spin free energy cost of magnetization m."""
    return -model.temperature * log_density_of_states(model, m) / model.n_spins_total


@dataclass(frozen=True)
class HelmholtzCurve:
    """Per-spin equilibrium Helmholtz energy on a magnetization grid."""

    m: np.ndarray
    free_energy: np.ndarray
    field: np.ndarray  # h that produces each m


def _invert_magnetization(model: ReplicaModel, m: float, h_max: float) -> float:
    """Field on the diagonal slice producing per-spin magnetization m."""
    if m == 0.0:
        return 0.0
    sign = np.sign(m)
    target = abs(m)
    hi = min(1.0, h_max)
    while equilibrium_magnetization(model, hi) < target:
        hi *= 2.0
        if hi > h_max:
            raise NumericDomainError(
                f"magnetization {m} is beyond the invertible range"
            )
    return sign * brentq(
        lambda h: equilibrium_magnetization(model, h) - target,
        0.0,
        hi,
        xtol=1e-13,
        rtol=8.9e-16,
    )


def equilibrium_helmholtz(model: ReplicaModel, m_values,
                          h_max: float = 64.0) -> HelmholtzCurve:
    """Legendre transform A(m) = G(h(m)) + h m per spin.

    m(h) is strictly increasing (equilibrium susceptibility is positive), so
    the inverse field is found by bracketed root finding; the transform is
    stationary in h, making the result insensitive to the inversion
    tolerance.
    """
    m_values = np.atleast_1d(np.asarray(m_values, dtype=np.float64))
    if np.any(np.abs(m_values) > 1.0):
        raise NumericDomainError("per-spin magnetization must lie in [-1, 1]")
    fields = np.empty(m_values.shape)
    values = np.empty(m_values.shape)
    for i, m in enumerate(m_values):
        h = _invert_magnetization(model, float(m), h_max)
        fields[i] = h
        values[i] = equilibrium_gibbs_per_spin(model, h, -h) + h * m
    return HelmholtzCurve(m=m_values, free_energy=values, field=fields)


def flat_bottom_depth(model: ReplicaModel, m_star: float) -> float:
    """Per-spin rise of the equilibrium Helmholtz energy across its bottom.

    The equilibrium curve is convex with its minimum at m = 0; the rise to
    the restricted-minimum location m_star measures the residual tilt of
    the nearly flat bottom, which vanishes as 1/N with system size.
    """
    curve = equilibrium_helmholtz(model, np.array([0.0, m_star]))
    return float(curve.free_energy[1] - curve.free_energy[0])
