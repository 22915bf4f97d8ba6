"""Quadratic fluctuation machinery around the standard weights.

Near its minimum the learning potential over a subset of M weights is the
quadratic form

    A(x)/T ~ sum_i dx_i^2 / (2 x_std_i) + [sum_i dx_i]^2 / (2 x_comp_std)
             - ln Z_std,

ideal-mixture number fluctuations plus the soft normalization constraint
(x_comp_std is the standard weight of the complement).  Correlated weight
fluctuations enter through a user-supplied symmetric matrix gamma added to
that quadratic form, which shifts the constitutive relation between
energies and weights and defines the Gaussian fluctuation matrices

    alpha_inv = diag(1/x_std) + ones/x_comp_std + gamma,
    cov(dx) = alpha,   cov(dE/T) = alpha_inv.

The factor bookkeeping is normative in one direction: the gradient of the
corrected potential must reproduce the corrected constitutive relation
exactly, which pins gamma's 1/2 inside the potential and its bare exponent
under the logarithm.

No gamma is synthesized here; it is an input (CSV or array).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dataset import StandardModel
from .errors import NumericDomainError
from .thermo import learning_potential_explicit

CONDITION_WARNING = 1e12


@dataclass(frozen=True)
class CorrelationSpec:
    """Symmetric weight-fluctuation couplings gamma over a configuration subset."""

    gamma: np.ndarray
    subset: np.ndarray

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=np.float64, copy=True)
        subset = np.array(self.subset, dtype=np.int64, copy=True)
        if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1]:
            raise ValueError("gamma must be a square matrix")
        if subset.ndim != 1 or subset.size != gamma.shape[0]:
            raise ValueError("subset must list one configuration per gamma row")
        if np.unique(subset).size != subset.size:
            raise ValueError("subset indices must be distinct")
        if np.max(np.abs(gamma - gamma.T)) > 1e-12:
            raise ValueError("gamma must be symmetric to 1e-12")
        gamma.setflags(write=False)
        subset.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "subset", subset)

    @classmethod
    def uncorrelated(cls, subset) -> "CorrelationSpec":
        subset = np.asarray(subset, dtype=np.int64)
        return cls(gamma=np.zeros((subset.size, subset.size)), subset=subset)

    @property
    def size(self) -> int:
        return self.subset.size


def _subset_standards(standard: StandardModel, subset: np.ndarray):
    """(x_std over subset, complement standard weight x_comp_std)."""
    x_std = standard.standard_weights[subset]
    complement = 1.0 - float(x_std.sum())
    if complement <= 0:
        raise NumericDomainError("subset exhausts the standard weight")
    return x_std, complement


@dataclass(frozen=True)
class QuadraticExpansion:
    """Ideal quadratic coefficients of the learning potential at its minimum."""

    subset: np.ndarray
    inverse_weights: np.ndarray  # 1/x_std_i, the diagonal
    complement_inverse: float  # 1/x_comp_std, weight of the rank-one term
    constant: float  # -ln Z_std

    def hessian(self) -> np.ndarray:
        """Hessian of A/T at the standard weights (gamma = 0)."""
        return np.diag(self.inverse_weights) + self.complement_inverse

    def value(self, x) -> float:
        """Quadratic approximation of A/T at subset weights x."""
        dx = np.asarray(x, dtype=np.float64) - 1.0 / self.inverse_weights
        return (
            0.5 * float(np.sum(dx * dx * self.inverse_weights))
            + 0.5 * self.complement_inverse * float(dx.sum()) ** 2
            + self.constant
        )


def quadratic_expansion(standard: StandardModel, subset) -> QuadraticExpansion:
    subset = np.asarray(subset, dtype=np.int64)
    x_std, complement = _subset_standards(standard, subset)
    return QuadraticExpansion(
        subset=subset,
        inverse_weights=1.0 / x_std,
        complement_inverse=1.0 / complement,
        constant=-standard.log_partition,
    )


def _check_interior(x: np.ndarray, strict_total=True):
    if np.any(x <= 0):
        raise NumericDomainError("weights must be strictly positive")
    if strict_total and x.sum() >= 1.0:
        raise NumericDomainError("subset weights must sum to less than 1")


def corrected_potential(standard: StandardModel, corr: CorrelationSpec, x,
                        temperature: float) -> float:
    """Learning potential plus the correlation term (T/2) dx^T gamma dx."""
    x = np.asarray(x, dtype=np.float64)
    if x.size != corr.size:
        raise ValueError("one weight per subset configuration required")
    full = corr.size == standard.standard_weights.size
    _check_interior(x, strict_total=not full)
    x_std = standard.standard_weights[corr.subset]
    dx = x - x_std
    base = learning_potential_explicit(
        x,
        standard.standard_log_weights,
        temperature,
        subset=None if full else corr.subset,
    )
    return base + 0.5 * temperature * float(dx @ corr.gamma @ dx)


def constitutive_energies(standard: StandardModel, corr: CorrelationSpec, x,
                          temperature: float) -> np.ndarray:
    """Subset energies consistent with weights x under correlations gamma.

    E_i/T = E_std_i/T - ln[(x_i/x_std_i) e^{sum_j gamma_ij dx_j}
                           / ((1 - sum x)/x_comp_std)];
    gamma = 0 recovers the ideal-mixture relation.  Configurations outside
    the subset stay at their standard energies.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size != corr.size:
        raise ValueError("one weight per subset configuration required")
    if corr.size >= standard.standard_weights.size:
        raise ValueError("constitutive relation needs a strict subset")
    _check_interior(x)
    x_std, complement_std = _subset_standards(standard, corr.subset)
    remainder = 1.0 - float(x.sum())
    dx = x - x_std
    log_term = (
        np.log(x / x_std)
        + corr.gamma @ dx
        - np.log(remainder / complement_std)
    )
    e_std = standard.standard_energies.values[corr.subset]
    return e_std - temperature * log_term


def fluctuation_matrices(standard: StandardModel,
                         corr: CorrelationSpec) -> tuple[np.ndarray, np.ndarray]:
    """(alpha, alpha_inv): Gaussian covariances of dx and dE/T.

    alpha_inv = diag(1/x_std) + ones/x_comp_std + gamma must be positive
    definite; ill conditioning beyond 1e12 triggers a warning.
    """
    x_std, complement = _subset_standards(standard, corr.subset)
    alpha_inv = np.diag(1.0 / x_std) + 1.0 / complement + corr.gamma
    try:
        factor = cho_factor(alpha_inv)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "correlation matrix makes the fluctuation form indefinite"
        ) from exc
    eigenvalues = np.linalg.eigvalsh(alpha_inv)
    if eigenvalues[0] <= 0:
        raise ValueError("correlation matrix makes the fluctuation form indefinite")
    if eigenvalues[-1] / eigenvalues[0] > CONDITION_WARNING:
        warnings.warn(
            "fluctuation matrix condition number exceeds 1e12; the inverse "
            "is unreliable",
            RuntimeWarning,
            stacklevel=2,
        )
    alpha = cho_solve(factor, np.eye(corr.size))
    alpha = 0.5 * (alpha + alpha.T)
    return alpha, alpha_inv


def read_gamma_csv(path) -> CorrelationSpec:
    """Read a gamma matrix: header row of subset indices, then row-major values."""
    with open(path, newline="", encoding="utf-8") as handle:
        rows = [row for row in csv.reader(handle) if row and "".join(row).strip()]
    if not rows:
        raise ValueError(f"{path}: empty gamma file")
    subset = np.array([int(v) for v in rows[0]], dtype=np.int64)
    matrix = np.array([[float(v) for v in row] for row in rows[1:]])
    if matrix.shape != (subset.size, subset.size):
        raise ValueError(
            f"{path}: expected a {subset.size}x{subset.size} matrix under the header"
        )
    return CorrelationSpec(gamma=matrix, subset=subset)


def write_gamma_csv(path, corr: CorrelationSpec) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(int(i) for i in corr.subset)
        for row in corr.gamma:
            writer.writerow(repr(float(v)) for v in row)
