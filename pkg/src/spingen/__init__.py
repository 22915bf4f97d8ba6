"""Thermodynamics of Ising-spin generative models.

Subpackages by theme: exact configuration/coupling transforms (spinspace),
dataset calibration (dataset), ensemble potentials (thermo), reduced
descriptions and their bifurcations (meanfield), the interacting-replica
canonical model (replica), Metropolis kinetics (montecarlo), two-phase
stability of represented vs missing configurations (coexistence), and
Gaussian fluctuation corrections (correlations).  The `spingen` CLI wraps
the figure-data scans.
"""

from .dataset import Dataset, StandardModel, learning_update, standardize
from .errors import NumericDomainError, TableSizeError
from .spinspace import (
    CouplingVector,
    EnergyTable,
    SpinConfig,
    character,
    couplings_from_energies,
    energies_from_couplings,
    energy_of,
)
from .thermo import Ensemble, SourceField

__version__ = "0.1.0"

__all__ = [
    "CouplingVector",
    "Dataset",
    "EnergyTable",
    "Ensemble",
    "NumericDomainError",
    "SourceField",
    "SpinConfig",
    "StandardModel",
    "TableSizeError",
    "character",
    "couplings_from_energies",
    "energies_from_couplings",
    "energy_of",
    "learning_update",
    "standardize",
]
