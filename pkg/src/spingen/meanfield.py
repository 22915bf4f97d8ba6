"""Mean-field reduction: free energy over magnetizations and its landscape.

Dropping all couplings of order two and higher from a trial model is the
classic factorization ansatz; the resulting free energy over onsite
magnetizations is

    A(m) = E_std(sigma)|_{sigma -> m} + T sum_alpha s(m_alpha),

with s the binary mixing entropy.  Below the critical coupling the surface
bifurcates: the two-spin pair model E_std = J sigma_1 sigma_2 develops two
degenerate minima at (m, -m) for J/T > 1, separated by spinodals at
+-sqrt(1 - T/J), and a field-driven first-order boundary whose endpoints sit
at h_c = J m0 + T atanh(m0) on the diagonal field line.

The stationary-point solver uses a damped fixed-point sweep from a
deterministic seed grid with a Newton polish, so which minimum is reported
never depends on chance.  The same solver backs the saddle-point evaluation
of the per-replica Gibbs energy, which must match the Legendre-restricted
Gibbs energy of each branch identically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .dataset import Dataset, standardize
from .errors import NumericDomainError
from .spinspace import CouplingVector, energies_from_couplings
from .thermo import Ensemble, SourceField, gibbs_energy, magnetizations

# Hessian eigenvalues smaller than this are reported as degenerate rather
# than guessed into a class.
DEGENERATE_EIGENVALUE = 1e-8

_SEED_CORNER = 0.99
_EDGE = 1.0 - 1e-12  # solver iterates are kept strictly inside the open cube


@dataclass(frozen=True)
class MeanFieldModel:
    """Standard couplings plus the retrieval temperature."""

    standard_couplings: CouplingVector
    temperature: float

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    @property
    def n_spins(self) -> int:
        return self.standard_couplings.n_spins


@dataclass(frozen=True)
class StationaryPoint:
    """A zero-gradient point of the (tilted) mean-field surface."""

    m: np.ndarray
    kind: str  # minimum | saddle | maximum | degenerate
    value: float
    gradient_norm: float
    converged: bool = True


def mixing_entropy(m):
    """Binary mixing entropy s(m), elementwise; s(0) = -ln 2, s(+-1) = 0."""
    m = np.asarray(m, dtype=np.float64)
    up = (1.0 + m) / 2.0
    down = (1.0 - m) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(up > 0, up * np.log(up), 0.0) + np.where(
            down > 0, down * np.log(down), 0.0
        )
    return terms


def log_2cosh(x):
    """ln(2 cosh x) without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.abs(x) + np.log1p(np.exp(-2.0 * np.abs(x)))


def _fold(values: np.ndarray, m: np.ndarray, derivative_sites=()) -> float:
    """Contract a Kronecker-ordered table against (1, m_alpha) factors.

    Sites in `derivative_sites` contract against (0, 1) instead, producing
    mixed partial derivatives of the multilinear form.
    """
    v = np.asarray(values, dtype=np.float64)
    for site in range(1, m.size + 1):
        pairs = v.reshape(-1, 2)
        if site in derivative_sites:
            v = pairs[:, 1]
        else:
            v = pairs[:, 0] + m[site - 1] * pairs[:, 1]
    return float(v[0])


def multilinear_energy(couplings: CouplingVector, m) -> float:
    """E_std(sigma)|_{sigma -> m} = -sum_k J_k prod_{alpha in k} m_alpha."""
    m = np.asarray(m, dtype=np.float64)
    if m.size != couplings.n_spins:
        raise ValueError("magnetization vector length must equal the spin count")
    return -_fold(couplings.values, m)


def multilinear_gradient(couplings: CouplingVector, m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    return np.array(
        [
            -_fold(couplings.values, m, derivative_sites=(site,))
            for site in range(1, m.size + 1)
        ]
    )


def multilinear_hessian(couplings: CouplingVector, m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    n = m.size
    hess = np.zeros((n, n))
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            hess[a - 1, b - 1] = hess[b - 1, a - 1] = -_fold(
                couplings.values, m, derivative_sites=(a, b)
            )
    return hess


def _check_domain(m: np.ndarray):
    if np.any(np.abs(m) >= 1.0):
        raise NumericDomainError("magnetizations must lie strictly inside (-1, 1)")


def mf_free_energy(model: MeanFieldModel, m) -> float:
    """Mean-field free energy at magnetization vector m."""
    m = np.asarray(m, dtype=np.float64)
    _check_domain(m)
    energy = multilinear_energy(model.standard_couplings, m)
    return energy + model.temperature * float(np.sum(mixing_entropy(m)))


def mf_gradient(model: MeanFieldModel, m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    _check_domain(m)
    return multilinear_gradient(
        model.standard_couplings, m
    ) + model.temperature * np.arctanh(m)


def mf_hessian(model: MeanFieldModel, m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    _check_domain(m)
    hess = multilinear_hessian(model.standard_couplings, m)
    return hess + np.diag(model.temperature / (1.0 - m * m))


def _field_vector(model: MeanFieldModel, field: SourceField | None) -> np.ndarray:
    if field is None:
        return np.zeros(model.n_spins)
    if np.any(field.pinned):
        raise ValueError("the mean-field solver takes finite fields only")
    if field.h.size != model.n_spins:
        raise ValueError("field length must equal the spin count")
    return field.h


def _classify(model: MeanFieldModel, m: np.ndarray) -> str:
    eigs = np.linalg.eigvalsh(mf_hessian(model, m))
    if np.any(np.abs(eigs) < DEGENERATE_EIGENVALUE):
        return "degenerate"
    if np.all(eigs > 0):
        return "minimum"
    if np.all(eigs < 0):
        return "maximum"
    return "saddle"


def _fixed_point(model, h, seed, damping, tol, max_iter):
    """Damped iteration of m <- tanh((h - grad E)/T) with safeguarded
    geometric extrapolation.

    Near a bifurcation the plain iteration converges at a rate approaching
    one; every 20 steps the accumulated residual sequence is summed as a
    geometric series and the jump is adopted only if it shrinks the update.
    """
    j = model.standard_couplings
    t = model.temperature
    m = np.clip(np.asarray(seed, dtype=np.float64), -_SEED_CORNER, _SEED_CORNER)
    prev_residual = None
    for iteration in range(max_iter):
        target = np.tanh((h - multilinear_gradient(j, m)) / t)
        residual = target - m
        size = np.max(np.abs(residual))
        if size < tol:
            return m, True
        new = m + damping * residual
        if prev_residual is not None and iteration % 20 == 19:
            denom = float(prev_residual @ prev_residual)
            if denom > 0:
                rate = float(residual @ prev_residual) / denom
                if 0.0 < rate < 1.0:
                    jump = np.clip(m + residual / (1.0 - rate), -_EDGE, _EDGE)
                    jump_target = np.tanh((h - multilinear_gradient(j, jump)) / t)
                    if np.max(np.abs(jump_target - jump)) < size:
                        new = jump
        prev_residual = residual
        m = new
    return m, False


def _newton(model, h, seed, tol=1e-13, max_iter=80):
    """Line-searched Newton on the stationarity residual T atanh(m) + grad E - h."""
    t = model.temperature
    m = np.clip(np.asarray(seed, dtype=np.float64), -_SEED_CORNER, _SEED_CORNER)

    def residual_at(point):
        return t * np.arctanh(point) + multilinear_gradient(
            model.standard_couplings, point
        ) - h

    residual = residual_at(m)
    for _ in range(max_iter):
        norm = np.max(np.abs(residual))
        if norm < tol:
            return m, True
        jac = mf_hessian(model, m)
        try:
            step = np.linalg.solve(jac, residual)
        except np.linalg.LinAlgError:
            return m, False
        scale = 1.0
        for _ in range(25):
            trial = np.clip(m - scale * step, -_EDGE, _EDGE)
            trial_residual = residual_at(trial)
            if np.max(np.abs(trial_residual)) < norm:
                m, residual = trial, trial_residual
                break
            scale *= 0.5
        else:
            return m, False
    return m, np.max(np.abs(residual)) < tol


def self_consistency_solve(model: MeanFieldModel, field: SourceField | None = None,
                           damping: float = 0.5, tol: float = 1e-10,
                           max_iter: int = 100_000) -> list[StationaryPoint]:
    """All stationary points of A(m) - sum h_alpha m_alpha found from the seed grid.

    Seeds are the 2^N corners at +-0.99 plus the center; each seed runs a
    damped fixed-point sweep followed by a Newton polish (Newton alone is
    also tried, which is what picks up saddles off the symmetry axes).
    Unconverged seeds are returned flagged rather than dropped.  Points are
    deduplicated at distance 1e-6 and classified by the Hessian spectrum.
    """
    h = _field_vector(model, field)
    n = model.n_spins
    seeds = [np.zeros(n)] + [
        np.array(corner)
        for corner in itertools.product((-_SEED_CORNER, _SEED_CORNER), repeat=n)
    ]
    found: list[StationaryPoint] = []
    unconverged: list[np.ndarray] = []

    def register(m: np.ndarray, converged: bool):
        for point in found:
            if np.max(np.abs(point.m - m)) < 1e-6:
                return
        if not converged:
            unconverged.append(m)
            return
        grad = mf_gradient(model, m) - h
        value = mf_free_energy(model, m)
        found.append(
            StationaryPoint(
                m=m,
                kind=_classify(model, m),
                value=value,
                gradient_norm=float(np.linalg.norm(grad)),
                converged=True,
            )
        )

    for seed in seeds:
        m, ok = _fixed_point(model, h, seed, damping, tol, max_iter)
        if ok:
            m, polished = _newton(model, h, m)
            register(m, polished or ok)
        else:
            register(m, False)
        m2, ok2 = _newton(model, h, seed)
        if ok2:
            register(m2, True)

    for m in unconverged:
        if all(np.max(np.abs(point.m - m)) >= 1e-6 for point in found):
            found.append(
                StationaryPoint(
                    m=m,
                    kind="degenerate",
                    value=mf_free_energy(model, np.clip(m, -_EDGE, _EDGE)),
                    gradient_norm=float(
                        np.linalg.norm(mf_gradient(model, np.clip(m, -_EDGE, _EDGE)) - h)
                    ),
                    converged=False,
                )
            )
    found.sort(key=lambda p: (p.value, tuple(p.m)))
    return found


def two_spin_coupling(model: MeanFieldModel) -> float:
    """Pair strength J of the two-spin standard E_std = J sigma_1 sigma_2."""
    if model.n_spins != 2:
        raise ValueError("this analysis applies to the two-spin pair model")
    j = model.standard_couplings.values
    if np.max(np.abs(j[[0b00, 0b01, 0b10]])) > 1e-12:
        raise ValueError("two-spin analysis requires a pure pair coupling")
    return -float(j[0b11])


def critical_magnetization(coupling: float, temperature: float) -> float | None:
    """Order parameter sqrt(1 - T/J) at the slice minimum onset; None if J <= T."""
    if coupling <= temperature:
        return None
    return float(np.sqrt(1.0 - temperature / coupling))


def slice_free_energy(model: MeanFieldModel, m) -> np.ndarray:
    """A along the antisymmetric slice (m, -m), vectorized over m."""
    m = np.atleast_1d(np.asarray(m, dtype=np.float64))
    _check_domain(m)
    j = two_spin_coupling(model)
    return -j * m * m + 2.0 * model.temperature * mixing_entropy(m)


def spinodals(model: MeanFieldModel) -> tuple[float, float] | None:
    """Roots of the slice curvature, +-sqrt(1 - T/J); None for J/T <= 1.

    Located by bisection of d^2A/dm^2 = 2T/(1-m^2) - 2J on (0, 1).
    """
    j = two_spin_coupling(model)
    t = model.temperature
    if j <= t:
        return None

    def curvature(m):
        return 2.0 * t / (1.0 - m * m) - 2.0 * j

    root = brentq(curvature, 0.0, 1.0 - 1e-15, xtol=1e-10, rtol=8.9e-16)
    return -root, root


@dataclass(frozen=True)
class PhaseBoundary:
    """Endpoints of the diagonal coexistence segment in the field plane."""

    critical_field: float
    order_parameter: float

    @property
    def endpoints(self):
        h = self.critical_field
        return ((-h, -h), (h, h))


def phase_boundary(model: MeanFieldModel) -> PhaseBoundary | None:
    """h_c = J m0 + T atanh(m0) with m0 = sqrt(1 - T/J); None for J/T <= 1."""
    j = two_spin_coupling(model)
    t = model.temperature
    m0 = critical_magnetization(j, t)
    if m0 is None:
        return None
    h_c = j * m0 + t * np.arctanh(m0)
    return PhaseBoundary(critical_field=float(h_c), order_parameter=m0)


@dataclass(frozen=True)
class BranchCurves:
    """Restricted Gibbs branches along the diagonal field slice h = (h, -h).

    Entries are NaN past the spinodal field where a branch has terminated.
    """

    h: np.ndarray
    gibbs_plus: np.ndarray
    gibbs_minus: np.ndarray
    m_plus: np.ndarray
    m_minus: np.ndarray


def _continue_branch(model, h_values, start_index, seed, sign, bistable,
                     g_out, m_out):
    """Follow one minimum outward from start_index in both grid directions.

    In the bistable regime a branch ends when the continued solution escapes
    its basin (the surviving minimum has the opposite slice sign); below the
    critical coupling the unique minimum is followed across the whole grid.
    """

    def track(indices, m_seed):
        m = np.array(m_seed)
        for i in indices:
            h = h_values[i]
            field = SourceField(h=np.array([h, -h]))
            m_new, ok = _fixed_point(model, field.h, m, 0.5, 1e-8, 5_000)
            if ok:
                m_new, ok = _newton(model, field.h, m_new)
            in_basin = not bistable or sign * (m_new[0] - m_new[1]) > 0
            if not (ok and in_basin and _classify(model, m_new) == "minimum"):
                break  # spinodal reached; branch terminates
            g_out[i] = mf_free_energy(model, m_new) - h * (m_new[0] - m_new[1])
            m_out[i] = m_new[0]
            m = m_new

    track(range(start_index, len(h_values)), seed)
    track(range(start_index - 1, -1, -1), seed)


def restricted_gibbs_branches(model: MeanFieldModel, h_values) -> BranchCurves:
    """Both restricted Gibbs branches, each followed by continuation.

    Below the critical coupling there is a single minimum and the two
    returned curves coincide.
    """
    h_values = np.asarray(h_values, dtype=np.float64)
    two_spin_coupling(model)  # validates the model shape
    start = int(np.argmin(np.abs(h_values)))
    h0 = h_values[start]
    points = self_consistency_solve(
        model, SourceField(h=np.array([h0, -h0]))
    )
    minima = [p for p in points if p.kind == "minimum" and p.converged]
    if not minima:
        raise NumericDomainError("no mean-field minimum found on the slice")

    bistable = len(minima) > 1
    shape = h_values.shape
    curves = {
        +1: (np.full(shape, np.nan), np.full(shape, np.nan)),
        -1: (np.full(shape, np.nan), np.full(shape, np.nan)),
    }
    for sign in (+1, -1):
        candidates = [
            p for p in minima if not bistable or sign * (p.m[0] - p.m[1]) > 0
        ]
        best = min(candidates, key=lambda p: p.value)
        g_out, m_out = curves[sign]
        _continue_branch(
            model, h_values, start, best.m, sign, bistable, g_out, m_out
        )

    return BranchCurves(
        h=h_values,
        gibbs_plus=curves[+1][0],
        gibbs_minus=curves[-1][0],
        m_plus=curves[+1][1],
        m_minus=curves[-1][1],
    )


@dataclass(frozen=True)
class SaddlePointGibbs:
    """One stationary point of the uncoupling integral and its Gibbs value."""

    eta: float
    eta_star: float
    gibbs_per_replica: float
    kind: str


def saddle_point_gibbs(model: MeanFieldModel, h1: float, h2: float) -> list[SaddlePointGibbs]:
    """Per-replica Gibbs energy of every stationary point at fields (h1, h2).

    The stationary system coincides with the self-consistency equations
    under eta_star = m_1, eta = -m_2; each value equals the restricted
    Gibbs energy A(m) - h1 m1 - h2 m2 of that stationary point.
    """
    j = two_spin_coupling(model)
    t = model.temperature
    field = SourceField(h=np.array([h1, h2], dtype=np.float64))
    points = self_consistency_solve(model, field)
    results = []
    for point in points:
        if not point.converged:
            continue
        m1, m2 = point.m
        eta, eta_star = -m2, m1
        value = (
            j * eta_star * eta
            - t * log_2cosh((j * eta + h1) / t)
            - t * log_2cosh((j * eta_star - h2) / t)
        )
        results.append(
            SaddlePointGibbs(
                eta=float(eta),
                eta_star=float(eta_star),
                gibbs_per_replica=float(value),
                kind=point.kind,
            )
        )
    return results


def two_spin_standard_model(coupling: float, gauge_temperature: float = 1.0):
    """StandardModel for E_std = J sigma_1 sigma_2 in the Boltzmann gauge."""
    pair = CouplingVector.zeros(2).with_component(0b11, -coupling)
    energies = energies_from_couplings(pair)
    counts = {
        i: float(np.exp(-e / gauge_temperature))
        for i, e in enumerate(energies.values)
    }
    return standardize(
        Dataset(n_spins=2, counts=counts, gauge_temperature=gauge_temperature)
    )


def exact_slice_free_energy(coupling: float, temperature: float, m_values,
                            gauge_temperature: float = 1.0) -> np.ndarray:
    """Exact Helmholtz energy of the two-spin pair model along (m, -m).

    Inverts the exact magnetization curve m(h) on the diagonal field slice
    (strictly increasing) and Legendre-transforms the exact Gibbs energy.
    """
    model = two_spin_standard_model(coupling, gauge_temperature)
    ens = Ensemble.standard_state(model, temperature)
    m_values = np.atleast_1d(np.asarray(m_values, dtype=np.float64))
    _check_domain(m_values)

    def m_of(h):
        return magnetizations(ens, SourceField(h=np.array([h, -h])))[0]

    out = np.empty(m_values.shape)
    for i, m in enumerate(m_values):
        if m == 0.0:
            h = 0.0
        else:
            hi = 1.0
            while abs(m_of(np.sign(m) * hi)) < abs(m):
                hi *= 2.0
                if hi > 1e6:
                    raise NumericDomainError(f"cannot reach magnetization {m}")
            lo, hi = (0.0, hi) if m > 0 else (-hi, 0.0)
            h = brentq(lambda v: m_of(v) - m, lo, hi, xtol=1e-14, rtol=8.9e-16)
        field = SourceField(h=np.array([h, -h]))
        g = gibbs_energy(ens, field)
        mm = magnetizations(ens, field)
        out[i] = g + h * (mm[0] - mm[1])
    return out
