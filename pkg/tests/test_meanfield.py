"""Tests for the mean-field landscape, solver, and two-spin closed forms."""

import numpy as np
import pytest

from spingen.errors import NumericDomainError
from spingen.meanfield import (
    BranchCurves,
    MeanFieldModel,
    critical_magnetization,
    exact_slice_free_energy,
    log_2cosh,
    mf_free_energy,
    mf_gradient,
    mixing_entropy,
    multilinear_energy,
    multilinear_gradient,
    phase_boundary,
    restricted_gibbs_branches,
    saddle_point_gibbs,
    self_consistency_solve,
    slice_free_energy,
    spinodals,
    two_spin_coupling,
)
from spingen.spinspace import CouplingVector
from spingen.thermo import SourceField


def pair_model(j=1.5, t=1.0):
    couplings = CouplingVector.zeros(2).with_component(0b11, -j)
    return MeanFieldModel(standard_couplings=couplings, temperature=t)


def tanh_fixed_point(j_over_t, tol=1e-14):
    """Independent oracle: damped iteration of m = tanh(j_over_t * m)."""
    m = 0.9
    for _ in range(100_000):
        new = 0.5 * m + 0.5 * np.tanh(j_over_t * m)
        if abs(new - m) < tol:
            return new
        m = new
    raise AssertionError("oracle iteration failed to converge")


class TestFreeEnergySurface:
    def test_pure_mixing_entropy_at_zero_coupling(self):
        model = MeanFieldModel(CouplingVector.zeros(3), temperature=1.4)
        assert mf_free_energy(model, np.zeros(3)) == pytest.approx(
            -1.4 * 3 * np.log(2.0), rel=1e-14
        )

    def test_slice_form_matches_full_surface(self):
        model = pair_model(1.5, 1.0)
        for m in (-0.9, -0.3, 0.0, 0.55, 0.99):
            full = mf_free_energy(model, np.array([m, -m]))
            assert slice_free_energy(model, m)[0] == pytest.approx(full, rel=1e-14)

    def test_slice_closed_form(self):
        model = pair_model(1.5, 1.0)
        m = 0.4
        expected = -1.5 * m * m + 2.0 * float(mixing_entropy(m))
        assert slice_free_energy(model, m)[0] == pytest.approx(expected, rel=1e-14)

    def test_domain_error_at_unit_magnetization(self):
        model = pair_model()
        with pytest.raises(NumericDomainError):
            mf_free_energy(model, np.array([1.0, 0.0]))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        couplings = CouplingVector(values=rng.normal(size=8), n_spins=3)
        model = MeanFieldModel(couplings, temperature=0.9)
        m = rng.uniform(-0.7, 0.7, size=3)
        grad = mf_gradient(model, m)
        step = 1e-6
        for a in range(3):
            d = np.zeros(3)
            d[a] = step
            fd = (mf_free_energy(model, m + d) - mf_free_energy(model, m - d)) / (
                2 * step
            )
            assert grad[a] == pytest.approx(fd, rel=1e-7, abs=1e-9)

    def test_multilinear_evaluation_against_direct_sum(self):
        rng = np.random.default_rng(8)
        couplings = CouplingVector(values=rng.normal(size=16), n_spins=4)
        m = rng.uniform(-1, 1, size=4)
        total = 0.0
        for k in range(16):
            prod = 1.0
            for site in range(4):
                if k >> site & 1:
                    prod *= m[site]
            total -= couplings.values[k] * prod
        assert multilinear_energy(couplings, m) == pytest.approx(total, rel=1e-12)
        grad = multilinear_gradient(couplings, m)
        step = 1e-7
        for a in range(4):
            d = np.zeros(4)
            d[a] = step
            fd = (
                multilinear_energy(couplings, m + d)
                - multilinear_energy(couplings, m - d)
            ) / (2 * step)
            assert grad[a] == pytest.approx(fd, rel=1e-6, abs=1e-9)


class TestSelfConsistency:
    def test_supercritical_three_solutions(self):
        model = pair_model(1.5, 1.0)
        points = self_consistency_solve(model)
        assert len(points) == 3
        minima = [p for p in points if p.kind == "minimum"]
        saddles = [p for p in points if p.kind == "saddle"]
        assert len(minima) == 2 and len(saddles) == 1
        m_star = tanh_fixed_point(1.5)
        values = sorted(p.m[0] for p in minima)
        assert values[0] == pytest.approx(-m_star, abs=1e-9)
        assert values[1] == pytest.approx(+m_star, abs=1e-9)
        for p in minima:
            assert p.m[0] == pytest.approx(-p.m[1], abs=1e-9)
            assert p.gradient_norm < 1e-9
        assert np.allclose(saddles[0].m, 0.0, atol=1e-10)

    def test_degenerate_minima_at_zero_field(self):
        model = pair_model(1.5, 1.0)
        minima = [
            p for p in self_consistency_solve(model) if p.kind == "minimum"
        ]
        assert abs(minima[0].value - minima[1].value) < 1e-12

    def test_subcritical_unique_solution(self):
        model = pair_model(0.5, 1.0)
        points = self_consistency_solve(model)
        assert len(points) == 1
        assert points[0].kind == "minimum"
        assert np.allclose(points[0].m, 0.0, atol=1e-12)

    def test_strong_field_destroys_bistability(self):
        model = pair_model(1.5, 1.0)
        field = SourceField(h=np.array([2.0, -2.0]))
        points = self_consistency_solve(model, field)
        minima = [p for p in points if p.kind == "minimum"]
        assert len(minima) == 1
        assert minima[0].m[0] > 0.9

    def test_bifurcation_point_location(self):
        # minima count along the slice switches 1 -> 2 at J = T
        t = 1.0
        lo, hi = 0.5, 1.5
        while hi - lo > 5e-4:
            mid = 0.5 * (lo + hi)
            n_minima = len(
                [
                    p
                    for p in self_consistency_solve(pair_model(mid, t))
                    if p.kind == "minimum"
                ]
            )
            if n_minima >= 2:
                hi = mid
            else:
                lo = mid
        assert abs(0.5 * (lo + hi) - t) < 1e-3


class TestClosedForms:
    def test_spinodals_value(self):
        result = spinodals(pair_model(1.5, 1.0))
        assert result is not None
        lo, hi = result
        assert hi == pytest.approx(np.sqrt(1.0 / 3.0), abs=1e-9)
        assert lo == pytest.approx(-np.sqrt(1.0 / 3.0), abs=1e-9)
        lo2, hi2 = spinodals(pair_model(2.0, 1.0))
        assert hi2 == pytest.approx(np.sqrt(0.5), abs=1e-9)

    def test_spinodals_merge_at_critical_coupling(self):
        assert spinodals(pair_model(1.0, 1.0)) is None
        assert spinodals(pair_model(0.99999, 1.0)) is None
        lo, hi = spinodals(pair_model(1.0 + 1e-9, 1.0))
        assert hi < 1e-4

    def test_phase_boundary_values(self):
        pb = phase_boundary(pair_model(1.5, 1.0))
        assert pb.order_parameter == pytest.approx(np.sqrt(1 - 1 / 1.5), rel=1e-12)
        assert pb.critical_field == pytest.approx(1.52451, abs=1e-4)
        assert pb.endpoints == (
            (-pb.critical_field, -pb.critical_field),
            (pb.critical_field, pb.critical_field),
        )
        pb2 = phase_boundary(pair_model(2.0, 1.0))
        m0 = np.sqrt(0.5)
        assert pb2.critical_field == pytest.approx(2 * m0 + np.arctanh(m0), rel=1e-12)

    def test_phase_boundary_shrinks_to_point_at_criticality(self):
        assert phase_boundary(pair_model(1.0, 1.0)) is None
        pb = phase_boundary(pair_model(1.0 + 1e-10, 1.0))
        assert pb.critical_field < 1e-4

    def test_susceptibility_negative_between_spinodals(self):
        # dh/dm = T/(1-m^2) - J < 0 strictly between the spinodals
        j, t = 1.5, 1.0
        lo, hi = spinodals(pair_model(j, t))
        for m in np.linspace(lo + 1e-6, hi - 1e-6, 41):
            assert t / (1 - m * m) - j < 0

    def test_two_spin_coupling_validation(self):
        with pytest.raises(ValueError):
            two_spin_coupling(MeanFieldModel(CouplingVector.zeros(3), 1.0))
        bad = CouplingVector.zeros(2).with_component(0b01, 0.3)
        with pytest.raises(ValueError):
            two_spin_coupling(MeanFieldModel(bad, 1.0))

    def test_critical_magnetization(self):
        assert critical_magnetization(1.5, 1.0) == pytest.approx(np.sqrt(1 / 3))
        assert critical_magnetization(0.8, 1.0) is None


class TestBranches:
    def test_degenerate_at_zero_field(self):
        model = pair_model(1.5, 1.0)
        curves = restricted_gibbs_branches(model, np.array([0.0]))
        assert curves.gibbs_plus[0] == pytest.approx(curves.gibbs_minus[0], abs=1e-12)

    def test_branches_terminate_at_spinodal_field(self):
        model = pair_model(1.5, 1.0)
        h = np.linspace(-0.5, 0.5, 101)
        curves = restricted_gibbs_branches(model, h)
        # + branch survives for h > h_sp = atanh(m_sp) - J m_sp
        m_sp = np.sqrt(1 - 1 / 1.5)
        h_sp = np.arctanh(m_sp) - 1.5 * m_sp  # = -0.20755
        plus_alive = h[~np.isnan(curves.gibbs_plus)]
        assert plus_alive.min() == pytest.approx(h_sp, abs=0.02)
        assert plus_alive.max() == pytest.approx(h.max())
        minus_alive = h[~np.isnan(curves.gibbs_minus)]
        assert minus_alive.max() == pytest.approx(-h_sp, abs=0.02)
        # large field: only one branch survives
        assert np.isnan(curves.gibbs_minus[-1])
        assert not np.isnan(curves.gibbs_plus[-1])

    def test_stable_branch_is_lower_for_positive_field(self):
        model = pair_model(1.5, 1.0)
        h = np.array([0.05, 0.1, 0.15])
        curves = restricted_gibbs_branches(model, h)
        assert np.all(curves.gibbs_plus < curves.gibbs_minus)

    def test_subcritical_single_curve(self):
        model = pair_model(0.5, 1.0)
        h = np.linspace(-1, 1, 21)
        curves = restricted_gibbs_branches(model, h)
        assert np.allclose(curves.gibbs_plus, curves.gibbs_minus, equal_nan=False)


class TestSaddlePointGibbs:
    def test_log_2cosh_identity(self):
        # ln 2cosh x equals the mixing-entropy form with y = tanh x
        rng = np.random.default_rng(9)
        for x in rng.normal(scale=3.0, size=200):
            y = np.tanh(x)
            expected = -float(mixing_entropy(y)) + x * y
            assert log_2cosh(x) == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_matches_restricted_gibbs_at_zero_field(self):
        model = pair_model(1.5, 1.0)
        values = saddle_point_gibbs(model, 0.0, 0.0)
        minima = [v for v in values if v.kind == "minimum"]
        assert len(minima) == 2
        curves = restricted_gibbs_branches(model, np.array([0.0]))
        for v in minima:
            assert v.gibbs_per_replica == pytest.approx(
                curves.gibbs_plus[0], abs=1e-9
            )

    def test_subcritical_unique_saddle_equals_gibbs(self):
        model = pair_model(0.5, 1.0)
        values = saddle_point_gibbs(model, 0.3, -0.3)
        assert len(values) == 1
        curves = restricted_gibbs_branches(model, np.array([0.3]))
        assert values[0].gibbs_per_replica == pytest.approx(
            curves.gibbs_plus[0], abs=1e-9
        )

    @pytest.mark.parametrize("j,t", [(1.5, 1.0), (1.5, 0.8), (0.7, 1.1)])
    def test_legendre_identity_on_field_grid(self, j, t):
        # per-replica saddle value == A(m) - h1 m1 - h2 m2 for every
        # stationary point, on a grid of diagonal fields
        model = pair_model(j, t)
        for h in np.linspace(-1.2, 1.2, 25):
            for point in saddle_point_gibbs(model, h, -h):
                m = np.array([point.eta_star, -point.eta])
                restricted = mf_free_energy(model, m) - h * m[0] + h * m[1]
                assert point.gibbs_per_replica == pytest.approx(
                    restricted, abs=1e-9
                )


class TestExactComparison:
    def test_exact_free_energy_is_single_minimum(self):
        # exact A(m) is convex along the slice even where the mean-field
        # surface is bistable
        m = np.linspace(-0.95, 0.95, 39)
        a = exact_slice_free_energy(1.5, 1.0, m)
        second = np.diff(a, 2)
        assert np.all(second > -1e-9)
        assert np.argmin(a) == len(m) // 2

    def test_mean_field_minimum_above_exact_equilibrium(self):
        # Gibbs-inequality corollary: the mean-field value at its minima
        # bounds the exact equilibrium free energy from above
        model = pair_model(1.5, 1.0)
        minima = [
            p.value for p in self_consistency_solve(model) if p.kind == "minimum"
        ]
        exact_equilibrium = exact_slice_free_energy(1.5, 1.0, np.array([0.0]))
        # A_exact(m=0) is the global equilibrium value (h = 0)
        assert min(minima) >= float(exact_equilibrium[0]) - 1e-10

    def test_exact_curve_touches_mean_field_at_zero(self):
        # at m = 0 with J = 0 both descriptions agree exactly
        a = exact_slice_free_energy(1e-12, 1.0, np.array([0.0]))
        assert a[0] == pytest.approx(-np.log(4.0), rel=1e-9)
