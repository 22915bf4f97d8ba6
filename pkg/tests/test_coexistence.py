"""Tests for restricted spectra, phase stability, and the tilted potential."""

import numpy as np
import pytest

from spingen.coexistence import (
    FALSE_LABEL,
    TRUE_LABEL,
    PhasePair,
    Spectrum,
    binomial_block,
    borderline_pair,
    canonical_quantities,
    equilibrium_two_phase,
    gap_criterion_residual,
    merge_spectra,
    microcanonical_curve,
    read_phase_pair_csv,
    solve_coexistence_temperature,
    stability_check,
    tilted_potential,
    write_spectra_csv,
)
from spingen.errors import NumericDomainError


def random_spectrum(rng, label=TRUE_LABEL, max_levels=6, max_log_count=20.0):
    n = int(rng.integers(1, max_levels + 1))
    energies = np.sort(rng.uniform(-5, 5, size=n))
    energies += np.arange(n) * 1e-6  # enforce strict ordering
    log_deg = rng.uniform(0, max_log_count / n, size=n)
    return Spectrum(energies, log_deg, label)


class TestCanonicalQuantities:
    def test_single_level(self):
        spec = Spectrum(np.array([2.5]), np.array([0.0]))
        for t in (0.1, 1.0, 10.0):
            q = canonical_quantities(spec, t)
            assert q.free_energy == pytest.approx(2.5)
            assert q.energy == pytest.approx(2.5)
            assert q.entropy == pytest.approx(0.0, abs=1e-14)
            assert q.heat_capacity == pytest.approx(0.0, abs=1e-14)

    def test_high_temperature_entropy_saturates(self):
        spec = Spectrum(np.array([0.0, 1.0]), np.log([3.0, 5.0]))
        q = canonical_quantities(spec, 1e6)
        assert q.entropy == pytest.approx(np.log(8.0), abs=1e-5)

    def test_two_level_closed_form(self):
        delta = 1.3
        spec = Spectrum(np.array([0.0, delta]), np.array([0.0, 0.0]))
        t = 0.8
        z = 1 + np.exp(-delta / t)
        q = canonical_quantities(spec, t)
        assert q.free_energy == pytest.approx(-t * np.log(z), rel=1e-12)
        p1 = np.exp(-delta / t) / z
        assert q.energy == pytest.approx(delta * p1, rel=1e-12)
        assert q.heat_capacity == pytest.approx(
            delta**2 * p1 * (1 - p1) / t**2, rel=1e-10
        )

    def test_extensive_spectrum_stays_finite(self):
        block = binomial_block(64, 1.0, 0.0, TRUE_LABEL)
        q = canonical_quantities(block, 0.01)  # deep Boltzmann suppression
        assert np.isfinite(q.free_energy)
        assert q.energy == pytest.approx(0.0, abs=1e-20)


class TestStability:
    def test_identical_spectra_coexist_at_all_temperatures(self):
        spec = Spectrum(np.array([0.0, 1.0]), np.log([2.0, 4.0]))
        pair = PhasePair(spec, Spectrum(spec.energies, spec.log_degeneracies, FALSE_LABEL), n_spins=4)
        for t in (0.3, 1.0, 5.0):
            assert stability_check(pair, t).state == "coexistence"

    def test_shifted_false_block_is_unstable(self):
        pair, _ = borderline_pair(n_spins=16)
        raised = PhasePair(
            pair.true_states, pair.false_states.shifted(10.0 * 16), 16
        )
        result = stability_check(raised, 1.0)
        assert result.state == "stable_true"
        assert result.log_weight_ratio < 0

    @pytest.mark.parametrize("seed", range(20))
    def test_equivalence_of_criteria(self, seed):
        rng = np.random.default_rng(seed)
        pair = PhasePair(
            random_spectrum(rng, TRUE_LABEL),
            random_spectrum(rng, FALSE_LABEL),
            n_spins=40,
        )
        for t in rng.uniform(0.2, 5.0, size=5):
            result = stability_check(pair, float(t))
            if result.state == "stable_true":
                assert result.log_weight_ratio <= 0
                assert result.free_energy_true <= result.free_energy_false
            elif result.state == "stable_false":
                assert result.log_weight_ratio >= 0
                assert result.free_energy_true >= result.free_energy_false


class TestGapCriterion:
    def test_borderline_residual_is_zero(self):
        pair, _ = borderline_pair(n_spins=64)
        assert gap_criterion_residual(pair, 1.0) == pytest.approx(0.0, abs=1e-9)

    def test_single_level_false_block_closed_form(self):
        # tiny true set, all-degenerate false block at one energy:
        # residual = dE/T - [ln(2^N - M0) - S_T]
        n = 30
        true_block = binomial_block(2, 0.5, 0.0, TRUE_LABEL)  # 4 states
        gap_energy = 40.0
        log_false = np.log(2.0**n - 4)
        false_block = Spectrum(np.array([gap_energy]), np.array([log_false]), FALSE_LABEL)
        pair = PhasePair(true_block, false_block, n_spins=n)
        q_true = canonical_quantities(true_block, 1.0)
        expected = (gap_energy - q_true.energy) / 1.0 - (log_false - q_true.entropy)
        assert gap_criterion_residual(pair, 1.0) == pytest.approx(expected, rel=1e-12)
        # with M0 << 2^N the entropy difference is close to N ln 2
        assert log_false - q_true.entropy == pytest.approx(n * np.log(2), rel=0.1)

    def test_false_block_below_true_is_detected(self):
        true_block = binomial_block(4, 1.0, 10.0, TRUE_LABEL)
        false_block = binomial_block(6, 1.0, -20.0, FALSE_LABEL)
        pair = PhasePair(true_block, false_block, n_spins=10)
        assert gap_criterion_residual(pair, 1.0) < 0
        assert stability_check(pair, 1.0).state == "stable_false"


class TestCoexistenceTemperature:
    def test_borderline_construction_gives_gauge_temperature(self):
        pair, meta = borderline_pair(n_spins=64)
        t0 = solve_coexistence_temperature(pair)
        assert t0 == pytest.approx(1.0, abs=1e-6)
        assert meta["false_offset"] > 0

    def test_wider_gap_raises_t0(self):
        pair, _ = borderline_pair(n_spins=64)
        base = canonical_quantities(pair.true_states, 1.0)
        gap = canonical_quantities(pair.false_states, 1.0).energy - base.energy
        widened = PhasePair(pair.true_states, pair.false_states.shifted(gap), 64)
        t0 = solve_coexistence_temperature(widened)
        assert t0 is not None and t0 > 1.0

    def test_latent_heat_identity(self):
        pair, _ = borderline_pair(n_spins=64)
        t0 = solve_coexistence_temperature(pair)
        q_true = canonical_quantities(pair.true_states, t0)
        q_false = canonical_quantities(pair.false_states, t0)
        latent = q_false.energy - q_true.energy
        assert latent > 0
        assert latent == pytest.approx(
            t0 * (q_false.entropy - q_true.entropy), abs=1e-9
        )

    def test_no_transition_returns_none(self):
        spec = Spectrum(np.array([0.0]), np.array([0.0]), TRUE_LABEL)
        other = Spectrum(np.array([1.0]), np.array([0.0]), FALSE_LABEL)
        pair = PhasePair(spec, other, n_spins=4)
        # single levels with zero entropy never cross
        assert solve_coexistence_temperature(pair) is None


class TestMicrocanonicalCurve:
    def test_entropy_increases_with_energy(self):
        block = binomial_block(32, 1.0, 0.0, TRUE_LABEL)
        _, energies, entropies = microcanonical_curve(block, (0.05, 50.0), 50)
        assert np.all(np.diff(energies) > 0)
        assert np.all(np.diff(entropies) > 0)

    def test_concavity_for_single_block(self):
        block = binomial_block(32, 1.0, 0.0, TRUE_LABEL)
        _, energies, entropies = microcanonical_curve(block, (0.05, 50.0), 50)
        slopes = np.diff(entropies) / np.diff(energies)
        assert np.all(np.diff(slopes) < 1e-10)


class TestTiltedPotential:
    def test_single_phase_minimum_depth_is_free_energy(self):
        # canonical energies of this block live in (0, 16); keep the grid inside
        block = binomial_block(32, 1.0, 0.0, TRUE_LABEL)
        t = 1.1
        grid = np.linspace(2.0, 15.0, 200)
        tilted = tilted_potential(block, t, grid)
        q = canonical_quantities(block, t)
        assert tilted.minimum == pytest.approx(q.free_energy, abs=1e-8)
        assert tilted.minimizer == pytest.approx(q.energy, abs=1e-6)
        # gridded curve sits above the polished minimum
        assert np.all(tilted.values >= tilted.minimum - 1e-9)

    def test_tangency_of_entropy_slope(self):
        block = binomial_block(32, 1.0, 0.0, TRUE_LABEL)
        t = 1.3
        grid = np.linspace(5.0, 15.0, 400)
        tilted = tilted_potential(block, t, grid)
        # finite-difference dS/dE at the minimizer equals 1/T
        step = 0.05
        e0 = tilted.minimizer
        def entropy_at(e):
            local = tilted_potential(block, t, np.array([e]))
            return (e - local.values[0]) / t
        slope = (entropy_at(e0 + step) - entropy_at(e0 - step)) / (2 * step)
        assert slope == pytest.approx(1.0 / t, abs=5e-4)

    def test_depths_order_swaps_across_t0(self):
        pair, _ = borderline_pair(n_spins=64)
        t0 = solve_coexistence_temperature(pair)
        for t, deeper in ((0.9 * t0, "true"), (1.1 * t0, "false")):
            grid_t = canonical_quantities(pair.true_states, t).energy
            grid_f = canonical_quantities(pair.false_states, t).energy
            tilt_true = tilted_potential(pair.true_states, t, np.array([grid_t]))
            tilt_false = tilted_potential(pair.false_states, t, np.array([grid_f]))
            if deeper == "true":
                assert tilt_true.minimum < tilt_false.minimum
            else:
                assert tilt_false.minimum < tilt_true.minimum

    def test_energy_grid_domain_error(self):
        block = binomial_block(8, 1.0, 0.0, TRUE_LABEL)
        with pytest.raises(NumericDomainError):
            tilted_potential(block, 1.0, np.array([-5.0]))


class TestEquilibriumTwoPhase:
    def test_limits_match_restricted_phases(self):
        pair, _ = borderline_pair(n_spins=64)
        curves = equilibrium_two_phase(pair, np.array([0.4, 3.0]))
        # far below T0 equilibrium tracks the true phase
        assert curves.energy_equilibrium[0] == pytest.approx(
            curves.energy_true[0], abs=1e-6
        )
        assert curves.entropy_equilibrium[0] == pytest.approx(
            curves.entropy_true[0], abs=1e-6
        )
        # far above T0 it tracks the false phase
        assert curves.energy_equilibrium[1] == pytest.approx(
            curves.energy_false[1], rel=1e-6
        )

    def test_abrupt_variation_near_t0(self):
        pair, _ = borderline_pair(n_spins=64)
        t0 = solve_coexistence_temperature(pair)
        ts = np.linspace(0.8 * t0, 1.2 * t0, 161)
        curves = equilibrium_two_phase(pair, ts)
        slopes = np.abs(np.diff(curves.energy_equilibrium) / np.diff(ts))
        steepest = ts[np.argmax(slopes)]
        assert abs(steepest - t0) <= 0.05 * t0
        peak_c = ts[np.argmax(curves.heat_capacity_equilibrium)]
        assert abs(peak_c - t0) <= 0.02 * t0

    def test_double_tangent_construction(self):
        # the line through the two gauge-temperature tangent points has
        # slope 1/T_gauge and supports both restricted curves from above
        pair, _ = borderline_pair(n_spins=64)
        t_gauge = 1.0
        q_true = canonical_quantities(pair.true_states, t_gauge)
        q_false = canonical_quantities(pair.false_states, t_gauge)
        slope = (q_false.entropy - q_true.entropy) / (q_false.energy - q_true.energy)
        assert slope == pytest.approx(1.0 / t_gauge, rel=1e-9)

        def tangent(e):
            return q_true.entropy + slope * (e - q_true.energy)

        for spec in (pair.true_states, pair.false_states):
            for t in np.geomspace(0.3, 4.0, 200):
                q = canonical_quantities(spec, t)
                assert q.entropy <= tangent(q.energy) + 1e-9

    def test_equilibrium_entropy_hugs_tangent_inside_gap(self):
        # the canonical two-phase mixture can exceed the tangent by at most
        # the ln 2 mixing term (attained at equal weights); per spin that
        # excess is already small at N = 64
        pair, _ = borderline_pair(n_spins=64)
        t_gauge = 1.0
        q_true = canonical_quantities(pair.true_states, t_gauge)
        q_false = canonical_quantities(pair.false_states, t_gauge)
        slope = (q_false.entropy - q_true.entropy) / (q_false.energy - q_true.energy)
        merged = pair.merged()
        max_excess = -np.inf
        for t in np.geomspace(0.5, 2.0, 400):
            q = canonical_quantities(merged, t)
            if q_true.energy <= q.energy <= q_false.energy:
                tangent = q_true.entropy + slope * (q.energy - q_true.energy)
                max_excess = max(max_excess, q.entropy - tangent)
        assert max_excess <= np.log(2.0) + 1e-9
        assert max_excess / pair.n_spins < 0.012


def test_spectra_csv_round_trip(tmp_path):
    pair, _ = borderline_pair(n_spins=16)
    path = tmp_path / "blocks.csv"
    write_spectra_csv(path, [pair.true_states, pair.false_states])
    loaded = read_phase_pair_csv(path, n_spins=16)
    assert np.array_equal(loaded.true_states.energies, pair.true_states.energies)
    assert np.array_equal(
        loaded.false_states.log_degeneracies, pair.false_states.log_degeneracies
    )


def test_merge_spectra_combines_coincident_levels():
    a = Spectrum(np.array([0.0, 1.0]), np.log([2.0, 3.0]))
    b = Spectrum(np.array([1.0, 2.0]), np.log([5.0, 7.0]), FALSE_LABEL)
    merged = merge_spectra(a, b)
    assert np.allclose(merged.energies, [0.0, 1.0, 2.0])
    assert np.allclose(np.exp(merged.log_degeneracies), [2.0, 8.0, 7.0])


def test_phase_pair_rejects_overfull_spectra():
    a = Spectrum(np.array([0.0]), np.array([10.0]))
    b = Spectrum(np.array([1.0]), np.array([10.0]), FALSE_LABEL)
    with pytest.raises(ValueError):
        PhasePair(a, b, n_spins=4)
