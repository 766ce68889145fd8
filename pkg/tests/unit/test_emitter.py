"""Tests for Purcell estimators, spectra and decay traces in ringqed/emitter.py."""

import numpy as np
import pytest

from ringqed.emitter import (
    EmitterParams,
    PurcellMethod,
    dwf_from_spectrum,
    enhancement_vs_detuning,
    pl_spectrum,
    purcell_from_lifetime_ratio,
    purcell_from_reference_lifetime,
    purcell_vs_detuning,
    rate_off,
    rate_on,
    simulate_decay_trace,
    zpl_output_enhancement,
)
from ringqed.errors import SimulationError, ValidationError


@pytest.fixture
def pl4():
    return EmitterParams.from_off_resonance(15.85, 0.031, tau_0=14.94)


class TestEmitterParams:

    def test_from_off_resonance_round_trip(self, pl4):
        assert pl4.tau_off == pytest.approx(15.85)
        assert pl4.xi_zpl == pytest.approx(0.031)

    def test_rates(self, pl4):
        assert rate_off(pl4) == pytest.approx(1 / 15.85)
        assert rate_on(pl4, 0.0) == pytest.approx(rate_off(pl4))
        assert rate_on(pl4, 5.23) > rate_off(pl4)

    def test_negative_purcell_rejected(self, pl4):
        with pytest.raises(ValidationError):
            rate_on(pl4, -0.1)

    @pytest.mark.parametrize("xi", [0.0, 1.0, 1.5])
    def test_xi_outside_unit_interval_rejected(self, xi):
        with pytest.raises(ValidationError):
            EmitterParams.from_off_resonance(15.85, xi)

    def test_nonpositive_lifetime_rejected(self):
        with pytest.raises(ValidationError):
            EmitterParams(tau_zpl=0.0, tau_psb=16.0)


class TestPurcellEstimators:

    def test_lifetime_ratio_reference_values(self):
        result = purcell_from_lifetime_ratio(15.85, 13.64, 0.031)
        assert result.f == pytest.approx(5.2265, abs=1e-3)
        assert result.method is PurcellMethod.LIFETIME_RATIO
        assert result.warnings == ()

    def test_reference_lifetime_reference_values(self):
        result = purcell_from_reference_lifetime(14.94, 0.031, 13.64, 15.85)
        assert result.f == pytest.approx(4.927, abs=1e-3)
        assert result.method is PurcellMethod.REFERENCE_LIFETIME

    def test_theoretical_branching_ratio(self):
        assert purcell_from_lifetime_ratio(15.85, 13.64, 0.038).f == pytest.approx(4.264, abs=1e-3)

    def test_estimators_agree_when_film_equals_off_resonance(self):
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            tau_off = rng.uniform(1.0, 100.0)
            tau_on = rng.uniform(0.1, 1.0) * tau_off
            xi = rng.uniform(0.01, 0.99)
            a = purcell_from_lifetime_ratio(tau_off, tau_on, xi).f
            b = purcell_from_reference_lifetime(tau_off, xi, tau_on, tau_off).f
            assert a == pytest.approx(b, rel=1e-9, abs=1e-9)

    def test_longer_on_lifetime_gives_negative_warning(self):
        result = purcell_from_lifetime_ratio(15.0, 15.5, 0.031)
        assert result.f < 0
        assert "negative purcell factor" in result.warnings

    def test_equal_lifetimes_give_zero(self):
        assert purcell_from_lifetime_ratio(15.85, 15.85, 0.031).f == 0.0

    def test_inputs_recorded(self):
        result = purcell_from_reference_lifetime(14.94, 0.031, 13.64, 15.85)
        assert result.inputs == {"tau_0": 14.94, "dwf": 0.031, "tau_on": 13.64, "tau_off": 15.85}

    @pytest.mark.parametrize("args", [(0.0, 13.64, 0.031), (15.85, -1.0, 0.031), (15.85, 13.64, 0.0)])
    def test_invalid_inputs_rejected(self, args):
        with pytest.raises(ValidationError):
            purcell_from_lifetime_ratio(*args)

    def test_dwf_of_one_rejected(self):
        with pytest.raises(ValidationError):
            purcell_from_reference_lifetime(14.94, 1.0, 13.64, 15.85)


class TestDebyeWallerFactor:

    def test_flat_spectrum_fraction_is_window_width(self):
        x = np.linspace(0.0, 100.0, 1001)
        assert dwf_from_spectrum(x, np.ones_like(x), (10.0, 30.0)) == pytest.approx(0.2)

    def test_window_edges_interpolated(self):
        x = np.linspace(0.0, 100.0, 11)
        assert dwf_from_spectrum(x, np.ones_like(x), (12.5, 37.5)) == pytest.approx(0.25)

    def test_empty_window_is_zero(self):
        x = np.linspace(0.0, 100.0, 101)
        assert dwf_from_spectrum(x, np.ones_like(x), (40.0, 40.0)) == 0.0

    def test_whole_domain_is_one(self):
        x = np.linspace(0.0, 100.0, 101)
        y = np.exp(-((x - 50) / 10) ** 2)
        assert dwf_from_spectrum(x, y, (0.0, 100.0)) == pytest.approx(1.0)

    def test_baseline_subtracted(self):
        x = np.linspace(0.0, 100.0, 1001)
        y = np.full_like(x, 0.5)
        y[(x >= 40) & (x <= 60)] += 1.0
        assert dwf_from_spectrum(x, y, (39.0, 61.0), baseline=0.5) == pytest.approx(1.0)

    def test_zero_spectrum_is_degenerate(self):
        x = np.linspace(0.0, 100.0, 101)
        with pytest.raises(SimulationError, match="degenerate"):
            dwf_from_spectrum(x, np.zeros_like(x), (10.0, 20.0))

    def test_window_outside_domain_rejected(self):
        x = np.linspace(0.0, 100.0, 101)
        with pytest.raises(ValidationError):
            dwf_from_spectrum(x, np.ones_like(x), (90.0, 110.0))

    def test_unsorted_wavelengths_rejected(self):
        with pytest.raises(ValidationError):
            dwf_from_spectrum([2.0, 1.0, 3.0], [1.0, 1.0, 1.0], (1.0, 2.0))

    def test_simulated_spectrum_recovers_branching_ratio(self, pl4):
        grid = np.arange(1000.0, 1250.0 + 1e-9, 0.05)
        spectrum = pl_spectrum(pl4, grid, 1078.6, 0.5, 1160.0, 20.0)
        assert dwf_from_spectrum(grid, spectrum, (1073.6, 1083.6)) == pytest.approx(0.031, rel=0.05)


class TestPlSpectrum:

    def test_area_split_between_zpl_and_sideband(self, pl4):
        grid = np.arange(900.0, 1400.0, 0.01)
        spectrum = pl_spectrum(pl4, grid, 1078.6, 0.5, 1160.0, 20.0, total_area=100.0)
        assert spectrum.sum() * 0.01 == pytest.approx(100.0, rel=0.01)

    def test_other_lines_add_peaks(self, pl4):
        grid = np.arange(1000.0, 1250.0, 0.05)
        plain = pl_spectrum(pl4, grid, 1078.6, 0.5, 1160.0, 20.0)
        with_lines = pl_spectrum(pl4, grid, 1078.6, 0.5, 1160.0, 20.0, other_lines={"PL6": (1038.0, 0.15)})
        i = int(np.argmin(np.abs(grid - 1038.0)))
        assert with_lines[i] > plain[i]


class TestDetuning:

    def test_purcell_peak_and_half_width(self, zpl_mode):
        half = zpl_mode.tuned_linewidth_nm / 2
        assert purcell_vs_detuning(5.23, zpl_mode, 0.0) == pytest.approx(5.23)
        assert purcell_vs_detuning(5.23, zpl_mode, half) == pytest.approx(5.23 / 2)

    def test_purcell_even_and_decreasing(self, zpl_mode):
        deltas = np.linspace(0.0, 5.0, 51)
        values = [purcell_vs_detuning(5.23, zpl_mode, d) for d in deltas]
        assert all(a > b for a, b in zip(values, values[1:]))
        for d in deltas:
            assert purcell_vs_detuning(5.23, zpl_mode, d) == purcell_vs_detuning(5.23, zpl_mode, -d)

    def test_zpl_output_enhancement_on_resonance(self):
        assert zpl_output_enhancement(5.23, 6.0) == pytest.approx(37.38)
        assert zpl_output_enhancement(0.0, 6.0) == 6.0

    def test_enhancement_vs_detuning_limits(self, zpl_mode):
        assert enhancement_vs_detuning(5.23, 6.0, zpl_mode, 0.0) == pytest.approx(37.38)
        assert enhancement_vs_detuning(5.23, 6.0, zpl_mode, 1e4) == pytest.approx(1.0, abs=1e-4)

    def test_invalid_eta_rejected(self):
        with pytest.raises(ValidationError):
            zpl_output_enhancement(5.23, 0.0)


class TestDecayTrace:

    def test_same_seed_same_histogram(self, pl4):
        a = simulate_decay_trace(pl4, 5.23, 100_000, 500, 100.0, seed=3, background_fraction=0.5)
        b = simulate_decay_trace(pl4, 5.23, 100_000, 500, 100.0, seed=3, background_fraction=0.5)
        np.testing.assert_array_equal(a.counts, b.counts)

    def test_different_seed_different_histogram(self, pl4):
        a = simulate_decay_trace(pl4, 0.0, 100_000, 500, 100.0, seed=3)
        b = simulate_decay_trace(pl4, 0.0, 100_000, 500, 100.0, seed=4)
        assert not np.array_equal(a.counts, b.counts)

    def test_counts_conserved(self, pl4):
        trace = simulate_decay_trace(pl4, 5.23, 50_000, 200, 100.0, seed=1, background_fraction=0.85)
        assert trace.total_counts == 50_000
        assert trace.bin_edges.shape == (201,)
        assert trace.bin_starts[0] == 0.0

    def test_pure_background_is_flat(self, pl4):
        trace = simulate_decay_trace(pl4, 0.0, 200_000, 10, 100.0, seed=2, background_fraction=1.0)
        assert trace.counts.min() > 0.9 * 20_000
        assert trace.counts.max() < 1.1 * 20_000

    def test_purcell_enhancement_shortens_decay(self, pl4):
        off = simulate_decay_trace(pl4, 0.0, 200_000, 100, 100.0, seed=5)
        on = simulate_decay_trace(pl4, 5.23, 200_000, 100, 100.0, seed=5)
        assert on.counts[0] > off.counts[0]

    def test_pile_up_warning(self):
        slow = EmitterParams.from_off_resonance(60.0, 0.031)
        trace = simulate_decay_trace(slow, 0.0, 10_000, 100, 100.0, seed=1)
        assert "pile-up regime" in trace.warnings

    def test_no_warning_for_short_lifetime(self, pl4):
        assert simulate_decay_trace(pl4, 0.0, 10_000, 100, 100.0, seed=1).warnings == ()

    @pytest.mark.parametrize("kwargs", [
        {"total_counts": 0},
        {"n_bins": 0},
        {"rep_period": 0.0},
        {"background_fraction": 1.5},
    ])
    def test_invalid_arguments_rejected(self, pl4, kwargs):
        args = {"total_counts": 1000, "n_bins": 10, "rep_period": 100.0, "seed": 1}
        args.update(kwargs)
        with pytest.raises(ValidationError):
            simulate_decay_trace(pl4, 0.0, **args)
