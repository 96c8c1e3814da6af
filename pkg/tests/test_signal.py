import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_forward_dft
from cwss.errors import ConfigurationError, UndefinedSnrError
from cwss.signal import (
    BandSpec,
    FrequencySpectrum,
    SpectrumProfile,
    add_awgn,
    default_profile,
    load_profile,
    save_profile,
    spectrum_to_time,
    synthesize_spectrum,
    write_spectrum_csv,
)

MHZ = 1e6


def expected_band_bins(profile, f_start, f_stop):
    """Bin set a band should claim, recomputed from the center rule."""
    width = profile.span_width / profile.grid_size
    centers = profile.freq_span[0] + (np.arange(profile.grid_size) + 0.5) * width
    return set(np.nonzero((centers >= f_start) & (centers < f_stop))[0])


class TestDefaultProfile:
    def test_third_band_placement(self):
        p = default_profile()
        assert p.bands[2].f_start == 300 * MHZ
        assert p.bands[2].psd_range == (130.0, 170.0)

    def test_snr(self):
        assert default_profile().snr_db == 13.0

    def test_noise_floor(self):
        assert default_profile().noise_floor_range == (0.0, 10.0)

    def test_span_and_bands(self):
        p = default_profile()
        assert p.freq_span == (0.0, 500 * MHZ)
        assert p.grid_size == 512
        assert [(b.f_start / MHZ, b.f_stop / MHZ) for b in p.bands] == [
            (30, 70),
            (120, 180),
            (300, 340),
            (420, 460),
        ]

    def test_grid_override(self):
        assert default_profile(256).grid_size == 256


class TestProfileValidation:
    def test_overlapping_bands_rejected(self):
        with pytest.raises(ConfigurationError):
            SpectrumProfile(
                grid_size=64,
                freq_span=(0.0, 100.0),
                bands=(BandSpec(10.0, 50.0, (1, 2)), BandSpec(40.0, 60.0, (1, 2))),
                noise_floor_range=(0.0, 1.0),
                snr_db=10.0,
            )

    def test_band_outside_span_rejected(self):
        with pytest.raises(ConfigurationError):
            SpectrumProfile(
                grid_size=64,
                freq_span=(0.0, 100.0),
                bands=(BandSpec(90.0, 120.0, (1, 2)),),
                noise_floor_range=(0.0, 1.0),
                snr_db=10.0,
            )

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ConfigurationError):
            SpectrumProfile(
                grid_size=100,
                freq_span=(0.0, 100.0),
                bands=(),
                noise_floor_range=(0.0, 1.0),
                snr_db=10.0,
            )

    def test_negative_psd_range_rejected(self):
        with pytest.raises(ConfigurationError):
            BandSpec(0.0, 1.0, (-1.0, 2.0))

    def test_reversed_band_rejected(self):
        with pytest.raises(ConfigurationError):
            BandSpec(5.0, 2.0, (1.0, 2.0))


class TestSynthesize:
    def test_occupancy_matches_band_list(self):
        p = default_profile()
        spec = synthesize_spectrum(p, rng_seed=7)
        expected = set()
        for b in p.bands:
            expected |= expected_band_bins(p, b.f_start, b.f_stop)
        assert set(np.nonzero(spec.occupancy)[0]) == expected

    def test_empty_band_list(self):
        p = SpectrumProfile(
            grid_size=64,
            freq_span=(0.0, 100.0),
            bands=(),
            noise_floor_range=(0.0, 10.0),
            snr_db=13.0,
        )
        spec = synthesize_spectrum(p, rng_seed=3)
        assert not spec.occupancy.any()
        mags = np.abs(spec.r)
        assert np.all(mags >= 0.0) and np.all(mags <= 10.0)

    def test_determinism(self):
        p = default_profile()
        a = synthesize_spectrum(p, rng_seed=11)
        b = synthesize_spectrum(p, rng_seed=11)
        assert np.array_equal(a.r, b.r)
        assert np.array_equal(a.occupancy, b.occupancy)

    @given(seed=st.integers(0, 2**31 - 1))
    def test_amplitudes_in_declared_ranges(self, seed):
        p = default_profile(128)
        spec = synthesize_spectrum(p, rng_seed=seed)
        mags = np.abs(spec.r)
        idx = p.band_index_per_bin()
        for i, b in enumerate(p.bands):
            sel = idx == i
            assert np.all(mags[sel] >= b.psd_range[0])
            assert np.all(mags[sel] <= b.psd_range[1])
        floor = idx < 0
        assert np.all(mags[floor] >= p.noise_floor_range[0])
        assert np.all(mags[floor] <= p.noise_floor_range[1])

    def test_occupancy_independent_of_seed(self):
        p = default_profile(128)
        a = synthesize_spectrum(p, rng_seed=1)
        b = synthesize_spectrum(p, rng_seed=99)
        assert np.array_equal(a.occupancy, b.occupancy)

    def test_frozen_phase_policy_shares_phases(self):
        import dataclasses

        p = dataclasses.replace(default_profile(64), phase_seed_policy="frozen")
        a = synthesize_spectrum(p, rng_seed=1)
        b = synthesize_spectrum(p, rng_seed=2)
        assert not np.array_equal(np.abs(a.r), np.abs(b.r))
        assert np.allclose(np.angle(a.r), np.angle(b.r))


class TestTransforms:
    def test_impulse(self):
        n = 16
        r = np.zeros(n, dtype=complex)
        r[0] = 1.0
        spec = FrequencySpectrum(r=r, occupancy=np.zeros(n, bool))
        x = spectrum_to_time(spec).x
        assert np.allclose(x, np.full(n, 1 / math.sqrt(n)), atol=1e-14)

    def test_zero(self):
        n = 8
        spec = FrequencySpectrum(r=np.zeros(n, complex), occupancy=np.zeros(n, bool))
        assert np.all(spectrum_to_time(spec).x == 0)

    def test_round_trip_against_dense_dft(self):
        n = 512
        rng = np.random.default_rng(0)
        r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        spec = FrequencySpectrum(r=r, occupancy=np.zeros(n, bool))
        x = spectrum_to_time(spec).x
        back = dense_forward_dft(n) @ x
        assert np.linalg.norm(back - r) / np.linalg.norm(r) < 1e-10

    @given(seed=st.integers(0, 2**31 - 1))
    def test_parseval(self, seed):
        rng = np.random.default_rng(seed)
        n = 64
        r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        spec = FrequencySpectrum(r=r, occupancy=np.zeros(n, bool))
        x = spectrum_to_time(spec).x
        assert abs(np.linalg.norm(x) - np.linalg.norm(r)) <= 1e-10 * np.linalg.norm(r)


class TestAwgn:
    def test_infinite_snr_passthrough(self):
        ts = spectrum_to_time(synthesize_spectrum(default_profile(64), 0))
        out = add_awgn(ts, math.inf, rng_seed=5)
        assert np.array_equal(out.x, ts.x)

    def test_zero_signal_rejected(self):
        from cwss.signal import TimeSignal

        with pytest.raises(UndefinedSnrError):
            add_awgn(TimeSignal(np.zeros(8, complex), 1.0), 13.0, 0)

    def test_determinism(self):
        ts = spectrum_to_time(synthesize_spectrum(default_profile(64), 0))
        a = add_awgn(ts, 13.0, rng_seed=42)
        b = add_awgn(ts, 13.0, rng_seed=42)
        assert np.array_equal(a.x, b.x)

    def test_monte_carlo_noise_energy(self):
        # Monte Carlo estimate of the injected noise energy at 13 dB against
        # a unit-energy signal: expectation is 10**-1.3 exactly.
        from cwss.signal import TimeSignal

        n = 8
        x = np.full(n, 1 / math.sqrt(n), dtype=complex)
        ts = TimeSignal(x, 1.0)
        total = 0.0
        n_seeds = 10_000
        for seed in range(n_seeds):
            noisy = add_awgn(ts, 13.0, rng_seed=seed)
            diff = noisy.x - x
            total += float(np.vdot(diff, diff).real)
        mean_energy = total / n_seeds
        expected = 10.0 ** (-1.3)
        assert abs(mean_energy - expected) <= 0.05 * expected


class TestIo:
    def test_profile_round_trip(self, tmp_path):
        p = default_profile()
        path = tmp_path / "profile.json"
        save_profile(p, path)
        assert load_profile(path) == p

    def test_missing_profile(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_profile(tmp_path / "nope.json")

    def test_spectrum_csv(self, tmp_path):
        p = default_profile(64)
        spec = synthesize_spectrum(p, 1)
        path = tmp_path / "spec.csv"
        write_spectrum_csv(spec, path, f_start=p.freq_span[0])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "bin_index,freq_hz,re,im,magnitude,occupancy"
        assert len(lines) == 65
        first = lines[1].split(",")
        assert int(first[0]) == 0
        assert float(first[4]) == pytest.approx(abs(spec.r[0]))
