import json
import math

import numpy as np
import pytest

from cwss.errors import ConfigurationError, DimensionError
from cwss.harness import (
    ExperimentConfig,
    aggregate,
    config_from_dict,
    config_to_dict,
    default_config,
    export_report,
    load_config,
    run_monte_carlo,
    run_trial,
    save_config,
)
from cwss.signal import BandSpec, SpectrumProfile, default_profile
from cwss.solver import SolverOptions


def small_profile(snr_db=13.0, noise_hi=5.0):
    """A 64-bin profile with two occupied bands, cheap enough for many trials."""
    return SpectrumProfile(
        grid_size=64,
        freq_span=(0.0, 500e6),
        bands=(
            BandSpec(60e6, 120e6, (100.0, 140.0)),
            BandSpec(300e6, 360e6, (110.0, 150.0)),
        ),
        noise_floor_range=(0.0, noise_hi),
        snr_db=snr_db,
    )


def small_config(**overrides):
    profile = overrides.pop("profile", small_profile())
    defaults = dict(
        profile=profile,
        m=32,
        delta_elem=0.1,
        n_trials=3,
        base_seed=7,
        methods=("lasso", "asd"),
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


def exact_sparse_profile():
    """Zero noise floor makes the ground truth exactly sparse."""
    return SpectrumProfile(
        grid_size=64,
        freq_span=(0.0, 500e6),
        bands=(BandSpec(100e6, 140e6, (80.0, 120.0)),),
        noise_floor_range=(0.0, 0.0),
        snr_db=math.inf,
    )


class TestConfig:
    def test_oversized_m_rejected(self):
        with pytest.raises(DimensionError):
            ExperimentConfig(profile=small_profile(), m=65)

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigurationError):
            small_config(methods=("omp",))

    def test_delta_solver_defaults_to_elem(self):
        cfg = small_config(delta_elem=0.4)
        assert cfg.effective_delta_solver == 0.4
        assert small_config(delta_elem=0.4, delta_solver=0.05).effective_delta_solver == 0.05

    def test_round_trip_file(self, tmp_path):
        cfg = small_config()
        path = tmp_path / "config.json"
        save_config(cfg, path)
        loaded = load_config(path)
        assert config_to_dict(loaded) == config_to_dict(cfg)

    def test_default_config_is_half_nyquist(self):
        cfg = default_config()
        assert cfg.profile.grid_size == 512
        assert cfg.m == 256
        assert cfg.delta_elem == 0.7
        assert cfg.mu_factor == 0.1


class TestRunTrial:
    def test_noiseless_bp_recovers_exact_sparse_truth(self):
        cfg = ExperimentConfig(
            profile=exact_sparse_profile(),
            m=32,
            delta_elem=0.0,
            methods=("bp",),
            n_trials=1,
        )
        trial = run_trial(cfg, seed=3)
        res = trial.recoveries["bp"]
        assert res.converged
        err = np.linalg.norm(res.r_hat - trial.spectrum.r) / np.linalg.norm(trial.spectrum.r)
        assert err < 1e-3

    def test_determinism(self):
        cfg = small_config()
        a = run_trial(cfg, seed=9)
        b = run_trial(cfg, seed=9)
        assert np.array_equal(a.spectrum.r, b.spectrum.r)
        for method in cfg.methods:
            assert np.array_equal(a.recoveries[method].r_hat, b.recoveries[method].r_hat)
        assert a.input_digests == b.input_digests

    def test_energies_normalized_per_method(self):
        cfg = small_config()
        trial = run_trial(cfg, seed=11)
        for method in cfg.methods:
            assert trial.report.energies[method].sum() == pytest.approx(1.0, abs=1e-10)

    def test_shared_draw_fairness(self):
        trial = run_trial(small_config(), seed=12)
        digests = set(trial.input_digests.values())
        assert len(digests) == 1


class TestMonteCarlo:
    def test_single_trial_means_equal_trial(self):
        cfg = small_config(n_trials=1)
        report = run_monte_carlo(cfg)
        trial = run_trial(cfg, cfg.base_seed)
        for method in cfg.methods:
            assert np.allclose(report.mean_energies[method], trial.report.energies[method])
            assert report.std_energies[method] == pytest.approx(0.0, abs=1e-15)

    def test_parallel_matches_serial_bitwise(self):
        cfg = small_config(n_trials=4)
        serial = run_monte_carlo(cfg, n_jobs=1)
        parallel = run_monte_carlo(cfg, n_jobs=2)
        assert serial.deterministic_payload() == parallel.deterministic_payload()

    def test_aggregation_matches_independent_summation(self):
        cfg = small_config(n_trials=4)
        trials = [run_trial(cfg, cfg.base_seed + i) for i in range(cfg.n_trials)]
        report = aggregate(cfg, trials)
        for method in cfg.methods:
            conv = [t for t in trials if t.recoveries[method].converged]
            # independent mean: plain python accumulation
            acc = [0.0] * (report.edges.size - 1)
            for t in conv:
                for i, v in enumerate(t.report.energies[method]):
                    acc[i] += float(v)
            expected = [v / len(conv) for v in acc]
            assert np.allclose(report.mean_energies[method], expected, atol=1e-12)

    def test_nonconverged_trials_flagged(self):
        cfg = small_config(
            n_trials=2,
            solver=SolverOptions(max_iters=3, check_every=1, tol_p=1e-12, tol_d=1e-12, tol_g=1e-12),
        )
        report = run_monte_carlo(cfg)
        assert not report.converged_ok
        assert all(v == 0 for v in report.n_converged.values())

    def test_seeds_are_sequential(self):
        cfg = small_config(n_trials=3, base_seed=40)
        report = run_monte_carlo(cfg)
        assert report.seeds == (40, 41, 42)


class TestExport:
    def test_csv_table_layout(self, tmp_path):
        report = run_monte_carlo(small_config(n_trials=2))
        paths = export_report(report, "csv", tmp_path)
        table = [p for p in paths if p.name == "report.csv"][0]
        lines = table.read_text().strip().splitlines()
        # energies per method plus the ratio row
        assert len(lines) == 4
        assert lines[1].split(",")[0] == "lasso_energy"
        assert lines[2].split(",")[0] == "asd_energy"
        assert lines[3].split(",")[0] == "eer"
        assert len(lines[0].split(",")) == 1 + (report.edges.size - 1)

    def test_json_round_trip_exact(self, tmp_path):
        report = run_monte_carlo(small_config(n_trials=2))
        export_report(report, "json", tmp_path)
        loaded = json.loads((tmp_path / "report.json").read_text())
        assert loaded == report.deterministic_dict()

    def test_unknown_format_rejected(self, tmp_path):
        report = run_monte_carlo(small_config(n_trials=1))
        with pytest.raises(ConfigurationError):
            export_report(report, "xml", tmp_path)

    def test_plot_data_written(self, tmp_path):
        report = run_monte_carlo(small_config(n_trials=1))
        export_report(report, "csv", tmp_path)
        lines = (tmp_path / "plot_spectrum.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 64
        assert lines[0].split(",")[:3] == ["bin", "freq_hz", "truth_mean_magnitude"]

    def test_timing_sidecar_separate(self, tmp_path):
        report = run_monte_carlo(small_config(n_trials=1))
        export_report(report, "json", tmp_path)
        timing = json.loads((tmp_path / "timing.json").read_text())
        assert "mean_wall_time" in timing
        assert "wall" not in json.dumps(report.deterministic_dict())
