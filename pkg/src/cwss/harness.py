"""Seeded Monte Carlo experiment runner.

One trial runs the full pipeline on a single seed: synthesize the spectrum,
convert to time samples, add receiver noise, sub-sample, perturb the ideal
operator, recover with each enabled method against the observed operator,
and score subband energies. Trials use sequential seeds so any one of them
can be rerun in isolation, and aggregation consumes results in seed order so
reports are identical regardless of worker count.

Wall-clock timings are collected but kept out of the deterministic report
payload (and exported to a separate sidecar), since they are the one
quantity that legitimately varies between runs.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .detection import SubbandReport, detect, eer, partition_for, subband_energies
from .errors import ConfigurationError, DimensionError
from .measurement import acquire, ideal_matrix, make_selection, perturb
from .recovery import METHODS, RecoveryResult, solve_asd, solve_bp, solve_lasso
from .signal import (
    FrequencySpectrum,
    SpectrumProfile,
    _profile_from_dict,
    _profile_to_dict,
    add_awgn,
    default_profile,
    spectrum_to_time,
    synthesize_spectrum,
)
from .solver import SolverOptions

__all__ = [
    "ExperimentConfig",
    "TrialResult",
    "McReport",
    "run_trial",
    "run_monte_carlo",
    "export_report",
    "load_config",
    "save_config",
    "default_config",
]

MIN_CONVERGED_FRACTION = 0.9


@dataclass(frozen=True)
class ExperimentConfig:
    profile: SpectrumProfile
    m: int
    delta_elem: float = 0.7
    delta_solver: float | None = None
    mu_factor: float = 0.1
    n_trials: int = 100
    base_seed: int = 1
    methods: tuple[str, ...] = ("lasso", "asd")
    detect_threshold: float = 0.05
    perturbation: str = "uniform"
    solver: SolverOptions = field(default_factory=SolverOptions)
    partition_edges: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 1 <= self.m <= self.profile.grid_size:
            raise DimensionError(
                f"measurement count must satisfy 1 <= M <= N, got M={self.m}, N={self.profile.grid_size}"
            )
        if self.n_trials < 1:
            raise ConfigurationError("need at least one trial")
        if self.mu_factor < 0:
            raise ConfigurationError("mu_factor must be non-negative")
        if self.delta_elem < 0:
            raise ConfigurationError("delta_elem must be non-negative")
        if not self.methods:
            raise ConfigurationError("at least one method must be enabled")
        for method in self.methods:
            if method not in METHODS:
                raise ConfigurationError(f"unknown method {method!r}; choose from {METHODS}")

    @property
    def effective_delta_solver(self) -> float:
        return self.delta_elem if self.delta_solver is None else self.delta_solver

    def partition(self) -> tuple[np.ndarray, np.ndarray]:
        edges, mask = partition_for(self.profile)
        if self.partition_edges is not None:
            edges = np.asarray(self.partition_edges, dtype=np.int64)
            if edges.size != mask.size + 1:
                raise ConfigurationError(
                    "partition override must keep the profile's subband count"
                )
        return edges, mask


@dataclass
class TrialResult:
    seed: int
    stage_seeds: tuple[int, ...]
    spectrum: FrequencySpectrum
    recoveries: dict[str, RecoveryResult]
    report: SubbandReport
    input_digests: dict[str, str]


@dataclass
class McReport:
    config: dict
    seeds: tuple[int, ...]
    edges: np.ndarray
    active_mask: np.ndarray
    n_converged: dict[str, int]
    converged_fraction: dict[str, float]
    mean_energies: dict[str, np.ndarray]
    std_energies: dict[str, np.ndarray]
    mean_magnitude: dict[str, np.ndarray]
    truth_mean_magnitude: np.ndarray
    eer_of_means: np.ndarray | None
    mean_trial_eer: np.ndarray | None
    detection_exact_rate: dict[str, float]
    mean_iterations: dict[str, float]
    trial_summaries: list[dict]
    mean_wall_time: dict[str, float]

    @property
    def n_trials(self) -> int:
        return len(self.seeds)

    @property
    def converged_ok(self) -> bool:
        return all(f >= MIN_CONVERGED_FRACTION for f in self.converged_fraction.values())

    def deterministic_dict(self) -> dict:
        """Everything reproducible from (config, seeds); excludes timings."""
        return {
            "config": self.config,
            "seeds": list(self.seeds),
            "edges": self.edges.tolist(),
            "active_mask": self.active_mask.tolist(),
            "n_converged": self.n_converged,
            "converged_fraction": self.converged_fraction,
            "mean_energies": {k: v.tolist() for k, v in self.mean_energies.items()},
            "std_energies": {k: v.tolist() for k, v in self.std_energies.items()},
            "mean_magnitude": {k: v.tolist() for k, v in self.mean_magnitude.items()},
            "truth_mean_magnitude": self.truth_mean_magnitude.tolist(),
            "eer_of_means": None if self.eer_of_means is None else self.eer_of_means.tolist(),
            "mean_trial_eer": None if self.mean_trial_eer is None else self.mean_trial_eer.tolist(),
            "detection_exact_rate": self.detection_exact_rate,
            "mean_iterations": self.mean_iterations,
            "trial_summaries": self.trial_summaries,
        }

    def deterministic_payload(self) -> bytes:
        return json.dumps(self.deterministic_dict(), sort_keys=True).encode()


def default_config(**overrides) -> ExperimentConfig:
    """The stock experiment: half-Nyquist sampling of the default profile."""
    profile = overrides.pop("profile", default_profile())
    m = overrides.pop("m", profile.grid_size // 2)
    return ExperimentConfig(profile=profile, m=m, **overrides)


def _stage_seeds(seed: int) -> tuple[int, ...]:
    # four independent streams per trial: spectrum, noise, selection, perturbation
    state = np.random.SeedSequence(seed).generate_state(4, dtype=np.uint64)
    return tuple(int(v) for v in state)


def run_trial(config: ExperimentConfig, seed: int) -> TrialResult:
    """One deterministic pipeline pass for the given seed."""
    s_spec, s_noise, s_sel, s_pert = _stage_seeds(seed)
    profile = config.profile
    spectrum = synthesize_spectrum(profile, s_spec)
    clean = spectrum_to_time(spectrum)
    noisy = add_awgn(clean, profile.snr_db, s_noise)
    sel = make_selection(profile.grid_size, config.m, s_sel)
    A = ideal_matrix(sel)
    mset = perturb(A, config.delta_elem, s_pert, kind=config.perturbation)
    y = acquire(noisy, sel)

    digest = hashlib.sha256(y.tobytes() + mset.B.tobytes()).hexdigest()
    recoveries: dict[str, RecoveryResult] = {}
    digests: dict[str, str] = {}
    for method in config.methods:
        if method == "bp":
            res = solve_bp(mset.B, y, config.solver)
        elif method == "lasso":
            mu = config.mu_factor * float(np.linalg.norm(y))
            res = solve_lasso(mset.B, y, mu, config.solver)
        else:
            res = solve_asd(mset.B, y, config.effective_delta_solver, config.solver)
        recoveries[method] = res
        digests[method] = digest

    edges, active_mask = config.partition()
    energies = {m: subband_energies(recoveries[m].r_hat, edges) for m in config.methods}
    decisions = {m: detect(energies[m], config.detect_threshold) for m in config.methods}
    ratio = None
    if "asd" in energies and "lasso" in energies:
        ratio = eer(energies["asd"], energies["lasso"], active_mask)
    report = SubbandReport(
        edges=edges,
        active_mask=active_mask,
        energies=energies,
        decisions=decisions,
        eer=ratio,
    )
    return TrialResult(
        seed=seed,
        stage_seeds=(s_spec, s_noise, s_sel, s_pert),
        spectrum=spectrum,
        recoveries=recoveries,
        report=report,
        input_digests=digests,
    )


def _trial_worker(args) -> TrialResult:
    config, seed = args
    return run_trial(config, seed)


def _trial_summary(trial: TrialResult) -> dict:
    out = {"seed": trial.seed, "methods": {}}
    for method, res in trial.recoveries.items():
        out["methods"][method] = {
            "status": res.status,
            "objective": res.objective_value,
            "epigraph_t": res.epigraph_t,
            "iterations": res.iterations,
            "primal_residual": res.primal_residual,
            "dual_residual": res.dual_residual,
            "energies": trial.report.energies[method].tolist(),
            "decisions": trial.report.decisions[method].tolist(),
            "input_digest": trial.input_digests[method],
        }
    if trial.report.eer is not None:
        out["eer"] = trial.report.eer.tolist()
    return out


def aggregate(config: ExperimentConfig, trials: list[TrialResult]) -> McReport:
    """Reduce trial results (already in seed order) into the report."""
    edges, active_mask = config.partition()
    k = edges.size - 1
    n_bins = config.profile.grid_size

    n_conv: dict[str, int] = {}
    frac: dict[str, float] = {}
    mean_e: dict[str, np.ndarray] = {}
    std_e: dict[str, np.ndarray] = {}
    mean_mag: dict[str, np.ndarray] = {}
    det_rate: dict[str, float] = {}
    mean_iters: dict[str, float] = {}
    mean_wall: dict[str, float] = {}

    for method in config.methods:
        conv = [t for t in trials if t.recoveries[method].converged]
        n_conv[method] = len(conv)
        frac[method] = len(conv) / len(trials)
        if conv:
            e = np.stack([t.report.energies[method] for t in conv])
            mean_e[method] = e.mean(axis=0)
            std_e[method] = e.std(axis=0)
            mags = np.stack([np.abs(t.recoveries[method].r_hat) for t in conv])
            mean_mag[method] = mags.mean(axis=0)
            exact = [bool(np.array_equal(t.report.decisions[method], active_mask)) for t in conv]
            det_rate[method] = float(np.mean(exact))
            mean_iters[method] = float(np.mean([t.recoveries[method].iterations for t in conv]))
            mean_wall[method] = float(np.mean([t.recoveries[method].wall_time for t in conv]))
        else:
            mean_e[method] = np.full(k, np.nan)
            std_e[method] = np.full(k, np.nan)
            mean_mag[method] = np.full(n_bins, np.nan)
            det_rate[method] = float("nan")
            mean_iters[method] = float("nan")
            mean_wall[method] = float("nan")

    eer_of_means = None
    mean_trial_eer = None
    if "asd" in config.methods and "lasso" in config.methods:
        if n_conv["asd"] and n_conv["lasso"]:
            eer_of_means = eer(mean_e["asd"], mean_e["lasso"], active_mask)
        both = [
            t
            for t in trials
            if t.recoveries["asd"].converged and t.recoveries["lasso"].converged
        ]
        if both:
            mean_trial_eer = np.stack([t.report.eer for t in both]).mean(axis=0)

    truth_mean = np.stack([np.abs(t.spectrum.r) for t in trials]).mean(axis=0)

    return McReport(
        config=config_to_dict(config),
        seeds=tuple(t.seed for t in trials),
        edges=edges,
        active_mask=active_mask,
        n_converged=n_conv,
        converged_fraction=frac,
        mean_energies=mean_e,
        std_energies=std_e,
        mean_magnitude=mean_mag,
        truth_mean_magnitude=truth_mean,
        eer_of_means=eer_of_means,
        mean_trial_eer=mean_trial_eer,
        detection_exact_rate=det_rate,
        mean_iterations=mean_iters,
        trial_summaries=[_trial_summary(t) for t in trials],
        mean_wall_time=mean_wall,
    )


def run_monte_carlo(config: ExperimentConfig, n_jobs: int = 1) -> McReport:
    """Run the configured number of trials and aggregate in seed order.

    ``n_jobs > 1`` fans trials out to worker processes; results are reduced
    in seed order either way, so the report does not depend on scheduling.
    """
    seeds = [config.base_seed + i for i in range(config.n_trials)]
    if n_jobs <= 1 or len(seeds) == 1:
        trials = [run_trial(config, seed) for seed in seeds]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            trials = list(pool.map(_trial_worker, [(config, s) for s in seeds]))
    return aggregate(config, trials)


# ---------------------------------------------------------------------------
# configuration and report files


def config_to_dict(config: ExperimentConfig) -> dict:
    s = config.solver
    return {
        "profile": _profile_to_dict(config.profile),
        "m": config.m,
        "delta_elem": config.delta_elem,
        "delta_solver": config.delta_solver,
        "mu_factor": config.mu_factor,
        "n_trials": config.n_trials,
        "base_seed": config.base_seed,
        "methods": list(config.methods),
        "detect_threshold": config.detect_threshold,
        "perturbation": config.perturbation,
        "solver": {
            "tol_p": s.tol_p,
            "tol_d": s.tol_d,
            "tol_g": s.tol_g,
            "max_iters": s.max_iters,
        },
        "partition_edges": None
        if config.partition_edges is None
        else list(config.partition_edges),
    }


def config_from_dict(data: dict) -> ExperimentConfig:
    try:
        profile = _profile_from_dict(data["profile"])
        solver_opts = SolverOptions(**data.get("solver", {}))
        edges = data.get("partition_edges")
        return ExperimentConfig(
            profile=profile,
            m=int(data["m"]),
            delta_elem=float(data.get("delta_elem", 0.7)),
            delta_solver=None
            if data.get("delta_solver") is None
            else float(data["delta_solver"]),
            mu_factor=float(data.get("mu_factor", 0.1)),
            n_trials=int(data.get("n_trials", 100)),
            base_seed=int(data.get("base_seed", 1)),
            methods=tuple(data.get("methods", ("lasso", "asd"))),
            detect_threshold=float(data.get("detect_threshold", 0.05)),
            perturbation=str(data.get("perturbation", "uniform")),
            solver=solver_opts,
            partition_edges=None if edges is None else tuple(int(e) for e in edges),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed experiment config: {exc}") from exc


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2) + "\n")


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"experiment config not found: {path}")
    return config_from_dict(json.loads(path.read_text()))


def export_report(report: McReport, fmt: str, out_dir: str | Path) -> list[Path]:
    """Write report files; returns the paths written.

    ``csv`` emits the method-by-subband energy table (with the ratio row) and
    the per-bin mean-magnitude plot data; ``json`` emits the full
    deterministic report. Both also write a timing sidecar, which is the only
    non-deterministic output.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {out}: {exc}") from exc
    written: list[Path] = []
    methods = [m for m in ("bp", "lasso", "asd") if m in report.mean_energies]
    if fmt == "csv":
        table = out / "report.csv"
        with open(table, "w", newline="") as fh:
            writer = csv.writer(fh)
            k = report.edges.size - 1
            writer.writerow(["quantity"] + [f"subband_{i + 1}" for i in range(k)])
            for method in methods:
                writer.writerow(
                    [f"{method}_energy"] + [f"{v:.4f}" for v in report.mean_energies[method]]
                )
            if report.eer_of_means is not None:
                writer.writerow(["eer"] + [f"{v:.4f}" for v in report.eer_of_means])
        written.append(table)

        plot = out / "plot_spectrum.csv"
        n = report.truth_mean_magnitude.size
        span = report.config["profile"]["freq_span"]
        width = (span[1] - span[0]) / n
        with open(plot, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["bin", "freq_hz", "truth_mean_magnitude"]
                + [f"{m}_mean_magnitude" for m in methods]
            )
            for k_bin in range(n):
                row = [
                    k_bin,
                    repr(float(span[0] + (k_bin + 0.5) * width)),
                    repr(float(report.truth_mean_magnitude[k_bin])),
                ]
                row += [repr(float(report.mean_magnitude[m][k_bin])) for m in methods]
                writer.writerow(row)
        written.append(plot)
    elif fmt == "json":
        path = out / "report.json"
        path.write_text(json.dumps(report.deterministic_dict(), indent=2) + "\n")
        written.append(path)
    else:
        raise ConfigurationError(f"unknown report format {fmt!r}; use 'csv' or 'json'")

    timing = out / "timing.json"
    timing.write_text(
        json.dumps(
            {"mean_wall_time": report.mean_wall_time, "note": "non-deterministic"},
            indent=2,
        )
        + "\n"
    )
    written.append(timing)
    return written
