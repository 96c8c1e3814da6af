"""Command-line entry point.

Subcommands are thin wrappers over the library: ``synth`` writes one
ground-truth spectrum, ``sense`` runs a single capture-and-recover pass,
``mc`` runs the seeded Monte Carlo experiment, and ``report`` pretty-prints
stored experiment JSON. All randomness flows from ``--seed``.

Exit codes: 0 success, 1 usage or configuration problem, 2 numerical
failure (the converged fraction fell below the acceptance floor).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .errors import CwssError
from .harness import (
    ExperimentConfig,
    default_config,
    export_report,
    load_config,
    run_monte_carlo,
    run_trial,
)
from .recovery import write_diagnostics_json, write_recovery_csv
from .signal import default_profile, load_profile, synthesize_spectrum, write_spectrum_csv

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; remap to the config bucket
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit2(message)


class SystemExit2(CwssError):
    pass


def _add_common(parser):
    parser.add_argument("--config", type=Path, help="experiment config JSON")
    parser.add_argument("--seed", type=int, default=1, help="base random seed")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cwss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="write one ground-truth spectrum as CSV")
    _add_common(synth)
    synth.add_argument("--grid", type=int, help="override the grid size")

    sense = sub.add_parser("sense", help="one capture: recover with each method")
    _add_common(sense)
    _add_experiment_overrides(sense)

    mc = sub.add_parser("mc", help="run the Monte Carlo experiment")
    _add_common(mc)
    _add_experiment_overrides(mc)
    mc.add_argument("--trials", type=int, help="number of trials")
    mc.add_argument("--parallel", type=int, default=1, help="worker processes")

    report = sub.add_parser("report", help="print a stored experiment report")
    report.add_argument("paths", nargs="+", type=Path, help="report JSON file(s)")
    return parser


def _add_experiment_overrides(parser):
    parser.add_argument("--methods", type=str, help="comma-separated subset of bp,lasso,asd")
    parser.add_argument("--m", type=int, help="measurement count")
    parser.add_argument("--delta", type=float, help="element-modulus perturbation bound")
    parser.add_argument("--delta-solver", type=float, help="bound fed to the robust program")
    parser.add_argument("--mu-factor", type=float, help="residual budget as a fraction of ||y||")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="generic config override (repeatable)",
    )


def _load_base_config(args) -> ExperimentConfig:
    if getattr(args, "config", None) is not None:
        return load_config(args.config)
    return default_config()


_OVERRIDE_PARSERS = {
    "delta_elem": float,
    "delta_solver": float,
    "mu_factor": float,
    "m": int,
    "n_trials": int,
    "base_seed": int,
    "detect_threshold": float,
    "perturbation": str,
}


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if getattr(args, "m", None) is not None:
        updates["m"] = args.m
    if getattr(args, "delta", None) is not None:
        updates["delta_elem"] = args.delta
    if getattr(args, "delta_solver", None) is not None:
        updates["delta_solver"] = args.delta_solver
    if getattr(args, "mu_factor", None) is not None:
        updates["mu_factor"] = args.mu_factor
    if getattr(args, "methods", None):
        updates["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if getattr(args, "trials", None) is not None:
        updates["n_trials"] = args.trials
    for item in getattr(args, "set", []):
        key, sep, value = item.partition("=")
        if not sep or key not in _OVERRIDE_PARSERS:
            raise SystemExit2(f"bad override {item!r}; known keys: {sorted(_OVERRIDE_PARSERS)}")
        updates[key] = _OVERRIDE_PARSERS[key](value)
    updates["base_seed"] = args.seed
    return dataclasses.replace(config, **updates)


def _cmd_synth(args) -> int:
    if args.config is not None:
        profile = load_profile(args.config)
    else:
        profile = default_profile()
    if args.grid is not None:
        profile = dataclasses.replace(profile, grid_size=args.grid)
    spectrum = synthesize_spectrum(profile, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    spec_path = args.out / "spectrum.csv"
    write_spectrum_csv(spectrum, spec_path, f_start=profile.freq_span[0])
    occ_path = args.out / "occupancy.csv"
    with open(occ_path, "w") as fh:
        fh.write("bin_index,occupied\n")
        for k, occ in enumerate(spectrum.occupancy):
            fh.write(f"{k},{int(occ)}\n")
    print(f"wrote {spec_path} and {occ_path}")
    return EXIT_OK


def _cmd_sense(args) -> int:
    config = _apply_overrides(_load_base_config(args), args)
    trial = run_trial(config, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    for method, result in trial.recoveries.items():
        path = args.out / f"recovered_{method}.csv"
        write_recovery_csv(result, path)
        written.append(path)
    diag = args.out / "diagnostics.json"
    write_diagnostics_json(list(trial.recoveries.values()), diag)
    written.append(diag)
    print("wrote " + ", ".join(str(p) for p in written))
    return EXIT_OK


def _cmd_mc(args) -> int:
    config = _apply_overrides(_load_base_config(args), args)
    report = run_monte_carlo(config, n_jobs=args.parallel)
    export_report(report, "csv", args.out)
    export_report(report, "json", args.out)
    print(f"wrote report files to {args.out}")
    if not report.converged_ok:
        fractions = ", ".join(f"{k}={v:.2f}" for k, v in report.converged_fraction.items())
        print(f"error: converged fraction below 0.9 ({fractions})", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _format_report(data: dict) -> str:
    k = len(data["edges"]) - 1
    lines = []
    header = ["quantity"] + [f"sb{i + 1}" for i in range(k)]
    lines.append("  ".join(f"{h:>10}" for h in header))
    for method, energies in data["mean_energies"].items():
        row = [f"{method}_energy"] + [f"{v:.4f}" for v in energies]
        lines.append("  ".join(f"{v:>10}" for v in row))
    if data.get("eer_of_means"):
        row = ["eer"] + [f"{v:.4f}" for v in data["eer_of_means"]]
        lines.append("  ".join(f"{v:>10}" for v in row))
    active = ["active"] + [str(bool(a)) for a in data["active_mask"]]
    lines.append("  ".join(f"{v:>10}" for v in active))
    return "\n".join(lines)


def _cmd_report(args) -> int:
    for path in args.paths:
        if not path.exists():
            raise SystemExit2(f"report file not found: {path}")
    for path in args.paths:
        data = json.loads(path.read_text())
        print(f"== {path} ==")
        print(_format_report(data))
        conv = data.get("converged_fraction", {})
        print("converged fraction: " + ", ".join(f"{k}={v:.2f}" for k, v in conv.items()))
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "sense": _cmd_sense,
    "mc": _cmd_mc,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CwssError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
