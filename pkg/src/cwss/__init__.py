"""Compressive wideband spectrum sensing toolkit.

Simulates sub-Nyquist acquisition of a sparse wideband spectrum through a
randomly sub-sampled inverse-DFT operator with a bounded element-wise
perturbation, recovers the spectrum with three convex programs (equality-
constrained L1, residual-budget L1, and a distortion-robust epigraph
program), and scores occupancy via normalized subband energies and the
energy-enhancement ratio.
"""

from .detection import (
    SubbandReport,
    default_partition,
    detect,
    eer,
    partition_for,
    subband_energies,
)
from .errors import (
    ConfigurationError,
    CwssError,
    DimensionError,
    NormalizationError,
    SolverError,
    UndefinedSnrError,
)
from .harness import (
    ExperimentConfig,
    McReport,
    TrialResult,
    default_config,
    export_report,
    load_config,
    run_monte_carlo,
    run_trial,
    save_config,
)
from .measurement import (
    MeasurementSet,
    RipEstimate,
    SelectionMatrix,
    acquire,
    apply_ideal,
    ideal_matrix,
    make_dense_matrix,
    make_selection,
    matrix_linf_norm,
    perturb,
    rip_probe,
)
from .recovery import (
    Certificate,
    RecoveryResult,
    certify,
    solve_asd,
    solve_bp,
    solve_lasso,
)
from .signal import (
    BandSpec,
    FrequencySpectrum,
    SpectrumProfile,
    TimeSignal,
    add_awgn,
    default_profile,
    load_profile,
    save_profile,
    spectrum_to_time,
    synthesize_spectrum,
)
from .solver import (
    ConicProblem,
    ConicSolution,
    SolverOptions,
    kkt_check,
    lift_complex,
    solve,
)

__version__ = "0.1.0"
