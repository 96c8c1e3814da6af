"""Sparse wideband spectrum synthesis and frequency/time conversion.

The ground truth of every experiment is a complex length-N frequency grid:
a handful of occupied bands with per-bin amplitudes drawn from declared
ranges, a low noise floor everywhere else, and uniformly random phases.
Time-domain samples are obtained through the unitary inverse DFT, so the
grid vector and the Nyquist-rate sample vector carry identical energy.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, UndefinedSnrError

__all__ = [
    "BandSpec",
    "SpectrumProfile",
    "FrequencySpectrum",
    "TimeSignal",
    "default_profile",
    "synthesize_spectrum",
    "spectrum_to_time",
    "add_awgn",
    "load_profile",
    "save_profile",
    "write_spectrum_csv",
]

PHASE_POLICIES = ("per_draw", "frozen")

# Fixed stream for the "frozen" phase policy: repeated syntheses share phases
# while amplitudes still follow the caller's seed.
_FROZEN_PHASE_SEED = 0x5EED


def _check_interval(name: str, lo: float, hi: float) -> None:
    if not (0.0 <= lo <= hi):
        raise ConfigurationError(f"{name} must satisfy 0 <= low <= high, got [{lo}, {hi}]")


@dataclass(frozen=True)
class BandSpec:
    """One occupied band: frequency extent plus its amplitude range."""

    f_start: float
    f_stop: float
    psd_range: tuple[float, float]

    def __post_init__(self):
        if not self.f_start < self.f_stop:
            raise ConfigurationError(
                f"band must have f_start < f_stop, got [{self.f_start}, {self.f_stop}]"
            )
        _check_interval("psd_range", *self.psd_range)


@dataclass(frozen=True)
class SpectrumProfile:
    """Declarative description of the monitored band.

    ``grid_size`` bins cover ``freq_span`` uniformly; bin k spans
    ``[k, k+1) * bin_width`` and a band claims every bin whose center falls
    inside it.
    """

    grid_size: int
    freq_span: tuple[float, float]
    bands: tuple[BandSpec, ...]
    noise_floor_range: tuple[float, float]
    snr_db: float
    phase_seed_policy: str = "per_draw"

    def __post_init__(self):
        n = self.grid_size
        if n < 2 or (n & (n - 1)) != 0:
            raise ConfigurationError(f"grid_size must be a power of two >= 2, got {n}")
        lo, hi = self.freq_span
        if not lo < hi:
            raise ConfigurationError(f"freq_span must be increasing, got [{lo}, {hi}]")
        _check_interval("noise_floor_range", *self.noise_floor_range)
        if self.phase_seed_policy not in PHASE_POLICIES:
            raise ConfigurationError(
                f"phase_seed_policy must be one of {PHASE_POLICIES}, got {self.phase_seed_policy!r}"
            )
        ordered = sorted(self.bands, key=lambda b: b.f_start)
        for b in ordered:
            if b.f_start < lo or b.f_stop > hi:
                raise ConfigurationError(
                    f"band [{b.f_start}, {b.f_stop}] lies outside freq_span [{lo}, {hi}]"
                )
        for left, right in zip(ordered, ordered[1:]):
            if right.f_start < left.f_stop:
                raise ConfigurationError(
                    f"bands overlap near {right.f_start} Hz; bands must be disjoint"
                )

    @property
    def bin_width(self) -> float:
        return (self.freq_span[1] - self.freq_span[0]) / self.grid_size

    @property
    def span_width(self) -> float:
        return self.freq_span[1] - self.freq_span[0]

    def bin_centers(self) -> np.ndarray:
        return self.freq_span[0] + (np.arange(self.grid_size) + 0.5) * self.bin_width

    def band_index_per_bin(self) -> np.ndarray:
        """Index of the band claiming each bin, or -1 for noise-floor bins."""
        centers = self.bin_centers()
        idx = np.full(self.grid_size, -1, dtype=np.int64)
        for i, b in enumerate(self.bands):
            idx[(centers >= b.f_start) & (centers < b.f_stop)] = i
        return idx

    def occupancy_mask(self) -> np.ndarray:
        return self.band_index_per_bin() >= 0


@dataclass(frozen=True)
class FrequencySpectrum:
    """Ground-truth grid: complex per-bin amplitudes plus the occupancy mask."""

    r: np.ndarray
    occupancy: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        if self.r.shape != self.occupancy.shape or self.r.ndim != 1:
            raise ConfigurationError("r and occupancy must be 1-D vectors of equal length")

    @property
    def n(self) -> int:
        return self.r.size


@dataclass(frozen=True)
class TimeSignal:
    """Nyquist-rate complex baseband samples of the monitored span."""

    x: np.ndarray
    sample_rate: float

    @property
    def n(self) -> int:
        return self.x.size


def default_profile(grid_size: int = 512) -> SpectrumProfile:
    """The stock experiment configuration: a 0-500 MHz span with four
    occupied bands, a 0-10 noise floor, and 13 dB SNR."""
    return SpectrumProfile(
        grid_size=grid_size,
        freq_span=(0.0, 500e6),
        bands=(
            BandSpec(30e6, 70e6, (100.0, 140.0)),
            BandSpec(120e6, 180e6, (70.0, 110.0)),
            BandSpec(300e6, 340e6, (130.0, 170.0)),
            BandSpec(420e6, 460e6, (110.0, 150.0)),
        ),
        noise_floor_range=(0.0, 10.0),
        snr_db=13.0,
    )


def synthesize_spectrum(profile: SpectrumProfile, rng_seed: int) -> FrequencySpectrum:
    """Draw one ground-truth spectrum.

    Occupied bins get amplitudes uniform in their band's range; noise bins
    get ``lo + |N(0, (hi-lo)/3)|`` clipped into the floor range. Every bin
    gets an independent uniform phase. Deterministic for a fixed seed.
    """
    n = profile.grid_size
    rng = np.random.default_rng(rng_seed)
    # Fixed draw order keeps results reproducible: uniforms, normals, phases.
    uni = rng.uniform(size=n)
    gau = rng.standard_normal(n)
    if profile.phase_seed_policy == "frozen":
        phases = np.random.default_rng(_FROZEN_PHASE_SEED).uniform(0.0, 2.0 * np.pi, n)
    else:
        phases = rng.uniform(0.0, 2.0 * np.pi, n)

    band_idx = profile.band_index_per_bin()
    occupied = band_idx >= 0

    nf_lo, nf_hi = profile.noise_floor_range
    spread = nf_hi - nf_lo
    mag = nf_lo + np.minimum(np.abs(gau) * (spread / 3.0), spread)

    for i, b in enumerate(profile.bands):
        sel = band_idx == i
        lo, hi = b.psd_range
        mag[sel] = lo + uni[sel] * (hi - lo)

    r = mag * np.exp(1j * phases)
    return FrequencySpectrum(r=r, occupancy=occupied, sample_rate=profile.span_width)


def spectrum_to_time(spectrum: FrequencySpectrum) -> TimeSignal:
    """Unitary inverse DFT of the grid vector.

    The forward unitary DFT of the result reproduces the grid to round-off,
    and energies match on both sides (Parseval).
    """
    x = np.fft.ifft(spectrum.r, norm="ortho")
    return TimeSignal(x=x, sample_rate=spectrum.sample_rate)


def add_awgn(signal: TimeSignal, snr_db: float, rng_seed: int) -> TimeSignal:
    """Add circular complex white Gaussian noise at the requested SNR.

    The noise is scaled so its expected energy satisfies
    ``10*log10(||x||^2 / E||n||^2) = snr_db``. ``snr_db = inf`` returns the
    input unchanged.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return TimeSignal(x=signal.x.copy(), sample_rate=signal.sample_rate)
    energy = float(np.vdot(signal.x, signal.x).real)
    if energy == 0.0:
        raise UndefinedSnrError("cannot set an SNR against a zero signal")
    n = signal.n
    noise_energy = energy * 10.0 ** (-snr_db / 10.0)
    sigma = math.sqrt(noise_energy / (2.0 * n))
    g = np.random.default_rng(rng_seed).standard_normal(2 * n)
    noise = sigma * (g[:n] + 1j * g[n:])
    return TimeSignal(x=signal.x + noise, sample_rate=signal.sample_rate)


# ---------------------------------------------------------------------------
# plain-text interfaces


def _profile_to_dict(profile: SpectrumProfile) -> dict:
    return {
        "grid_size": profile.grid_size,
        "freq_span": list(profile.freq_span),
        "bands": [
            {"f_start": b.f_start, "f_stop": b.f_stop, "psd_range": list(b.psd_range)}
            for b in profile.bands
        ],
        "noise_floor_range": list(profile.noise_floor_range),
        "snr_db": profile.snr_db,
        "phase_seed_policy": profile.phase_seed_policy,
    }


def _profile_from_dict(data: dict) -> SpectrumProfile:
    try:
        bands = tuple(
            BandSpec(float(b["f_start"]), float(b["f_stop"]), tuple(float(v) for v in b["psd_range"]))
            for b in data.get("bands", [])
        )
        return SpectrumProfile(
            grid_size=int(data["grid_size"]),
            freq_span=tuple(float(v) for v in data["freq_span"]),
            bands=bands,
            noise_floor_range=tuple(float(v) for v in data["noise_floor_range"]),
            snr_db=float(data["snr_db"]),
            phase_seed_policy=str(data.get("phase_seed_policy", "per_draw")),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed profile config: {exc}") from exc


def save_profile(profile: SpectrumProfile, path: str | Path) -> None:
    Path(path).write_text(json.dumps(_profile_to_dict(profile), indent=2) + "\n")


def load_profile(path: str | Path) -> SpectrumProfile:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"profile config not found: {path}")
    return _profile_from_dict(json.loads(path.read_text()))


def write_spectrum_csv(spectrum: FrequencySpectrum, path: str | Path, f_start: float = 0.0) -> None:
    """Dump a spectrum as (bin_index, freq_hz, re, im, magnitude, occupancy) rows."""
    width = spectrum.sample_rate / spectrum.n
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_index", "freq_hz", "re", "im", "magnitude", "occupancy"])
        for k in range(spectrum.n):
            v = complex(spectrum.r[k])
            writer.writerow(
                [
                    k,
                    repr(float(f_start + (k + 0.5) * width)),
                    repr(v.real),
                    repr(v.imag),
                    repr(abs(v)),
                    int(spectrum.occupancy[k]),
                ]
            )
