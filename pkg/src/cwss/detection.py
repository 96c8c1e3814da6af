"""Subband energy detection and the energy-enhancement ratio."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, NormalizationError
from .signal import SpectrumProfile, default_profile

__all__ = [
    "SubbandReport",
    "subband_energies",
    "eer",
    "detect",
    "default_partition",
    "partition_for",
    "write_report_csv",
]


@dataclass
class SubbandReport:
    """Per-subband energy shares, decisions, and the enhancement ratio."""

    edges: np.ndarray
    active_mask: np.ndarray
    energies: dict[str, np.ndarray]
    decisions: dict[str, np.ndarray]
    eer: np.ndarray | None = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64)
        if self.edges.ndim != 1 or np.any(np.diff(self.edges) <= 0):
            raise ConfigurationError("edges must be strictly increasing")
        if self.active_mask.size != self.k:
            raise ConfigurationError("active mask length must match the subband count")

    @property
    def k(self) -> int:
        return self.edges.size - 1


def subband_energies(r_hat: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Energy share of each subband: squared magnitudes, normalized to 1."""
    edges = np.asarray(edges, dtype=np.int64)
    n = r_hat.size
    if edges[0] != 0 or edges[-1] != n or np.any(np.diff(edges) < 0):
        raise ConfigurationError(f"edges must partition [0, {n}]")
    power = np.abs(r_hat) ** 2
    raw = np.array([power[a:b].sum() for a, b in zip(edges[:-1], edges[1:])])
    total = raw.sum()
    if total == 0.0:
        raise NormalizationError("cannot normalize the energies of an all-zero estimate")
    return raw / total


def eer(e_new: np.ndarray, e_std: np.ndarray, active_mask: np.ndarray) -> np.ndarray:
    """Signed per-subband enhancement of the new energies over the baseline.

    Active subbands score ``(new - std) / std`` (gain is positive); inactive
    subbands score ``(std - new) / std`` (suppression is positive). Subbands
    with zero baseline energy get NaN.
    """
    e_new = np.asarray(e_new, dtype=float)
    e_std = np.asarray(e_std, dtype=float)
    active = np.asarray(active_mask, dtype=bool)
    if not (e_new.shape == e_std.shape == active.shape):
        raise ConfigurationError("energy vectors and mask must share one shape")
    out = np.full(e_new.shape, np.nan)
    ok = e_std > 0.0
    delta = np.where(active, e_new - e_std, e_std - e_new)
    out[ok] = delta[ok] / e_std[ok]
    return out


def detect(energies: np.ndarray, threshold: float) -> np.ndarray:
    """Declare a subband occupied when its energy share exceeds the threshold."""
    if threshold < 0:
        raise ConfigurationError(f"threshold must be non-negative, got {threshold}")
    return np.asarray(energies) > threshold


def _edge_bin(freq: float, n: int, span: tuple[float, float]) -> int:
    """Bin edge below which all bin centers are < freq."""
    width = (span[1] - span[0]) / n
    return int(np.clip(math.ceil((freq - span[0]) / width - 0.5), 0, n))


def partition_for(profile: SpectrumProfile) -> tuple[np.ndarray, np.ndarray]:
    """Bin edges interleaving the profile's bands with the gaps between them.

    Returns (edges, active_mask) where segment i covers bins
    ``edges[i]:edges[i+1]`` and the mask marks segments that are bands.
    """
    lo, hi = profile.freq_span
    bounds = [lo]
    active: list[bool] = []
    for band in sorted(profile.bands, key=lambda b: b.f_start):
        if band.f_start > bounds[-1]:
            bounds.append(band.f_start)
            active.append(False)
        bounds.append(band.f_stop)
        active.append(True)
    if bounds[-1] < hi:
        bounds.append(hi)
        active.append(False)
    edges = [_edge_bin(f, profile.grid_size, profile.freq_span) for f in bounds]
    if np.any(np.diff(edges) <= 0):
        raise ConfigurationError(
            "grid too coarse: adjacent partition boundaries map to the same bin"
        )
    return np.asarray(edges, dtype=np.int64), np.asarray(active, dtype=bool)


def default_partition(n: int) -> np.ndarray:
    """The stock nine-section split of the monitored span, mapped to bins."""
    if n < 9:
        raise ConfigurationError(f"need at least 9 bins for 9 subbands, got {n}")
    boundaries_mhz = (0, 30, 70, 120, 180, 300, 340, 420, 460, 500)
    span = (0.0, 500e6)
    edges = np.asarray([_edge_bin(f * 1e6, n, span) for f in boundaries_mhz], dtype=np.int64)
    if np.any(np.diff(edges) <= 0):
        raise ConfigurationError("grid too coarse for the default nine-section partition")
    return edges


def write_report_csv(report: SubbandReport, path: str | Path, order: tuple[str, ...] | None = None) -> None:
    """Method-by-subband energy table with a trailing enhancement-ratio row."""
    methods = order or tuple(report.energies)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity"] + [f"subband_{i + 1}" for i in range(report.k)])
        for method in methods:
            writer.writerow([f"{method}_energy"] + [f"{v:.4f}" for v in report.energies[method]])
        if report.eer is not None:
            writer.writerow(["eer"] + [f"{v:.4f}" for v in report.eer])
