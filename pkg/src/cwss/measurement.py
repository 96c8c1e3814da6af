"""Compressive measurement operators and acquisition.

The acquisition chain is modeled as Nyquist-rate sampling followed by random
sub-selection of rows: the ideal operator is the selected-row slice of the
unitary inverse DFT, and the observed operator adds a bounded element-wise
perturbation on top of it.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from math import comb
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DimensionError
from .signal import TimeSignal

__all__ = [
    "SelectionMatrix",
    "MeasurementSet",
    "RipEstimate",
    "make_selection",
    "make_dense_matrix",
    "ideal_matrix",
    "apply_ideal",
    "perturb",
    "matrix_linf_norm",
    "acquire",
    "rip_probe",
    "write_matrix_csv",
    "write_selection",
]

PERTURBATION_KINDS = ("uniform", "truncated_gaussian")


@dataclass(frozen=True)
class SelectionMatrix:
    """M distinct row indices out of an N-point grid."""

    row_indices: np.ndarray
    n: int

    def __post_init__(self):
        idx = np.asarray(self.row_indices, dtype=np.int64)
        object.__setattr__(self, "row_indices", idx)
        if idx.ndim != 1 or idx.size == 0:
            raise DimensionError("row_indices must be a non-empty 1-D index vector")
        if idx.size > self.n:
            raise DimensionError(f"cannot select {idx.size} rows out of {self.n}")
        if idx.min() < 0 or idx.max() >= self.n:
            raise DimensionError(f"row indices must lie in [0, {self.n})")
        if np.unique(idx).size != idx.size:
            raise DimensionError("row indices must be distinct")

    @property
    def m(self) -> int:
        return self.row_indices.size

    def apply(self, vec: np.ndarray) -> np.ndarray:
        if vec.shape[0] != self.n:
            raise DimensionError(f"expected a length-{self.n} vector, got {vec.shape[0]}")
        return vec[self.row_indices]


@dataclass(frozen=True)
class MeasurementSet:
    """Ideal operator A, perturbation V, and the observed operator B = A + V."""

    A: np.ndarray
    V: np.ndarray
    B: np.ndarray
    delta_elem: float
    delta_norm: float

    def __post_init__(self):
        if not (self.A.shape == self.V.shape == self.B.shape):
            raise DimensionError("A, V and B must share one shape")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class RipEstimate:
    """Lower bound on the restricted-isometry constant found by probing."""

    s: int
    delta_s_lower: float
    n_probed: int
    exhaustive: bool


def make_selection(n: int, m: int, rng_seed: int) -> SelectionMatrix:
    """Choose m of n rows uniformly at random, without replacement."""
    if m < 1 or m > n:
        raise DimensionError(f"need 1 <= M <= N, got M={m}, N={n}")
    rng = np.random.default_rng(rng_seed)
    return SelectionMatrix(row_indices=rng.permutation(n)[:m], n=n)


def make_dense_matrix(kind: str, n: int, m: int, rng_seed: int) -> np.ndarray:
    """Random dense measurement matrix of shape (m, n).

    ``gaussian`` entries are i.i.d. real N(0, 1/n) so columns have unit
    expected energy; ``bernoulli`` entries are +-1/sqrt(n) equiprobably.
    """
    if m < 1 or n < 1:
        raise DimensionError(f"matrix dimensions must be positive, got {m}x{n}")
    rng = np.random.default_rng(rng_seed)
    if kind == "gaussian":
        mat = rng.standard_normal((m, n)) / np.sqrt(n)
    elif kind == "bernoulli":
        mat = np.where(rng.uniform(size=(m, n)) < 0.5, -1.0, 1.0) / np.sqrt(n)
    else:
        raise ConfigurationError(f"unknown matrix kind {kind!r}; use 'gaussian' or 'bernoulli'")
    return mat.astype(np.complex128)


def ideal_matrix(sel: SelectionMatrix) -> np.ndarray:
    """Selected rows of the unitary inverse DFT (dense reference path)."""
    cols = np.arange(sel.n)
    return np.exp(2j * np.pi * np.outer(sel.row_indices, cols) / sel.n) / np.sqrt(sel.n)


def apply_ideal(sel: SelectionMatrix, r: np.ndarray) -> np.ndarray:
    """Fast O(N log N) application of :func:`ideal_matrix` to a grid vector."""
    if r.shape[0] != sel.n:
        raise DimensionError(f"expected a length-{sel.n} vector, got {r.shape[0]}")
    return np.fft.ifft(r, norm="ortho")[sel.row_indices]


def perturb(
    A: np.ndarray,
    delta_elem: float,
    rng_seed: int,
    kind: str = "uniform",
    sigma: float | None = None,
) -> MeasurementSet:
    """Draw the observed operator B = A + V with |V_ij| <= delta_elem.

    ``uniform`` draws each entry with modulus uniform on [0, delta_elem] and
    uniform phase. ``truncated_gaussian`` draws circular complex Gaussian
    entries (per-component std ``sigma``, default delta_elem/3) and clips the
    modulus of any entry exceeding the bound.
    """
    if delta_elem < 0:
        raise ConfigurationError(f"element bound must be non-negative, got {delta_elem}")
    if kind not in PERTURBATION_KINDS:
        raise ConfigurationError(f"unknown perturbation kind {kind!r}; use one of {PERTURBATION_KINDS}")
    rng = np.random.default_rng(rng_seed)
    shape = A.shape
    if kind == "uniform":
        mod = rng.uniform(0.0, delta_elem, shape)
        pha = rng.uniform(0.0, 2.0 * np.pi, shape)
        V = mod * np.exp(1j * pha)
    else:
        sig = delta_elem / 3.0 if sigma is None else float(sigma)
        V = sig * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        mod = np.abs(V)
        over = mod > delta_elem
        if over.any():
            V[over] *= delta_elem / mod[over]
    return MeasurementSet(
        A=A,
        V=V,
        B=A + V,
        delta_elem=float(delta_elem),
        delta_norm=matrix_linf_norm(V),
    )


def matrix_linf_norm(V: np.ndarray) -> float:
    """Induced infinity norm: the largest row sum of entry moduli."""
    if V.size == 0:
        return 0.0
    return float(np.abs(V).sum(axis=1).max())


def acquire(x: TimeSignal, sel: SelectionMatrix) -> np.ndarray:
    """Sub-Nyquist capture: the selected Nyquist-rate samples."""
    if x.n != sel.n:
        raise DimensionError(f"signal length {x.n} does not match selection grid {sel.n}")
    return x.x[sel.row_indices]


def rip_probe(Phi: np.ndarray, s: int, max_supports: int, rng_seed: int) -> RipEstimate:
    """Probe the restricted-isometry constant at sparsity s.

    Examines column submatrices over supports of size s and returns the
    largest deviation ``max(1 - sigma_min^2, sigma_max^2 - 1)`` found.
    All supports are enumerated when there are at most ``max_supports`` of
    them; otherwise supports are sampled and the estimate is flagged.
    """
    m, n = Phi.shape
    if s < 1 or s > min(m, n):
        raise DimensionError(f"sparsity must satisfy 1 <= S <= min(M, N), got S={s}")
    total = comb(n, s)
    if total <= max_supports:
        supports = itertools.combinations(range(n), s)
        n_probed = total
        exhaustive = True
    else:
        rng = np.random.default_rng(rng_seed)
        supports = (tuple(np.sort(rng.choice(n, s, replace=False))) for _ in range(max_supports))
        n_probed = max_supports
        exhaustive = False
    worst = 0.0
    for support in supports:
        sv = np.linalg.svd(Phi[:, list(support)], compute_uv=False)
        dev = max(1.0 - sv[-1] ** 2, sv[0] ** 2 - 1.0)
        if dev > worst:
            worst = dev
    return RipEstimate(s=s, delta_s_lower=worst, n_probed=n_probed, exhaustive=exhaustive)


def write_matrix_csv(mat: np.ndarray, path: str | Path) -> None:
    """Dump a complex matrix as (row, col, re, im) rows for external checks."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "re", "im"])
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                v = complex(mat[i, j])
                writer.writerow([i, j, repr(v.real), repr(v.imag)])


def write_selection(sel: SelectionMatrix, path: str | Path) -> None:
    Path(path).write_text("\n".join(str(int(i)) for i in sel.row_indices) + "\n")
