"""First-order conic solver for the sparse-recovery programs.

Problems are stated in the standard conic form

    minimize    c @ x
    subject to  A @ x + s == b,    s in K,

where K is a Cartesian product of zero cones (equalities), nonnegative
orthants, and second-order cones ``{(v0, v1): ||v1||_2 <= v0}``, listed in
the row order of ``A``. Complex unknowns are handled by lifting each one to
a (re, im) pair plus a modulus bound ``u >= |(re, im)|``, so a complex L1
objective becomes the linear functional ``sum(u)`` over second-order cones.

The solver is an over-relaxed ADMM: each sweep alternates a cached linear
solve against ``A.T @ A`` with a Euclidean projection onto K. The scaled
dual iterate lands in the dual cone by construction (Moreau decomposition),
so at termination the returned triple (x, s, z) satisfies the KKT system to
the requested tolerances. The iteration is fully deterministic for a fixed
problem and options.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigurationError, DimensionError, SolverError

__all__ = [
    "ZERO",
    "NONNEG",
    "SOC",
    "Cone",
    "ComplexLifting",
    "lift_complex",
    "ConicProblem",
    "SolverOptions",
    "ConicSolution",
    "solve",
    "kkt_check",
]

ZERO = "zero"
NONNEG = "nonneg"
SOC = "soc"
_CONE_KINDS = (ZERO, NONNEG, SOC)

# Above this variable count the normal-equations factorization switches from
# dense Cholesky to sparse LU to keep memory bounded.
_DENSE_FACTOR_LIMIT = 4000

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITERS = "max_iters"
STATUS_INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class Cone:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in _CONE_KINDS:
            raise ConfigurationError(f"unknown cone kind {self.kind!r}")
        if self.dim < 1:
            raise ConfigurationError("cone dimension must be positive")
        if self.kind == SOC and self.dim < 2:
            raise ConfigurationError("second-order cones need dimension >= 2")


@dataclass(frozen=True)
class ComplexLifting:
    """Index map for n complex unknowns lifted to ``[re | im | u | extra]``.

    ``u[k]`` is the modulus bound of unknown k, tied down by the cone
    ``||(re_k, im_k)||_2 <= u_k``; ``extra`` slots hold any additional real
    scalars (for example an epigraph variable).
    """

    n_complex: int
    n_extra: int = 0

    @property
    def dim(self) -> int:
        return 3 * self.n_complex + self.n_extra

    @property
    def re_slice(self) -> slice:
        return slice(0, self.n_complex)

    @property
    def im_slice(self) -> slice:
        return slice(self.n_complex, 2 * self.n_complex)

    @property
    def u_slice(self) -> slice:
        return slice(2 * self.n_complex, 3 * self.n_complex)

    def extra_index(self, k: int = 0) -> int:
        if not 0 <= k < self.n_extra:
            raise DimensionError(f"extra index {k} out of range ({self.n_extra} extras)")
        return 3 * self.n_complex + k

    def complex_part(self, x: np.ndarray) -> np.ndarray:
        return x[self.re_slice] + 1j * x[self.im_slice]

    def modulus_bounds(self, x: np.ndarray) -> np.ndarray:
        return x[self.u_slice]

    def modulus_cone_rows(self):
        """Constraint triplets for the n modulus cones.

        Returns ``(rows, cols, vals, cones)`` describing the block
        ``s = (u_k, re_k, im_k) in SOC(3)`` for each k, i.e. rows of -1 at
        the respective variable columns with zero right-hand side.
        """
        n = self.n_complex
        rows = np.arange(3 * n)
        cols = np.empty(3 * n, dtype=np.int64)
        cols[0::3] = 2 * n + np.arange(n)
        cols[1::3] = np.arange(n)
        cols[2::3] = n + np.arange(n)
        vals = np.full(3 * n, -1.0)
        cones = tuple(Cone(SOC, 3) for _ in range(n))
        return rows, cols, vals, cones


def lift_complex(n_complex: int, n_extra: int = 0) -> ComplexLifting:
    if n_complex < 1:
        raise ConfigurationError("need at least one complex unknown")
    return ComplexLifting(n_complex=n_complex, n_extra=n_extra)


@dataclass
class ConicProblem:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    cones: tuple[Cone, ...]
    lifting: ComplexLifting | None = None

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A).astype(np.float64)
        self.c = np.asarray(self.c, dtype=np.float64).ravel()
        self.b = np.asarray(self.b, dtype=np.float64).ravel()
        self.cones = tuple(self.cones)
        m, d = self.A.shape
        if self.c.size != d:
            raise DimensionError(f"objective has {self.c.size} entries for {d} variables")
        if self.b.size != m:
            raise DimensionError(f"right-hand side has {self.b.size} entries for {m} rows")
        if sum(cone.dim for cone in self.cones) != m:
            raise DimensionError("cone dimensions do not add up to the row count")

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class SolverOptions:
    tol_p: float = 1e-6
    tol_d: float = 1e-6
    tol_g: float = 1e-6
    max_iters: int = 50_000
    rho: float = 1.0
    over_relax: float = 1.6
    check_every: int = 25
    adapt_rho: bool = True
    scale: bool = True
    scale_iters: int = 10
    infeas_tol: float = 1e-7
    record_history: bool = True
    log_stream: object = None


@dataclass
class ConicSolution:
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    status: str
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    objective: float
    history: tuple = ()


class _ConePlan:
    """Vectorized projection machinery for a fixed cone layout."""

    def __init__(self, cones: tuple[Cone, ...]):
        zero_idx, nonneg_idx = [], []
        soc_starts: dict[int, list[int]] = {}
        offset = 0
        self.block_of_row = np.empty(sum(c.dim for c in cones), dtype=np.int64)
        for bid, cone in enumerate(cones):
            span = range(offset, offset + cone.dim)
            self.block_of_row[offset : offset + cone.dim] = bid
            if cone.kind == ZERO:
                zero_idx.extend(span)
            elif cone.kind == NONNEG:
                nonneg_idx.extend(span)
            else:
                soc_starts.setdefault(cone.dim, []).append(offset)
            offset += cone.dim
        self.n_blocks = len(cones)
        self.zero_idx = np.asarray(zero_idx, dtype=np.int64)
        self.nonneg_idx = np.asarray(nonneg_idx, dtype=np.int64)
        self.soc_groups = [
            np.asarray(starts, dtype=np.int64)[:, None] + np.arange(dim)[None, :]
            for dim, starts in sorted(soc_starts.items())
        ]

    def project(self, v: np.ndarray, dual: bool = False) -> np.ndarray:
        out = v.copy()
        if self.zero_idx.size:
            if not dual:
                out[self.zero_idx] = 0.0
        if self.nonneg_idx.size:
            out[self.nonneg_idx] = np.maximum(v[self.nonneg_idx], 0.0)
        for idx in self.soc_groups:
            block = v[idx]
            v0 = block[:, 0]
            rest = block[:, 1:]
            t = np.sqrt(np.einsum("ij,ij->i", rest, rest))
            inside = t <= v0
            polar = t <= -v0
            middle = ~(inside | polar)
            proj = block.copy()
            proj[polar] = 0.0
            if middle.any():
                a = 0.5 * (v0[middle] + t[middle])
                proj[middle, 0] = a
                proj[middle, 1:] = rest[middle] * (a / t[middle])[:, None]
            out[idx] = proj
        return out

    def distance(self, v: np.ndarray, dual: bool = False) -> float:
        return float(np.linalg.norm(v - self.project(v, dual=dual)))


def _segment_max(values: np.ndarray, starts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Max over contiguous segments; empty segments yield 0."""
    out = np.zeros(starts.size)
    if values.size == 0:
        return out
    nonempty = counts > 0
    safe = np.minimum(starts, values.size - 1)
    red = np.maximum.reduceat(values, safe)
    out[nonempty] = red[nonempty]
    return out


def _ruiz_scaling(A: sp.csr_matrix, plan: _ConePlan, iters: int):
    """Symmetric Ruiz equilibration with cone-blockwise uniform row scaling.

    Rows belonging to one cone must share a scale factor or the cone geometry
    would be destroyed, so row norms are pooled per block.
    """
    m, d = A.shape
    csr_vals = np.abs(A.data)
    csr_cols = A.indices
    csr_rows = _row_ids(A)
    row_counts = np.diff(A.indptr)
    csc = A.tocsc()
    csc_vals = np.abs(csc.data)
    csc_rows = csc.indices
    csc_cols = np.repeat(np.arange(d), np.diff(csc.indptr))
    col_counts = np.diff(csc.indptr)

    block = plan.block_of_row
    block_dims = np.asarray([0] + [c for c in np.bincount(block, minlength=plan.n_blocks)])
    block_starts = np.cumsum(block_dims)[:-1]

    dr = np.ones(m)
    dc = np.ones(d)
    for _ in range(iters):
        row_max = _segment_max(csr_vals * dr[csr_rows] * dc[csr_cols], A.indptr[:-1], row_counts)
        # pool per cone block (blocks are contiguous in row order)
        bmax = np.maximum.reduceat(row_max, block_starts)
        row_max = np.repeat(bmax, np.diff(np.append(block_starts, m)))
        col_max = _segment_max(csc_vals * dr[csc_rows] * dc[csc_cols], csc.indptr[:-1], col_counts)
        row_max[row_max == 0.0] = 1.0
        col_max[col_max == 0.0] = 1.0
        dr /= np.sqrt(row_max)
        dc /= np.sqrt(col_max)
        np.clip(dr, 1e-4, 1e4, out=dr)
        np.clip(dc, 1e-4, 1e4, out=dc)
    return dr, dc


def _factorize(AtA: sp.csc_matrix, n_vars: int):
    if n_vars <= _DENSE_FACTOR_LIMIT:
        dense = AtA.toarray()
        try:
            chol = scipy.linalg.cho_factor(dense, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SolverError(
                "normal equations are singular; every variable must appear in "
                "at least one constraint"
            ) from exc
        return lambda rhs: scipy.linalg.cho_solve(chol, rhs, check_finite=False)
    try:
        lu = splu(AtA)
    except RuntimeError as exc:
        raise SolverError(
            "normal equations are singular; every variable must appear in "
            "at least one constraint"
        ) from exc
    return lu.solve


def solve(problem: ConicProblem, opts: SolverOptions | None = None) -> ConicSolution:
    """Run the ADMM iteration until the KKT residuals meet the tolerances.

    Returns status ``optimal`` when primal, dual, and gap tolerances are all
    met, ``infeasible`` when a primal infeasibility certificate is detected,
    and ``max_iters`` (carrying the best iterate seen) otherwise.
    """
    opts = opts or SolverOptions()
    plan = _ConePlan(problem.cones)
    A, b, c = problem.A, problem.b, problem.c
    m, d = A.shape

    if opts.scale:
        dr, dc = _ruiz_scaling(A, plan, opts.scale_iters)
    else:
        dr, dc = np.ones(m), np.ones(d)
    As = sp.csr_matrix((A.data * dr[_row_ids(A)] * dc[A.indices], A.indices, A.indptr), shape=A.shape)
    bs = dr * b
    cs = dc * c

    solve_normal = _factorize((As.T @ As).tocsc(), d)
    AsT = As.T.tocsr()
    At = A.T.tocsr()

    norm_b = float(np.linalg.norm(b))
    norm_c = float(np.linalg.norm(c))

    rho = float(opts.rho)
    alpha = float(opts.over_relax)
    x = np.zeros(d)
    s = plan.project(bs.copy())
    u = np.zeros(m)

    history: list[tuple[int, float, float, float]] = []
    if opts.log_stream is not None:
        opts.log_stream.write("iteration,primal_res,dual_res,gap\n")

    best = None
    z_prev = None
    status = STATUS_MAX_ITERS
    iterations = opts.max_iters
    final = None

    for k in range(1, opts.max_iters + 1):
        rhs = AsT @ (bs - s - u) - cs / rho
        x = solve_normal(rhs)
        Ax = As @ x
        Ax_rel = alpha * Ax + (1.0 - alpha) * (bs - s)
        v = bs - Ax_rel - u
        s = plan.project(v)
        u = s - v  # scaled dual; in the dual cone by Moreau decomposition

        if k % opts.check_every != 0 and k != opts.max_iters:
            continue

        xu = dc * x
        su = s / dr
        zu = rho * (dr * u)
        rp = float(np.linalg.norm(A @ xu + su - b)) / (1.0 + norm_b)
        rd = float(np.linalg.norm(At @ zu + c)) / (1.0 + norm_c)
        cx = float(c @ xu)
        bz = float(b @ zu)
        gap = abs(cx + bz) / (1.0 + abs(cx) + abs(bz))

        if opts.record_history:
            history.append((k, rp, rd, gap))
        if opts.log_stream is not None:
            opts.log_stream.write(f"{k},{rp!r},{rd!r},{gap!r}\n")

        score = max(rp, rd, gap)
        if best is None or score < best[0]:
            best = (score, xu, su, zu, rp, rd, gap, k)

        if rp <= opts.tol_p and rd <= opts.tol_d and gap <= opts.tol_g:
            status = STATUS_OPTIMAL
            iterations = k
            final = (xu, su, zu, rp, rd, gap)
            break

        # Primal infeasibility certificate: the dual direction stabilizes on
        # z_bar in K* with A.T z_bar ~ 0 and b . z_bar < 0.
        if z_prev is not None and rp > 10.0 * opts.tol_p:
            dz = zu - z_prev
            ndz = float(np.linalg.norm(dz))
            if ndz > 1e-12 * (1.0 + float(np.linalg.norm(zu))):
                dhat = dz / ndz
                if (
                    float(np.linalg.norm(At @ dhat)) <= opts.infeas_tol
                    and float(b @ dhat) < -opts.infeas_tol
                    and plan.distance(dhat, dual=True) <= opts.infeas_tol
                ):
                    status = STATUS_INFEASIBLE
                    iterations = k
                    final = (xu, su, zu, rp, rd, gap)
                    break
        z_prev = zu

        if opts.adapt_rho and k <= 10_000 and k % (opts.check_every * 4) == 0:
            ratio = rp / max(rd, 1e-300)
            if ratio > 10.0 or ratio < 0.1:
                factor = min(max(math.sqrt(ratio), 1e-2), 1e2)
                rho_new = min(max(rho * factor, 1e-6), 1e6)
                if rho_new != rho:
                    u *= rho / rho_new
                    rho = rho_new

    if final is None:
        # max_iters exhausted: report the best iterate seen.
        _, xu, su, zu, rp, rd, gap, k_best = best
        final = (xu, su, zu, rp, rd, gap)
        iterations = opts.max_iters

    xu, su, zu, rp, rd, gap = final
    return ConicSolution(
        x=xu,
        s=su,
        z=zu,
        status=status,
        primal_residual=rp,
        dual_residual=rd,
        gap=gap,
        iterations=iterations,
        objective=float(c @ xu),
        history=tuple(history),
    )


def _row_ids(A: sp.csr_matrix) -> np.ndarray:
    return np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))


def kkt_check(problem: ConicProblem, solution: ConicSolution) -> dict:
    """Recompute KKT residuals from the problem data alone.

    Uses only the stored (x, s, z) triple and fresh cone projections, so it
    is an independent check on the solver's reported residuals. Cone
    membership violations are folded into the respective residuals.
    """
    x, s, z = solution.x, solution.s, solution.z
    A, b, c = problem.A, problem.b, problem.c
    if x.size != problem.n_vars or s.size != problem.n_rows or z.size != problem.n_rows:
        raise DimensionError("solution does not match the problem dimensions")
    plan = _ConePlan(problem.cones)
    primal = (float(np.linalg.norm(A @ x + s - b)) + plan.distance(s)) / (
        1.0 + float(np.linalg.norm(b))
    )
    dual = (float(np.linalg.norm(A.T @ z + c)) + plan.distance(z, dual=True)) / (
        1.0 + float(np.linalg.norm(c))
    )
    cx = float(c @ x)
    bz = float(b @ z)
    gap = abs(cx + bz) / (1.0 + abs(cx) + abs(bz))
    return {"primal_res": primal, "dual_res": dual, "gap": gap}
