"""Spectrum-recovery front-ends.

Three convex programs over the complex grid vector r, all compiled onto the
cone solver through the real lifting:

* ``solve_bp``     -- min ||r||_1  s.t.  B r = y
* ``solve_lasso``  -- min ||r||_1  s.t.  ||B r - y||_2 <= mu
* ``solve_asd``    -- min t        s.t.  ||y - B r||_2 <= sqrt(M) * delta * t,
                                          ||r||_1 <= t

The third is the distortion-robust program: the residual bound scales with
the estimate's own L1 mass through the element-level perturbation bound
delta, so the program trades data fit against sparsity in one epigraph
variable. Its optimum satisfies t = max(||r||_1, ||y - B r||_2 / (sqrt(M)
delta)) because at least one of the two cones is tight.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DimensionError
from .solver import (
    NONNEG,
    SOC,
    ZERO,
    Cone,
    ConicProblem,
    ConicSolution,
    SolverOptions,
    lift_complex,
    solve,
)

__all__ = [
    "RecoveryResult",
    "Certificate",
    "solve_bp",
    "solve_lasso",
    "solve_asd",
    "certify",
    "write_recovery_csv",
    "write_diagnostics_json",
]

METHODS = ("bp", "lasso", "asd")


@dataclass
class RecoveryResult:
    r_hat: np.ndarray
    method: str
    objective_value: float
    epigraph_t: float | None
    status: str
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    wall_time: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == "optimal"


@dataclass(frozen=True)
class Certificate:
    ok: bool
    residual_norm: float
    l1_norm: float
    slacks: dict
    violations: tuple[str, ...]


def _embed_matrix(B: np.ndarray) -> np.ndarray:
    return np.block([[B.real, -B.imag], [B.imag, B.real]])


def _embed_vector(y: np.ndarray) -> np.ndarray:
    return np.concatenate([y.real, y.imag])


def _check_shapes(B: np.ndarray, y: np.ndarray) -> tuple[int, int]:
    if B.ndim != 2:
        raise DimensionError("measurement matrix must be 2-D")
    m, n = B.shape
    if y.ndim != 1 or y.size != m:
        raise DimensionError(f"data vector length {y.size} does not match {m} rows")
    if m > n:
        raise DimensionError(f"expected a wide matrix (M <= N), got {m}x{n}")
    return m, n


def _modulus_block(lift, d):
    rows, cols, vals, cones = lift.modulus_cone_rows()
    return sp.coo_matrix((vals, (rows, cols)), shape=(3 * lift.n_complex, d)).tocsr(), cones


def _bp_problem(B: np.ndarray, y: np.ndarray) -> ConicProblem:
    m, n = B.shape
    lift = lift_complex(n)
    d = lift.dim
    c = np.zeros(d)
    c[lift.u_slice] = 1.0
    data = sp.hstack([sp.csr_matrix(_embed_matrix(B)), sp.csr_matrix((2 * m, n))]).tocsr()
    soc, soc_cones = _modulus_block(lift, d)
    A = sp.vstack([data, soc]).tocsr()
    b = np.concatenate([_embed_vector(y), np.zeros(3 * n)])
    return ConicProblem(c=c, A=A, b=b, cones=(Cone(ZERO, 2 * m),) + soc_cones, lifting=lift)


def _lasso_problem(B: np.ndarray, y: np.ndarray, mu: float) -> ConicProblem:
    m, n = B.shape
    lift = lift_complex(n)
    d = lift.dim
    c = np.zeros(d)
    c[lift.u_slice] = 1.0
    data = sp.vstack(
        [
            sp.csr_matrix((1, d)),  # s0 = mu
            sp.hstack([sp.csr_matrix(_embed_matrix(B)), sp.csr_matrix((2 * m, n))]),
        ]
    ).tocsr()
    soc, soc_cones = _modulus_block(lift, d)
    A = sp.vstack([data, soc]).tocsr()
    b = np.concatenate([[mu], _embed_vector(y), np.zeros(3 * n)])
    return ConicProblem(c=c, A=A, b=b, cones=(Cone(SOC, 2 * m + 1),) + soc_cones, lifting=lift)


def _asd_problem(B: np.ndarray, y: np.ndarray, delta: float) -> ConicProblem:
    m, n = B.shape
    lift = lift_complex(n, n_extra=1)
    d = lift.dim
    t_col = lift.extra_index(0)
    c = np.zeros(d)
    c[t_col] = 1.0
    # residual cone: s = (sqrt(M) delta t, y - B r) in SOC(2M+1)
    head = sp.coo_matrix(([-(np.sqrt(m) * delta)], ([0], [t_col])), shape=(1, d))
    data = sp.vstack(
        [head, sp.hstack([sp.csr_matrix(_embed_matrix(B)), sp.csr_matrix((2 * m, n + 1))])]
    ).tocsr()
    # budget row: t - sum(u) >= 0
    budget_cols = np.append(np.arange(2 * n, 3 * n), t_col)
    budget_vals = np.append(np.ones(n), -1.0)
    budget = sp.coo_matrix((budget_vals, (np.zeros(n + 1, int), budget_cols)), shape=(1, d)).tocsr()
    soc, soc_cones = _modulus_block(lift, d)
    A = sp.vstack([data, budget, soc]).tocsr()
    b = np.concatenate([[0.0], _embed_vector(y), [0.0], np.zeros(3 * n)])
    cones = (Cone(SOC, 2 * m + 1), Cone(NONNEG, 1)) + soc_cones
    return ConicProblem(c=c, A=A, b=b, cones=cones, lifting=lift)


def _run(problem: ConicProblem, method: str, opts: SolverOptions | None) -> tuple[ConicSolution, np.ndarray, float]:
    start = time.perf_counter()
    sol = solve(problem, opts)
    elapsed = time.perf_counter() - start
    r_hat = problem.lifting.complex_part(sol.x)
    return sol, r_hat, elapsed


def solve_bp(B: np.ndarray, y: np.ndarray, opts: SolverOptions | None = None) -> RecoveryResult:
    """Minimum-L1 estimate consistent with the data exactly."""
    _check_shapes(B, y)
    sol, r_hat, elapsed = _run(_bp_problem(B, y), "bp", opts)
    return RecoveryResult(
        r_hat=r_hat,
        method="bp",
        objective_value=float(np.abs(r_hat).sum()),
        epigraph_t=None,
        status=sol.status,
        iterations=sol.iterations,
        primal_residual=sol.primal_residual,
        dual_residual=sol.dual_residual,
        gap=sol.gap,
        wall_time=elapsed,
        diagnostics={"solver_objective": sol.objective},
    )


def solve_lasso(B: np.ndarray, y: np.ndarray, mu: float, opts: SolverOptions | None = None) -> RecoveryResult:
    """Minimum-L1 estimate with a residual budget mu."""
    _check_shapes(B, y)
    if mu < 0:
        raise ConfigurationError(f"residual budget must be non-negative, got {mu}")
    sol, r_hat, elapsed = _run(_lasso_problem(B, y, mu), "lasso", opts)
    return RecoveryResult(
        r_hat=r_hat,
        method="lasso",
        objective_value=float(np.abs(r_hat).sum()),
        epigraph_t=None,
        status=sol.status,
        iterations=sol.iterations,
        primal_residual=sol.primal_residual,
        dual_residual=sol.dual_residual,
        gap=sol.gap,
        wall_time=elapsed,
        diagnostics={"solver_objective": sol.objective, "mu": float(mu)},
    )


def solve_asd(B: np.ndarray, y: np.ndarray, delta: float, opts: SolverOptions | None = None) -> RecoveryResult:
    """Distortion-robust estimate via the epigraph program.

    ``delta`` is the element-modulus bound assumed on the operator
    perturbation; it must be positive (for the delta -> 0 limit use
    :func:`solve_bp`, which this program approaches).
    """
    m, _ = _check_shapes(B, y)
    if delta <= 0:
        raise ConfigurationError(
            f"perturbation bound must be positive, got {delta}; the limiting "
            "program with no residual slack is solve_bp"
        )
    sol, r_hat, elapsed = _run(_asd_problem(B, y, delta), "asd", opts)
    t = float(sol.x[-1])
    residual = float(np.linalg.norm(y - B @ r_hat))
    l1 = float(np.abs(r_hat).sum())
    cone_scale = np.sqrt(m) * delta
    slack_res = cone_scale * t - residual
    slack_l1 = t - l1
    tight_tol = 1e-4 * (1.0 + abs(t))
    tight = []
    if slack_res <= tight_tol:
        tight.append("residual")
    if slack_l1 <= tight_tol:
        tight.append("l1")
    return RecoveryResult(
        r_hat=r_hat,
        method="asd",
        objective_value=t,
        epigraph_t=t,
        status=sol.status,
        iterations=sol.iterations,
        primal_residual=sol.primal_residual,
        dual_residual=sol.dual_residual,
        gap=sol.gap,
        wall_time=elapsed,
        diagnostics={
            "solver_objective": sol.objective,
            "delta": float(delta),
            "tight_cones": tuple(tight),
            "residual_norm": residual,
            "l1_norm": l1,
        },
    )


def certify(result: RecoveryResult, B: np.ndarray, y: np.ndarray, params: dict | None = None) -> Certificate:
    """Recompute feasibility of a recovery from scratch and flag violations.

    Works directly on the complex data (no lifting), so it is independent of
    the solver path. ``params`` may carry ``mu``, ``delta`` and ``tol``;
    missing values fall back to the result's own diagnostics.
    """
    params = dict(params or {})
    residual = float(np.linalg.norm(B @ result.r_hat - y))
    l1 = float(np.abs(result.r_hat).sum())
    y_norm = float(np.linalg.norm(y))
    tol = params.get("tol", 1e-5)
    violations = []
    slacks: dict[str, float] = {}
    if result.method == "bp":
        slacks["equality"] = residual
        if residual > tol * max(y_norm, 1.0):
            violations.append("equality")
    elif result.method == "lasso":
        mu = float(params.get("mu", result.diagnostics.get("mu", 0.0)))
        slacks["residual"] = residual - mu
        if residual > mu + tol * max(y_norm, 1.0):
            violations.append("residual")
    elif result.method == "asd":
        delta = float(params.get("delta", result.diagnostics.get("delta")))
        t = float(params.get("t", result.epigraph_t))
        cone_scale = np.sqrt(B.shape[0]) * delta
        slacks["residual"] = residual - cone_scale * t
        slacks["l1"] = l1 - t
        budget = tol * (1.0 + y_norm)
        if slacks["residual"] > budget:
            violations.append("residual")
        if slacks["l1"] > budget:
            violations.append("l1")
    else:
        raise ConfigurationError(f"unknown method {result.method!r}")
    return Certificate(
        ok=not violations,
        residual_norm=residual,
        l1_norm=l1,
        slacks=slacks,
        violations=tuple(violations),
    )


def write_recovery_csv(result: RecoveryResult, path: str | Path) -> None:
    """Dump a recovered spectrum as (bin, re, im, magnitude) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "re", "im", "magnitude"])
        for k, v in enumerate(result.r_hat):
            v = complex(v)
            writer.writerow([k, repr(v.real), repr(v.imag), repr(abs(v))])


def diagnostics_dict(result: RecoveryResult) -> dict:
    extras = {
        k: v for k, v in result.diagnostics.items() if isinstance(v, (int, float, str))
    }
    return {
        "method": result.method,
        "objective": result.objective_value,
        "epigraph_t": result.epigraph_t,
        "status": result.status,
        "iterations": result.iterations,
        "primal_residual": result.primal_residual,
        "dual_residual": result.dual_residual,
        "gap": result.gap,
        "wall_time": result.wall_time,
        **extras,
    }


def write_diagnostics_json(results: list[RecoveryResult], path: str | Path) -> None:
    payload = {r.method: diagnostics_dict(r) for r in results}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
