"""Thin wrappers over the LP and SDP backends with uniform failure reporting."""

from __future__ import annotations

import os
import warnings

import numpy as np
from scipy.optimize import linprog

from .errors import NumericalError

LP_TOL = 1e-7
SDP_TOL = 1e-7


def threads() -> int:
    """Worker count from ``TEMPOCORR_THREADS``, defaulting to the available cores."""
    cores = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1
    raw = os.environ.get("TEMPOCORR_THREADS", str(cores))
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"TEMPOCORR_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValueError("TEMPOCORR_THREADS must be at least 1")
    return n


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(0, None), allow_infeasible: bool = False):
    """Minimize ``c @ x`` with HiGHS. Returns the scipy result, or None if infeasible and allowed."""
    res = linprog(np.asarray(c, float), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs", options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9})
    if res.status == 2 and allow_infeasible:
        return None
    if res.status != 0:
        raise NumericalError(f"LP solver status {res.status}: {res.message}")
    return res


def solve_sdp(problem, verbose: bool = False) -> float:
    """Solve a cvxpy problem with Clarabel, falling back to SCS; returns the optimal value."""
    import cvxpy as cp

    errors = []
    for solver, opts in (("CLARABEL", {}),
                         ("SCS", {"eps": 1e-9, "max_iters": 200000})):
        if solver not in cp.installed_solvers():
            continue
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                value = problem.solve(solver=solver, verbose=verbose, **opts)
        except cp.error.SolverError as exc:
            errors.append(f"{solver}: {exc}")
            continue
        if problem.status == cp.OPTIMAL:
            return float(value)
        if problem.status == cp.OPTIMAL_INACCURATE:
            # stalled near the optimum: accept when every constraint holds to tolerance
            worst = max((float(np.max(c.violation())) for c in problem.constraints), default=0.0)
            if worst <= SDP_TOL:
                return float(value)
            errors.append(f"{solver}: inaccurate, constraint residual {worst:.2e}")
            continue
        errors.append(f"{solver}: status {problem.status}")
    raise NumericalError("SDP solve failed; " + "; ".join(errors))
