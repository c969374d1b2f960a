"""Regularized cutting-plane method for the proximal subproblem.

Given a center y and stepsize eta, :func:`solve_prox` returns a
delta-solution of ``min_x f(x) + ||x - y||^2 / (2 eta)``: a point whose
objective exceeds the optimum by at most delta, certified by the dual lower
bound of the cutting-plane model.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bundle import CutModel, ModelSolveError, minimize_model
from .problems import HolderSpec, SubgradientOracle

DEFAULT_MAX_ITERS = 10_000

TRACE_COLUMNS = ("iter", "delta_j", "f_eta_best", "model_optimum", "step_norm")


@dataclass(frozen=True)
class ProxParams:
    eta: float
    delta: float
    max_iters: Optional[int] = None
    gap_tol_ratio: float = 0.1

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not 0 < self.gap_tol_ratio <= 1:
            raise ValueError("gap_tol_ratio must lie in (0, 1]")

    @property
    def gap_tol(self) -> float:
        return self.delta * self.gap_tol_ratio


@dataclass
class ProxResult:
    x_last: np.ndarray
    x_best: np.ndarray
    iters: int
    delta_trajectory: list[float]
    test_held_throughout: bool
    oracle_calls: int
    converged: bool = True
    f_eta_best: float = math.nan
    f_best: float = math.nan
    grad_norm_at_center: float = math.nan
    model_optimum: list[float] = field(default_factory=list)
    f_eta_trajectory: list[float] = field(default_factory=list)
    step_norms: list[float] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)
    dual_gaps: list[float] = field(default_factory=list)
    gap_tol: float = 0.0
    message: str = ""

    @property
    def delta1(self) -> float:
        return self.delta_trajectory[0]

    def trace_rows(self):
        for j in range(self.iters):
            yield (j + 1, self.delta_trajectory[j], self.f_eta_trajectory[j], self.model_optimum[j], self.step_norms[j])


def solve_prox(
    oracle: SubgradientOracle,
    y,
    params: ProxParams,
    beta0: Optional[float] = None,
    holder: Optional[HolderSpec] = None,
    keep_iterates: bool = False,
) -> ProxResult:
    """Run the regularized cutting-plane method from ``x_0 = y``.

    ``beta0`` switches on the stepsize test ``(1 + beta0) delta_j <= delta_{j-1}``
    (checked whenever ``delta_j > delta``); the outcome is reported in
    ``test_held_throughout``.  ``holder`` is only used to size the default
    iteration cap.
    """
    if beta0 is not None and not 0 < beta0 <= 1:
        raise ValueError("beta0 must lie in (0, 1]")
    y = np.asarray(y, dtype=float)
    eta, delta, gap_tol = params.eta, params.delta, params.gap_tol
    calls0 = oracle.eval_count

    f_y, g_y = oracle.eval(y)
    max_iters = params.max_iters
    if max_iters is None:
        max_iters = DEFAULT_MAX_ITERS
        if holder is not None and holder.is_single:
            bound = delta1_bound(holder, float(np.linalg.norm(g_y)), eta)
            max_iters = 10 * predicted_iters_holder(holder, eta, delta, bound)

    def f_eta(x, fx):
        r = x - y
        return fx + (r @ r) / (2.0 * eta)

    model = CutModel(y, eta).append(y, f_y, g_y)
    x_prev = y
    x_best, F_best, f_best = y, f_y, f_y
    lam = None

    deltas: list[float] = []
    optima: list[float] = []
    f_etas: list[float] = []
    steps: list[float] = []
    gaps: list[float] = []
    iterates: list[np.ndarray] = []
    test_ok = True
    converged = False
    message = ""

    j = 0
    while j < max_iters:
        j += 1
        try:
            mm = minimize_model(model, gap_tol, warm_start=lam)
        except ModelSolveError as exc:
            j -= 1
            message = f"cut model solve failed at iteration {j + 1}: {exc}"
            break
        lam = mm.dual_weights
        x_j = mm.minimizer
        f_j, g_j = oracle.eval(x_j)
        F_j = f_eta(x_j, f_j)
        if F_j <= F_best:
            x_best, F_best, f_best = x_j, F_j, f_j
        delta_j = F_best - mm.model_optimum

        if beta0 is not None and deltas and delta_j > delta and (1.0 + beta0) * delta_j > deltas[-1]:
            test_ok = False
        deltas.append(delta_j)
        optima.append(mm.model_optimum)
        f_etas.append(F_best)
        steps.append(float(np.linalg.norm(x_j - x_prev)))
        gaps.append(mm.dual_gap)
        if keep_iterates:
            iterates.append(x_j)
        x_prev = x_j

        if delta_j <= delta:
            converged = True
            break
        model = model.append(x_j, f_j, g_j)
    else:
        message = f"no delta-solution within {max_iters} iterations (delta_J = {deltas[-1]:.3e})"

    return ProxResult(
        x_last=x_prev,
        x_best=x_best,
        iters=len(deltas),
        delta_trajectory=deltas,
        test_held_throughout=test_ok,
        oracle_calls=oracle.eval_count - calls0,
        converged=converged,
        f_eta_best=F_best,
        f_best=f_best,
        grad_norm_at_center=float(np.linalg.norm(g_y)),
        model_optimum=optima,
        f_eta_trajectory=f_etas,
        step_norms=steps,
        iterates=iterates,
        dual_gaps=gaps,
        gap_tol=gap_tol,
        message=message,
    )


def delta1_bound(spec: HolderSpec, grad_norm_at_y: float, eta: float) -> float:
    """Upper bound ``sum_i L_i eta**(a_i+1) ||f'(y)||**(a_i+1) / (a_i+1)`` on delta_1."""
    a, L = spec.alphas, spec.constants
    return float(np.sum(L * (eta * grad_norm_at_y) ** (a + 1.0) / (a + 1.0)))


def holder_rate(spec: HolderSpec, eta: float, delta: float) -> float:
    """Contraction parameter beta of the gap sequence for a single Hölder component."""
    alpha, L = spec.as_single()
    if L == 0.0:
        return math.inf
    return (1.0 / (2.0 * eta)) * ((alpha + 1.0) / L) ** (2.0 / (alpha + 1.0)) * delta ** ((1.0 - alpha) / (alpha + 1.0))


def predicted_iters_holder(spec: HolderSpec, eta: float, delta: float, delta1: float) -> int:
    """Iteration bound ``j0 = 1 + ceil((1+beta)/beta * log(delta1/delta))``."""
    if delta1 <= delta:
        return 1
    beta = holder_rate(spec, eta, delta)
    factor = 1.0 if math.isinf(beta) else (1.0 + beta) / beta
    return 1 + math.ceil(factor * math.log(delta1 / delta))


def hybrid_M(spec: HolderSpec, delta: float) -> float:
    """``M = sum_i L_i**(2/(a_i+1)) / ((a_i+1) delta)**((1-a_i)/(a_i+1))``."""
    a, L = spec.alphas, spec.constants
    return float(np.sum(L ** (2.0 / (a + 1.0)) / ((a + 1.0) * delta) ** ((1.0 - a) / (a + 1.0))))


def hybrid_iter_bound(spec: HolderSpec, eta: float, delta: float, delta1: float) -> float:
    """``(1 + eta M) log(2 delta1 / delta) + 1``."""
    if delta1 <= delta:
        return 1.0
    return (1.0 + eta * hybrid_M(spec, delta)) * math.log(2.0 * delta1 / delta) + 1.0


def write_trace_csv(result: ProxResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in result.trace_rows():
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
