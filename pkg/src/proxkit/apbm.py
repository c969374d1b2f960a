"""Adaptive proximal bundle method.

Each outer cycle solves one proximal subproblem to accuracy epsilon/2 with the
regularized cutting-plane method.  If the inner gaps ever fail to contract
by the factor ``1 + beta0`` the stepsize is halved for the next cycle; the
inner output is accepted either way.  No Hölder constants are needed.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .problems import HolderSpec, SubgradientOracle
from .prox import ProxParams, ProxResult, solve_prox

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("k", "eta_used", "eta_k", "f_ytilde", "best_value", "inner_iters", "halved")


@dataclass(frozen=True)
class ApbmParams:
    eta0: float
    beta0: float
    epsilon: float
    max_outer: int = 100
    target_value: Optional[float] = None
    gap_tol_ratio: float = 0.1
    inner_max_iters: Optional[int] = None

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if not 0 < self.beta0 <= 1:
            raise ValueError("beta0 must lie in (0, 1]")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be a positive integer")


@dataclass
class OuterRecord:
    k: int
    eta_used: float  # eta_{k-1}, the stepsize of this cycle's subproblem
    eta: float  # eta_k, after the halving decision
    y: np.ndarray  # y_k = x_J
    y_tilde: np.ndarray  # ytilde_k = xtilde_J
    f_at_ytilde: float
    inner_iters: int
    halved: bool
    gap_tol: float


@dataclass
class ApbmTrace:
    y0: np.ndarray
    outer: list[OuterRecord] = field(default_factory=list)
    best_value: float = math.inf
    best_point: Optional[np.ndarray] = None
    best_history: list[float] = field(default_factory=list)
    stopped_on_target: bool = False

    @property
    def etas(self) -> list[float]:
        return [r.eta for r in self.outer]

    @property
    def total_inner_iters(self) -> int:
        return sum(r.inner_iters for r in self.outer)


class InnerSolveError(RuntimeError):
    """An inner proximal solve did not converge; carries the trace so far."""

    def __init__(self, message: str, trace: ApbmTrace, result: ProxResult):
        super().__init__(message)
        self.trace = trace
        self.result = result


def apbm_run(
    oracle: SubgradientOracle,
    y0,
    params: ApbmParams,
    probe=None,
) -> ApbmTrace:
    """Run ``params.max_outer`` cycles (or until ``target_value`` is reached).

    ``probe`` is an optional callback ``probe(record, result)`` invoked after
    every cycle; tests use it to check per-cycle inequalities.
    """
    y = np.asarray(y0, dtype=float)
    eta = params.eta0
    delta = params.epsilon / 2.0
    trace = ApbmTrace(y0=y.copy())
    log.info("APBM start: eta0=%g beta0=%g epsilon=%g", params.eta0, params.beta0, params.epsilon)

    for k in range(1, params.max_outer + 1):
        inner = ProxParams(eta, delta, params.inner_max_iters, params.gap_tol_ratio)
        res = solve_prox(oracle, y, inner, beta0=params.beta0)
        if not res.converged:
            raise InnerSolveError(f"cycle {k}: {res.message}", trace, res)
        halved = not res.test_held_throughout
        eta_next = eta / 2.0 if halved else eta
        rec = OuterRecord(
            k=k,
            eta_used=eta,
            eta=eta_next,
            y=res.x_last,
            y_tilde=res.x_best,
            f_at_ytilde=res.f_best,
            inner_iters=res.iters,
            halved=halved,
            gap_tol=inner.gap_tol,
        )
        trace.outer.append(rec)
        if res.f_best < trace.best_value:
            trace.best_value = res.f_best
            trace.best_point = res.x_best
        trace.best_history.append(trace.best_value)
        if probe is not None:
            probe(rec, res)
        if halved:
            log.debug("cycle %d: stepsize test failed, eta %g -> %g", k, eta, eta_next)
        y, eta = res.x_last, eta_next
        if params.target_value is not None and trace.best_value <= params.target_value:
            trace.stopped_on_target = True
            break
    return trace


def eta_floor(spec: HolderSpec, beta0: float, epsilon: float, eta0: float) -> float:
    """Lower bound ``min{(1/(4 beta0)) ((a+1)/L)**(2/(a+1)) (eps/2)**((1-a)/(a+1)), eta0}``."""
    alpha, L = spec.as_single()
    if L == 0.0:
        return eta0
    first = (
        (1.0 / (4.0 * beta0))
        * ((alpha + 1.0) / L) ** (2.0 / (alpha + 1.0))
        * (epsilon / 2.0) ** ((1.0 - alpha) / (alpha + 1.0))
    )
    return min(first, eta0)


def write_trace_csv(trace: ApbmTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for rec, best in zip(trace.outer, trace.best_history):
            w.writerow([rec.k, repr(rec.eta_used), repr(rec.eta), repr(rec.f_at_ytilde), repr(best),
                        rec.inner_iters, int(rec.halved)])
