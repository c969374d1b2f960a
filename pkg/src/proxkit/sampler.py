"""Proximal sampling for log-concave targets ``exp(-f)``.

The chain alternates ``y ~ N(x, eta I)`` and an exact restricted Gaussian
oracle ``x ~ exp(-f(x) - ||x - y||^2 / (2 eta))``.  The oracle is realised by
rejection sampling: a delta-solution of the proximal subproblem gives a
Gaussian envelope ``exp(-h1)`` with

    h1(x) = ||x - x_J||^2 / (2 eta) + f_y^eta(xtilde_J) - delta,

which lies below ``f_y^eta`` everywhere, so ``exp(h1 - f_y^eta) <= 1`` is a
valid acceptance probability.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .problems import HolderSpec, SubgradientOracle
from .prox import ProxParams, ProxResult, solve_prox
from .rng import Rng

DEFAULT_DELTA = 0.1
TRIAL_CAP = 1_000_000
MAX_STEPSIZE = 1e6
LOG_ACCEPT_TOL = 1e-12


class TrialCapExceeded(RuntimeError):
    """Rejection loop exceeded its cap; eta or delta is misconfigured."""


class EnvelopeViolation(RuntimeError):
    """A positive log acceptance ratio: the proposal does not lie below the target."""


@dataclass
class RgoOutcome:
    sample: np.ndarray
    trials: int
    prox: ProxResult
    log_accept_probs: list[float] = field(default_factory=list)


class _Envelope:
    """Gaussian envelope built from one proximal solve at center y."""

    def __init__(self, oracle: SubgradientOracle, y, eta: float, delta: float, prox: Optional[ProxResult] = None):
        self.oracle = oracle
        self.y = np.asarray(y, dtype=float)
        self.eta = eta
        self.delta = delta
        self.prox = prox if prox is not None else solve_prox(oracle, self.y, ProxParams(eta, delta))
        if not self.prox.converged:
            raise RuntimeError(f"proximal solve failed inside the RGO: {self.prox.message}")
        self.mean = self.prox.x_last
        self.offset = self.prox.f_eta_best - delta
        self.sd = math.sqrt(eta)
        self.tol = LOG_ACCEPT_TOL * max(1.0, abs(self.prox.f_eta_best))

    def log_ratio(self, X: np.ndarray, fX) -> np.ndarray:
        """``h1(X) - f_y^eta(X)`` for proposals X (rows) with values fX."""
        dy = X - self.y
        dm = X - self.mean
        la = (np.sum(dm * dm, axis=-1) - np.sum(dy * dy, axis=-1)) / (2.0 * self.eta) + self.offset - fX
        if np.any(la > self.tol):
            raise EnvelopeViolation(f"log acceptance ratio {np.max(la):.3e} > 0: delta-certificate broken")
        return la


def rgo_sample(
    oracle: SubgradientOracle,
    y,
    eta: float,
    delta: float,
    rng: Rng,
    trial_cap: int = TRIAL_CAP,
) -> RgoOutcome:
    """One exact draw from ``exp(-f(x) - ||x - y||^2 / (2 eta))``.

    The proximal subproblem is solved once; proposals ``N(x_J, eta I)`` are
    then accepted with probability ``exp(h1 - f_y^eta)``.
    """
    if not eta > 0 or not delta > 0:
        raise ValueError("eta and delta must be positive")
    env = _Envelope(oracle, y, eta, delta)
    d = env.y.shape[0]
    logs: list[float] = []
    for trial in range(1, trial_cap + 1):
        X = env.mean + env.sd * rng.normal(d)
        u = rng.uniform()
        la = float(env.log_ratio(X, oracle.value(X)))
        logs.append(la)
        if math.log(u) <= la:
            return RgoOutcome(X, trial, env.prox, logs)
    raise TrialCapExceeded(f"no acceptance in {trial_cap} trials (eta={eta:g}, delta={delta:g})")


def rgo_sample_many(
    oracle: SubgradientOracle,
    y,
    eta: float,
    delta: float,
    rng: Rng,
    n: int,
    batch: int = 4096,
    trial_cap: int = TRIAL_CAP,
) -> tuple[np.ndarray, np.ndarray, ProxResult]:
    """``n`` independent RGO draws at one center, sharing the proximal solve.

    The solve is deterministic given ``y``, so this is equivalent to ``n``
    calls of :func:`rgo_sample`; proposals are evaluated in batches.
    Returns ``(samples, trials_per_sample, prox)``.
    """
    env = _Envelope(oracle, y, eta, delta)
    d = env.y.shape[0]
    samples = np.empty((n, d))
    trials = np.empty(n, dtype=np.int64)
    got, run, total = 0, 0, 0
    while got < n:
        X = env.mean + env.sd * rng.normal((batch, d))
        u = rng.uniform(batch)
        accept = np.log(u) <= env.log_ratio(X, oracle.values(X))
        for i in np.flatnonzero(accept):
            # trials since the previous acceptance, counting this proposal
            trials[got] = run + i + 1
            samples[got] = X[i]
            run = -(i + 1)
            got += 1
            if got == n:
                break
        run += batch
        total += batch
        if total > trial_cap * max(n, 1):
            raise TrialCapExceeded(f"acceptance rate too low (eta={eta:g}, delta={delta:g})")
    return samples, trials, env.prox


@dataclass(frozen=True)
class AsfChain:
    state: np.ndarray
    eta: float
    step_count: int = 0
    cumulative_oracle_calls: int = 0
    cumulative_trials: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        state = np.asarray(self.state, dtype=float)
        if not np.all(np.isfinite(state)):
            raise ValueError("chain state must be finite")
        object.__setattr__(self, "state", state)


def asf_step(chain: AsfChain, oracle: SubgradientOracle, delta: float, rng: Rng) -> tuple[AsfChain, RgoOutcome]:
    """One alternating step: ``y ~ N(x, eta I)``, then ``x ~ RGO(y)``."""
    calls0 = oracle.eval_count
    y = chain.state + math.sqrt(chain.eta) * rng.normal(chain.state.shape[0])
    out = rgo_sample(oracle, y, chain.eta, delta, rng)
    new = replace(
        chain,
        state=out.sample,
        step_count=chain.step_count + 1,
        cumulative_oracle_calls=chain.cumulative_oracle_calls + (oracle.eval_count - calls0),
        cumulative_trials=chain.cumulative_trials + out.trials,
    )
    return new, out


@dataclass
class ChainRun:
    states: np.ndarray  # (steps + 1, d), row 0 is the start
    trials: np.ndarray  # (steps,)
    inner_iters: np.ndarray  # (steps,)
    chain: AsfChain


def run_chain(
    oracle: SubgradientOracle, x0, eta: float, delta: float, steps: int, rng: Rng
) -> ChainRun:
    chain = AsfChain(np.asarray(x0, dtype=float), eta)
    states = np.empty((steps + 1, chain.state.shape[0]))
    states[0] = chain.state
    trials = np.empty(steps, dtype=np.int64)
    inner = np.empty(steps, dtype=np.int64)
    for k in range(steps):
        chain, out = asf_step(chain, oracle, delta, rng)
        states[k + 1] = chain.state
        trials[k] = out.trials
        inner[k] = out.prox.iters
    return ChainRun(states, trials, inner, chain)


def run_chains(
    oracle: SubgradientOracle, x0, eta: float, delta: float, steps: int, chains: int, seed: int
) -> list[ChainRun]:
    """Independent chains, chain i driven by ``Rng(seed).split(i)``."""
    master = Rng(seed)
    return [run_chain(oracle, x0, eta, delta, steps, master.split(i)) for i in range(chains)]


def write_chains_csv(runs: list[ChainRun], path) -> None:
    d = runs[0].states.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["chain_id", "step"] + [f"x{i}" for i in range(d)] + ["trials_this_step"])
        for cid, run in enumerate(runs):
            for k in range(1, run.states.shape[0]):
                w.writerow([cid, k] + [repr(float(v)) for v in run.states[k]] + [int(run.trials[k - 1])])


def stepsize_holder(spec: HolderSpec, d: int) -> float:
    """Largest eta with ``eta <= (a+1)**(2/(a+1)) / ((2L)**(2/(a+1)) d)``."""
    alpha, L = spec.as_single()
    if L == 0.0:
        return MAX_STEPSIZE
    e = 2.0 / (alpha + 1.0)
    return (alpha + 1.0) ** e / ((2.0 * L) ** e * d)


def stepsize_hybrid(spec: HolderSpec, d: int, max_eta: float = MAX_STEPSIZE) -> float:
    """Largest eta with ``eta d sum_i (L_i/(a_i+1))**(2/(a_i+1)) <= 1``."""
    a, L = spec.alphas, spec.constants
    s = float(np.sum((L / (a + 1.0)) ** (2.0 / (a + 1.0))))
    if s == 0.0:
        return max_eta
    return min(1.0 / (d * s), max_eta)


def hybrid_trial_bound(spec: HolderSpec, delta: float) -> float:
    """Expected-trials bound ``exp(delta + 1/2 + sum_i (1 - a_i)/4)``."""
    return math.exp(delta + 0.5 + float(np.sum(1.0 - spec.alphas)) / 4.0)


def holder_trial_bound(delta: float) -> float:
    """Expected-trials bound ``2 exp(delta)`` under the single-component stepsize."""
    return 2.0 * math.exp(delta)
