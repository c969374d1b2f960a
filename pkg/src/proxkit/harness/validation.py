"""Independent oracles used to check the solvers and the sampler.

Everything here is deliberately naive: grids, 1-D quadrature and closed
forms, sharing no code with the cutting-plane machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from ..problems import SubgradientOracle

TAIL_REL = 1e-14
TRUNCATION_REL = 1e-10


class BoundaryMinimizerError(RuntimeError):
    """Grid minimizer landed on the boundary; widen the grid."""


class TruncationError(RuntimeError):
    """Radial quadrature tail exceeded the allowed relative error."""


@dataclass
class QuadratureReport:
    d: int
    eta: float
    a: tuple[float, ...]
    alpha: tuple[float, ...]
    integral_estimate: float
    lower_bound: float
    condition_holds: bool
    gaussian_value: float
    radius: float

    @property
    def hybrid(self) -> bool:
        return len(self.a) > 1

    @property
    def bound_holds(self) -> bool:
        return self.integral_estimate >= self.lower_bound


def sphere_area(d: int) -> float:
    """Surface area ``2 pi^(d/2) / Gamma(d/2)`` of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def gaussian_integral(d: int, eta: float) -> float:
    """``int exp(-||x||^2 / (2 eta)) dx = (2 pi eta)^(d/2)``."""
    return (2.0 * math.pi * eta) ** (d / 2.0)


def _radius(d: int, eta: float) -> float:
    # r^(d-1) exp(-r^2/(2 eta)) peaks at sqrt(eta (d-1)); walk out until the
    # envelope is TAIL_REL of its peak.  The penalty terms only shrink the tail.
    peak_r = math.sqrt(eta * max(d - 1, 0))

    def log_env(r):
        return (d - 1) * math.log(r) - r * r / (2.0 * eta) if r > 0 else (0.0 if d == 1 else -math.inf)

    top = log_env(peak_r) if peak_r > 0 else 0.0
    R = max(peak_r, math.sqrt(eta))
    while log_env(R) - top > math.log(TAIL_REL):
        R *= 1.25
    return R


def gaussian_integral_check(
    d: int,
    eta: float,
    components: Sequence[tuple[float, float]],
    samples: int = 8,
) -> QuadratureReport:
    """Radial quadrature of ``int exp(-||x||^2/(2 eta) - sum a_i ||x||^(alpha_i+1)) dx``.

    ``components`` is a list of ``(a, alpha)``.  One component is compared
    with the lower bound ``(2 pi eta)^(d/2) / 2`` valid when
    ``2 a (eta d)^((alpha+1)/2) <= 1``; several components with
    ``(2 pi eta)^(d/2) exp(-1/2 + sum (alpha_i - 1)/4)`` valid when
    ``eta d sum a_i^(2/(alpha_i+1)) <= 1``.  ``samples`` is the number of
    equal panels on [0, R], each integrated by adaptive Gauss-Kronrod.
    """
    if d not in (1, 2, 3):
        raise ValueError("radial quadrature is only provided for d in {1, 2, 3}")
    if not eta > 0:
        raise ValueError("eta must be positive")
    if len(components) == 0:
        raise ValueError("need at least one (a, alpha) component")
    a = np.array([c[0] for c in components], dtype=float)
    alpha = np.array([c[1] for c in components], dtype=float)
    if np.any(a < 0) or np.any((alpha < 0) | (alpha > 1)):
        raise ValueError("components need a >= 0 and alpha in [0, 1]")

    def integrand(r):
        return r ** (d - 1) * math.exp(-r * r / (2.0 * eta) - float(np.sum(a * r ** (alpha + 1.0))))

    R = _radius(d, eta)
    edges = np.linspace(0.0, R, max(int(samples), 1) + 1)
    radial = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
        radial += val
    total = sphere_area(d) * radial

    # tail of the unpenalised Gaussian beyond R bounds the truncation error
    tail = sphere_area(d) * 0.5 * (2.0 * eta) ** (d / 2.0) * special.gamma(d / 2.0) * special.gammaincc(d / 2.0, R * R / (2.0 * eta))
    if tail > TRUNCATION_REL * total:
        raise TruncationError(f"tail {tail:.3e} exceeds {TRUNCATION_REL:g} of the integral; widen the domain")

    g = gaussian_integral(d, eta)
    if len(components) == 1:
        cond = 2.0 * a[0] * (eta * d) ** ((alpha[0] + 1.0) / 2.0) <= 1.0
        lower = g / 2.0
    else:
        cond = eta * d * float(np.sum(a ** (2.0 / (alpha + 1.0)))) <= 1.0
        lower = g * math.exp(-0.5 + float(np.sum(alpha - 1.0)) / 4.0)
    return QuadratureReport(
        d=d,
        eta=eta,
        a=tuple(float(v) for v in a),
        alpha=tuple(float(v) for v in alpha),
        integral_estimate=total,
        lower_bound=lower,
        condition_holds=bool(cond),
        gaussian_value=g,
        radius=R,
    )


def wendel_check(t: float, s: float) -> tuple[float, float, float]:
    """Return ``(t^(1-s), Gamma(t+1)/Gamma(t+s), (t+s)^(1-s))`` via log-gamma."""
    ratio = math.exp(special.gammaln(t + 1.0) - special.gammaln(t + s))
    return t ** (1.0 - s), ratio, (t + s) ** (1.0 - s)


def brute_force_prox(
    oracle: SubgradientOracle,
    y,
    eta: float,
    grid_halfwidth: float = 4.0,
    grid_points: int = 401,
    levels: int = 3,
) -> np.ndarray:
    """Grid minimizer of ``f(x) + ||x - y||^2 / (2 eta)`` for d <= 2.

    After the initial grid around y, each refinement level re-grids a box of
    four cells around the incumbent (spacing shrinks by ``grid_points / 8``).
    """
    y = np.asarray(y, dtype=float)
    d = y.shape[0]
    if d > 2:
        raise ValueError("brute_force_prox is limited to d <= 2")
    if grid_points < 5:
        raise ValueError("grid_points must be at least 5")

    def objective(P):
        r = P - y
        return oracle.values(P) + np.sum(r * r, axis=1) / (2.0 * eta)

    center, half = y.copy(), float(grid_halfwidth)
    for level in range(levels + 1):
        axes = [np.linspace(center[i] - half, center[i] + half, grid_points) for i in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        P = np.stack([m.ravel() for m in mesh], axis=1)
        k = int(np.argmin(objective(P)))
        idx = np.unravel_index(k, (grid_points,) * d)
        if level == 0 and any(i in (0, grid_points - 1) for i in idx):
            raise BoundaryMinimizerError("minimizer on the grid boundary; widen grid_halfwidth")
        center = P[k]
        half = 4.0 * half / (grid_points - 1)
    return center


def moment_diagnostics(samples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample mean, unbiased covariance and standard errors of the mean."""
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two samples")
    mean = X.mean(axis=0)
    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    se = np.sqrt(np.diag(cov) / n)
    return mean, cov, se
