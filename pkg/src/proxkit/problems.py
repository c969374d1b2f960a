"""Convex test functions with hand-coded subgradients.

Three families are provided: unconstrained quadratics, (mixed-exponent)
l_p regression and a scaled Euclidean norm.  Each comes with a counting
:class:`SubgradientOracle` and, where known, the Hölder metadata
(:class:`HolderSpec`) the complexity bounds are stated in.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .rng import Rng

PSD_TOL = 1e-10


class DimensionError(ValueError):
    """Point dimension does not match the problem dimension."""


class SubgradientOracle:
    """First-order oracle returning ``(f(x), f'(x))``.

    ``evaluate`` must be pure.  ``value_batch`` (optional) evaluates f on the
    rows of a matrix and is used by the rejection sampler; each row counts as
    one evaluation.  The counter is guarded by a lock so one oracle may be
    shared between worker threads.
    """

    def __init__(
        self,
        dim: int,
        evaluate: Callable[[np.ndarray], tuple[float, np.ndarray]],
        value_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        name: str = "oracle",
    ):
        self.dim = int(dim)
        self._evaluate = evaluate
        self._value_batch = value_batch
        self.name = name
        self._count = 0
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"SubgradientOracle({self.name!r}, dim={self.dim}, eval_count={self.eval_count})"

    @property
    def eval_count(self) -> int:
        return self._count

    def _bump(self, k: int = 1) -> None:
        with self._lock:
            self._count += k

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionError(f"expected a point of shape ({self.dim},), got {x.shape}")
        return x

    def eval(self, x) -> tuple[float, np.ndarray]:
        x = self._check(x)
        self._bump()
        value, grad = self._evaluate(x)
        return float(value), np.asarray(grad, dtype=float)

    __call__ = eval

    def value(self, x) -> float:
        return self.eval(x)[0]

    def values(self, X) -> np.ndarray:
        """f evaluated on each row of ``X``."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionError(f"expected shape (k, {self.dim}), got {X.shape}")
        self._bump(X.shape[0])
        if self._value_batch is not None:
            return np.asarray(self._value_batch(X), dtype=float)
        return np.array([self._evaluate(row)[0] for row in X], dtype=float)


@dataclass(frozen=True)
class HolderSpec:
    """Hölder data ``[(alpha_i, L_i)]`` of a (hybrid) convex function.

    One component means ``||f'(u) - f'(v)|| <= L ||u - v||**alpha``; several
    components bound the variation by the sum of such terms.
    """

    components: tuple[tuple[float, float], ...]

    def __post_init__(self):
        comps = tuple((float(a), float(L)) for a, L in self.components)
        if not comps:
            raise ValueError("HolderSpec needs at least one component")
        for a, L in comps:
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"Hölder exponent {a} outside [0, 1]")
            if L < 0.0:
                raise ValueError(f"Hölder constant {L} is negative")
        object.__setattr__(self, "components", comps)

    @classmethod
    def single(cls, alpha: float, L: float) -> "HolderSpec":
        return cls(((alpha, L),))

    @property
    def alphas(self) -> np.ndarray:
        return np.array([a for a, _ in self.components])

    @property
    def constants(self) -> np.ndarray:
        return np.array([L for _, L in self.components])

    @property
    def is_single(self) -> bool:
        return len(self.components) == 1

    def as_single(self) -> tuple[float, float]:
        if not self.is_single:
            raise ValueError(f"expected a single-component HolderSpec, got {len(self.components)}")
        return self.components[0]

    def gradient_variation_bound(self, r) -> np.ndarray:
        """``sum_i L_i r**alpha_i`` (upper bound on ``||f'(u)-f'(v)||`` at distance r)."""
        r = np.asarray(r, dtype=float)[..., None]
        return np.sum(self.constants * r**self.alphas, axis=-1)

    def descent_bound(self, r) -> np.ndarray:
        """``sum_i L_i/(alpha_i+1) r**(alpha_i+1)`` (linearisation error bound)."""
        r = np.asarray(r, dtype=float)[..., None]
        a = self.alphas
        return np.sum(self.constants / (a + 1.0) * r ** (a + 1.0), axis=-1)


@dataclass
class QpInstance:
    """``f(x) = x'Qx/2 + <c, x>`` with symmetric PSD ``Q``."""

    Q: np.ndarray
    c: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        d = self.c.shape[0]
        if self.Q.shape != (d, d):
            raise DimensionError(f"Q has shape {self.Q.shape}, c has length {d}")
        if not np.allclose(self.Q, self.Q.T, rtol=0.0, atol=1e-12):
            raise ValueError("Q is not symmetric")
        if d and np.linalg.eigvalsh(self.Q).min() < -PSD_TOL:
            raise ValueError("Q is not positive semidefinite")

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def holder_spec(self) -> HolderSpec:
        """Smooth case: alpha = 1 with L the largest eigenvalue of Q."""
        lmax = float(np.linalg.eigvalsh(self.Q).max()) if self.dim else 0.0
        return HolderSpec.single(1.0, max(lmax, 0.0))

    def minimizer(self) -> np.ndarray:
        """Unconstrained minimiser ``-Q^{-1} c`` (Q must be nonsingular)."""
        return scipy.linalg.solve(self.Q, -self.c, assume_a="pos")


@dataclass
class LpRegressionInstance:
    """``f(x) = (1/n) sum_i |a_i'x - b_i|**p_i`` with every ``p_i`` in [1, 2].

    With ``normalize=False`` the 1/n factor is dropped (``||Ax - b||_p^p``).
    """

    A: np.ndarray
    b: np.ndarray
    p: Union[float, Sequence[float], np.ndarray]
    normalize: bool = True
    seed: Optional[int] = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        n = self.A.shape[0]
        if self.b.shape != (n,):
            raise DimensionError(f"A has {n} rows, b has shape {self.b.shape}")
        p = np.asarray(self.p, dtype=float)
        self.p = np.full(n, float(p)) if p.ndim == 0 else p
        if self.p.shape != (n,):
            raise DimensionError(f"exponents have shape {self.p.shape}, expected ({n},)")
        if np.any(self.p < 1.0) or np.any(self.p > 2.0):
            raise ValueError("every exponent p_i must lie in [1, 2]")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def uniform_exponent(self) -> bool:
        return bool(np.all(self.p == self.p[0]))

    @property
    def scale(self) -> float:
        return 1.0 / self.n if self.normalize else 1.0


@dataclass
class NormInstance:
    """``f(x) = weight * ||x||_2``; Lipschitz, so alpha = 0 with L = 2 * weight."""

    dim: int
    weight: float = 1.0
    seed: Optional[int] = None

    def holder_spec(self) -> HolderSpec:
        return HolderSpec.single(0.0, 2.0 * self.weight)


Instance = Union[QpInstance, LpRegressionInstance, NormInstance]


def make_qp_oracle(inst: QpInstance) -> SubgradientOracle:
    Q, c = inst.Q, inst.c

    def evaluate(x):
        Qx = Q @ x
        return 0.5 * x @ Qx + c @ x, Qx + c

    def value_batch(X):
        return 0.5 * np.einsum("ij,ij->i", X @ Q, X) + X @ c

    return SubgradientOracle(inst.dim, evaluate, value_batch, name="qp")


def make_lp_oracle(inst: LpRegressionInstance) -> SubgradientOracle:
    A, b, p, s = inst.A, inst.b, inst.p, inst.scale

    def evaluate(x):
        r = A @ x - b
        ar = np.abs(r)
        # sign(0) * |0|**0 is taken as 0, i.e. the zero subgradient at l1 kinks
        dphi = p * np.sign(r) * ar ** (p - 1.0)
        return s * np.sum(ar**p), s * (A.T @ dphi)

    def value_batch(X):
        return s * np.sum(np.abs(X @ A.T - b) ** p, axis=1)

    return SubgradientOracle(inst.dim, evaluate, value_batch, name="lp")


def make_norm_oracle(inst: NormInstance) -> SubgradientOracle:
    w = inst.weight

    def evaluate(x):
        nx = np.linalg.norm(x)
        return w * nx, (w / nx) * x if nx > 0.0 else np.zeros_like(x)

    def value_batch(X):
        return w * np.linalg.norm(X, axis=1)

    return SubgradientOracle(inst.dim, evaluate, value_batch, name="norm")


def make_oracle(inst: Instance) -> SubgradientOracle:
    if isinstance(inst, QpInstance):
        return make_qp_oracle(inst)
    if isinstance(inst, LpRegressionInstance):
        return make_lp_oracle(inst)
    if isinstance(inst, NormInstance):
        return make_norm_oracle(inst)
    raise TypeError(f"unknown instance type {type(inst).__name__}")


def zero_oracle(dim: int) -> SubgradientOracle:
    return make_qp_oracle(QpInstance(np.zeros((dim, dim)), np.zeros(dim)))


def holder_spec_of_lp(inst: LpRegressionInstance) -> HolderSpec:
    """Hölder data of an l_p regression objective.

    ``phi(t) = |t|**p`` has a (p-1)-Hölder derivative with constant
    ``p 2**(2-p)``, so row i contributes ``alpha_i = p_i - 1`` and
    ``L_i = s p_i 2**(2-p_i) ||a_i||**p_i`` (s = 1/n or 1).  A common exponent
    collapses to one component with the summed constant; mixed exponents keep
    one component per row.
    """
    p = inst.p
    row_L = inst.scale * p * 2.0 ** (2.0 - p) * np.linalg.norm(inst.A, axis=1) ** p
    if inst.uniform_exponent:
        return HolderSpec.single(p[0] - 1.0, float(row_L.sum()))
    return HolderSpec(tuple(zip(p - 1.0, row_L)))


def holder_spec_of(inst: Instance) -> HolderSpec:
    if isinstance(inst, LpRegressionInstance):
        return holder_spec_of_lp(inst)
    return inst.holder_spec()


def qp_prox_closed_form(inst: QpInstance, y, eta: float) -> np.ndarray:
    """Exact minimiser ``(Q + I/eta)^{-1} (y/eta - c)`` of ``f(x) + ||x-y||^2/(2 eta)``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    y = np.asarray(y, dtype=float)
    if y.shape != (inst.dim,):
        raise DimensionError(f"expected y of shape ({inst.dim},), got {y.shape}")
    H = inst.Q + np.eye(inst.dim) / eta
    try:
        return scipy.linalg.solve(H, y / eta - inst.c, assume_a="pos")
    except np.linalg.LinAlgError as exc:  # PSD Q with eta > 0 cannot be singular
        raise RuntimeError("internal error: prox system is numerically singular") from exc


# --- instance generation --------------------------------------------------------


def random_qp(d: int, rng: Rng, seed: Optional[int] = None) -> QpInstance:
    """Q = AA'/max|AA'| with Gaussian A, Gaussian c."""
    A = rng.normal((d, d))
    AAt = A @ A.T
    Q = AAt / np.abs(AAt).max()
    Q = 0.5 * (Q + Q.T)
    return QpInstance(Q, rng.normal(d), seed=seed)


def random_lp(
    n: int, d: int, p, rng: Rng, normalize: bool = True, seed: Optional[int] = None
) -> LpRegressionInstance:
    """Gaussian A divided by its entrywise max, Gaussian b; ``p`` scalar or per-row."""
    A = rng.normal((n, d))
    A /= np.abs(A).max()
    return LpRegressionInstance(A, rng.normal(n), p, normalize=normalize, seed=seed)


# --- instance files ----------------------------------------------------------------


def instance_to_dict(inst: Instance) -> dict:
    if isinstance(inst, QpInstance):
        doc = {"type": "qp", "Q": inst.Q.tolist(), "c": inst.c.tolist()}
    elif isinstance(inst, LpRegressionInstance):
        p = float(inst.p[0]) if inst.uniform_exponent else inst.p.tolist()
        doc = {"type": "lp", "A": inst.A.tolist(), "b": inst.b.tolist(), "p": p}
        if not inst.normalize:
            doc["normalize"] = False
    elif isinstance(inst, NormInstance):
        doc = {"type": "norm", "d": inst.dim, "weight": inst.weight}
    else:
        raise TypeError(f"unknown instance type {type(inst).__name__}")
    doc["seed"] = inst.seed
    return doc


def instance_from_dict(doc: dict) -> Instance:
    kind = doc.get("type")
    seed = doc.get("seed")
    if kind == "qp":
        return QpInstance(doc["Q"], doc["c"], seed=seed)
    if kind == "lp":
        return LpRegressionInstance(doc["A"], doc["b"], doc["p"], normalize=doc.get("normalize", True), seed=seed)
    if kind == "norm":
        return NormInstance(int(doc["d"]), float(doc.get("weight", 1.0)), seed=seed)
    raise ValueError(f"unknown instance type {kind!r}")


def write_instance(path, inst: Instance) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    Path(path).write_text(json.dumps(instance_to_dict(inst)) + "\n", encoding="utf-8")


def read_instance(path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
