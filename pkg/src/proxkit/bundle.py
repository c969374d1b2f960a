"""Piecewise-affine cutting-plane model and its regularized minimisation.

The model is ``f_j(x) = max_i f(x_i) + <g_i, x - x_i>`` and the regularized
problem ``min_x f_j(x) + ||x - y||^2 / (2 eta)`` is solved through its dual,
a concave quadratic over the unit simplex::

    D(lam) = sum_i lam_i b_i - (eta/2) ||sum_i lam_i g_i||^2,
    b_i    = f(x_i) + <g_i, y - x_i>.

Any simplex point gives a primal point ``x = y - eta * sum_i lam_i g_i`` and a
certified lower bound ``D(lam)``; the gap between the two is the Frank-Wolfe
gap ``max_i c_i - <lam, c>`` with ``c = b - eta * H lam`` and ``H = G G'``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problems import DimensionError, SubgradientOracle


class ModelSolveError(RuntimeError):
    """The dual solver hit its iteration cap before reaching the gap tolerance."""

    def __init__(self, message: str, gap: float):
        super().__init__(message)
        self.gap = gap


@dataclass(frozen=True)
class Cut:
    point: np.ndarray
    value: float
    slope: np.ndarray

    def __call__(self, x) -> float:
        return float(self.value + self.slope @ (np.asarray(x, dtype=float) - self.point))


@dataclass
class ModelMin:
    minimizer: np.ndarray
    model_optimum: float
    dual_weights: np.ndarray
    dual_gap: float
    primal_value: float
    iterations: int = 0


class CutModel:
    """Bundle of cuts around a prox center; treat instances as immutable values.

    ``append`` returns a new model.  The Gram matrix of the slopes and the
    offsets ``b`` are carried along so that appending costs O(j d).
    """

    def __init__(self, center, eta: float, points=None, values=None, slopes=None, _gram=None):
        if eta <= 0:
            raise ValueError("eta must be positive")
        self.center = np.asarray(center, dtype=float)
        self.eta = float(eta)
        d = self.center.shape[0]
        self.points = np.empty((0, d)) if points is None else np.asarray(points, dtype=float).reshape(-1, d)
        self.values = np.empty(0) if values is None else np.asarray(values, dtype=float).reshape(-1)
        self.slopes = np.empty((0, d)) if slopes is None else np.asarray(slopes, dtype=float).reshape(-1, d)
        self.gram = self.slopes @ self.slopes.T if _gram is None else _gram
        self.offsets = self.values + np.einsum("ij,ij->i", self.slopes, self.center - self.points)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def cuts(self) -> list[Cut]:
        return [Cut(p, float(v), g) for p, v, g in zip(self.points, self.values, self.slopes)]

    def append(self, point, value: float, slope) -> "CutModel":
        point = np.asarray(point, dtype=float)
        slope = np.asarray(slope, dtype=float)
        if point.shape != (self.dim,) or slope.shape != (self.dim,):
            raise DimensionError(f"cut of dimension {point.shape}/{slope.shape} for a model in R^{self.dim}")
        cross = self.slopes @ slope
        j = len(self)
        gram = np.empty((j + 1, j + 1))
        gram[:j, :j] = self.gram
        gram[:j, j] = cross
        gram[j, :j] = cross
        gram[j, j] = slope @ slope
        return CutModel(
            self.center,
            self.eta,
            np.vstack([self.points, point]),
            np.append(self.values, value),
            np.vstack([self.slopes, slope]),
            _gram=gram,
        )

    def to_dict(self) -> dict:
        return {
            "cuts": [{"point": p.tolist(), "value": float(v), "slope": g.tolist()}
                     for p, v, g in zip(self.points, self.values, self.slopes)],
            "center": self.center.tolist(),
            "eta": self.eta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CutModel":
        cuts = doc["cuts"]
        d = len(doc["center"])
        return cls(
            doc["center"],
            doc["eta"],
            np.array([c["point"] for c in cuts], dtype=float).reshape(-1, d),
            np.array([c["value"] for c in cuts], dtype=float),
            np.array([c["slope"] for c in cuts], dtype=float).reshape(-1, d),
        )


def model_value(m: CutModel, x) -> float:
    """``max_i value_i + <slope_i, x - point_i>``; the first maximal cut wins."""
    if len(m) == 0:
        raise ValueError("empty cut model")
    x = np.asarray(x, dtype=float)
    if x.shape != (m.dim,):
        raise DimensionError(f"expected a point of shape ({m.dim},), got {x.shape}")
    pieces = m.offsets + m.slopes @ (x - m.center)
    return float(pieces[int(np.argmax(pieces))])


def regularized_value(m: CutModel, x) -> float:
    """``f_j(x) + ||x - center||^2 / (2 eta)``."""
    x = np.asarray(x, dtype=float)
    r = x - m.center
    return model_value(m, x) + (r @ r) / (2.0 * m.eta)


def append_cut(m: CutModel, oracle: SubgradientOracle, x) -> CutModel:
    value, slope = oracle.eval(x)
    return m.append(x, value, slope)


def _null_basis(k: int) -> np.ndarray:
    """Orthonormal basis (k x k-1) of the hyperplane sum(p) = 0."""
    Q, _ = np.linalg.qr(np.eye(k) - 1.0 / k, mode="reduced")
    # first k-1 columns of the QR of the centering projector span the hyperplane
    return Q[:, : k - 1]


def minimize_model(
    m: CutModel,
    gap_tol: float,
    warm_start: Optional[np.ndarray] = None,
    max_iter: int = 10_000,
) -> ModelMin:
    """Solve ``min_x f_j(x) + ||x - center||^2/(2 eta)`` to dual gap ``gap_tol``.

    Primal active-set method on the simplex dual.  On the current face the
    reduced Hessian is eigendecomposed: a Newton step is taken on its range
    and, when the reduced gradient has a component in its null space, a
    descent step along that flat direction is taken to the boundary.  The
    face grows by the most violated cut and shrinks by blocking weights.
    ``warm_start`` may be shorter than the bundle; it is padded with zeros.
    """
    if len(m) == 0:
        raise ValueError("empty cut model")
    if gap_tol <= 0:
        raise ValueError("gap_tol must be positive")
    eta, b = m.eta, m.offsets
    Hs = eta * m.gram
    j = len(m)

    lam = np.zeros(j)
    if warm_start is not None and len(warm_start) > 0:
        w = np.asarray(warm_start, dtype=float)[:j]
        lam[: w.shape[0]] = np.maximum(w, 0.0)
    if lam.sum() <= 0.0:
        lam[int(np.argmax(b))] = 1.0
    lam /= lam.sum()
    free = lam > 0.0
    face_optimal = False
    scale = 1.0 + np.abs(Hs).max()

    for it in range(max_iter):
        c = b - Hs @ lam
        gap = float(c.max() - lam @ c)
        if gap <= gap_tol:
            return _finish(m, lam, it)
        if face_optimal or free.sum() == 1:
            outside = np.where(free, -np.inf, c)
            k = int(np.argmax(outside))
            if not outside[k] > (lam @ c):
                raise ModelSolveError(f"active set stalled with gap {gap:.3e} > {gap_tol:.3e}", gap)
            free[k] = True
            face_optimal = False
            continue

        idx = np.flatnonzero(free)
        Hf = Hs[np.ix_(idx, idx)]
        Z = _null_basis(idx.shape[0])
        Hr = Z.T @ Hf @ Z
        gr = -(Z.T @ c[idx])
        w, V = np.linalg.eigh(Hr)
        curved = w > 1e-12 * max(w[-1], 0.0)
        coef = V.T @ gr
        flat_part = V[:, ~curved] @ coef[~curved]
        if np.linalg.norm(flat_part) > 1e-12 * (1.0 + np.linalg.norm(gr)):
            p = -(Z @ flat_part)
            newton = False
        else:
            p = -(Z @ (V[:, curved] @ (coef[curved] / w[curved])))
            newton = True

        slope = -(c[idx] @ p)
        if not slope < 0.0:
            face_optimal = True
            continue
        # exact line search along p, capped by the first weight to hit zero
        curvature = p @ Hf @ p
        t_star = -slope / curvature if curvature > 0.0 else np.inf
        neg = p < 0.0
        ratios = np.where(neg, lam[idx] / np.where(neg, -p, 1.0), np.inf)
        r = int(np.argmin(ratios))
        blocked = ratios[r] <= t_star
        step = ratios[r] if blocked else t_star
        if not np.isfinite(step):
            raise ModelSolveError("unbounded face direction in cut-model dual", gap)
        lam[idx] = lam[idx] + step * p
        if blocked:
            lam[idx[r]] = 0.0
            free[idx[r]] = False
        lam = np.maximum(lam, 0.0)
        lam /= lam.sum()
        free &= lam > 0.0
        face_optimal = newton and not blocked
    c = b - Hs @ lam
    gap = float(c.max() - lam @ c)
    raise ModelSolveError(f"dual solver reached {max_iter} iterations with gap {gap:.3e} > {gap_tol:.3e}", gap)


def _largest_eigenvalue(G: np.ndarray) -> float:
    small = G.T @ G if G.shape[1] < G.shape[0] else G @ G.T
    return float(np.linalg.eigvalsh(small)[-1])


def _finish(m: CutModel, lam: np.ndarray, iterations: int) -> ModelMin:
    s = m.slopes.T @ lam
    x = m.center - m.eta * s
    dual = float(lam @ m.offsets - 0.5 * m.eta * (s @ s))
    primal = regularized_value(m, x)
    return ModelMin(
        minimizer=x,
        model_optimum=dual,
        dual_weights=lam,
        dual_gap=max(primal - dual, 0.0),
        primal_value=primal,
        iterations=iterations,
    )
