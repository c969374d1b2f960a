import numpy as np
import pytest
from hypothesis import given, strategies as st

from proxkit.bundle import (
    Cut,
    CutModel,
    ModelSolveError,
    append_cut,
    minimize_model,
    model_value,
    regularized_value,
)
from proxkit.problems import DimensionError, LpRegressionInstance, make_oracle, random_lp, random_qp
from proxkit.rng import Rng


def model(center, eta, cuts):
    m = CutModel(np.atleast_1d(np.asarray(center, dtype=float)), eta)
    for p, v, g in cuts:
        m = m.append(np.atleast_1d(np.asarray(p, dtype=float)), v, np.atleast_1d(np.asarray(g, dtype=float)))
    return m


# --- model_value ---------------------------------------------------------------------


def test_model_value_zero_cut():
    m = model([0.0], 1.0, [(0.0, 0.0, 0.0)])
    assert model_value(m, [5.0]) == 0.0


def test_model_value_abs_from_two_cuts():
    m = model([0.0], 1.0, [(0.0, 0.0, 1.0), (0.0, 0.0, -1.0)])
    assert model_value(m, [2.0]) == 2.0


def test_model_value_hand_evaluation():
    m = model([0.0], 1.0, [(1.0, 1.0, 2.0), (0.0, 0.0, -1.0)])
    assert model_value(m, [0.5]) == 0.0


def test_model_value_errors():
    with pytest.raises(ValueError):
        model_value(CutModel([0.0], 1.0), [0.0])
    with pytest.raises(DimensionError):
        model_value(model([0.0], 1.0, [(0.0, 0.0, 1.0)]), [0.0, 1.0])
    with pytest.raises(DimensionError):
        CutModel([0.0], 1.0).append([0.0, 1.0], 0.0, [1.0, 0.0])
    with pytest.raises(ValueError):
        CutModel([0.0], 0.0)


def test_cut_callable():
    c = Cut(np.array([1.0]), 1.0, np.array([2.0]))
    assert c([0.5]) == 0.0


# --- minimize_model --------------------------------------------------------------------


def test_single_cut_closed_form():
    y, g, eta = np.array([1.0, -2.0]), np.array([0.5, 3.0]), 0.7
    m = model(y, eta, [(y, 4.0, g)])
    mm = minimize_model(m, 1e-12)
    assert np.allclose(mm.minimizer, y - eta * g, atol=1e-15)
    assert mm.model_optimum == pytest.approx(4.0 - 0.5 * eta * g @ g, abs=1e-13)
    assert mm.dual_weights.tolist() == [1.0]


def test_zero_cut():
    mm = minimize_model(model([0.3], 2.0, [(0.0, 0.0, 0.0)]), 1e-12)
    assert mm.minimizer.tolist() == [0.3]
    assert mm.model_optimum == 0.0


def test_abs_model_symmetry():
    mm = minimize_model(model([0.0], 1.0, [(0.0, 0.0, 1.0), (0.0, 0.0, -1.0)]), 1e-12)
    assert np.allclose(mm.dual_weights, [0.5, 0.5])
    assert abs(mm.minimizer[0]) < 1e-12
    assert abs(mm.model_optimum) < 1e-12


def test_gap_tol_must_be_positive():
    with pytest.raises(ValueError):
        minimize_model(model([0.0], 1.0, [(0.0, 0.0, 1.0)]), 0.0)
    with pytest.raises(ValueError):
        minimize_model(CutModel([0.0], 1.0), 1e-6)


def test_iteration_cap_raises():
    r = Rng(4)
    m = CutModel(np.zeros(5), 50.0)
    for _ in range(30):
        m = m.append(r.normal(5), float(r.normal()), r.normal(5))
    with pytest.raises(ModelSolveError) as info:
        minimize_model(m, 1e-14, max_iter=1)
    assert info.value.gap > 1e-14


def test_duplicate_cut_is_redundant():
    r = Rng(2)
    inst = random_qp(2, r)
    o = make_oracle(inst)
    m = CutModel(np.zeros(2), 1.0)
    for _ in range(3):
        m = append_cut(m, o, r.normal(2))
    m2 = m.append(m.points[1], m.values[1], m.slopes[1])
    assert len(m2) == len(m) + 1
    a, b = minimize_model(m, 1e-13), minimize_model(m2, 1e-13)
    assert np.allclose(a.minimizer, b.minimizer, atol=1e-6)
    assert a.model_optimum == pytest.approx(b.model_optimum, abs=1e-12)


def test_append_keeps_cuts_and_gram():
    r = Rng(8)
    m = CutModel(np.zeros(3), 1.0)
    for k in range(5):
        m = m.append(r.normal(3), float(r.normal()), r.normal(3))
        assert len(m) == k + 1
    assert np.allclose(m.gram, m.slopes @ m.slopes.T)
    assert len(m.cuts) == 5


def test_json_dump_roundtrip():
    r = Rng(1)
    m = CutModel(r.normal(2), 0.5)
    for _ in range(3):
        m = m.append(r.normal(2), float(r.normal()), r.normal(2))
    doc = m.to_dict()
    assert set(doc) == {"cuts", "center", "eta"}
    assert set(doc["cuts"][0]) == {"point", "value", "slope"}
    back = CutModel.from_dict(doc)
    assert np.array_equal(back.points, m.points) and np.array_equal(back.offsets, m.offsets)


def _grid_min(m, half=6.0, n=2001):
    """Brute-force min of the regularised model on a 1-D grid, refined twice."""
    c, h = m.center[0], half
    for _ in range(3):
        xs = np.linspace(c - h, c + h, n)
        vals = np.max(m.offsets[None, :] + np.outer(xs - m.center[0], m.slopes[:, 0]), axis=1)
        vals = vals + (xs - m.center[0]) ** 2 / (2 * m.eta)
        k = int(np.argmin(vals))
        c, h = xs[k], 4 * h / (n - 1)
    return float(vals[k])


@given(st.integers(0, 10_000), st.integers(1, 12), st.floats(0.05, 20.0))
def test_dual_certificate_against_grid_1d(seed, k, eta):
    r = Rng(seed)
    m = CutModel(r.normal(1), eta)
    for _ in range(k):
        m = m.append(2 * r.normal(1), float(r.normal()), 2 * r.normal(1))
    mm = minimize_model(m, 1e-9)
    best = _grid_min(m, half=2 * eta * np.abs(m.slopes).max() + 1.0)
    # the grid value bounds the true minimum from above
    assert mm.model_optimum <= best + 1e-12
    assert mm.primal_value <= best + 1e-9 + 1e-12 * abs(best)
    assert mm.model_optimum >= best - 1e-6


@given(st.integers(0, 10_000), st.integers(1, 25), st.integers(1, 6), st.floats(0.01, 100.0))
def test_model_min_invariants(seed, k, d, eta):
    r = Rng(seed)
    m = CutModel(r.normal(d), eta)
    for _ in range(k):
        m = m.append(r.normal(d), float(r.normal()), r.normal(d))
    tol = 1e-7
    mm = minimize_model(m, tol)
    lam = mm.dual_weights
    assert np.all(lam >= 0.0) and abs(lam.sum() - 1.0) <= 1e-12
    # KKT stationarity holds exactly by construction
    assert np.array_equal(mm.minimizer, m.center - eta * (m.slopes.T @ lam))
    assert 0.0 <= mm.dual_gap <= tol
    assert mm.primal_value == pytest.approx(regularized_value(m, mm.minimizer))
    # strong-convexity growth from the dual certificate
    for _ in range(20):
        x = mm.minimizer + r.normal(d) * 10.0 ** (-2 + 3 * r.uniform())
        assert regularized_value(m, x) >= mm.primal_value - mm.dual_gap + (x - mm.minimizer) @ (x - mm.minimizer) / (2 * eta) - 1e-9 * (1 + abs(mm.primal_value))


@given(st.integers(0, 10_000))
def test_warm_start_padding(seed):
    r = Rng(seed)
    m = CutModel(np.zeros(3), 1.0)
    for _ in range(6):
        m = m.append(r.normal(3), float(r.normal()), r.normal(3))
    first = minimize_model(m, 1e-10)
    m2 = m.append(r.normal(3), float(r.normal()), r.normal(3))
    warm = minimize_model(m2, 1e-10, warm_start=first.dual_weights)
    cold = minimize_model(m2, 1e-10)
    assert warm.model_optimum == pytest.approx(cold.model_optimum, abs=3e-10)
    # a new cut never lowers the regularised model optimum
    assert warm.model_optimum >= first.model_optimum - 1e-12


def test_lower_model_monotone_and_below_f():
    r = Rng(5)
    for inst in (random_qp(2, r), random_lp(6, 2, 1.3, r), LpRegressionInstance([[1.0, 2.0]], [0.5], 1.0)):
        o = make_oracle(inst)
        m = CutModel(np.zeros(2), 1.0)
        X = 3 * r.normal((100, 2))
        prev = None
        for _ in range(4):
            m = append_cut(m, o, 2 * r.normal(2))
            cur = np.array([model_value(m, x) for x in X])
            fx = np.array([o.value(x) for x in X])
            assert np.all(cur <= fx + 1e-12)
            if prev is not None:
                assert np.all(cur >= prev - 1e-12 * (1 + np.abs(prev)))
            prev = cur


def test_large_bundle_with_flat_dual():
    # many cuts at nearly parallel slopes make the dual Hessian rank deficient
    r = Rng(3)
    inst = random_qp(50, r)
    o = make_oracle(inst)
    m = CutModel(r.normal(50), 10.0)
    for _ in range(120):
        m = append_cut(m, o, 10 * r.normal(50))
    mm = minimize_model(m, 1e-7)
    assert mm.dual_gap <= 1e-7
