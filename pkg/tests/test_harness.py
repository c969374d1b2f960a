import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from proxkit.harness import (
    ExperimentConfig,
    brute_force_prox,
    gaussian_integral_check,
    moment_diagnostics,
    run_experiment,
    wendel_check,
)
from proxkit.harness.cli import main
from proxkit.harness.experiments import ConfigError, quadrature_sweep
from proxkit.harness.validation import BoundaryMinimizerError
from proxkit.problems import (
    LpRegressionInstance,
    NormInstance,
    QpInstance,
    make_oracle,
    qp_prox_closed_form,
    random_lp,
    random_qp,
    write_instance,
    zero_oracle,
)
from proxkit.rng import Rng

# --- quadrature oracle ---------------------------------------------------------------------


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("eta", [0.1, 1.0, 10.0])
def test_gaussian_integral_closed_form(d, eta):
    rep = gaussian_integral_check(d, eta, [(0.0, 0.5)])
    assert rep.integral_estimate == pytest.approx((2 * math.pi * eta) ** (d / 2), rel=1e-8)


def test_single_component_example():
    rep = gaussian_integral_check(1, 1.0, [(0.5, 0.0)])
    assert rep.condition_holds
    assert rep.lower_bound == pytest.approx(math.sqrt(2 * math.pi) / 2)
    assert rep.integral_estimate >= rep.lower_bound
    # closed form: int exp(-x^2/2 - |x|/2) = 2 sqrt(2 pi) e^(1/8) Q(1/2)
    exact = 2 * math.sqrt(2 * math.pi) * math.exp(1 / 8) * 0.5 * math.erfc(0.5 / math.sqrt(2))
    assert rep.integral_estimate == pytest.approx(exact, rel=1e-10)


def test_pure_quadratic_components_closed_form():
    # alpha = 1 components are exact Gaussians: 1/eta' = 1/eta + 2 sum a_i
    rep = gaussian_integral_check(2, 0.7, [(0.2, 1.0), (0.3, 1.0)])
    eta_p = 1.0 / (1.0 / 0.7 + 2 * 0.5)
    assert rep.integral_estimate == pytest.approx(2 * math.pi * eta_p, rel=1e-10)


def test_hybrid_example_with_corrected_constant():
    # the bound exp(-1 + sum (alpha_i - 1)/4) holds wherever the condition does
    for i in range(200):
        r = Rng(300 + i)
        u = r.uniform(4)
        d = 1 + int(u[0] * 3)
        eta = 10 ** (-1 + 2 * u[1])
        alphas = r.uniform(2)
        w = r.uniform(2)
        a = (u[2] / (eta * d) * w / w.sum()) ** ((alphas + 1) / 2)
        rep = gaussian_integral_check(d, eta, list(zip(a, alphas)))
        assert rep.condition_holds
        corrected = rep.gaussian_value * math.exp(-1 + np.sum(alphas - 1) / 4)
        assert rep.integral_estimate >= corrected


def test_stated_hybrid_bound_counterexample():
    rep = gaussian_integral_check(1, 1.0, [(0.5, 1.0), (0.5, 1.0)])
    assert rep.condition_holds
    assert rep.integral_estimate == pytest.approx(math.sqrt(2 * math.pi / 3), rel=1e-12)
    assert rep.integral_estimate < rep.lower_bound


def test_quadrature_argument_checks():
    with pytest.raises(ValueError):
        gaussian_integral_check(4, 1.0, [(0.0, 0.0)])
    with pytest.raises(ValueError):
        gaussian_integral_check(1, 1.0, [])
    with pytest.raises(ValueError):
        gaussian_integral_check(1, 1.0, [(-1.0, 0.0)])


@given(st.integers(1, 3), st.floats(0.05, 20.0), st.floats(0.0, 5.0), st.floats(0.0, 1.0))
def test_integral_decreases_in_a(d, eta, a, alpha):
    lo = gaussian_integral_check(d, eta, [(a, alpha)]).integral_estimate
    hi = gaussian_integral_check(d, eta, [(a + 0.1, alpha)]).integral_estimate
    assert hi < lo <= (2 * math.pi * eta) ** (d / 2) * (1 + 1e-12)


# --- Wendel --------------------------------------------------------------------------------


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0, 5.0, 10.0])
@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_wendel(t, s):
    lo, mid, hi = wendel_check(t, s)
    assert lo <= mid <= hi


def test_wendel_reference_value():
    # Gamma(2)/Gamma(1.5) = 2/sqrt(pi)
    assert wendel_check(1.0, 0.5)[1] == pytest.approx(2 / math.sqrt(math.pi), rel=1e-14)


# --- brute-force prox -------------------------------------------------------------------------


def test_brute_force_zero():
    y = np.array([0.7, -0.2])
    assert np.allclose(brute_force_prox(zero_oracle(2), y, 1.0), y)


def test_brute_force_soft_threshold():
    x = brute_force_prox(make_oracle(NormInstance(1)), np.array([2.0]), 1.0)
    assert abs(x[0] - 1.0) < 1e-6


def test_brute_force_matches_closed_form():
    inst = QpInstance([[2.0]], [-1.0])
    y = np.array([0.3])
    x = brute_force_prox(make_oracle(inst), y, 0.5)
    assert abs(x[0] - qp_prox_closed_form(inst, y, 0.5)[0]) < (8.0 / 400) * 4.0**-3


def test_brute_force_errors():
    with pytest.raises(ValueError):
        brute_force_prox(zero_oracle(3), np.zeros(3), 1.0)
    with pytest.raises(BoundaryMinimizerError):
        brute_force_prox(make_oracle(QpInstance([[0.0]], [-10.0])), np.zeros(1), 10.0, grid_halfwidth=1.0)


# --- moments -------------------------------------------------------------------------------------


def test_moments_constant_samples():
    mean, cov, se = moment_diagnostics(np.ones((10, 2)))
    assert mean.tolist() == [1.0, 1.0]
    assert np.all(cov == 0.0) and np.all(se == 0.0)


def test_moments_normal_draws():
    z = Rng(0).normal(100_000)
    mean, cov, se = moment_diagnostics(z)
    assert abs(mean[0]) <= 4 / math.sqrt(z.size)
    assert se[0] == pytest.approx(1 / math.sqrt(z.size), rel=0.02)
    with pytest.raises(ValueError):
        moment_diagnostics(np.ones((1, 3)))


# --- experiments ------------------------------------------------------------------------------------


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig("nope", tmp_path)
    with pytest.raises(ConfigError):
        ExperimentConfig("prox_qp", tmp_path, parameters={"bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig("prox_qp", tmp_path, instance_path=tmp_path / "missing.json")
    cfg = ExperimentConfig("prox_qp", tmp_path, parameters={"full_scale": True})
    assert cfg.resolved()["d"] == 1000


def _read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_prox_qp_figure_data(tmp_path):
    res = run_experiment(ExperimentConfig("prox_qp", tmp_path))
    assert res.status == 0
    iters = res.summary["iterations"]
    assert iters[0.1] <= iters[1.0] <= iters[10.0]
    for eta in (0.1, 1, 10):
        rows = _read(tmp_path / f"prox_qp_eta{eta:g}.csv")
        assert rows[0] == ["iter", "delta_j", "true_gap", "step_norm"]
        assert float(rows[-1][2]) <= 1e-6
        assert float(rows[-1][1]) <= 1e-6
    assert "plot" in (tmp_path / "prox_qp.gp").read_text()


def test_prox_lp_figure_data(tmp_path):
    res = run_experiment(ExperimentConfig("prox_lp", tmp_path))
    assert res.status == 0
    for p in (1.2, 1.5, 1.8, 2.0):
        deltas = [float(r[1]) for r in _read(tmp_path / f"prox_lp_p{p:g}.csv")[1:]]
        assert all(b < a for a, b in zip(deltas, deltas[1:]))
        assert deltas[-1] <= 1e-6


def test_non_convergence_is_recorded(tmp_path):
    res = run_experiment(ExperimentConfig("prox_qp", tmp_path, parameters={"d": 10, "max_iters": 2}))
    assert res.status == 1
    assert len(res.failures) >= 1
    assert all((tmp_path / f"prox_qp_eta{eta:g}.csv").exists() for eta in (0.1, 1, 10))


def test_experiment_with_instance_file(tmp_path):
    path = tmp_path / "lp.json"
    write_instance(path, random_lp(30, 4, 1.5, Rng(2), normalize=False))
    res = run_experiment(ExperimentConfig("prox_lp", tmp_path / "out", instance_path=path,
                                          parameters={"ps": [1.3, 2.0]}))
    assert res.status == 0 and len(res.files) == 3
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig("prox_qp", tmp_path / "out2", instance_path=path))


def test_csv_roundtrip_bit_exact(tmp_path):
    run_experiment(ExperimentConfig("prox_qp", tmp_path, parameters={"d": 8}))
    from proxkit.prox import ProxParams, solve_prox

    inst = random_qp(8, Rng(7), seed=7)
    y = Rng(7).split(1).normal(8)
    r = solve_prox(make_oracle(inst), y, ProxParams(1.0, 1e-6))
    rows = _read(tmp_path / "prox_qp_eta1.csv")[1:]
    assert [float(row[1]) for row in rows] == r.delta_trajectory


def test_sampling_experiments(tmp_path):
    res = run_experiment(ExperimentConfig("sample_holder", tmp_path, parameters={"steps": 100, "chains": 2}))
    assert res.status == 0
    assert res.summary["mean_trials"] <= res.summary["trial_bound"]
    res = run_experiment(ExperimentConfig("sample_hybrid", tmp_path, parameters={"steps": 100, "chains": 2}))
    assert res.status == 0
    assert len(_read(tmp_path / "sample_hybrid.csv")) == 201


def test_apbm_experiment_small(tmp_path):
    res = run_experiment(ExperimentConfig("apbm", tmp_path, parameters={"d": 5, "max_outer": 50, "seed": 3}))
    assert res.status == 0
    assert res.summary["best_value"] >= res.summary["f_star"] - 1e-9
    assert len(_read(tmp_path / "apbm_trace.csv")) == 51


def test_quadrature_sweep_is_deterministic():
    assert quadrature_sweep(10, 5) == quadrature_sweep(10, 5)


# --- CLI ---------------------------------------------------------------------------------------------


@pytest.fixture
def qp_file(tmp_path):
    path = tmp_path / "qp.json"
    write_instance(path, random_qp(4, Rng(1), seed=1))
    return path


def test_cli_prox(qp_file, tmp_path, capsys):
    trace = tmp_path / "t.csv"
    assert main(["prox", "--instance", str(qp_file), "--eta", "2", "--delta", "1e-8", "--trace", str(trace)]) == 0
    assert "J=" in capsys.readouterr().out
    assert _read(trace)[0] == ["iter", "delta_j", "f_eta_best", "model_optimum", "step_norm"]


def test_cli_optimize_exit_codes(qp_file, tmp_path):
    trace = tmp_path / "o.csv"
    args = ["optimize", "--instance", str(qp_file), "--eta0", "10", "--beta0", "0.5", "--epsilon", "1e-4",
            "--max-outer", "20", "--trace", str(trace)]
    assert main(args) == 0
    assert len(_read(trace)) == 21
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_outer": 3}))
    assert main(["--config", str(cfg)] + args) == 0
    assert len(_read(trace)) == 4


def test_cli_optimize_inner_failure(tmp_path):
    path = tmp_path / "big.json"
    write_instance(path, random_qp(30, Rng(1)))
    # delta far below what the dual solver can certify in double precision
    code = main(["optimize", "--instance", str(path), "--eta0", "1e6", "--epsilon", "1e-300", "--max-outer", "1"])
    assert code == 2


def test_cli_sample_env_seed(tmp_path, monkeypatch):
    inst = tmp_path / "n.json"
    write_instance(inst, NormInstance(2))
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    base = ["sample", "--instance", str(inst), "--steps", "20", "--chains", "2"]
    monkeypatch.setenv("PROXKIT_SEED", "5")
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--out", str(b), "--seed", "5"]) == 0
    assert main(base + ["--out", str(c), "--seed", "6"]) == 0
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()
    rows = _read(a)
    assert rows[0] == ["chain_id", "step", "x0", "x1", "trials_this_step"]


def test_cli_bench_and_validate(tmp_path, capsys):
    assert main(["bench", "--kind", "prox_qp", "--out-dir", str(tmp_path), "--param", "d=10"]) == 0
    assert (tmp_path / "prox_qp_eta10.csv").exists()
    assert main(["bench", "--kind", "prox_qp", "--out-dir", str(tmp_path), "--param", "bad=1"]) == 1
    code = main(["validate", "--out-dir", str(tmp_path), "--param", "points=20"])
    assert (tmp_path / "wendel.csv").exists() and (tmp_path / "quadrature_sweep.csv").exists()
    assert code in (0, 1)


def test_cli_bad_config_key(qp_file, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(SystemExit):
        main(["--config", str(cfg), "prox", "--instance", str(qp_file)])
