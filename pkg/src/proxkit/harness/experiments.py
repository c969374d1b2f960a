"""Experiment runner: figure data as CSV plus gnuplot scripts."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .. import apbm, prox, sampler
from ..problems import (
    LpRegressionInstance,
    NormInstance,
    QpInstance,
    holder_spec_of,
    make_oracle,
    qp_prox_closed_form,
    random_lp,
    random_qp,
    read_instance,
)
from ..rng import Rng
from .validation import gaussian_integral_check, wendel_check

log = logging.getLogger(__name__)

KINDS = ("prox_qp", "prox_lp", "apbm", "sample_holder", "sample_hybrid", "validate")

DEFAULTS: dict[str, dict[str, Any]] = {
    "prox_qp": {"d": 50, "seed": 7, "etas": [0.1, 1.0, 10.0], "delta": 1e-6, "max_iters": 10_000},
    "prox_lp": {"n": 100, "d": 20, "seed": 7, "ps": [1.2, 1.5, 1.8, 2.0], "eta": 1.0, "delta": 1e-6,
                "normalize": False, "max_iters": 10_000},
    "apbm": {"d": 50, "seed": 18, "eta0": 100.0, "beta0": 0.01, "epsilon": 1e-4, "max_outer": 500},
    "sample_holder": {"d": 1, "seed": 0, "eta": "auto", "delta": 0.1, "steps": 1000, "chains": 4},
    "sample_hybrid": {"n": 20, "d": 2, "seed": 0, "ps": [1.0, 1.5, 2.0], "eta": "auto", "delta": 0.1,
                      "steps": 1000, "chains": 4},
    "validate": {"points": 200, "seed": 0},
}
FULL_SCALE = {"prox_qp": {"d": 1000}, "prox_lp": {"n": 500, "d": 100}}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    output_dir: Path
    instance_path: Optional[Path] = None
    parameters: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        self.output_dir = Path(self.output_dir)
        if self.instance_path is not None:
            self.instance_path = Path(self.instance_path)
            if not self.instance_path.is_file():
                raise ConfigError(f"instance file {self.instance_path} does not exist")
        allowed = set(DEFAULTS[self.kind]) | {"full_scale"}
        unknown = set(self.parameters) - allowed
        if unknown:
            raise ConfigError(f"unknown parameters for {self.kind}: {', '.join(sorted(unknown))}")

    def resolved(self) -> dict[str, Any]:
        params = dict(DEFAULTS[self.kind])
        if self.parameters.get("full_scale"):
            params.update(FULL_SCALE.get(self.kind, {}))
        params.update({k: v for k, v in self.parameters.items() if k != "full_scale"})
        return params

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            kind=doc["kind"],
            output_dir=Path(doc.get("output_dir", ".")),
            instance_path=doc.get("instance_path"),
            parameters=doc.get("parameters", {}),
        )


@dataclass
class ExperimentResult:
    status: int
    files: list[Path] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def gnuplot_script(curves: list[tuple[str, str]], ycol: int, ylabel: str, logy: bool = True) -> str:
    lines = ["set datafile separator ','", "set key autotitle columnhead", "set xlabel 'j'", f"set ylabel '{ylabel}'"]
    if logy:
        lines.append("set logscale y")
    plots = [f"'{fname}' using 1:{ycol} with lines title '{title}'" for fname, title in curves]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def _load(cfg: ExperimentConfig, expected=None):
    if cfg.instance_path is None:
        return None
    inst = read_instance(cfg.instance_path)
    if expected is not None and not isinstance(inst, expected):
        raise ConfigError(f"{cfg.kind} needs a {expected.__name__}, got {type(inst).__name__}")
    return inst


def _prox_qp(cfg, p, out: Path, res: ExperimentResult):
    inst = _load(cfg, QpInstance) or random_qp(int(p["d"]), Rng(int(p["seed"])), seed=int(p["seed"]))
    y = Rng(int(p["seed"])).split(1).normal(inst.dim)
    curves = []
    iters = {}
    for eta in p["etas"]:
        oracle = make_oracle(inst)
        r = prox.solve_prox(oracle, y, prox.ProxParams(float(eta), float(p["delta"]), int(p["max_iters"])))
        xs = qp_prox_closed_form(inst, y, float(eta))
        d = xs - y
        F_star = 0.5 * xs @ inst.Q @ xs + inst.c @ xs + d @ d / (2.0 * eta)
        name = f"prox_qp_eta{eta:g}.csv"
        rows = [(j + 1, r.delta_trajectory[j], r.f_eta_trajectory[j] - F_star, r.step_norms[j]) for j in range(r.iters)]
        res.files.append(write_csv(out / name, ("iter", "delta_j", "true_gap", "step_norm"), rows))
        curves.append((name, f"eta={eta:g}"))
        iters[float(eta)] = r.iters
        if not r.converged:
            res.failures.append(f"eta={eta:g}: {r.message}")
    (out / "prox_qp.gp").write_text(gnuplot_script(curves, 3, "f(xtilde_j) - f(x*)"), encoding="utf-8")
    res.files.append(out / "prox_qp.gp")
    res.summary["iterations"] = iters


def _prox_lp(cfg, p, out: Path, res: ExperimentResult):
    base = _load(cfg, LpRegressionInstance)
    y = None
    curves = []
    iters = {}
    for i, pe in enumerate(p["ps"]):
        if base is None:
            rng = Rng(int(p["seed"]))
            inst = random_lp(int(p["n"]), int(p["d"]), float(pe), rng, normalize=bool(p["normalize"]))
        else:
            inst = LpRegressionInstance(base.A, base.b, float(pe), normalize=base.normalize, seed=base.seed)
        if y is None:
            y = Rng(int(p["seed"])).split(1).normal(inst.dim)
        oracle = make_oracle(inst)
        r = prox.solve_prox(oracle, y, prox.ProxParams(float(p["eta"]), float(p["delta"]), int(p["max_iters"])))
        name = f"prox_lp_p{pe:g}.csv"
        rows = [(j + 1, r.delta_trajectory[j], r.f_eta_trajectory[j], r.step_norms[j]) for j in range(r.iters)]
        res.files.append(write_csv(out / name, ("iter", "delta_j", "f_eta_best", "step_norm"), rows))
        curves.append((name, f"p={pe:g}"))
        iters[float(pe)] = r.iters
        if not r.converged:
            res.failures.append(f"p={pe:g}: {r.message}")
    (out / "prox_lp.gp").write_text(gnuplot_script(curves, 2, "delta_j"), encoding="utf-8")
    res.files.append(out / "prox_lp.gp")
    res.summary["iterations"] = iters


def _apbm(cfg, p, out: Path, res: ExperimentResult):
    inst = _load(cfg) or random_qp(int(p["d"]), Rng(int(p["seed"])), seed=int(p["seed"]))
    oracle = make_oracle(inst)
    params = apbm.ApbmParams(float(p["eta0"]), float(p["beta0"]), float(p["epsilon"]), int(p["max_outer"]))
    try:
        trace = apbm.apbm_run(oracle, np.zeros(inst.dim), params)
    except apbm.InnerSolveError as exc:
        res.failures.append(str(exc))
        trace = exc.trace
    path = out / "apbm_trace.csv"
    apbm.write_trace_csv(trace, path)
    res.files.append(path)
    res.summary["best_value"] = trace.best_value
    if isinstance(inst, QpInstance):
        res.summary["f_star"] = float(make_oracle(inst).value(inst.minimizer()))


def _sample(cfg, p, out: Path, res: ExperimentResult, hybrid: bool):
    if hybrid:
        inst = _load(cfg)
        if inst is None:
            rng = Rng(int(p["seed"]))
            n = int(p["n"])
            ps = np.resize(np.asarray(p["ps"], dtype=float), n)
            inst = random_lp(n, int(p["d"]), ps, rng)
    else:
        inst = _load(cfg) or NormInstance(int(p["d"]))
    spec = holder_spec_of(inst)
    d = inst.dim
    if p["eta"] == "auto":
        eta = sampler.stepsize_hybrid(spec, d) if hybrid else sampler.stepsize_holder(spec, d)
    else:
        eta = float(p["eta"])
    runs = sampler.run_chains(make_oracle(inst), np.zeros(d), eta, float(p["delta"]), int(p["steps"]),
                              int(p["chains"]), int(p["seed"]))
    path = out / ("sample_hybrid.csv" if hybrid else "sample_holder.csv")
    sampler.write_chains_csv(runs, path)
    res.files.append(path)
    trials = np.concatenate([r.trials for r in runs])
    res.summary.update(eta=eta, mean_trials=float(trials.mean()))
    res.summary["trial_bound"] = (sampler.hybrid_trial_bound(spec, float(p["delta"])) if hybrid
                                  else sampler.holder_trial_bound(float(p["delta"])))


def quadrature_sweep(points: int, seed: int) -> list[tuple]:
    """Random (d, eta, components) points, half single-component, half hybrid.

    Parameters are drawn so that roughly three quarters satisfy the stepsize
    condition of the respective bound.
    """
    rng = Rng(seed)
    rows = []
    for i in range(points):
        r = rng.split(i)
        u = r.uniform(8)
        d = 1 + int(u[0] * 3)
        eta = 10.0 ** (-1.0 + 2.0 * u[1])
        hybrid = i % 2 == 1
        if hybrid:
            k = 2 + int(u[2] * 2)
            alphas = r.uniform(k)
            w = r.uniform(k)
            budget = 1.4 * u[3] / (eta * d)  # sum a_i^(2/(alpha_i+1)) ~ budget
            a = (budget * w / w.sum()) ** ((alphas + 1.0) / 2.0)
            comps = list(zip(a.tolist(), alphas.tolist()))
        else:
            alpha = u[2]
            a = 0.7 * u[3] / (eta * d) ** ((alpha + 1.0) / 2.0)
            comps = [(a, alpha)]
        rep = gaussian_integral_check(d, eta, comps)
        rows.append((i, d, eta, len(comps), rep.integral_estimate, rep.lower_bound, int(rep.condition_holds),
                     int(rep.bound_holds)))
    return rows


WENDEL_T = (0.5, 1.0, 2.0, 5.0, 10.0)
WENDEL_S = (0.25, 0.5, 0.75)


def _validate(cfg, p, out: Path, res: ExperimentResult):
    rows = quadrature_sweep(int(p["points"]), int(p["seed"]))
    res.files.append(write_csv(out / "quadrature_sweep.csv",
                               ("point", "d", "eta", "components", "integral", "lower_bound", "condition", "holds"),
                               rows))
    bad = [r[0] for r in rows if r[6] and not r[7]]
    if bad:
        res.failures.append(f"integral bound violated at points {bad}")
    wrows = []
    for t in WENDEL_T:
        for s in WENDEL_S:
            lo, mid, hi = wendel_check(t, s)
            ok = lo <= mid <= hi
            wrows.append((t, s, lo, mid, hi, int(ok)))
            if not ok:
                res.failures.append(f"Wendel inequality fails at t={t}, s={s}")
    res.files.append(write_csv(out / "wendel.csv", ("t", "s", "lower", "ratio", "upper", "holds"), wrows))
    res.summary["conditioned_points"] = sum(r[6] for r in rows)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run one experiment; per-curve failures are recorded and the run continues.

    Exit status is 0 when every curve/check succeeded, 1 otherwise.
    """
    p = cfg.resolved()
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    res = ExperimentResult(status=0)
    log.info("running %s into %s", cfg.kind, out)
    if cfg.kind == "prox_qp":
        _prox_qp(cfg, p, out, res)
    elif cfg.kind == "prox_lp":
        _prox_lp(cfg, p, out, res)
    elif cfg.kind == "apbm":
        _apbm(cfg, p, out, res)
    elif cfg.kind == "sample_holder":
        _sample(cfg, p, out, res, hybrid=False)
    elif cfg.kind == "sample_hybrid":
        _sample(cfg, p, out, res, hybrid=True)
    else:
        _validate(cfg, p, out, res)
    for msg in res.failures:
        log.warning("%s: %s", cfg.kind, msg)
    res.status = 1 if res.failures else 0
    if any(isinstance(v, float) and math.isnan(v) for v in res.summary.values()):
        res.status = 1
    return res
