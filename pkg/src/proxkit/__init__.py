"""Proximal oracles for nonsmooth convex optimization and log-concave sampling."""

from .apbm import ApbmParams, ApbmTrace, apbm_run, eta_floor
from .bundle import Cut, CutModel, minimize_model, model_value
from .problems import (
    HolderSpec,
    LpRegressionInstance,
    NormInstance,
    QpInstance,
    SubgradientOracle,
    holder_spec_of,
    make_oracle,
)
from .prox import ProxParams, ProxResult, solve_prox
from .rng import Rng
from .sampler import AsfChain, RgoOutcome, asf_step, rgo_sample

__version__ = "0.1.0"
