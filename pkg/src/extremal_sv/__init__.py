"""Extremal dependence of stochastic volatility models with Gamma-type log-volatility."""
__version__ = "0.1.0"

from ._backend import BACKEND
from .cone import Multiplier, breiman_limit_diagonal, tau, tau_numeric_oracle
from .limits import constant_D, one_factor_ratio, rectangle_measure
from .lp import (
    CaseTag,
    LpSolution,
    TailDependenceProfile,
    TailLp,
    construct_from_eta,
    eta_profile,
    reduce_infinite,
    solve_lp,
    sv_lag_lp,
)
from .model import (
    CoefficientSequence,
    ConstantEps,
    CustomTailEta,
    GammaEta,
    LaplaceEta,
    NormalEps,
    ParetoEps,
    StudentTEps,
    SvModel,
    load_model,
    marginal_survival_asymptote,
    normalizing_constant,
    save_model,
    tail_constants,
)
from .simulate import SimulationBatch, SimulationConfig, simulate_paths

__all__ = [
    "BACKEND", "__version__",
    "CoefficientSequence", "GammaEta", "LaplaceEta", "CustomTailEta",
    "NormalEps", "StudentTEps", "ParetoEps", "ConstantEps", "SvModel",
    "load_model", "save_model", "tail_constants", "marginal_survival_asymptote", "normalizing_constant",
    "TailLp", "LpSolution", "CaseTag", "TailDependenceProfile",
    "solve_lp", "sv_lag_lp", "reduce_infinite", "eta_profile", "construct_from_eta",
    "tau", "tau_numeric_oracle", "Multiplier", "breiman_limit_diagonal",
    "rectangle_measure", "constant_D", "one_factor_ratio",
    "SimulationConfig", "SimulationBatch", "simulate_paths",
]
