"""Rank-based estimation and jackknife empirical likelihood inference for
the Pickands dependence function of bivariate extreme-value copulas."""

from evdep.errors import (
    BracketError,
    EmptyIntervalError,
    EvdepError,
    InfeasibleThetaError,
    NoRootError,
    NumericDomainError,
    ParameterError,
    TieError,
)
from evdep.models import PickandsModel
from evdep.empirical import PseudoSample, pseudo_observations
from evdep.estimators import (
    adaptive_weighted,
    cfg_rank,
    pickands_rank,
    weighted_closed_form,
    weighted_root_solve,
    WeightSpec,
)
from evdep.jel import JelConfig, jel_confidence_interval, jel_ratio

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "EmptyIntervalError",
    "EvdepError",
    "InfeasibleThetaError",
    "JelConfig",
    "NoRootError",
    "NumericDomainError",
    "ParameterError",
    "PickandsModel",
    "PseudoSample",
    "TieError",
    "WeightSpec",
    "adaptive_weighted",
    "cfg_rank",
    "jel_confidence_interval",
    "jel_ratio",
    "pickands_rank",
    "pseudo_observations",
    "weighted_closed_form",
    "weighted_root_solve",
]
