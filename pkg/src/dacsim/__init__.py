"""Incentive analysis and simulation of a slashing-secured data availability
committee: the on-chain slashing rule, the four-slot query game, bribing
adversaries, and the equilibrium failure-probability solvers behind them."""

from . import contract, equilibrium, game, kernels, model, reward, simplex
from .model import (
    ActionVector,
    AdversaryParams,
    PayoffReport,
    ProtocolParams,
    UtilitySpec,
    config_from_json,
    config_to_json,
    risk_averse,
    risk_neutral,
    utility,
    validate,
)

__all__ = [
    "ActionVector",
    "AdversaryParams",
    "PayoffReport",
    "ProtocolParams",
    "UtilitySpec",
    "config_from_json",
    "config_to_json",
    "contract",
    "equilibrium",
    "game",
    "kernels",
    "model",
    "reward",
    "risk_averse",
    "risk_neutral",
    "simplex",
    "utility",
    "validate",
]

__version__ = "0.1.0"
