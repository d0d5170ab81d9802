"""Simulation and structure inference for xx spin pseudo-chains."""

from __future__ import annotations

from .blackbox import BlackBoxChain
from .errors import PseudoChainError
from .topology import BlockSpec, ModelChainSpec, PseudoChainSpec, effective_model, validate

__all__ = [
    "BlackBoxChain",
    "BlockSpec",
    "ModelChainSpec",
    "PseudoChainError",
    "PseudoChainSpec",
    "effective_model",
    "validate",
]
__version__ = "0.1.0"
