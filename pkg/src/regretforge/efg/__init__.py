"""Extensive-form games as compiled infostate trees."""

from .metrics import (
    ReachDecomposition,
    StrategyProfile,
    best_response,
    cce_gap,
    expected_utility,
    nash_gap,
    reach_decompose,
    terminal_distribution,
)
from .trace import RunTrace
from .tree import Chance, ContractViolation, Decision, GameError, GameTree, Layout, Terminal

__all__ = [
    "Chance",
    "ContractViolation",
    "Decision",
    "GameError",
    "GameTree",
    "Layout",
    "ReachDecomposition",
    "RunTrace",
    "StrategyProfile",
    "Terminal",
    "best_response",
    "cce_gap",
    "expected_utility",
    "nash_gap",
    "reach_decompose",
    "terminal_distribution",
]
