"""Regret minimizers and the counterfactual regret driver."""

from .minimizers import (
    ALGORITHMS, AlgorithmSpec, MinimizerState, algorithm, instantaneous_regret, next_strategy,
    observe_reward, smooth_projection,
)
from .solver import SolveConfig, cfr_solve, solve_batch, solve_layout, sum_positive_cf_regret, unroll

__all__ = [
    "ALGORITHMS",
    "AlgorithmSpec",
    "MinimizerState",
    "SolveConfig",
    "algorithm",
    "cfr_solve",
    "instantaneous_regret",
    "next_strategy",
    "observe_reward",
    "smooth_projection",
    "solve_batch",
    "solve_layout",
    "sum_positive_cf_regret",
    "unroll",
]
