"""Reverse-mode differentiation over numpy arrays."""

from . import ops
from .adam import AdamState, adam_step
from .lstm import LSTMLayer, lstm_cell, stacked_forward, stacked_step, zero_state
from .ops import Diagnostics, DomainError, IndexMap
from .tensor import ContractError, Tensor, backward, is_tracked, value_of

__all__ = [
    "AdamState",
    "ContractError",
    "Diagnostics",
    "DomainError",
    "IndexMap",
    "LSTMLayer",
    "Tensor",
    "adam_step",
    "backward",
    "is_tracked",
    "lstm_cell",
    "ops",
    "stacked_forward",
    "stacked_step",
    "value_of",
    "zero_state",
]
