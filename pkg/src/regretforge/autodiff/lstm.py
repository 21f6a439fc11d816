"""Stacked LSTM built from tape primitives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .tensor import ContractError, value_of


@dataclass
class LSTMLayer:
    """Weights of one layer; gates are packed as (input, forget, candidate, output)."""

    w_input: object   # (in_dim, 4H)
    w_hidden: object  # (H, 4H)
    bias: object      # (4H,)

    @property
    def hidden_size(self):
        return value_of(self.w_hidden).shape[0]

    @property
    def input_size(self):
        return value_of(self.w_input).shape[0]

    @classmethod
    def init(cls, rng, input_size, hidden_size, forget_bias=1.0, scale=None):
        scale = scale if scale is not None else 1.0 / np.sqrt(hidden_size)
        bias = np.zeros(4 * hidden_size)
        bias[hidden_size:2 * hidden_size] = forget_bias
        return cls(
            rng.uniform(-scale, scale, size=(input_size, 4 * hidden_size)),
            rng.uniform(-scale, scale, size=(hidden_size, 4 * hidden_size)),
            bias,
        )


def lstm_cell(layer, x, state):
    """One step of the gated recurrence.

    ``x`` is (N, in_dim); ``state`` is a pair ``(h, c)`` of (N, H) arrays.
    Returns ``(h', c')``.
    """
    h, c = state
    hidden = layer.hidden_size
    if value_of(x).shape[-1] != layer.input_size:
        raise ContractError(f"LSTM input width {value_of(x).shape[-1]} != {layer.input_size}")
    if value_of(h).shape[-1] != hidden or value_of(c).shape[-1] != hidden:
        raise ContractError("LSTM state width does not match hidden size")
    gates = ops.add(ops.add(ops.matmul(x, layer.w_input), ops.matmul(h, layer.w_hidden)), layer.bias)
    i = ops.sigmoid(ops.getitem(gates, (Ellipsis, slice(0, hidden))))
    f = ops.sigmoid(ops.getitem(gates, (Ellipsis, slice(hidden, 2 * hidden))))
    g = ops.tanh(ops.getitem(gates, (Ellipsis, slice(2 * hidden, 3 * hidden))))
    o = ops.sigmoid(ops.getitem(gates, (Ellipsis, slice(3 * hidden, 4 * hidden))))
    c_new = ops.add(ops.mul(f, c), ops.mul(i, g))
    h_new = ops.mul(o, ops.tanh(c_new))
    return h_new, c_new


def zero_state(layers, batch):
    return [(np.zeros((batch, layer.hidden_size)), np.zeros((batch, layer.hidden_size)))
            for layer in layers]


def stacked_step(layers, x, states):
    """Advance every layer by one step; returns (top output, new states)."""
    new_states = []
    for layer, state in zip(layers, states):
        h, c = lstm_cell(layer, x, state)
        new_states.append((h, c))
        x = h
    return x, new_states


def stacked_forward(layers, sequence, states=None):
    """Run ``sequence`` (list of (N, in_dim) inputs) through the stack."""
    if not sequence:
        return [], states
    batch = value_of(sequence[0]).shape[0]
    states = states if states is not None else zero_state(layers, batch)
    outputs = []
    for x in sequence:
        out, states = stacked_step(layers, x, states)
        outputs.append(out)
    return outputs, states
