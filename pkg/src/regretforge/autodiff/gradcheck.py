"""Central-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, backward, value_of


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    tolerance: float

    @property
    def ok(self):
        return self.max_rel_error <= self.tolerance


def _rel_error(a, b, atol):
    return abs(a - b) / max(abs(a), abs(b), atol)


def analytic_gradients(fn, params):
    leaves = {k: Tensor(v, name=k) for k, v in params.items()}
    loss = fn(leaves)
    backward(loss)
    return float(value_of(loss)), {k: t.grad for k, t in leaves.items()}


def check_elementwise(fn, params, h=1e-5, atol=1e-7):
    """Largest relative error over every parameter entry."""
    _, grads = analytic_gradients(fn, params)
    worst = 0.0
    for name, value in params.items():
        flat = value.reshape(-1)
        for j in range(flat.size):
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name].reshape(-1)[j] += h
            minus[name].reshape(-1)[j] -= h
            numeric = (float(value_of(fn(plus))) - float(value_of(fn(minus)))) / (2 * h)
            worst = max(worst, _rel_error(grads[name].reshape(-1)[j], numeric, atol))
    return worst


def check_directional(fn, params, rng, directions=20, h=1e-5, atol=1e-7):
    """Largest relative error of directional derivatives along random unit directions."""
    _, grads = analytic_gradients(fn, params)
    worst = 0.0
    for _ in range(directions):
        direction = {k: rng.standard_normal(v.shape) for k, v in params.items()}
        norm = np.sqrt(sum(float((d * d).sum()) for d in direction.values()))
        direction = {k: d / norm for k, d in direction.items()}
        analytic = sum(float((grads[k] * direction[k]).sum()) for k in params)
        plus = {k: v + h * direction[k] for k, v in params.items()}
        minus = {k: v - h * direction[k] for k, v in params.items()}
        numeric = (float(value_of(fn(plus))) - float(value_of(fn(minus)))) / (2 * h)
        worst = max(worst, _rel_error(analytic, numeric, atol))
    return worst


def _primitive_cases(rng):
    from . import ops
    from .lstm import LSTMLayer, lstm_cell

    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((3, 4))
    pos = rng.uniform(0.2, 2.0, (3, 4))
    w = rng.standard_normal((4, 5))
    idx = np.array([0, 2, 1, 2])
    cond = rng.random((3, 4)) > 0.5
    mask = np.array([1.0, 1.0, 0.0, 1.0])
    away = a + np.sign(a) * 0.1  # keep positive_part off its kink

    def reduce(t):
        v = t.value if hasattr(t, "value") else np.asarray(t)
        return ops.sum(ops.mul(t, rng_weights(v.shape)))

    fixed = {}

    def rng_weights(shape):
        if shape not in fixed:
            fixed[shape] = np.random.default_rng(len(fixed) + 17).standard_normal(shape)
        return fixed[shape]

    layer = LSTMLayer.init(rng, 4, 3)
    h0, c0 = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))

    def cell(p):
        lay = LSTMLayer(p["w_input"], p["w_hidden"], p["bias"])
        h, c = lstm_cell(lay, p["x"], (p["h"], p["c"]))
        return ops.add(reduce(h), reduce(c))

    return [
        ("add", lambda p: reduce(ops.add(p["a"], p["b"])), {"a": a, "b": b[:1]}),
        ("sub", lambda p: reduce(ops.sub(p["a"], p["b"])), {"a": a, "b": b}),
        ("neg", lambda p: reduce(ops.neg(p["a"])), {"a": a}),
        ("mul", lambda p: reduce(ops.mul(p["a"], p["b"])), {"a": a, "b": b}),
        ("div", lambda p: reduce(ops.div(p["a"], p["b"])), {"a": a, "b": pos}),
        ("matmul", lambda p: reduce(ops.matmul(p["a"], p["w"])), {"a": a, "w": w}),
        ("sum", lambda p: reduce(ops.sum(p["a"], axis=0)), {"a": a}),
        ("mean", lambda p: reduce(ops.mean(p["a"], axis=1, keepdims=True)), {"a": a}),
        ("reshape", lambda p: reduce(ops.reshape(p["a"], (4, 3))), {"a": a}),
        ("broadcast", lambda p: reduce(ops.broadcast(p["a"], (2, 3, 4))), {"a": a}),
        ("getitem", lambda p: reduce(ops.getitem(p["a"], (slice(None), slice(1, 3)))), {"a": a}),
        ("concat", lambda p: reduce(ops.concat([p["a"], p["b"]], axis=-1)), {"a": a, "b": b}),
        ("where", lambda p: reduce(ops.where(cond, p["a"], p["b"])), {"a": a, "b": b}),
        ("gather", lambda p: reduce(ops.gather(p["a"], ops.IndexMap(idx, 4))), {"a": a}),
        ("segment_sum", lambda p: reduce(ops.segment_sum(p["a"], idx, 3)), {"a": a}),
        ("positive_part", lambda p: reduce(ops.positive_part(p["a"])), {"a": away}),
        ("tanh", lambda p: reduce(ops.tanh(p["a"])), {"a": a}),
        ("sigmoid", lambda p: reduce(ops.sigmoid(p["a"])), {"a": a}),
        ("exp", lambda p: reduce(ops.exp(p["a"])), {"a": a}),
        ("safe_log", lambda p: reduce(ops.safe_log(p["a"])), {"a": pos}),
        ("normalize_simplex", lambda p: reduce(ops.normalize_simplex(p["a"], mask)), {"a": pos}),
        ("softmax", lambda p: reduce(ops.softmax(p["a"], mask > 0)), {"a": a}),
        ("kl_divergence", lambda p: reduce(ops.kl_divergence(p["p"], p["q"])),
         {"p": pos, "q": pos[::-1].copy()}),
        ("lstm_cell", cell, {"w_input": layer.w_input, "w_hidden": layer.w_hidden, "bias": layer.bias,
                             "x": rng.standard_normal((3, 4)), "h": h0, "c": c0}),
    ]


def check_primitives(rng, tolerance=1e-4):
    """Elementwise central-difference check of every tape primitive."""
    return [GradCheckResult(name, check_elementwise(fn, params), tolerance)
            for name, fn, params in _primitive_cases(rng)]
