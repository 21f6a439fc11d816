"""The shared recurrent regret predictor."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import ops
from ..autodiff.lstm import LSTMLayer, stacked_step
from ..autodiff.tensor import value_of
from ..efg.tree import ContractViolation

ACTIVATIONS = ("tanh", "sigmoid")
FORMS = ("residual", "direct")


@dataclass(frozen=True)
class Architecture:
    max_actions: int
    n_rows: int
    hidden: int = 32
    layers: int = 2
    embed: int = 8
    activation: str = "sigmoid"
    form: str = "residual"
    alpha: float = 2.0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ContractViolation(f"activation must be one of {ACTIVATIONS}")
        if self.form not in FORMS:
            raise ContractViolation(f"prediction form must be one of {FORMS}")
        if min(self.max_actions, self.n_rows, self.hidden, self.layers) < 1 or self.embed < 0:
            raise ContractViolation("architecture sizes must be positive")

    @property
    def input_size(self):
        return 2 * self.max_actions + self.embed

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("max_actions", "n_rows", "hidden", "layers", "embed", "activation", "form", "alpha")}


@dataclass
class PredictorParams:
    """Weights of the predictor; values may be arrays or tape Tensors.

    ``embedding`` has one row per canonical infostate index of the family's
    shared tree.  The head maps the top hidden state to one output per padded
    action slot.
    """

    arch: Architecture
    layers: list
    head_w: object
    head_b: object
    embedding: object
    train_config: dict = field(default_factory=dict)

    @classmethod
    def init(cls, arch, rng, head_scale=0.0):
        layers = []
        width = arch.input_size
        for _ in range(arch.layers):
            layers.append(LSTMLayer.init(rng, width, arch.hidden))
            width = arch.hidden
        head_w = rng.normal(0.0, head_scale, size=(arch.hidden, arch.max_actions)) if head_scale \
            else np.zeros((arch.hidden, arch.max_actions))
        embedding = rng.normal(0.0, 0.1, size=(arch.n_rows, arch.embed))
        return cls(arch, layers, head_w, np.zeros(arch.max_actions), embedding)

    @classmethod
    def zeros(cls, arch):
        """All-zero weights: the network output is the activation at 0."""
        layers, width = [], arch.input_size
        for _ in range(arch.layers):
            layers.append(LSTMLayer(np.zeros((width, 4 * arch.hidden)),
                                    np.zeros((arch.hidden, 4 * arch.hidden)),
                                    np.zeros(4 * arch.hidden)))
            width = arch.hidden
        return cls(arch, layers, np.zeros((arch.hidden, arch.max_actions)),
                   np.zeros(arch.max_actions), np.zeros((arch.n_rows, arch.embed)))

    # named view used by the optimizer and the checkpoint format
    def named(self):
        out = {}
        for k, layer in enumerate(self.layers):
            out[f"lstm{k}.w_input"] = layer.w_input
            out[f"lstm{k}.w_hidden"] = layer.w_hidden
            out[f"lstm{k}.bias"] = layer.bias
        out["head.w"] = self.head_w
        out["head.b"] = self.head_b
        out["embedding"] = self.embedding
        return out

    @classmethod
    def from_named(cls, arch, named, train_config=None):
        layers = [LSTMLayer(named[f"lstm{k}.w_input"], named[f"lstm{k}.w_hidden"], named[f"lstm{k}.bias"])
                  for k in range(arch.layers)]
        return cls(arch, layers, named["head.w"], named["head.b"], named["embedding"],
                   dict(train_config or {}))

    def numpy(self):
        return PredictorParams.from_named(
            self.arch, {k: np.array(value_of(v)) for k, v in self.named().items()}, self.train_config)

    # ------------------------------------------------------------ inference

    def initial_state(self, lead):
        shape = tuple(lead) + (self.arch.hidden,)
        return [(np.zeros(shape), np.zeros(shape)) for _ in range(self.arch.layers)]

    def network(self, r, R, rows, hidden):
        """Bounded raw output pi in [-1, 1] per padded action, plus the next hidden state."""
        rows = np.asarray(rows)
        if rows.size and (rows.min() < 0 or rows.max() >= self.arch.n_rows):
            raise ContractViolation(f"infostate index outside embedding table of {self.arch.n_rows} rows")
        if value_of(r).shape[-1] != self.arch.max_actions:
            raise ContractViolation("regret width does not match the predictor's action count")
        lead = value_of(r).shape[:-1]
        parts = [r, R]
        if self.arch.embed:
            emb = ops.getitem(self.embedding, rows)
            parts.append(ops.broadcast(emb, lead + (self.arch.embed,)))
        out, new_hidden = stacked_step(self.layers, ops.concat(parts, axis=-1), hidden)
        logits = ops.add(ops.matmul(out, self.head_w), self.head_b)
        pi = ops.tanh(logits) if self.arch.activation == "tanh" else ops.sigmoid(logits)
        return pi, new_hidden

    # protocol used by regret.minimizers.observe_reward
    def step(self, r, R, rows, hidden):
        return self.network(r, R, rows, hidden)

    def combine(self, r, pi):
        a = self.arch.alpha
        if self.arch.form == "residual":
            return ops.mul(ops.add(r, pi), a)
        return ops.mul(pi, a)

    def select_state(self, active, new, old):
        cond = np.asarray(active, dtype=bool)[..., None]
        return [(ops.where(cond, hn, ho), ops.where(cond, cn, co)) for (hn, cn), (ho, co) in zip(new, old)]


def predict(params, r, R, row, hidden=None, mask=None):
    """One prediction for a single infostate (or a batch sharing ``row``).

    Returns ``(prediction, hidden')``; masked entries are zero.
    """
    r = np.asarray(r, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    if r.shape != R.shape:
        raise ContractViolation("r and R must have the same shape")
    A = params.arch.max_actions
    n = r.shape[-1]
    if n > A:
        raise ContractViolation(f"{n} actions exceed the predictor's {A}")
    pad = [(0, 0)] * (r.ndim - 1) + [(0, A - n)]
    rp, Rp = np.pad(r, pad), np.pad(R, pad)
    if mask is None:
        mask = np.pad(np.ones(n), (0, A - n))
    rows = np.broadcast_to(np.asarray(row), r.shape[:-1])
    hidden = hidden if hidden is not None else params.initial_state(r.shape[:-1])
    pi, hidden = params.network(rp, Rp, rows, hidden)
    return (params.combine(rp, pi) * mask)[..., :n], hidden
