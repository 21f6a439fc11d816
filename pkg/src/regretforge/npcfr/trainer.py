"""Meta-training of the regret predictor through the unrolled solver."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .. import rng as rng_streams
from ..autodiff import ops
from ..autodiff.adam import AdamState, adam_step
from ..autodiff.ops import Diagnostics
from ..autodiff.tensor import Tensor, backward, value_of
from ..efg.tree import GameError
from ..marginal import kl_terminal
from ..regret.minimizers import algorithm
from ..regret.solver import unroll
from .predictor import Architecture, PredictorParams


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch, diagnostics):
        self.epoch = epoch
        self.diagnostics = diagnostics
        super().__init__(f"meta-loss is not finite at epoch {epoch}; diagnostics {diagnostics}")


@dataclass(frozen=True)
class TrainConfig:
    horizon: int = 32
    epochs: int = 256
    batch: int = 16
    seed: int = 0
    lr: float = 1e-3
    weight_decay: float = 0.0
    base: str = "npcfr"           # npcfr | npcfr+
    hidden: int = 32
    layers: int = 2
    embed: int = 8
    activation: str | None = None  # None: the family default
    form: str | None = None        # None: residual for npcfr, direct for npcfr+
    alpha: float | None = None     # None: the family default
    head_scale: float = 0.0
    grad_clip: float | None = 10.0

    def __post_init__(self):
        if self.horizon < 1:
            raise GameError("horizon must be at least 1")
        if self.epochs < 1:
            raise GameError("epochs must be at least 1")
        if self.batch < 1:
            raise GameError("batch must be at least 1")
        if self.base not in ("npcfr", "npcfr+"):
            raise GameError("base must be npcfr or npcfr+")

    def architecture(self, dist):
        lay = dist.layout
        return Architecture(
            max_actions=lay.max_actions,
            n_rows=lay.n_infostates,
            hidden=self.hidden,
            layers=self.layers,
            embed=self.embed,
            activation=self.activation or dist.default_activation,
            form=self.form or ("direct" if self.base == "npcfr+" else "residual"),
            alpha=self.alpha if self.alpha is not None else dist.default_alpha,
        )

    def as_dict(self):
        return asdict(self)


def unrolled_meta_loss(layout, utilities, spec, horizon, predictor):
    """Mean over games and prefixes of the prefix EFMs of an unrolled solve.

    Every quantity stays on the tape when ``predictor`` holds Tensors.
    """
    reach_sum = None
    contrib_sum = None
    total = None
    for rec in unroll(layout, utilities, spec, horizon, predictor=predictor, batch=utilities.shape[:-2]):
        d = layout.chance_reach
        for c in rec.contrib:
            d = ops.mul(d, c)
        if reach_sum is None:
            reach_sum, contrib_sum = d, list(rec.contrib)
        else:
            reach_sum = ops.add(reach_sum, d)
            contrib_sum = [ops.add(s, c) for s, c in zip(contrib_sum, rec.contrib)]
        t = float(rec.step)
        mu = layout.chance_reach
        for s in contrib_sum:
            mu = ops.mul(mu, ops.div(s, t))
        prefix = kl_terminal(ops.div(reach_sum, t), mu)
        total = prefix if total is None else ops.add(total, prefix)
    return ops.mean(ops.div(total, float(horizon)))


def _tensors(params):
    return {k: Tensor(np.array(value_of(v)), name=k) for k, v in params.named().items()}


def meta_loss_and_grads(params, layout, utilities, spec, horizon):
    leaves = _tensors(params)
    bound = PredictorParams.from_named(params.arch, leaves)
    loss = unrolled_meta_loss(layout, utilities, spec, horizon, bound)
    grads = backward(loss)
    return float(value_of(loss)), {k: grads.get(t, np.zeros_like(t.value)) for k, t in leaves.items()}


def train(dist, cfg, callback=None):
    """Meta-train a predictor on ``dist``; returns ``(params, log)``.

    ``log`` is a list of ``(epoch, loss)`` with epochs counted from 1.
    """
    arch = cfg.architecture(dist)
    init_rng = rng_streams.stream(cfg.seed, "init")
    games_rng = rng_streams.stream(cfg.seed, "game_sampling")
    params = PredictorParams.init(arch, init_rng, head_scale=cfg.head_scale)
    params.train_config = {**cfg.as_dict(), "distribution": dist.as_dict()}
    spec = algorithm(cfg.base)
    layout = dist.layout
    named = {k: np.array(v) for k, v in params.named().items()}
    opt = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    log = []
    Diagnostics.reset()
    for epoch in range(1, cfg.epochs + 1):
        utilities = dist.utilities(dist.sample_params(games_rng, cfg.batch))
        current = PredictorParams.from_named(arch, named, params.train_config)
        loss, grads = meta_loss_and_grads(current, layout, utilities, spec, cfg.horizon)
        if not math.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
            raise TrainingDiverged(epoch, Diagnostics.snapshot())
        if cfg.grad_clip is not None:
            norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
            if norm > cfg.grad_clip:
                grads = {k: g * (cfg.grad_clip / norm) for k, g in grads.items()}
        named = adam_step(opt, named, grads)
        log.append((epoch, loss))
        if callback is not None:
            callback(epoch, loss)
    return PredictorParams.from_named(arch, named, params.train_config), log
