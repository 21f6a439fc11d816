"""Counterfactual regret minimization over a compiled game.

One engine serves three callers: :func:`cfr_solve` for a single game,
:func:`solve_batch` for many games sharing one tree structure, and the
meta-trainer, which drives :func:`unroll` with tape Tensors.  All of them
produce identical numbers for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..autodiff.tensor import value_of
from ..efg.metrics import accumulate, profile_statistics
from ..efg.trace import RunTrace
from ..efg.tree import GameError
from ..marginal import efm_from_sums
from .minimizers import MinimizerState, algorithm, averaging_weight, next_strategy, observe_reward

MODES = ("simultaneous", "alternating")
AVERAGING = ("uniform", "linear", "dcfr")


@dataclass(frozen=True)
class SolveConfig:
    algorithm: str = "cfr"
    steps: int = 1000
    mode: str | None = None         # None: the algorithm's default
    averaging: str | None = None    # None: the algorithm's default
    checkpoints: tuple = ()
    record_prefix_efm: bool = False

    def __post_init__(self):
        algorithm(self.algorithm)
        if int(self.steps) < 1:
            raise GameError("step budget must be at least 1")
        if self.mode is not None and self.mode not in MODES:
            raise GameError(f"mode must be one of {MODES}")
        if self.averaging is not None and self.averaging not in AVERAGING:
            raise GameError(f"averaging must be one of {AVERAGING}")
        cps = tuple(int(c) for c in self.checkpoints)
        if list(cps) != sorted(set(cps)):
            raise GameError("checkpoints must be strictly ascending")
        if cps and (cps[0] < 1 or cps[-1] > self.steps):
            raise GameError("checkpoints must lie within 1..steps")
        object.__setattr__(self, "checkpoints", cps)

    @property
    def spec(self):
        spec = algorithm(self.algorithm)
        if self.mode is not None:
            spec = replace(spec, alternating=self.mode == "alternating")
        if self.averaging is not None:
            spec = replace(spec, averaging=self.averaging)
        return spec


@dataclass
class StepRecord:
    step: int
    sigma: object        # (..., S, A)
    contrib: list        # per player (..., Z)
    opponents: list      # per player (..., Z)
    cf_values: object    # (..., S, A)
    own_reach: object    # (..., S) or None


def unroll(layout, utilities, spec, steps, predictor=None, batch=()):
    """Yield one :class:`StepRecord` per solver step.

    ``utilities`` is (..., n, Z) with leading dims equal to ``batch``.  In
    alternating mode the acting player at step t is (t - 1) mod n; the
    recorded profile is the full current profile at every step.
    """
    if spec.prediction == "neural" and predictor is None:
        raise GameError(f"{spec.tag} requires a predictor checkpoint")
    rows = np.arange(layout.n_infostates)
    state = MinimizerState.new(spec, layout.action_mask, batch=batch, rows=rows)
    for t in range(1, steps + 1):
        sigma = next_strategy(state)
        contrib, opp, cf, own = profile_statistics(layout, utilities, sigma)
        active = None
        if spec.alternating:
            active = np.broadcast_to(layout.owner == (t - 1) % layout.n_players, state.t.shape)
        state = observe_reward(state, cf, sigma, active=active, predictor=predictor)
        yield StepRecord(t, sigma, contrib, opp, cf, own)


def _stack_utilities(games):
    first = games[0]
    sig = first.layout.signature()
    for g in games[1:]:
        if g.layout is not first.layout and g.layout.signature() != sig:
            raise GameError("games in one batch must share their tree structure")
    return first.layout, np.stack([g.utilities for g in games])


def solve_layout(layout, utilities, config, predictor=None):
    """Run ``config`` on (G, n, Z) utilities; returns a batched :class:`RunTrace`.

    Checkpoint snapshots (batched copies) are stored in ``trace.snapshots``.
    """
    spec = config.spec
    batch = utilities.shape[:-2]
    trace = RunTrace.empty(layout, batch=batch)
    checkpoints = set(config.checkpoints)
    snapshots = {}
    for rec in unroll(layout, utilities, spec, config.steps, predictor=predictor, batch=batch):
        sigma = np.asarray(value_of(rec.sigma))
        accumulate(trace, layout, sigma, [value_of(c) for c in rec.contrib],
                   [value_of(o) for o in rec.opponents], value_of(rec.cf_values),
                   value_of(rec.own_reach), weight=averaging_weight(spec, rec.step))
        if rec.step == 1:
            trace.first_strategy = sigma
        trace.last_strategy = sigma
        if config.record_prefix_efm:
            trace.prefix_efm.append(np.maximum(
                efm_from_sums(trace.reach_sum, trace.contrib_sum, layout.chance_reach, trace.steps), 0.0))
        if rec.step in checkpoints:
            snap = trace.copy()
            snap.last_strategy = sigma
            snap.first_strategy = trace.first_strategy
            snapshots[rec.step] = snap
    trace.snapshots = snapshots
    return trace


def solve_batch(games, config, predictor=None):
    """Solve every game in ``games`` (same structure) at once; returns one trace per game."""
    layout, utilities = _stack_utilities(list(games))
    batched = solve_layout(layout, utilities, config, predictor=predictor)
    traces = []
    for g in range(len(games)):
        tr = batched.game(g)
        tr.snapshots = {step: snap.game(g) for step, snap in batched.snapshots.items()}
        traces.append(tr)
    return traces


def cfr_solve(game, config, predictor=None):
    return solve_batch([game], config, predictor=predictor)[0]


def sum_positive_cf_regret(trace):
    """Sum over infostates of the largest positive cumulative counterfactual regret.

    Uses the unclamped regret of the recorded profiles, so dividing by the
    step count bounds the CCE gap for every algorithm.
    """
    regret = np.asarray(trace.cf_regret)
    best = np.max(np.where(trace.action_mask > 0, regret, -np.inf), axis=-1)
    return float(np.maximum(best, 0.0).sum())
