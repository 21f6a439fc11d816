"""Strategy profiles, reach decomposition, best responses and equilibrium gaps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import reach
from .tree import ContractViolation


class StrategyProfile:
    """Behavior strategies for every infostate, stored as a dense (S, A) array.

    Padded action slots hold 0.  Construct from a dict keyed by infostate key
    (``from_dict``), from the dense array directly, or via ``uniform``.
    """

    __slots__ = ("layout", "probs")

    def __init__(self, layout, probs, check=True):
        probs = np.array(probs, dtype=np.float64)
        if probs.shape != (layout.n_infostates, layout.max_actions):
            raise ContractViolation(
                f"profile shape {probs.shape} != {(layout.n_infostates, layout.max_actions)}")
        if check:
            _validate(layout, probs)
        probs.setflags(write=False)
        self.layout = layout
        self.probs = probs

    @classmethod
    def uniform(cls, game):
        lay = game.layout
        return cls(lay, lay.action_mask / lay.action_mask.sum(axis=1, keepdims=True))

    @classmethod
    def from_dict(cls, game, strategies):
        """``strategies`` maps infostate key -> probability vector."""
        lay = game.layout
        probs = np.zeros((lay.n_infostates, lay.max_actions))
        for info in lay.infostates:
            if info.key not in strategies:
                raise ContractViolation(f"profile is missing infostate {info.key!r}")
            vec = np.asarray(strategies[info.key], dtype=np.float64)
            if vec.shape != (len(info.actions),):
                raise ContractViolation(
                    f"infostate {info.key!r} expects {len(info.actions)} probabilities, got {vec.shape}")
            probs[info.index, :len(info.actions)] = vec
        return cls(lay, probs)

    def for_infostate(self, key):
        info = self.layout.infostates[self.layout.infostate_index(key)]
        return self.probs[info.index, :len(info.actions)]

    def to_dict(self):
        return {i.key: self.probs[i.index, :len(i.actions)].tolist() for i in self.layout.infostates}

    def with_player(self, player, other):
        """Copy with ``player``'s infostates taken from ``other``."""
        rows = self.layout.owner == player
        probs = self.probs.copy()
        probs[rows] = np.asarray(getattr(other, "probs", other))[rows]
        return StrategyProfile(self.layout, probs, check=False)


def _validate(layout, probs):
    mask = layout.action_mask
    if (probs < -1e-12).any():
        raise ContractViolation("profile has negative probabilities")
    if np.abs(probs * (1 - mask)).max(initial=0.0) > 0:
        raise ContractViolation("profile assigns mass to illegal action slots")
    sums = probs.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-9)
    if bad.size:
        key = layout.infostates[bad[0]].key
        raise ContractViolation(f"strategy at infostate {key!r} sums to {sums[bad[0]]!r}")


def _probs(profile, layout):
    probs = getattr(profile, "probs", profile)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[-2:] != (layout.n_infostates, layout.max_actions):
        raise ContractViolation("profile does not cover every infostate of the game")
    return probs


@dataclass(frozen=True)
class ReachDecomposition:
    chance: np.ndarray   # (Z,)
    players: np.ndarray  # (n, Z)

    @property
    def reach(self):
        return self.chance * np.prod(self.players, axis=0)


def reach_decompose(game, profile):
    lay = game.layout
    probs = _probs(profile, lay)
    ext = reach.extended_slots(probs, lay)
    _, contrib = reach.player_contributions(ext, lay)
    return ReachDecomposition(lay.chance_reach.copy(), np.array(contrib))


def terminal_distribution(game, profile):
    return reach_decompose(game, profile).reach


def expected_utility(game, dist):
    """Expected utility per player of a terminal distribution."""
    dist = np.asarray(dist, dtype=np.float64)
    if dist.shape != (game.n_terminals,):
        raise ContractViolation(f"distribution has {dist.shape} entries, game has {game.n_terminals} terminals")
    if abs(dist.sum() - 1.0) > 1e-6:
        raise ContractViolation(f"distribution sums to {dist.sum()!r}")
    return game.utilities @ dist


def _best_response_from_weights(layout, player, weights):
    """Backward induction over ``player``'s infostate tree.

    ``weights[z]`` is the chance-and-opponent reach of terminal z times the
    player's utility.  Returns (value, chosen action index per own infostate).
    """
    A = layout.max_actions
    slots = np.zeros(layout.n_slots + 1)  # last entry: the empty sequence
    tslot = layout.terminal_slot[player]
    np.add.at(slots, np.where(tslot >= 0, tslot, layout.n_slots), weights)
    own = layout.player_infostates(player)
    choice = {}
    if own.size:
        depths = layout.depth[own]
        for d in sorted(set(depths.tolist()), reverse=True):
            level = own[depths == d]
            vals = slots[:layout.n_slots].reshape(layout.n_infostates, A)[level]
            vals = np.where(layout.action_mask[level] > 0, vals, -np.inf)
            best = vals.argmax(axis=1)
            best_val = vals[np.arange(level.size), best]
            parents = layout.parent_slot[level]
            np.add.at(slots, np.where(parents >= 0, parents, layout.n_slots), best_val)
            choice.update(zip(level.tolist(), best.tolist()))
    return float(slots[layout.n_slots]), choice


def best_response(game, profile, responder):
    """Best-response value and a pure best response for ``responder``.

    Returns ``(value, profile')`` where ``profile'`` equals ``profile`` with
    the responder's infostates replaced by the pure best response.
    """
    lay = game.layout
    probs = _probs(profile, lay)
    dec = reach_decompose(game, probs)
    weights = dec.chance * game.utilities[responder]
    for j in range(lay.n_players):
        if j != responder:
            weights = weights * dec.players[j]
    value, choice = _best_response_from_weights(lay, responder, weights)
    br = probs.copy()
    for s, a in choice.items():
        br[s] = 0.0
        br[s, a] = 1.0
    return value, StrategyProfile(lay, br, check=False)


def nash_gap(game, profile):
    """Largest unilateral gain over players against ``profile``."""
    probs = _probs(profile, game.layout)
    u = expected_utility(game, terminal_distribution(game, probs))
    gaps = [best_response(game, probs, i)[0] - u[i] for i in range(game.n_players)]
    return float(max(gaps))


def cce_gap(game, trace):
    """Best deviation gain against the empirical average joint profile of ``trace``.

    May be negative; the average joint profile is a CCE iff the result <= 0.
    """
    if trace.steps < 1:
        raise ContractViolation("cce_gap needs a trace with at least one step")
    lay = game.layout
    avg = trace.avg_reach
    u = game.utilities @ avg
    gaps = []
    for i in range(lay.n_players):
        weights = trace.avg_opponent_reach[i] * game.utilities[i]
        value, _ = _best_response_from_weights(lay, i, weights)
        gaps.append(value - u[i])
    return float(max(gaps))


def profile_statistics(layout, utilities, probs):
    """Everything one step of a solve needs from a (batched) profile.

    Works on arrays or tape Tensors.  Returns (contributions, opponent
    reach, counterfactual values (..., S, A), own infostate reach (..., S));
    the first two are per-player lists of (..., Z) arrays.
    """
    ext = reach.extended_slots(probs, layout)
    factors, contrib = reach.player_contributions(ext, layout)
    opp = [reach.others_product(contrib, i, layout.chance_reach) for i in range(layout.n_players)]
    cf = reach.counterfactual_values(factors, contrib, utilities, layout)
    own = reach.infostate_reach(ext, layout)
    return contrib, opp, cf, own


def accumulate(trace, layout, probs, contrib, opp, cf, own, weight=1.0):
    """Add one recorded profile to the running sums of a (possibly batched) trace."""
    contrib = np.stack(contrib)  # (n, ..., Z)
    opp = np.stack(opp)
    d = layout.chance_reach * np.prod(contrib, axis=0)
    lead = d.ndim - 1
    trace.steps += 1
    trace.reach_sum += d
    trace.contrib_sum += np.moveaxis(contrib, 0, lead)
    trace.opponent_reach_sum += np.moveaxis(opp, 0, lead)
    trace.cf_regret += (cf - (probs * cf).sum(axis=-1, keepdims=True)) * layout.action_mask
    if own is None:
        own = np.ones(probs.shape[:-1])
    weighted = own[..., None] * probs
    trace.strategy_sum += weight * weighted
    trace.uniform_strategy_sum += weighted


def accumulate_profile(game, trace, probs, weight=1.0):
    """Add one profile to ``trace`` (single game)."""
    lay = game.layout
    probs = np.asarray(probs, dtype=np.float64)
    accumulate(trace, lay, probs, *profile_statistics(lay, game.utilities, probs), weight=weight)
