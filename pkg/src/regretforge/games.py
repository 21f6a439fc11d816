"""Concrete games, their analytic oracles and a brute-force normal-form view."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .efg.metrics import StrategyProfile
from .efg.tree import Chance, Decision, GameError, GameTree, Terminal


class SizeError(ValueError):
    """A normal-form expansion would exceed the configured cap."""

    def __init__(self, counts, cap):
        self.counts = tuple(int(c) for c in counts)
        self.cap = cap
        super().__init__(f"pure-strategy counts {self.counts} exceed cap {cap}")


# ---------------------------------------------------------------- matrix games

def matrix_game(payoffs, name="matrix", params=None):
    """Wrap an (n, a_1, ..., a_n) payoff array as a tree.

    Players move in seat order; each has one infostate, so later movers do
    not observe earlier choices.
    """
    payoffs = np.asarray(payoffs, dtype=np.float64)
    n = payoffs.shape[0]
    if payoffs.ndim != n + 1:
        raise GameError(f"payoff array of shape {payoffs.shape} does not describe {n} players")
    sizes = payoffs.shape[1:]

    def build(player, prefix):
        if player == n:
            return Terminal(tuple(payoffs[(slice(None),) + prefix].tolist()))
        actions = tuple(str(a) for a in range(sizes[player]))
        children = tuple(build(player + 1, prefix + (a,)) for a in range(sizes[player]))
        return Decision(player, f"P{player}", actions, children)

    return GameTree(build(0, ()), n, name=name, params=params)


def biased_shapley_payoffs(eta):
    eta = float(eta)
    if not math.isfinite(eta):
        raise GameError("eta must be finite")
    u1 = np.eye(3)
    u2 = np.array([[0.0, 1, 0], [0, 0, 1], [1, 0, 0]])
    u1[0, 2] = eta
    u2[0, 2] = eta
    return np.stack([u1, u2])


def make_biased_shapley(eta):
    return matrix_game(biased_shapley_payoffs(eta), name="biased_shapley", params={"eta": float(eta)})


def analytic_nash_biased_shapley(eta, game=None):
    """Closed-form fully mixed equilibrium of the biased Shapley game."""
    eta = float(eta)
    if eta >= 3:
        raise ZeroDivisionError(f"closed form undefined for eta={eta} >= 3")
    if eta > 1:
        raise GameError(f"closed form is not a distribution for eta={eta} > 1")
    z = 3.0 - eta
    row = [1 / z, (1 - eta) / z, 1 / z]
    col = [(1 - eta) / z, 1 / z, 1 / z]
    game = game or make_biased_shapley(eta)
    return StrategyProfile.from_dict(game, {"P0": row, "P1": col})


def delta_star():
    """The correlated six-cell distribution the Shapley dynamics cycle through."""
    return np.array([[1.0, 1, 0], [0, 1, 1], [1, 0, 1]]) / 6.0


def delta_star_cycle():
    """The six pure joint profiles in the support of :func:`delta_star`, in cycle order."""
    return [(0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 0)]


def pure_matrix_profile(game, actions):
    """Behavior profile for a matrix game where player i plays ``actions[i]``."""
    lay = game.layout
    probs = np.zeros((lay.n_infostates, lay.max_actions))
    for i, a in enumerate(actions):
        probs[lay.infostate_index(f"P{i}"), a] = 1.0
    return StrategyProfile(lay, probs)


# ---------------------------------------------------------------- toy trees

def make_two_card_toy(payoffs=None, rng=None):
    """Kuhn-like toy: a fair coin deals card c to player 0 and the other card to player 1.

    Each player observes only their own card and picks one of two actions, so
    each has two infostates.  Utilities default to a fixed general-sum table
    indexed [player, c, a0, a1]; pass ``rng`` for random ones.
    """
    if payoffs is None:
        if rng is not None:
            payoffs = rng.uniform(-1, 1, size=(2, 2, 2, 2))
        else:
            payoffs = np.array([
                [[[1.0, -1], [0, 2]], [[-2, 1], [1, 0]]],
                [[[-1.0, 1], [2, 0]], [[1, -1], [0, 1]]],
            ])
    payoffs = np.asarray(payoffs, dtype=np.float64)

    def subtree(c):
        p1 = []
        for a in range(2):
            leaves = tuple(Terminal(tuple(payoffs[:, c, a, b])) for b in range(2))
            p1.append(Decision(1, f"P1:{1 - c}", ("l", "r"), leaves))
        return Decision(0, f"P0:{c}", ("l", "r"), tuple(p1))

    return GameTree(Chance((0.5, 0.5), (subtree(0), subtree(1)), labels=("0", "1")),
                    2, name="two_card_toy")


def make_blind_chance_toy(payoffs=None, rng=None, actions=2):
    """Two players with one ``actions``-way infostate each, then a coin nobody observes."""
    if payoffs is None:
        rng = rng or np.random.default_rng(0)
        payoffs = rng.uniform(-1, 1, size=(2, actions, actions, 2))
    payoffs = np.asarray(payoffs, dtype=np.float64)
    k = payoffs.shape[1]
    labels = tuple("abcdefghij"[:k])

    def leaf(a, b):
        kids = tuple(Terminal(tuple(payoffs[:, a, b, c])) for c in range(2))
        return Chance((0.25, 0.75), kids)

    p1 = tuple(Decision(1, "P1", labels, tuple(leaf(a, b) for b in range(k))) for a in range(k))
    return GameTree(Decision(0, "P0", labels, p1), 2, name="blind_chance_toy")


# ---------------------------------------------------------------- Leduc

@dataclass(frozen=True)
class LeducSpec:
    n: int = 2
    beta: float = 1.0
    ante: float = 1.0
    bet_sizes: tuple = (2.0, 4.0)
    max_bets: int = 2

    def __post_init__(self):
        if self.n not in (2, 3):
            raise GameError(f"Leduc supports 2 or 3 players, got n={self.n}")
        if not 0.0 <= self.beta <= 1.0:
            raise GameError(f"beta must lie in [0, 1], got {self.beta}")

    @property
    def ranks(self):
        return self.n + 1

    @property
    def deck_size(self):
        return 2 * self.ranks


def leduc_showdown(spec, hands, public, active, contributions):
    """Net utility per player at a showdown among ``active`` players."""
    pot = float(sum(contributions))
    paired = [p for p in active if hands[p] == public]
    if paired:
        winners = paired
    else:
        top = max(hands[p] for p in active)
        winners = [p for p in active if hands[p] == top]
    share = pot / len(winners)
    if len(winners) > 1:
        share *= spec.beta
    return tuple((share if p in winners else 0.0) - contributions[p] for p in range(spec.n))


def _deal_children(counts):
    """Chance outcomes over ranks with probability proportional to remaining copies."""
    total = sum(counts)
    return [(r, c / total) for r, c in enumerate(counts) if c > 0]


def make_leduc(spec=None, **kwargs):
    """Leduc poker for 2 or 3 players with the tie-discount ``beta``.

    Cards are dealt by rank (suits never matter), so a chance node has one
    child per rank still in the deck.  Infostate keys read
    ``P{player}:{rank}|{public rank or ?}|{round-1 actions}/{round-2 actions}``
    with k = check, b = bet, c = call, r = raise, f = fold.
    """
    spec = spec or LeducSpec(**kwargs)
    n = spec.n

    def deal_private(player, hands, counts):
        if player == n:
            return betting(0, hands, None, (spec.ante,) * n, frozenset(), ("", ""), counts,
                           0, frozenset(), 0)
        kids, probs = [], []
        for r, p in _deal_children(counts):
            kids.append(deal_private(player + 1, hands + (r,), _take(counts, r)))
            probs.append(p)
        return Chance(tuple(probs), tuple(kids), tuple(str(r) for r, _ in _deal_children(counts)))

    def deal_public(hands, contrib, folded, hist, counts):
        outcomes = _deal_children(counts)
        kids = tuple(betting(1, hands, r, contrib, folded, hist, counts, 0, frozenset(), 0)
                     for r, _ in outcomes)
        return Chance(tuple(p for _, p in outcomes), kids, tuple(str(r) for r, _ in outcomes))

    def betting(rnd, hands, public, contrib, folded, hist, counts, to_act, acted, bets):
        active = [p for p in range(n) if p not in folded]
        pot = sum(contrib)
        if len(active) == 1:
            return Terminal(tuple((pot if p == active[0] else 0.0) - contrib[p] for p in range(n)))
        top = max(contrib)
        if all(p in acted and contrib[p] == top for p in active):
            if rnd == 0:
                return deal_public(hands, contrib, folded, hist, counts)
            return Terminal(leduc_showdown(spec, hands, public, active, contrib))
        p = to_act
        while p in folded:
            p = (p + 1) % n
        size = spec.bet_sizes[rnd]
        options = []
        if contrib[p] < top:
            options.append(("f", contrib, folded | {p}, bets))
            options.append(("c", _put(contrib, p, top - contrib[p]), folded, bets))
            if bets < spec.max_bets:
                options.append(("r", _put(contrib, p, top - contrib[p] + size), folded, bets + 1))
        else:
            options.append(("k", contrib, folded, bets))
            if bets < spec.max_bets:
                options.append(("b", _put(contrib, p, size), folded, bets + 1))
        pub = "?" if public is None else str(public)
        key = f"P{p}:{hands[p]}|{pub}|{hist[0]}/{hist[1]}"
        kids = []
        for letter, new_contrib, new_folded, new_bets in options:
            new_hist = hist[:rnd] + (hist[rnd] + letter,) + hist[rnd + 1:]
            # a bet or raise reopens the action for everyone else
            new_acted = frozenset({p}) if new_bets > bets else acted | {p}
            kids.append(betting(rnd, hands, public, new_contrib, frozenset(new_folded), new_hist,
                                counts, (p + 1) % n, new_acted, new_bets))
        return Decision(p, key, tuple(o[0] for o in options), tuple(kids))

    root = deal_private(0, (), (2,) * spec.ranks)
    return GameTree(root, n, name=f"leduc{n}", params={"n": n, "beta": spec.beta})


def _take(counts, r):
    return counts[:r] + (counts[r] - 1,) + counts[r + 1:]


def _put(contrib, p, amount):
    return contrib[:p] + (contrib[p] + amount,) + contrib[p + 1:]


# ---------------------------------------------------------------- normal form

@dataclass(frozen=True)
class NormalFormView:
    """Exhaustive pure-strategy table of a small game.

    ``strategies[i]`` lists player i's pure strategies as tuples of action
    indices over ``infostates[i]`` (that player's infostate rows).
    ``contributions[i]`` is a 0/1 matrix (pure strategy, terminal) telling
    whether the pure strategy plays every own action on the path to z.
    ``utilities`` has shape (n, |P_1|, ..., |P_n|) with chance in expectation.
    """

    infostates: tuple
    strategies: tuple
    contributions: tuple
    utilities: np.ndarray
    chance_reach: np.ndarray
    terminal_profiles: tuple

    @property
    def shape(self):
        return tuple(len(s) for s in self.strategies)

    def strategy_index(self, player, actions):
        return self.strategies[player].index(tuple(actions))

    def terminal_profile(self, z):
        """Pure profile reaching terminal z; off-path infostates play action 0."""
        return self.terminal_profiles[z]

    def evaluate(self, mixed):
        """Expected utilities of independent mixed strategies (one vector per player)."""
        out = self.utilities
        for m in reversed(mixed):
            out = out @ np.asarray(m)
        return out


def pure_strategy_counts(game):
    lay = game.layout
    return tuple(math.prod(int(k) for k in lay.n_actions[lay.owner == i]) for i in range(game.n_players))


def to_normal_form(game, cap=10_000):
    counts = pure_strategy_counts(game)
    if math.prod(counts) > cap:
        raise SizeError(counts, cap)
    lay = game.layout
    infos, strategies, contributions = [], [], []
    for i in range(game.n_players):
        rows = lay.player_infostates(i)
        strats = list(itertools.product(*[range(lay.n_actions[s]) for s in rows]))
        probs = np.zeros((len(strats), lay.n_infostates, lay.max_actions))
        for k, pure in enumerate(strats):
            probs[k, rows, pure] = 1.0
        ext = np.concatenate([probs.reshape(len(strats), -1), np.ones((len(strats), 1))], axis=1)
        contrib = np.ones((len(strats), lay.n_terminals))
        for k in range(lay.depth_levels):
            contrib = contrib * ext[:, lay.terminal_path[i, k]]
        infos.append(tuple(rows.tolist()))
        strategies.append(tuple(strats))
        contributions.append(contrib)
    letters = "abcdefghijklmnopqrstuvwxy"[:game.n_players]
    expr = "nz,z," + ",".join(f"{c}z" for c in letters) + "->n" + letters
    utilities = np.einsum(expr, game.utilities, lay.chance_reach, *contributions)
    profiles = []
    for z in range(lay.n_terminals):
        joint = []
        for i in range(game.n_players):
            pure = dict.fromkeys(infos[i], 0)
            for slot in lay.terminal_path[i, :, z]:
                if slot < lay.n_slots:
                    pure[int(slot) // lay.max_actions] = int(slot) % lay.max_actions
            joint.append(strategies[i].index(tuple(pure[s] for s in infos[i])))
        profiles.append(tuple(joint))
    return NormalFormView(tuple(infos), tuple(strategies), tuple(contributions), utilities,
                          lay.chance_reach.copy(), tuple(profiles))


def mixed_from_behavior(view, probs, player):
    """Kuhn-equivalent mixed strategy of a behavior strategy (product over infostates)."""
    probs = np.asarray(getattr(probs, "probs", probs))
    rows = view.infostates[player]
    out = np.ones(len(view.strategies[player]))
    for k, pure in enumerate(view.strategies[player]):
        for s, a in zip(rows, pure):
            out[k] *= probs[s, a]
    return out


