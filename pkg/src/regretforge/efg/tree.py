"""Immutable infostate-annotated game trees and their compiled layout.

Nodes are plain frozen dataclasses.  :class:`GameTree` validates the tree and
compiles it once into a :class:`Layout`: dense arrays indexing infostates,
padded action slots and terminals in depth-first discovery order.  Everything
downstream (reach products, counterfactual values, best responses, the solver
and its differentiable twin) works on that layout.

Sequences are addressed by a flat slot ``s * max_actions + a``.  The extra
slot ``n_slots`` (== ``n_infostates * max_actions``) is the padding slot: it
holds the constant 1 when gathering strategy products and acts as a dump bin
when scattering.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..autodiff.ops import IndexMap


class GameError(ValueError):
    """Malformed game tree or invalid game configuration."""


class ContractViolation(ValueError):
    """An operation was called with inputs that break its contract."""


@dataclass(frozen=True)
class Terminal:
    utilities: tuple


@dataclass(frozen=True)
class Chance:
    probs: tuple
    children: tuple
    labels: tuple = ()


@dataclass(frozen=True)
class Decision:
    player: int
    infostate: str
    actions: tuple
    children: tuple


@dataclass(frozen=True)
class InfostateInfo:
    index: int
    player: int
    key: str
    actions: tuple
    parent_slot: int   # flat slot of the owner's previous sequence, or -1
    depth: int         # number of own decisions before this one


@dataclass(frozen=True, eq=False)
class Layout:
    n_players: int
    infostates: tuple
    max_actions: int
    n_terminals: int
    owner: np.ndarray          # (S,)
    n_actions: np.ndarray      # (S,)
    action_mask: np.ndarray    # (S, A) float 0/1
    parent_slot: np.ndarray    # (S,)
    depth: np.ndarray          # (S,)
    terminal_path: np.ndarray  # (n, D, Z) flat slots, padded with n_slots
    terminal_slot: np.ndarray  # (n, Z) last own slot or -1
    infostate_path: np.ndarray  # (D, S) own ancestors' slots, padded
    chance_reach: np.ndarray   # (Z,)
    chance_path: tuple         # per terminal: tuple of chance outcome indices
    action_path: tuple         # per terminal: tuple of (node kind, index) steps
    path_maps: tuple = field(repr=False)       # [player][k] -> IndexMap
    infostate_maps: tuple = field(repr=False)  # [k] -> IndexMap

    @property
    def n_infostates(self):
        return len(self.infostates)

    @property
    def n_slots(self):
        return self.n_infostates * self.max_actions

    @property
    def depth_levels(self):
        return self.terminal_path.shape[1]

    def player_infostates(self, player):
        return np.flatnonzero(self.owner == player)

    def infostate_index(self, key):
        for info in self.infostates:
            if info.key == key:
                return info.index
        raise KeyError(key)

    def signature(self):
        """Digest of the structure (everything except utilities)."""
        h = hashlib.sha256()
        h.update(repr([(i.player, i.key, i.actions, i.parent_slot) for i in self.infostates]).encode())
        for arr in (self.terminal_path, self.chance_reach):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


class GameTree:
    """A validated, compiled extensive-form game.

    ``utilities`` is the (n_players, n_terminals) payoff matrix in terminal
    discovery order.
    """

    def __init__(self, root, n_players, name="game", params=None):
        if n_players < 1:
            raise GameError("a game needs at least one player")
        self.root = root
        self.n_players = int(n_players)
        self.name = name
        self.params = dict(params or {})
        self.layout, self.utilities = _compile(root, self.n_players)
        self.utilities.setflags(write=False)

    def __repr__(self):
        lay = self.layout
        return (f"GameTree({self.name!r}, players={self.n_players}, "
                f"infostates={lay.n_infostates}, terminals={lay.n_terminals})")

    @property
    def n_terminals(self):
        return self.layout.n_terminals

    @property
    def max_abs_utility(self):
        return float(np.abs(self.utilities).max()) if self.utilities.size else 0.0

    def terminals(self):
        """Yield terminal nodes in discovery order (independent re-walk)."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Terminal):
                yield node
            else:
                stack.extend(reversed(node.children))


def _compile(root, n_players):
    infos = {}          # (player, key) -> dict
    order = []
    term_paths = []     # per terminal: list per player of (s, a)
    term_utils = []
    term_chance = []
    term_chance_path = []
    term_action_path = []

    # Iterative DFS: (node, own sequences per player, chance prob, chance path, action path)
    stack = [(root, tuple(() for _ in range(n_players)), 1.0, (), ())]
    while stack:
        node, own, prob, cpath, apath = stack.pop()
        if isinstance(node, Terminal):
            if len(node.utilities) != n_players:
                raise GameError(f"terminal carries {len(node.utilities)} utilities, expected {n_players}")
            term_paths.append(own)
            term_utils.append(tuple(float(u) for u in node.utilities))
            term_chance.append(prob)
            term_chance_path.append(cpath)
            term_action_path.append(apath)
        elif isinstance(node, Chance):
            probs = np.asarray(node.probs, dtype=np.float64)
            if len(probs) != len(node.children) or len(probs) == 0:
                raise GameError("chance node needs one probability per child")
            if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-12:
                raise GameError(f"chance probabilities {probs.tolist()} do not form a distribution")
            for k in reversed(range(len(node.children))):
                stack.append((node.children[k], own, prob * probs[k], cpath + (k,), apath + (("c", k),)))
        elif isinstance(node, Decision):
            p = node.player
            if not 0 <= p < n_players:
                raise GameError(f"decision owner {p} outside player range")
            if len(node.actions) != len(node.children) or not node.actions:
                raise GameError(f"infostate {node.infostate!r}: actions and children disagree")
            key = (p, node.infostate)
            if key not in infos:
                infos[key] = {"index": len(order), "actions": tuple(node.actions), "history": own[p]}
                order.append(key)
            rec = infos[key]
            if rec["actions"] != tuple(node.actions):
                raise GameError(f"infostate {node.infostate!r} exposes different action lists")
            if rec["history"] != own[p]:
                raise GameError(f"infostate {node.infostate!r} violates perfect recall")
            s = rec["index"]
            for a in reversed(range(len(node.children))):
                new_own = own[:p] + (own[p] + ((s, a),),) + own[p + 1:]
                stack.append((node.children[a], new_own, prob, cpath, apath + (("d", a),)))
        else:
            raise GameError(f"unknown node type {type(node).__name__}")

    if not term_paths:
        raise GameError("game has no terminals")

    n_inf = len(order)
    max_actions = max((len(infos[k]["actions"]) for k in order), default=1)
    n_slots = n_inf * max_actions
    pad = n_slots

    def slot(sa):
        return sa[0] * max_actions + sa[1]

    infostates = []
    for key in order:
        rec = infos[key]
        hist = rec["history"]
        infostates.append(InfostateInfo(
            index=rec["index"], player=key[0], key=key[1], actions=rec["actions"],
            parent_slot=slot(hist[-1]) if hist else -1, depth=len(hist)))

    depth_levels = max([len(p) for paths in term_paths for p in paths] + [1])
    Z = len(term_paths)
    terminal_path = np.full((n_players, depth_levels, Z), pad, dtype=np.int64)
    terminal_slot = np.full((n_players, Z), -1, dtype=np.int64)
    for z, paths in enumerate(term_paths):
        for p, seq in enumerate(paths):
            for k, sa in enumerate(seq):
                terminal_path[p, k, z] = slot(sa)
            if seq:
                terminal_slot[p, z] = slot(seq[-1])

    infostate_path = np.full((depth_levels, max(n_inf, 1)), pad, dtype=np.int64)[:, :n_inf]
    for info, key in zip(infostates, order):
        for k, sa in enumerate(infos[key]["history"]):
            infostate_path[k, info.index] = slot(sa)

    owner = np.array([i.player for i in infostates], dtype=np.int64)
    n_actions = np.array([len(i.actions) for i in infostates], dtype=np.int64)
    mask = np.zeros((n_inf, max_actions))
    for i in infostates:
        mask[i.index, :len(i.actions)] = 1.0

    path_maps = tuple(
        tuple(IndexMap(terminal_path[p, k], n_slots + 1) for k in range(depth_levels))
        for p in range(n_players))
    infostate_maps = tuple(IndexMap(infostate_path[k], n_slots + 1) for k in range(depth_levels))

    layout = Layout(
        n_players=n_players,
        infostates=tuple(infostates),
        max_actions=max_actions,
        n_terminals=Z,
        owner=owner,
        n_actions=n_actions,
        action_mask=mask,
        parent_slot=np.array([i.parent_slot for i in infostates], dtype=np.int64),
        depth=np.array([i.depth for i in infostates], dtype=np.int64),
        terminal_path=terminal_path,
        terminal_slot=terminal_slot,
        infostate_path=infostate_path,
        chance_reach=np.array(term_chance),
        chance_path=tuple(term_chance_path),
        action_path=tuple(term_action_path),
        path_maps=path_maps,
        infostate_maps=infostate_maps,
    )
    for arr in (owner, n_actions, mask, terminal_path, terminal_slot, infostate_path, layout.chance_reach):
        arr.setflags(write=False)
    utilities = np.array(term_utils, dtype=np.float64).T.copy()
    return layout, utilities
