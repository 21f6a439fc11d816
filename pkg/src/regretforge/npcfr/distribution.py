"""Game distributions whose samples share one tree and differ only in payoffs."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .. import games
from ..efg.tree import GameError

FAMILIES = ("biased_shapley", "biased_2p_leduc", "three_player_leduc")


@dataclass(frozen=True)
class GameDistribution:
    """``family`` with its parameter drawn from U(low, high) (``low == high`` is a point mass).

    Utilities are affine in the parameter (eta for Shapley, the tie
    fraction beta for Leduc), so a sample is ``base + param * direction``
    on the shared layout.
    """

    family: str
    low: float
    high: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GameError(f"unknown game family {self.family!r}; known: {', '.join(FAMILIES)}")
        if not self.low <= self.high:
            raise GameError("distribution needs low <= high")

    @classmethod
    def biased_shapley(cls, a=0.0, b=0.5):
        return cls("biased_shapley", float(a), float(b))

    @classmethod
    def biased_2p_leduc(cls, a=0.0, b=0.5):
        return cls("biased_2p_leduc", float(a), float(b))

    @classmethod
    def three_player_leduc(cls, beta=1.0):
        return cls("three_player_leduc", float(beta), float(beta))

    @classmethod
    def from_dict(cls, cfg):
        family = cfg.get("family")
        if family == "three_player_leduc" and "beta" in cfg:
            return cls.three_player_leduc(cfg["beta"])
        defaults = {"biased_shapley": (0.0, 0.5), "biased_2p_leduc": (0.0, 0.5),
                    "three_player_leduc": (1.0, 1.0)}
        if family not in defaults:
            raise GameError(f"unknown game family {family!r}")
        lo, hi = cfg.get("range", defaults[family])
        return cls(family, float(lo), float(hi))

    def as_dict(self):
        return {"family": self.family, "range": [self.low, self.high]}

    def make_game(self, param):
        if self.family == "biased_shapley":
            return games.make_biased_shapley(param)
        n = 2 if self.family == "biased_2p_leduc" else 3
        return games.make_leduc(n=n, beta=param)

    @cached_property
    def _affine(self):
        if self.low == self.high:
            g0 = self.make_game(self.low)
            return g0, g0.utilities.copy(), np.zeros_like(g0.utilities)
        g0, g1 = self.make_game(0.0), self.make_game(1.0)
        if g0.layout.signature() != g1.layout.signature():
            raise GameError("family parameter changes the tree structure")
        return g0, g0.utilities.copy(), g1.utilities - g0.utilities

    @property
    def layout(self):
        return self._affine[0].layout

    @property
    def structure(self):
        """A representative game of the family."""
        return self._affine[0]

    def sample_params(self, rng, count):
        if self.low == self.high:
            return np.full(count, self.low)
        return rng.uniform(self.low, self.high, size=count)

    def utilities(self, params):
        """(G, n, Z) utilities for the given parameters."""
        _, base, direction = self._affine
        params = np.asarray(params, dtype=np.float64)
        return base[None] + params[:, None, None] * direction[None]

    @property
    def default_activation(self):
        return "sigmoid" if self.family == "biased_shapley" else "tanh"

    @property
    def default_alpha(self):
        return 2.0 if self.family == "biased_shapley" else 1.0
