"""Accumulated state of a solve over one game."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass
class RunTrace:
    """Running sums of a regret-minimization run.

    All per-terminal arrays are dense in the game's terminal order.

    ``reach_sum``         sum_t d(sigma^t)(z)
    ``contrib_sum``       (n, Z) sum_t d_i(sigma^t)(z)
    ``opponent_reach_sum`` (n, Z) sum_t chance(z) * prod_{j != i} d_j(sigma^t)(z)
    ``cf_regret``         (S, A) unclamped cumulative counterfactual regret of
                          the recorded profiles, every player, every step
    ``strategy_sum``      (S, A) reach-weighted strategy sum under the
                          configured averaging weights
    ``uniform_strategy_sum`` (S, A) the same with unit weights
    """

    steps: int
    chance_reach: np.ndarray
    reach_sum: np.ndarray
    contrib_sum: np.ndarray
    opponent_reach_sum: np.ndarray
    cf_regret: np.ndarray
    strategy_sum: np.ndarray
    uniform_strategy_sum: np.ndarray
    action_mask: np.ndarray
    regrets: np.ndarray | None = None
    prefix_efm: list = field(default_factory=list)
    last_strategy: np.ndarray | None = None
    first_strategy: np.ndarray | None = None
    snapshots: dict = field(default_factory=dict, repr=False)

    @property
    def avg_reach(self):
        return self.reach_sum / self.steps

    @property
    def avg_contrib(self):
        return self.contrib_sum / self.steps

    @property
    def avg_opponent_reach(self):
        return self.opponent_reach_sum / self.steps

    def _normalize(self, total):
        mask = self.action_mask
        s = total.sum(axis=-1, keepdims=True)
        uniform = mask / mask.sum(axis=-1, keepdims=True)
        return np.where(s > 0, total / np.where(s > 0, s, 1.0), uniform)

    @property
    def avg_strategy(self):
        """Average behavior strategy under the run's averaging scheme."""
        return self._normalize(self.strategy_sum)

    @property
    def uniform_avg_strategy(self):
        """Reach-weighted uniform time average (realizes the marginal across terminals)."""
        return self._normalize(self.uniform_strategy_sum)

    def copy(self):
        return replace(
            self,
            chance_reach=self.chance_reach,
            reach_sum=self.reach_sum.copy(),
            contrib_sum=self.contrib_sum.copy(),
            opponent_reach_sum=self.opponent_reach_sum.copy(),
            cf_regret=self.cf_regret.copy(),
            strategy_sum=self.strategy_sum.copy(),
            uniform_strategy_sum=self.uniform_strategy_sum.copy(),
            regrets=None if self.regrets is None else self.regrets.copy(),
            prefix_efm=list(self.prefix_efm),
            snapshots={},
        )

    @property
    def batch_shape(self):
        return self.reach_sum.shape[:-1]

    def game(self, g):
        """Slice game ``g`` out of a batched trace."""
        pick = (lambda a: None if a is None else np.array(a[g]))
        return RunTrace(
            steps=self.steps,
            chance_reach=self.chance_reach,
            reach_sum=pick(self.reach_sum),
            contrib_sum=pick(self.contrib_sum),
            opponent_reach_sum=pick(self.opponent_reach_sum),
            cf_regret=pick(self.cf_regret),
            strategy_sum=pick(self.strategy_sum),
            uniform_strategy_sum=pick(self.uniform_strategy_sum),
            action_mask=self.action_mask,
            regrets=pick(self.regrets),
            prefix_efm=[float(v[g]) for v in self.prefix_efm],
            last_strategy=pick(self.last_strategy),
            first_strategy=pick(self.first_strategy),
        )

    @classmethod
    def from_profiles(cls, game, strategies):
        """Build a trace directly from a sequence of behavior profiles (no learning)."""
        from .metrics import accumulate_profile

        if not strategies:
            raise ValueError("need at least one profile")
        trace = cls.empty(game)
        for sigma in strategies:
            accumulate_profile(game, trace, np.asarray(getattr(sigma, "probs", sigma)))
        trace.first_strategy = np.asarray(getattr(strategies[0], "probs", strategies[0]))
        trace.last_strategy = np.asarray(getattr(strategies[-1], "probs", strategies[-1]))
        return trace

    @classmethod
    def empty(cls, game, batch=()):
        lay = getattr(game, "layout", game)
        n, Z, S, A = lay.n_players, lay.n_terminals, lay.n_infostates, lay.max_actions
        b = tuple(batch)
        return cls(
            steps=0,
            chance_reach=lay.chance_reach,
            reach_sum=np.zeros(b + (Z,)),
            contrib_sum=np.zeros(b + (n, Z)),
            opponent_reach_sum=np.zeros(b + (n, Z)),
            cf_regret=np.zeros(b + (S, A)),
            strategy_sum=np.zeros(b + (S, A)),
            uniform_strategy_sum=np.zeros(b + (S, A)),
            action_mask=lay.action_mask,
        )
