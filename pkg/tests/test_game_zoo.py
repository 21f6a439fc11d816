import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from leduc_oracle import count as leduc_count
from regretforge import games
from regretforge.efg import Chance, Decision, GameError, StrategyProfile, Terminal, expected_utility, terminal_distribution
from regretforge.games import (
    LeducSpec, SizeError, make_leduc, mixed_from_behavior, pure_strategy_counts, to_normal_form,
)


@pytest.fixture(scope="module")
def leduc2():
    return make_leduc(n=2, beta=1.0)


@pytest.fixture(scope="module")
def leduc2_discounted():
    return make_leduc(n=2, beta=0.6)


@pytest.fixture(scope="module")
def leduc3():
    return make_leduc(n=3, beta=1.0)


def follow(game, *labels):
    """Walk from the root by chance labels (ranks) and action letters."""
    node = game.root
    for label in labels:
        if isinstance(node, Chance):
            node = node.children[node.labels.index(str(label))]
        else:
            node = node.children[node.actions.index(label)]
    return node


def test_biased_shapley_payoffs():
    u = games.biased_shapley_payoffs(0.25)
    np.testing.assert_array_equal(u[0], [[1, 0, 0.25], [0, 1, 0], [0, 0, 1]])
    np.testing.assert_array_equal(u[1], [[0, 1, 0.25], [0, 0, 1], [1, 0, 0]])


def test_biased_shapley_rejects_nonfinite_eta():
    with pytest.raises(GameError):
        games.make_biased_shapley(float("nan"))


def test_matrix_game_shape_checked():
    with pytest.raises(GameError):
        games.matrix_game(np.zeros((2, 3)))


def test_matrix_game_players_do_not_observe_each_other():
    game = games.make_biased_shapley(0.0)
    assert [i.key for i in game.layout.infostates] == ["P0", "P1"]
    assert game.n_terminals == 9


@pytest.mark.parametrize("n", [2, 3])
def test_leduc_sizes_match_rule_enumeration(n, leduc2, leduc3):
    game = leduc2 if n == 2 else leduc3
    infostates, terminals = leduc_count(n)
    assert game.layout.n_infostates == infostates
    assert game.n_terminals == terminals


def test_two_player_leduc_sizes(leduc2):
    assert leduc2.layout.n_infostates == 288
    assert leduc2.n_terminals == 1116
    for p in range(2):
        assert len(leduc2.layout.player_infostates(p)) == 144


def test_leduc_zero_sum_at_full_tie_share(leduc2, leduc3):
    assert np.abs(leduc2.utilities.sum(axis=0)).max() <= 1e-12
    assert np.abs(leduc3.utilities.sum(axis=0)).max() <= 1e-12


def test_tie_discount_loses_money_exactly_at_ties(leduc2_discounted):
    total = leduc2_discounted.utilities.sum(axis=0)
    tied = np.array(_tied_showdown_flags(leduc2_discounted))
    assert (np.abs(total[~tied]) <= 1e-12).all()
    assert (total[tied] < -1e-12).all()
    tie = follow(leduc2_discounted, 0, 0, "k", "k", 1, "k", "k")
    assert tie.utilities == pytest.approx((0.6 * 2 / 2 - 1, 0.6 * 2 / 2 - 1))


def _tied_showdown_flags(game):
    """Per terminal in tree order: a showdown between equal unpaired ranks."""
    flags = []

    def rec(node, ranks, folded):
        if isinstance(node, Terminal):
            showdown = len(ranks) == 3 and not folded
            flags.append(showdown and ranks[0] == ranks[1] != ranks[2])
        elif isinstance(node, Chance):
            for label, child in zip(node.labels, node.children):
                rec(child, ranks + (int(label),), folded)
        else:
            for action, child in zip(node.actions, node.children):
                rec(child, ranks, folded or action == "f")

    rec(game.root, (), False)
    return flags


def test_leduc_payoffs_by_hand(leduc2):
    # pair beats high card: P1 holds rank 0 and pairs the public 0
    node = follow(leduc2, 1, 0, "k", "k", 0, "k", "k")
    assert node.utilities == (-1.0, 1.0)
    # higher rank wins without a pair
    node = follow(leduc2, 2, 0, "b", "c", 1, "b", "c")
    assert node.utilities == (7.0, -7.0)
    # fold leaves the other player with the pot
    node = follow(leduc2, 0, 2, "b", "f")
    assert node.utilities == (1.0, -1.0)
    # raise: bet 2, raise 2 more, call
    node = follow(leduc2, 0, 1, "b", "r", "c", 2, "k", "k")
    assert node.utilities == (-5.0, 5.0)


def test_leduc_bet_cap(leduc2):
    node = follow(leduc2, 0, 1, "b", "r")
    assert isinstance(node, Decision)
    assert node.actions == ("f", "c")


def test_leduc_infostate_keys(leduc2):
    keys = {i.key for i in leduc2.layout.infostates}
    assert "P0:0|?|/" in keys
    assert "P1:2|?|br/" not in keys  # P1 does not act after its own raise
    assert "P0:2|?|br/" in keys
    assert "P1:1|0|bc/b" in keys


def test_leduc_chance_probabilities(leduc2):
    root = leduc2.root
    assert root.probs == pytest.approx((1 / 3,) * 3)
    assert root.children[0].probs == pytest.approx((1 / 5, 2 / 5, 2 / 5))
    public = follow(leduc2, 0, 1, "k", "k")
    assert public.probs == pytest.approx((1 / 4, 1 / 4, 2 / 4))


def test_leduc_spec_validation():
    with pytest.raises(GameError):
        LeducSpec(n=4)
    with pytest.raises(GameError):
        LeducSpec(beta=1.5)


def test_three_player_leduc_first_infostates(leduc3):
    assert leduc3.layout.n_players == 3
    keys = {i.key for i in leduc3.layout.infostates}
    assert "P2:3|?|kk/" in keys


# ---------------------------------------------------------------- normal form

def test_normal_form_cap():
    with pytest.raises(SizeError):
        to_normal_form(make_leduc(n=2), cap=10_000)


def test_pure_strategy_counts():
    assert pure_strategy_counts(games.make_two_card_toy()) == (4, 4)
    assert pure_strategy_counts(games.make_biased_shapley(0.0)) == (3, 3)


@pytest.mark.parametrize("make", [games.make_two_card_toy, games.make_blind_chance_toy,
                                  lambda: games.make_biased_shapley(0.4)])
def test_normal_form_utilities_match_tree_for_every_pure_profile(make):
    game = make()
    view = to_normal_form(game)
    lay = game.layout
    for joint in itertools.product(*[range(k) for k in view.shape]):
        probs = np.zeros((lay.n_infostates, lay.max_actions))
        for i, k in enumerate(joint):
            probs[list(view.infostates[i]), list(view.strategies[i][k])] = 1.0
        profile = StrategyProfile(lay, probs)
        tree = expected_utility(game, terminal_distribution(game, profile))
        np.testing.assert_allclose(view.utilities[(slice(None),) + joint], tree, atol=1e-12)


@given(seed=st.integers(0, 2**32 - 1))
def test_mixed_from_behavior_is_a_distribution(seed):
    game = games.make_two_card_toy(rng=np.random.default_rng(seed))
    view = to_normal_form(game)
    rng = np.random.default_rng(seed)
    probs = rng.random((game.layout.n_infostates, game.layout.max_actions))
    probs /= probs.sum(axis=1, keepdims=True)
    for i in range(2):
        mixed = mixed_from_behavior(view, probs, i)
        assert mixed.min() >= 0
        assert mixed.sum() == pytest.approx(1.0, abs=1e-12)


def test_terminal_profile_reaches_its_terminal():
    game = games.make_two_card_toy()
    view = to_normal_form(game)
    for z in range(game.n_terminals):
        joint = view.terminal_profile(z)
        for i in range(2):
            assert view.contributions[i][joint[i], z] == 1.0
