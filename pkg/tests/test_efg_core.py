import numpy as np
import pytest
from hypothesis import given, strategies as st

from regretforge import games
from regretforge.efg import (
    Chance, ContractViolation, Decision, GameError, GameTree, RunTrace, StrategyProfile, Terminal,
    best_response, cce_gap, expected_utility, nash_gap, reach_decompose, terminal_distribution,
)
from regretforge.games import mixed_from_behavior, to_normal_form

seeds = st.integers(0, 2**32 - 1)


def random_profile(game, rng, concentration=1.0):
    lay = game.layout
    probs = rng.gamma(concentration, size=(lay.n_infostates, lay.max_actions)) * lay.action_mask
    return StrategyProfile(lay, probs / probs.sum(axis=1, keepdims=True))


def walk_reach(game, profile):
    """Terminal reach by direct recursion over the node objects (left-to-right preorder)."""
    lay = game.layout
    index = {info.key: info.index for info in lay.infostates}
    out = []

    def rec(node, p):
        if isinstance(node, Terminal):
            out.append(p)
        elif isinstance(node, Chance):
            for q, child in zip(node.probs, node.children):
                rec(child, p * q)
        else:
            row = profile.probs[index[node.infostate]]
            for a, child in enumerate(node.children):
                rec(child, p * row[a])

    rec(game.root, 1.0)
    return np.array(out)


SMALL_GAMES = {
    "shapley": lambda: games.make_biased_shapley(0.3),
    "two_card": games.make_two_card_toy,
    "blind_chance": games.make_blind_chance_toy,
}


@pytest.fixture(scope="module")
def leduc2():
    return games.make_leduc(n=2, beta=0.6)


@given(seed=seeds, name=st.sampled_from(sorted(SMALL_GAMES)))
def test_reach_decomposition_matches_tree_walk(seed, name):
    game = SMALL_GAMES[name]()
    profile = random_profile(game, np.random.default_rng(seed))
    dec = reach_decompose(game, profile)
    np.testing.assert_allclose(dec.reach, walk_reach(game, profile), rtol=0, atol=1e-12)
    assert dec.players.shape == (game.n_players, game.n_terminals)


@given(seed=seeds)
def test_leduc_reach_decomposition_matches_tree_walk(leduc2, seed):
    profile = random_profile(leduc2, np.random.default_rng(seed), concentration=0.5)
    np.testing.assert_allclose(terminal_distribution(leduc2, profile), walk_reach(leduc2, profile),
                               rtol=0, atol=1e-12)


def test_terminal_order_matches_tree_iteration(leduc2):
    utils = np.array([t.utilities for t in leduc2.terminals()]).T
    np.testing.assert_array_equal(utils, leduc2.utilities)


@given(seed=seeds, name=st.sampled_from(sorted(SMALL_GAMES)))
def test_expected_utility_agrees_with_normal_form(seed, name):
    game = SMALL_GAMES[name]()
    view = to_normal_form(game)
    profile = random_profile(game, np.random.default_rng(seed))
    mixed = [mixed_from_behavior(view, profile, i) for i in range(game.n_players)]
    tree = expected_utility(game, terminal_distribution(game, profile))
    np.testing.assert_allclose(tree, view.evaluate(mixed), atol=1e-9)


@given(seed=seeds, name=st.sampled_from(sorted(SMALL_GAMES)))
def test_best_response_matches_pure_strategy_enumeration(seed, name):
    game = SMALL_GAMES[name]()
    view = to_normal_form(game)
    profile = random_profile(game, np.random.default_rng(seed))
    mixed = [mixed_from_behavior(view, profile, i) for i in range(game.n_players)]
    for i in range(game.n_players):
        values = []
        for k in range(view.shape[i]):
            pure = list(mixed)
            pure[i] = np.eye(view.shape[i])[k]
            values.append(view.evaluate(pure)[i])
        value, br = best_response(game, profile, i)
        assert value == pytest.approx(max(values), abs=1e-9)
        deviated = profile.with_player(i, br)
        achieved = expected_utility(game, terminal_distribution(game, deviated))[i]
        assert achieved == pytest.approx(value, abs=1e-9)


@given(seed=seeds)
def test_nash_gap_is_nonnegative(leduc2, seed):
    assert nash_gap(leduc2, random_profile(leduc2, np.random.default_rng(seed))) >= -1e-9


@given(eta=st.floats(-2.0, 1.0))
def test_analytic_biased_shapley_equilibrium(eta):
    game = games.make_biased_shapley(eta)
    assert nash_gap(game, games.analytic_nash_biased_shapley(eta, game)) <= 1e-9


def test_analytic_equilibrium_domain():
    with pytest.raises(ZeroDivisionError):
        games.analytic_nash_biased_shapley(3.0)
    with pytest.raises(GameError):
        games.analytic_nash_biased_shapley(1.5)


def test_uniform_is_nash_of_unbiased_shapley():
    game = games.make_biased_shapley(0.0)
    assert nash_gap(game, StrategyProfile.uniform(game)) <= 1e-12


@given(eta=st.floats(0.0, 1.0))
def test_cce_gap_of_the_six_cell_cycle(eta):
    game = games.make_biased_shapley(eta)
    cycle = [games.pure_matrix_profile(game, a) for a in games.delta_star_cycle()]
    trace = RunTrace.from_profiles(game, cycle)
    assert cce_gap(game, trace) == pytest.approx((1 + eta) / 3 - 0.5, abs=1e-12)


def test_empirical_joint_of_the_cycle_is_delta_star():
    game = games.make_biased_shapley(0.2)
    cycle = [games.pure_matrix_profile(game, a) for a in games.delta_star_cycle()]
    trace = RunTrace.from_profiles(game, cycle)
    np.testing.assert_allclose(trace.avg_reach.reshape(3, 3), games.delta_star(), atol=1e-15)


def test_cce_gap_of_a_single_pure_profile_is_its_nash_gap():
    game = games.make_biased_shapley(0.4)
    profile = games.pure_matrix_profile(game, (0, 2))
    trace = RunTrace.from_profiles(game, [profile])
    assert cce_gap(game, trace) == pytest.approx(nash_gap(game, profile), abs=1e-12)


def test_cce_gap_needs_steps():
    game = games.make_biased_shapley(0.0)
    with pytest.raises(ContractViolation):
        cce_gap(game, RunTrace.empty(game))


# ---------------------------------------------------------------- validation

def test_profile_rejects_bad_sum_and_names_infostate():
    game = games.make_two_card_toy()
    probs = StrategyProfile.uniform(game).probs.copy()
    probs[2, 0] = 0.9
    key = game.layout.infostates[2].key
    with pytest.raises(ContractViolation, match=key.replace("|", r"\|")):
        StrategyProfile(game.layout, probs)


def test_profile_rejects_mass_on_illegal_slot(leduc2):
    lay = leduc2.layout
    probs = StrategyProfile.uniform(leduc2).probs.copy()
    s = int(np.flatnonzero(lay.n_actions < lay.max_actions)[0])
    probs[s] = 0.0
    probs[s, lay.max_actions - 1] = 1.0
    with pytest.raises(ContractViolation, match="illegal"):
        StrategyProfile(lay, probs)


def test_from_dict_names_missing_infostate():
    game = games.make_biased_shapley(0.1)
    with pytest.raises(ContractViolation, match="P1"):
        StrategyProfile.from_dict(game, {"P0": [1, 0, 0]})


def test_profile_round_trips_through_dict(leduc2):
    profile = random_profile(leduc2, np.random.default_rng(3))
    again = StrategyProfile.from_dict(leduc2, profile.to_dict())
    np.testing.assert_array_equal(again.probs, profile.probs)


def test_expected_utility_checks_its_input():
    game = games.make_biased_shapley(0.0)
    with pytest.raises(ContractViolation):
        expected_utility(game, np.ones(4) / 4)
    with pytest.raises(ContractViolation):
        expected_utility(game, np.ones(9) / 8)


def test_chance_probabilities_must_sum_to_one():
    leaf = Terminal((0.0, 0.0))
    with pytest.raises(GameError, match="distribution"):
        GameTree(Chance((0.5, 0.4), (leaf, leaf)), 2)


def test_terminal_utility_count_checked():
    with pytest.raises(GameError, match="utilities"):
        GameTree(Decision(0, "a", ("x",), (Terminal((1.0,)),)), 2)


def test_inconsistent_action_lists_rejected():
    leaf = Terminal((0.0, 0.0))
    root = Chance((0.5, 0.5), (Decision(0, "s", ("x", "y"), (leaf, leaf)),
                               Decision(0, "s", ("x", "z"), (leaf, leaf))))
    with pytest.raises(GameError):
        GameTree(root, 2)


def test_imperfect_recall_rejected():
    leaf = Terminal((0.0, 0.0))
    # player 0 forgets its own first move
    root = Decision(0, "first", ("x", "y"), (Decision(0, "again", ("u", "v"), (leaf, leaf)),
                                              Decision(0, "again", ("u", "v"), (leaf, leaf))))
    with pytest.raises(GameError, match="perfect recall"):
        GameTree(root, 2)


def test_owner_outside_player_range_rejected():
    with pytest.raises(GameError):
        GameTree(Decision(2, "s", ("x",), (Terminal((0.0, 0.0)),)), 2)
