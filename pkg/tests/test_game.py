import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from fplab.errors import DimensionError
from fplab.game import (
    Game,
    best_response_set,
    coordination,
    correlated,
    epsilon_best_response_set,
    expected_utility,
    joint_distribution,
    load_game,
    matching_pennies,
    nash_gap,
    pure,
    random_game,
    simplex,
    uniform,
)

MP = matching_pennies()
COORD = coordination()


@st.composite
def game_and_profile(draw, max_players=3, max_actions=3):
    n = draw(st.integers(2, max_players))
    counts = tuple(draw(st.integers(1, max_actions)) for _ in range(n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    g = random_game(counts, rng)
    prof = tuple(rng.dirichlet(np.ones(k)) for k in counts)
    return g, prof


class TestSimplex:
    def test_renormalizes_small_drift(self):
        w = simplex([0.5, 0.5 + 5e-7])
        assert abs(w.sum() - 1.0) < 1e-12

    def test_rejects_large_drift(self):
        with pytest.raises(ValueError):
            simplex([0.5, 0.6])

    def test_rejects_negative_mass(self):
        with pytest.raises(ValueError):
            simplex([1.1, -0.1])

    def test_dimension_checked(self):
        with pytest.raises(DimensionError):
            simplex([0.5, 0.5], size=3)

    def test_correlated_shape(self):
        c = correlated(np.full(6, 1 / 6), (2, 3))
        assert c.shape == (2, 3)
        with pytest.raises(DimensionError):
            correlated(np.full(5, 0.2), (2, 3))


class TestGame:
    def test_json_round_trip(self, tmp_path):
        g = load_game("congestion_3p")
        g.save(tmp_path / "g.json")
        h = load_game(str(tmp_path / "g.json"))
        assert np.array_equal(g.utilities, h.utilities)

    def test_flatten_order_is_lexicographic(self):
        doc = MP.to_dict()
        # player 1 payoffs HH, HT, TH, TT
        assert doc["utilities"][0] == [1.0, -1.0, -1.0, 1.0]
        assert json.loads(json.dumps(doc)) == doc

    def test_bad_table_size(self):
        with pytest.raises(DimensionError):
            Game.from_dict({"players": 2, "actions": [2, 2], "utilities": [[1, 2, 3], [1, 2, 3, 4]]})

    def test_nonfinite_rejected(self):
        u = np.zeros((2, 2, 2))
        u[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            Game(u)

    def test_unknown_ref(self):
        with pytest.raises(FileNotFoundError):
            load_game("no_such_game")

    def test_presets_shapes(self):
        assert load_game("shapley3").action_counts == (3, 3)
        assert load_game("congestion_3p").action_counts == (3, 3, 3)
        assert load_game("coordination2").action_counts == (2, 2)


class TestExpectedUtility:
    def test_uniform_matching_pennies(self):
        assert expected_utility(MP, 0, (uniform(2), uniform(2))) == 0.0

    def test_pure_readout(self):
        assert expected_utility(MP, 0, (pure(0, 2), pure(1, 2))) == -1.0

    def test_hand_sum(self):
        # 0.9 * 1 + 0.1 * (-1)
        assert expected_utility(MP, 0, (pure(0, 2), np.array([0.9, 0.1]))) == pytest.approx(0.8, abs=1e-15)

    def test_correlated_form_matches_product(self):
        p = (np.array([0.3, 0.7]), np.array([0.6, 0.4]))
        joint = joint_distribution(p)
        assert expected_utility(MP, 1, joint) == pytest.approx(expected_utility(MP, 1, p), abs=1e-15)

    def test_dimension_error_names_player(self):
        with pytest.raises(DimensionError, match="player 2"):
            expected_utility(MP, 0, (uniform(2), uniform(3)))

    @given(game_and_profile())
    def test_matches_brute_force(self, gp):
        g, p = gp
        for i in range(g.num_players):
            assert expected_utility(g, i, p) == pytest.approx(oracles.expected_utility(g, i, p), abs=1e-12)

    @given(game_and_profile(), st.floats(0, 1))
    def test_linear_in_own_marginal(self, gp, alpha):
        g, p = gp
        rng = np.random.default_rng(0)
        i = 0
        other = rng.dirichlet(np.ones(g.action_counts[i]))
        mix = alpha * p[i] + (1 - alpha) * other
        lhs = expected_utility(g, i, (mix,) + p[1:])
        rhs = alpha * expected_utility(g, i, p) + (1 - alpha) * expected_utility(g, i, (other,) + p[1:])
        assert lhs == pytest.approx(rhs, abs=1e-9)


class TestBestResponse:
    def test_strict(self):
        assert best_response_set(MP, 0, (np.array([0.9, 0.1]),)) == {0}

    def test_tie(self):
        assert best_response_set(MP, 0, (uniform(2),)) == {0, 1}

    def test_coordination_readout(self):
        assert best_response_set(COORD, 0, (pure(0, 2),)) == {0}

    def test_eps_zero_reduces(self):
        assert epsilon_best_response_set(MP, 0, (np.array([0.9, 0.1]),), 0.0) == {0}

    def test_eps_covers_gap(self):
        # payoff gap 1.6 < 2.0
        assert epsilon_best_response_set(MP, 0, (np.array([0.9, 0.1]),), 2.0) == {0, 1}

    def test_eps_below_gap(self):
        assert epsilon_best_response_set(MP, 0, (np.array([0.9, 0.1]),), 1.0) == {0}

    def test_negative_eps(self):
        with pytest.raises(ValueError):
            epsilon_best_response_set(MP, 0, (uniform(2),), -0.1)

    def test_correlated_opponents(self):
        g = load_game("congestion_3p")
        p = (uniform(3), np.array([0.2, 0.3, 0.5]), np.array([0.6, 0.2, 0.2]))
        joint = joint_distribution(p[1:])
        assert best_response_set(g, 0, joint) == best_response_set(g, 0, p[1:])

    @given(game_and_profile(), st.floats(0, 3), st.floats(0, 3))
    def test_monotone_and_contains_br(self, gp, e1, e2):
        g, p = gp
        lo, hi = sorted((e1, e2))
        for i in range(g.num_players):
            opp = p[:i] + p[i + 1:]
            br = best_response_set(g, i, opp)
            assert br
            assert br <= epsilon_best_response_set(g, i, opp, lo) <= epsilon_best_response_set(g, i, opp, hi)
            assert br == oracles.best_responses(g, i, p)
            assert epsilon_best_response_set(g, i, opp, hi) == oracles.best_responses(g, i, p, eps=hi)

    @given(game_and_profile(), st.floats(-50, 50), st.floats(0, 2))
    def test_translation_invariance(self, gp, c, eps):
        g, p = gp
        for i in range(g.num_players):
            h = g.with_offset(i, c)
            opp = p[:i] + p[i + 1:]
            assert best_response_set(h, i, opp) == best_response_set(g, i, opp)
            assert epsilon_best_response_set(h, i, opp, eps) == epsilon_best_response_set(g, i, opp, eps)


class TestNashGap:
    def test_mp_uniform(self):
        assert nash_gap(MP, (uniform(2), uniform(2))).nash_gap == 0.0

    def test_coordination_pure_ne(self):
        assert nash_gap(COORD, (pure(0, 2), pure(0, 2))).nash_gap == 0.0

    def test_coordination_miscoordinated(self):
        rep = nash_gap(COORD, (pure(0, 2), pure(1, 2)))
        assert rep.nash_gap == 1.0
        assert rep.argmax_actions == (frozenset({1}), frozenset({0}))

    def test_rejects_correlated(self):
        with pytest.raises(TypeError):
            nash_gap(MP, joint_distribution((uniform(2), uniform(2))))

    @given(game_and_profile())
    def test_report_consistent(self, gp):
        g, p = gp
        rep = nash_gap(g, p)
        assert rep.nash_gap == max(rep.per_player_regret)
        assert np.all(rep.per_player_regret >= -1e-9)
        assert rep.nash_gap == pytest.approx(oracles.nash_gap(g, p), abs=1e-12)
