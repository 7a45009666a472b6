import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from fplab.algorithms import ObservationSpace, classical_fp, ecfp_centroid, ecfp_profile, jsfp, make_algorithm
from fplab.engine import observation_update, respond, run, select_action, weakened_step
from fplab.errors import ConfigError, PresetRefused, RunAborted, StateCorruptionError
from fplab.game import (
    best_response_set,
    coordination,
    joint_distribution,
    load_game,
    matching_pennies,
    random_game,
    uniform,
    utility_range,
)
from fplab.io import csv_text
from fplab.schedules import PerturbationSchedule, StepSizeSchedule, constant_perturbation, custom_steps

MP = matching_pennies()
COORD = coordination()
CONG = load_game("congestion_3p")


class TestSchedules:
    def test_harmonic(self):
        s = StepSizeSchedule()
        assert s(1) == 0.5
        assert np.array_equal(s.values(3), [1 / 2, 1 / 3, 1 / 4])

    def test_power(self):
        s = StepSizeSchedule("power", a=0.7)
        assert s(4) == pytest.approx(4**-0.7)
        with pytest.raises(ConfigError, match="gamma.a"):
            StepSizeSchedule("power", a=1.5)

    def test_custom_bounds(self):
        with pytest.raises(ConfigError):
            custom_steps([0.5, 0.0])
        with pytest.raises(ConfigError):
            custom_steps([0.5])(2)

    def test_perturbation_kinds(self):
        assert PerturbationSchedule()(7) == 0.0
        assert PerturbationSchedule("power", c=2.0, b=0.5)(4) == 1.0
        assert constant_perturbation(0.3)(100) == 0.3
        with pytest.raises(ConfigError, match="epsilon.b"):
            PerturbationSchedule("power", b=0.0)

    @given(st.integers(1, 10**6))
    def test_steps_in_unit_interval(self, n):
        for s in (StepSizeSchedule(), StepSizeSchedule("power", a=0.6)):
            assert 0.0 < s(n) <= 1.0


class TestPresets:
    def test_fp_observe_pure_is_indicator_profile(self):
        algo = classical_fp(MP)
        assert np.array_equal(algo.g_pure((0, 1)), [1, 0, 0, 1])

    def test_fp_forecast_is_opponent_block(self):
        algo = classical_fp(MP)
        z = np.array([0.2, 0.8, 0.7, 0.3])
        (f,) = algo.f(0, z)
        assert np.array_equal(f, [0.7, 0.3])

    def test_jsfp_identity_and_marginal(self):
        algo = jsfp(MP)
        x = joint_distribution((np.array([0.3, 0.7]), np.array([0.6, 0.4])))
        z = algo.g(x)
        assert np.allclose(z, x.reshape(-1))
        # f_1 marginalizes out player 1: player 2's marginal
        assert np.allclose(algo.f(0, z), [0.6, 0.4])
        assert np.allclose(algo.f(1, z), [0.3, 0.7])
        assert algo.f(0, z).sum() == pytest.approx(1.0)

    def test_centroid_of_equal_marginals(self):
        algo = ecfp_centroid(CONG)
        v = np.array([0.2, 0.5, 0.3])
        assert np.allclose(algo.g((v, v, v)), v)

    def test_centroid_two_players(self):
        algo = ecfp_centroid(COORD)
        assert np.allclose(algo.g((np.array([1.0, 0.0]), np.array([0.0, 1.0]))), [0.5, 0.5])

    def test_ecfp_refused_on_asymmetric(self):
        with pytest.raises(PresetRefused):
            ecfp_centroid(MP)
        with pytest.raises(PresetRefused):
            ecfp_profile(MP)

    def test_unknown_algorithm(self):
        with pytest.raises(ConfigError, match="algorithm"):
            make_algorithm("smooth_fp", MP)

    def test_space_membership(self):
        space = ObservationSpace("profile", (2, 3))
        assert space.contains(np.array([0.5, 0.5, 0.2, 0.3, 0.5]))
        assert not space.contains(np.array([0.5, 0.6, 0.2, 0.3, 0.5]))
        with pytest.raises(StateCorruptionError):
            space.check(np.array([1.0, -0.1, 0.1, 0.5, 0.5]))


class TestUpdate:
    def test_full_replacement(self):
        algo = classical_fp(MP)
        z = np.array([0.3, 0.7, 0.4, 0.6])
        assert np.array_equal(observation_update(z, (1, 0), 1.0, algo), [0, 1, 1, 0])

    def test_midpoint(self):
        algo = jsfp(load_game("coordination2"))
        z = np.array([1.0, 0.0, 0.0, 0.0])
        assert np.array_equal(observation_update(z, (1, 1), 0.5, algo), [0.5, 0, 0, 0.5])

    def test_mixed_sigma(self):
        algo = classical_fp(MP)
        z = np.array([1.0, 0.0, 1.0, 0.0])
        out = observation_update(z, (uniform(2), uniform(2)), 0.5, algo)
        assert np.allclose(out, [0.75, 0.25, 0.75, 0.25])

    def test_gamma_range(self):
        algo = classical_fp(MP)
        with pytest.raises(ValueError):
            observation_update(algo.g_pure((0, 0)), (0, 0), 0.0, algo)

    def test_validation_mode_catches_corruption(self):
        algo = classical_fp(MP).with_validation()
        with pytest.raises(StateCorruptionError):
            observation_update(np.array([2.0, -1.0, 0.5, 0.5]), (0, 0), 0.5, algo)

    def test_running_average_by_induction(self, rng):
        algo = classical_fp(CONG)
        acts = [tuple(rng.integers(0, 3, size=3)) for _ in range(10)]
        z = algo.g_pure(acts[0])
        for n, a in enumerate(acts[1:], start=1):
            z = observation_update(z, a, algo.schedule(n), algo)
        direct = np.concatenate(oracles.empirical(acts, (3, 3, 3), 10))
        assert np.allclose(z, direct, atol=1e-12)


class TestSelection:
    def test_policies(self, rng):
        assert select_action([1, 2], "first_index", 2, rng) == 1
        assert select_action([1, 2], "sticky", 2, rng) == 2
        assert select_action([1, 2], "sticky", 0, rng) == 1
        with pytest.raises(ConfigError):
            select_action([0], "random", None, rng)

    def test_uniform_covers_set(self):
        rng = np.random.default_rng(0)
        seen = {select_action([0, 1, 2], "uniform", None, rng) for _ in range(200)}
        assert seen == {0, 1, 2}


class TestWeakenedStep:
    def test_matching_pennies_h_heavy(self):
        # H-heavy histories: player 1 (matcher) plays H, player 2 (mismatcher) plays T
        algo = classical_fp(MP)
        z = np.array([0.9, 0.1, 0.9, 0.1])
        step = weakened_step(z, 5, algo, MP, PerturbationSchedule(), "sticky", np.random.default_rng(0))
        expect = tuple(min(oracles.best_responses(MP, i, [[0.9, 0.1], [0.9, 0.1]])) for i in range(2))
        assert step.actions == expect == (0, 1)
        assert np.array_equal(step.realized_subopt, [0.0, 0.0])

    def test_zero_eps_gives_best_responses(self, rng):
        g = random_game((3, 4), rng)
        algo = classical_fp(g)
        z = np.concatenate([rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))])
        step = weakened_step(z, 1, algo, g, PerturbationSchedule(), "first_index", rng)
        for i, a in enumerate(step.actions):
            assert a in best_response_set(g, i, algo.f(i, z))

    def test_huge_eps_uniform_covers_all_actions(self):
        g = random_game((3, 3), np.random.default_rng(1))
        algo = classical_fp(g)
        eps = constant_perturbation(max(utility_range(g, i) for i in range(2)) + 1.0)
        z = algo.space.uniform_point()
        rng = np.random.default_rng(2)
        seen = [set(), set()]
        for _ in range(300):
            step = weakened_step(z, 1, algo, g, eps, "uniform", rng)
            for i, a in enumerate(step.actions):
                seen[i].add(a)
        assert seen == [{0, 1, 2}, {0, 1, 2}]

    @given(st.integers(0, 10**6), st.floats(0, 1.5))
    def test_realized_subopt_within_eps(self, seed, eps):
        rng = np.random.default_rng(seed)
        g = random_game((3, 2, 2), rng)
        algo = classical_fp(g)
        z = np.concatenate([rng.dirichlet(np.ones(k)) for k in (3, 2, 2)])
        step = weakened_step(z, 1, algo, g, constant_perturbation(eps), "uniform", rng)
        assert np.all(step.realized_subopt <= eps + 1e-9)
        assert algo.space.contains(step.state)


class TestRun:
    def test_horizon_one(self):
        tr = run(classical_fp(MP), MP, 1, initial_actions=(1, 0))
        assert tr.horizon == 1
        assert np.array_equal(tr.actions[0], [1, 0])
        assert np.array_equal(tr.states[0], [0, 1, 1, 0])

    def test_bad_horizon(self):
        with pytest.raises(ConfigError, match="horizon"):
            run(classical_fp(MP), MP, 0)

    def test_recursion_invariant(self):
        algo = jsfp(CONG)
        tr = run(algo, CONG, 300, perturb=PerturbationSchedule("power", c=0.5, b=0.5), selector="uniform", seed=3)
        assert tr.recursion_residual(algo) <= 1e-9

    def test_matches_direct_counting_oracle(self):
        for name in ("matching_pennies", "shapley3", "congestion_3p"):
            g = load_game(name)
            tr = run(classical_fp(g), g, 200)
            ref = oracles.fictitious_play(g, 200, (0,) * g.num_players)
            assert [tuple(r) for r in tr.actions] == ref

    def test_each_step_is_best_response_to_empirical(self):
        tr = run(classical_fp(load_game("shapley3")), load_game("shapley3"), 500)
        g = tr.game
        for k in range(1, tr.horizon):
            q = tr.empirical_at(k)
            for i in range(2):
                opp = q[:i] + q[i + 1:]
                assert tr.actions[k, i] in best_response_set(g, i, opp)

    def test_ecfp_matches_raw_history_oracle(self):
        tr = run(ecfp_centroid(CONG), CONG, 150)
        ref = oracles.centroid_fp(CONG, 150, (0, 0, 0))
        assert [tuple(r) for r in tr.actions] == ref

    @pytest.mark.parametrize("horizon", [100, 1000])
    def test_ecfp_encodings_agree(self, horizon):
        a = run(ecfp_centroid(CONG), CONG, horizon, seed=7)
        b = run(ecfp_profile(CONG), CONG, horizon, seed=7)
        assert np.array_equal(a.actions, b.actions)

    def test_state_stays_in_space(self):
        algo = classical_fp(MP)
        tr = run(algo, MP, 100000, stride=1000)
        assert algo.space.violation(tr.states[-1]) <= 1e-7
        sums = tr.states.reshape(-1, 2, 2).sum(axis=2)
        assert np.max(np.abs(sums - 1.0)) <= 1e-7

    def test_eps_feasibility_recorded(self):
        tr = run(classical_fp(MP), MP, 2000, perturb=PerturbationSchedule("power", c=1.0, b=0.5), selector="uniform")
        assert np.all(tr.realized_subopt[1:] <= tr.eps[1:, None] + 1e-9)

    def test_coordination_converges(self):
        tr = run(classical_fp(COORD), COORD, 10000, initial_actions=(0, 1))
        assert tr.final_metric("nash_gap") <= 1e-2

    def test_determinism_bitwise(self):
        kw = dict(perturb=PerturbationSchedule("power"), selector="uniform", seed=11)
        a = run(classical_fp(CONG), CONG, 500, **kw)
        b = run(classical_fp(CONG), CONG, 500, **kw)
        assert csv_text(a.columns(), a.rows()) == csv_text(b.columns(), b.rows())

    def test_metric_stride(self):
        tr = run(classical_fp(MP), MP, 95, stride=10)
        filled = np.flatnonzero(~np.isnan(tr.metric("nash_gap"))) + 1
        assert list(filled) == [1, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95]

    def test_cne_metric_needs_symmetric_game(self):
        with pytest.raises(PresetRefused):
            run(classical_fp(MP), MP, 10, metrics=("cne_gap",))

    def test_nan_state_aborts(self):
        algo = classical_fp(MP)

        def observe_pure(actions):
            # any profile other than the initial one poisons the first component
            z = np.array([1.0, 0.0, 1.0, 0.0])
            if tuple(actions) != (0, 0):
                z[0] = np.nan
            return z

        bad = dataclasses.replace(algo, observe_pure=observe_pure)
        with pytest.raises(RunAborted) as exc:
            run(bad, MP, 50, initial_actions=(0, 0))
        assert exc.value.iteration == 2
        assert exc.value.component == 0

    def test_respond_reports_gap(self):
        a, s = respond(MP, 0, (np.array([0.9, 0.1]),), 2.0, "sticky", 1, np.random.default_rng(0))
        assert a == 1
        assert s == pytest.approx(1.6)
