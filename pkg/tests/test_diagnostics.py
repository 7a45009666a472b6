import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from fplab.algorithms import classical_fp, jsfp
from fplab.diagnostics import (
    CERTIFY_COLUMNS,
    certificate_rows,
    certify_eps_delta,
    certify_sweep,
    interpolate,
    is_best_response_profile,
    profile_grid,
    random_states,
)
from fplab.engine import run
from fplab.game import load_game, matching_pennies

MP = matching_pennies()
FP_MP = classical_fp(MP)


class TestInterpolation:
    def test_knots_reproduce_states(self):
        tr = run(FP_MP, MP, 50)
        path = interpolate(tr)
        for k in (0, 1, 17, 49):
            assert np.array_equal(path(path.times[k]), tr.states[k])

    def test_midpoint_is_average(self):
        tr = run(FP_MP, MP, 20)
        path = interpolate(tr)
        t = 0.5 * (path.times[3] + path.times[4])
        assert np.allclose(path(t), 0.5 * (tr.states[3] + tr.states[4]), atol=1e-15)

    def test_harmonic_clock_frozen(self):
        # sum_{k=1}^{100} 1/(k+1), from exact summation
        tr = run(FP_MP, MP, 101)
        path = interpolate(tr)
        assert path.end == pytest.approx(4.1972785077386305, abs=1e-12)
        assert path.end == pytest.approx(oracles.harmonic_tail(100), abs=1e-12)

    def test_outside_range(self):
        path = interpolate(run(FP_MP, MP, 5))
        with pytest.raises(ValueError):
            path(-0.1)
        with pytest.raises(ValueError):
            path(path.end + 1.0)

    @given(st.floats(0, 1))
    def test_path_stays_in_space(self, frac):
        tr = run(FP_MP, MP, 40)
        path = interpolate(tr)
        assert FP_MP.space.contains(path(frac * path.end))


class TestCertificate:
    def test_eps_zero_is_zero(self):
        cert = certify_eps_delta(MP, FP_MP, 0.0, profile_grid((2, 2), (20, 10)))
        assert cert.delta_min == 0.0
        assert cert.flagged == ()

    def test_interior_sample_needs_no_move(self):
        # far from the indifference lines, small eps adds no actions
        z = np.array([0.9, 0.1, 0.9, 0.1])
        cert = certify_eps_delta(MP, FP_MP, 0.1, z)
        assert cert.delta_min == 0.0

    def test_tie_line_exact(self):
        # player 1 best-responds H at q2 = 0.6; eps = 0.5 admits T, which needs q2 moved to 1/2
        z = np.array([0.5, 0.5, 0.6, 0.4])
        cert = certify_eps_delta(MP, FP_MP, 0.5, z)
        assert cert.delta_min == pytest.approx(0.1, abs=1e-12)
        assert cert.verify(MP, FP_MP)

    def test_monotone_in_eps(self):
        grid = profile_grid((2, 2), (20, 10))
        certs = certify_sweep(MP, FP_MP, [0.0, 0.02, 0.1, 0.5], grid)
        deltas = [c.delta_min for c in certs]
        assert deltas == sorted(deltas)
        assert all(c.verify(MP, FP_MP) for c in certs)

    def test_grid_search_agrees_with_tie_line_upper_bound(self):
        z = profile_grid((2, 2), (5, 5))
        exact = certify_eps_delta(MP, FP_MP, 0.3, z)
        grid = certify_eps_delta(MP, FP_MP, 0.3, z, exact_2x2=False)
        assert grid.verify(MP, FP_MP)
        # the grid only overestimates the exact minimal move, never flags here
        assert np.all(grid.per_sample >= exact.per_sample - 1e-12)

    def test_witnesses_are_best_responses(self):
        g = load_game("shapley3")
        algo = classical_fp(g)
        cert = certify_eps_delta(g, algo, 0.05, random_states(algo, 10, seed=1))
        for w in cert.witnesses:
            if w.z_prime is not None:
                assert is_best_response_profile(g, algo, w.z_prime, w.actions)

    def test_large_eps_flags_unreachable(self):
        g = load_game("shapley3")
        algo = classical_fp(g)
        cert = certify_eps_delta(g, algo, 5.0, random_states(algo, 3, seed=0), radii=(0.0, 1e-3))
        assert cert.flagged
        assert np.isinf(cert.delta_min)

    def test_negative_eps(self):
        with pytest.raises(ValueError):
            certify_eps_delta(MP, FP_MP, -1.0, np.array([0.5, 0.5, 0.5, 0.5]))

    def test_rows(self):
        certs = certify_sweep(MP, FP_MP, [0.0, 0.1], profile_grid((2, 2), (3, 3)))
        rows = list(certificate_rows(certs))
        assert len(rows) == 2 and all(len(r) == len(CERTIFY_COLUMNS) for r in rows)

    def test_jsfp_space_supported(self):
        algo = jsfp(MP)
        cert = certify_eps_delta(MP, algo, 0.0, random_states(algo, 4))
        assert cert.delta_min == 0.0


class TestSamplers:
    def test_grid_shape(self):
        g = profile_grid((2, 2), (20, 10))
        assert g.shape == (200, 4)
        assert np.allclose(g.reshape(-1, 2, 2).sum(axis=2), 1.0)

    def test_grid_rejects_wide_players(self):
        with pytest.raises(ValueError):
            profile_grid((3, 2), (2, 2))

    def test_random_states_in_space(self):
        algo = classical_fp(load_game("congestion_3p"))
        for z in random_states(algo, 25, seed=3):
            assert algo.space.contains(z)
