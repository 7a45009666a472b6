import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from fplab.algorithms import classical_fp, ecfp_profile, jsfp
from fplab.distributed import (
    CommGraph,
    DistributedProcess,
    check_doubly_stochastic,
    distributed_run,
    error_series,
    is_connected,
    lipschitz_bounds,
    metropolis_weights,
    named_edges,
    protocol_async_gossip,
    protocol_running_consensus,
)
from fplab.engine import run
from fplab.errors import ConfigError, RunAborted
from fplab.game import coordination, load_game, matching_pennies

MP = matching_pennies()
CONG = load_game("congestion_3p")


class TestGraphs:
    def test_named(self):
        assert named_edges("ring", 4) == [(0, 1), (1, 2), (2, 3), (0, 3)]
        assert len(named_edges("complete", 4)) == 6
        assert named_edges("edgeless", 3) == []

    def test_connectivity(self):
        assert is_connected(3, named_edges("path", 3))
        assert not is_connected(3, [])
        assert is_connected(1, [])

    def test_bad_rho(self):
        with pytest.raises(ConfigError, match="graph.rho"):
            CommGraph(3, "ring", model="iid_drop", rho=1.0)

    def test_switching_cycles(self):
        g = CommGraph(3, (), model="switching", topologies=([(0, 1)], [(1, 2)]), period=2)
        rng = np.random.default_rng(0)
        seq = [g.active_edges(n, rng) for n in range(1, 7)]
        assert seq == [((0, 1),), ((0, 1),), ((1, 2),), ((1, 2),), ((0, 1),), ((0, 1),)]

    def test_gossip_single_edge(self):
        g = CommGraph(4, "ring", model="gossip")
        rng = np.random.default_rng(1)
        for n in range(1, 20):
            (e,) = g.active_edges(n, rng)
            assert e in g.edges

    def test_from_config_node_mismatch(self):
        with pytest.raises(ConfigError, match="graph.nodes"):
            CommGraph.from_config({"nodes": 4, "edges": "ring"}, nodes=3)


class TestWeights:
    def test_path3_matches_oracle(self):
        w = metropolis_weights(3, [(0, 1), (1, 2)])
        assert np.allclose(w, oracles.metropolis(3, [(0, 1), (1, 2)]), atol=1e-15)
        assert np.allclose(w, [[2 / 3, 1 / 3, 0], [1 / 3, 1 / 3, 1 / 3], [0, 1 / 3, 2 / 3]])

    @given(st.integers(2, 6), st.integers(0, 10**6))
    def test_random_graphs_doubly_stochastic(self, n, seed):
        rng = np.random.default_rng(seed)
        all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        edges = [e for e in all_pairs if rng.random() < 0.5]
        w = metropolis_weights(n, edges)
        check_doubly_stochastic(w)
        assert np.allclose(w, w.T)
        assert np.allclose(w, oracles.metropolis(n, edges), atol=1e-15)

    def test_non_stochastic_aborts(self):
        with pytest.raises(RunAborted):
            check_doubly_stochastic(np.array([[0.5, 0.6], [0.5, 0.4]]))


class TestProtocols:
    def test_consensus_fixed_point(self):
        w = metropolis_weights(4, named_edges("ring", 4))
        x = np.tile(np.array([0.2, 0.8]), (4, 1))
        assert np.allclose(protocol_running_consensus(x, np.zeros_like(x), w), x)

    @given(st.integers(0, 10**6))
    def test_mass_conserved(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(4, 3))
        inj = rng.normal(size=(4, 3))
        w = metropolis_weights(4, named_edges("ring", 4))
        total = (x + inj).sum(axis=0)
        assert np.allclose(protocol_running_consensus(x, inj, w).sum(axis=0), total)
        assert np.allclose(protocol_async_gossip(x, inj, (1, 2)).sum(axis=0), total)
        assert np.allclose(protocol_async_gossip(x, inj, None).sum(axis=0), total)

    def test_gossip_pair_average(self):
        x = np.array([[1.0], [3.0], [5.0]])
        out = protocol_async_gossip(x, np.zeros_like(x), (0, 2))
        assert np.array_equal(out.ravel(), [3.0, 3.0, 3.0])


class TestProcess:
    def test_non_separable_refused(self):
        with pytest.raises(ConfigError, match="algorithm"):
            DistributedProcess(jsfp(MP), MP, CommGraph(2, "complete"))

    def test_unknown_protocol(self):
        with pytest.raises(ConfigError, match="protocol"):
            DistributedProcess(classical_fp(MP), MP, CommGraph(2, "complete"), protocol="flood")

    def test_lipschitz(self):
        # range 2 times one opponent action count of 2
        assert np.array_equal(lipschitz_bounds(MP), [4.0, 4.0])

    def test_complete_pair_exact_after_first_round(self):
        tr = distributed_run(classical_fp(MP), MP, CommGraph(2, "complete"), 200)
        err = error_series(tr)
        assert err[0] == pytest.approx(0.5)
        assert np.all(err[1:] <= 1e-12)

    def test_edgeless_never_learns_and_is_flagged(self):
        tr = distributed_run(classical_fp(MP), MP, CommGraph(2, "edgeless"), 100)
        assert np.array_equal(error_series(tr), np.full(100, 0.5))
        assert tr.info["connectivity_violations"]

    def test_exact_init_complete_matches_central(self):
        g = load_game("congestion_3p")
        a = distributed_run(classical_fp(g), g, CommGraph(3, "complete"), 500, init="exact")
        b = run(classical_fp(g), g, 500)
        assert np.array_equal(a.actions, b.actions)

    def test_estimates_and_states_in_space(self):
        algo = classical_fp(CONG)
        proc = DistributedProcess(algo, CONG, CommGraph(3, "ring"))
        tr = distributed_run(algo, CONG, CommGraph(3, "path"), 300, seed=2)
        for z in tr.states:
            assert algo.space.violation(z) <= 1e-9
        st_ = proc.initial_state((0, 1, 2), algo.g_pure((0, 1, 2)))
        for e in st_.estimates:
            assert algo.space.contains(e)

    def test_ring_errors_shrink(self):
        g = load_game("congestion_4p")
        tr = distributed_run(classical_fp(g), g, CommGraph(4, "ring"), 3000, stride=100)
        err = error_series(tr)
        assert err[-1] <= 0.05
        assert err[-500:].max() < err[:50].max()

    def test_ecfp_gossip_runs(self):
        tr = distributed_run(ecfp_profile(CONG), CONG, CommGraph(3, "ring", model="gossip"), 200, protocol="gossip")
        assert np.all(np.isfinite(error_series(tr)))

    def test_deterministic(self):
        graph = CommGraph(3, "ring", model="iid_drop", rho=0.3)
        a = distributed_run(classical_fp(CONG), CONG, graph, 300, seed=5)
        b = distributed_run(classical_fp(CONG), CONG, graph, 300, seed=5)
        assert np.array_equal(a.actions, b.actions)
        assert np.array_equal(error_series(a), error_series(b))

    def test_coordination_two_agents(self):
        g = coordination()
        tr = distributed_run(classical_fp(g), g, CommGraph(2, "complete"), 2000, initial_actions=(0, 1))
        assert tr.final_metric("nash_gap") <= 1e-2
