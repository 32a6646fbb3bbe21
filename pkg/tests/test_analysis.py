import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beliefdyn.analysis import (
    all_subsets_successors,
    build_transition_graph,
    condensation_dot,
    condense,
    construct_converging_sequence,
    enumerate_equilibria,
    leaves_are_equilibria,
    reachable_equilibria,
    strongly_connected_components,
    submasks,
    transition_graph_dot,
)
from beliefdyn.dynamics import is_equilibrium, verify_trace
from beliefdyn.errors import InfeasibleError
from beliefdyn.evolution import Flipper, FunctionFamily, Stubborn, Threshold, apply_group
from beliefdyn.network import Network, all_networks, profile_leq

from conftest import bits_of, majority, network_and_profile, networks, oracle_profiles, oracle_sync, profile


def oracle_equilibria(net):
    return {bits_of(b, net.agents) for b in oracle_profiles(net.agents) if oracle_sync(net, b) == b}


def nx_graph(tg):
    g = nx.DiGraph()
    g.add_nodes_from(range(tg.n_nodes))
    g.add_edges_from((s, d) for s, d, _ in tg.edges() if s != d)
    return g


class TestEquilibria:
    def test_path_three(self, path3):
        expected = {"000", "001", "100", "110", "011", "111"}
        assert oracle_equilibria(path3) == expected
        assert {str(p) for p in enumerate_equilibria(path3, majority(path3))} == expected

    def test_mutual_pair_everything_fixed(self, pair):
        assert len(enumerate_equilibria(pair, majority(pair))) == 4

    def test_flipper_none(self, k22):
        assert enumerate_equilibria(k22, FunctionFamily.uniform(k22, Flipper())) == []

    @settings(max_examples=40, deadline=None)
    @given(networks(max_agents=5))
    def test_matches_oracle(self, net):
        assert {str(p) for p in enumerate_equilibria(net, majority(net))} == oracle_equilibria(net)

    def test_gate(self):
        net = Network([f"v{i:02d}" for i in range(21)])
        with pytest.raises(InfeasibleError):
            enumerate_equilibria(net, majority(net))


class TestTransitionGraph:
    def test_submasks(self):
        assert sorted(submasks(0b101)) == [0, 1, 4, 5]
        assert list(submasks(0)) == [0]

    def test_single_agent(self, single):
        tg = build_transition_graph(single, majority(single))
        assert tg.n_nodes == 2
        assert [dict(s) for s in tg.successors] == [{0: 0}, {1: 0}]

    def test_k22_node(self, k22):
        tg = build_transition_graph(k22, majority(k22))
        p = profile(k22, "1100")
        assert tg.disagreement_set(p) == frozenset(k22.agents)
        succ = tg.successor_profiles(p)
        assert len(succ) == 16
        assert succ[profile(k22, "0011")] == frozenset(k22.agents)
        assert succ[profile(k22, "1111")] == frozenset({"b1", "b2"})

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_disagreement_route_equals_all_subsets(self, n):
        for net in all_networks(n):
            fam = majority(net)
            tg = build_transition_graph(net, fam)
            for p in net.profiles():
                assert set(tg.successor_profiles(p)) == all_subsets_successors(net, fam, p)

    def test_witness_groups_reproduce(self, k22):
        fam = majority(k22)
        tg = build_transition_graph(k22, fam)
        for p in k22.profiles():
            for q, group in tg.successor_profiles(p).items():
                assert apply_group(k22, fam, p, group) == q

    def test_gate(self):
        net = Network([f"v{i:02d}" for i in range(13)])
        with pytest.raises(InfeasibleError):
            build_transition_graph(net, majority(net))


class TestSCC:
    @settings(max_examples=80, deadline=None)
    @given(st.data())
    def test_against_networkx(self, data):
        n = data.draw(st.integers(1, 25))
        edges = data.draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))))
        adj = [[] for _ in range(n)]
        for a, b in edges:
            adj[a].append(b)
        ours = {frozenset(c) for c in strongly_connected_components(n, lambda v: adj[v])}
        g = nx.DiGraph()
        g.add_nodes_from(range(n))
        g.add_edges_from(edges)
        assert ours == {frozenset(c) for c in nx.strongly_connected_components(g)}

    def test_long_chain_no_recursion_limit(self):
        n = 20000
        comps = strongly_connected_components(n, lambda v: [v + 1] if v + 1 < n else [0])
        assert len(comps) == 1 and len(comps[0]) == n


class TestCondensation:
    def test_pair_singletons(self, pair):
        cond = condense(build_transition_graph(pair, majority(pair)))
        assert len(cond.components) == 4 and len(cond.leaves) == 4

    def test_k22_leaves_are_equilibria(self, k22):
        fam = majority(k22)
        tg = build_transition_graph(k22, fam)
        cond = condense(tg)
        leaf_profiles = {str(cond.component_profiles(c)[0]) for c in cond.leaves}
        assert all(len(cond.components[c]) == 1 for c in cond.leaves)
        assert leaf_profiles == {str(p) for p in enumerate_equilibria(k22, fam)}
        assert cond.is_acyclic()

    def test_flipper_no_equilibrium_leaf(self, k22):
        fam = FunctionFamily.uniform(k22, Flipper())
        tg = build_transition_graph(k22, fam)
        cond = condense(tg)
        assert cond.leaves
        assert not any(len(c) == 1 and tg.is_equilibrium_node(min(c)) for c in cond.leaf_components())
        assert not leaves_are_equilibria(k22, fam, tg)

    @settings(max_examples=30, deadline=None)
    @given(networks(max_agents=4))
    def test_matches_networkx_condensation(self, net):
        tg = build_transition_graph(net, FunctionFamily.uniform(net, Threshold(1)))
        cond = condense(tg)
        g = nx_graph(tg)
        c = nx.condensation(g)
        assert len(cond.components) == c.number_of_nodes()
        nx_leaves = {frozenset(c.nodes[v]["members"]) for v in c if c.out_degree(v) == 0}
        assert set(cond.leaf_components()) == nx_leaves
        assert cond.is_acyclic()

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_majority_leaves(self, n):
        assert all(leaves_are_equilibria(net, majority(net)) for net in all_networks(n))

    def test_stubborn_everything_is_a_leaf(self, k22):
        assert leaves_are_equilibria(k22, FunctionFamily.uniform(k22, Stubborn()))


class TestConvergingSequence:
    def test_k22(self, k22):
        seq = construct_converging_sequence(k22, majority(k22), profile(k22, "1100"))
        assert seq.schedule == [frozenset({"b1", "b2"})]
        assert str(seq.profile) == "1111" and seq.verified
        assert verify_trace(seq.trace) == []

    def test_equilibrium_start(self, path3):
        seq = construct_converging_sequence(path3, majority(path3), profile(path3, "110"))
        assert seq.schedule == [] and seq.phase_lengths == (0, 0) and seq.verified

    def test_decreasing_first(self, k22):
        seq = construct_converging_sequence(k22, majority(k22), profile(k22, "1100"), decreasing_first=True)
        assert str(seq.profile) == "0000" and seq.verified

    @settings(max_examples=60, deadline=None)
    @given(network_and_profile(max_agents=6))
    def test_phase_invariants(self, np_):
        net, p = np_
        seq = construct_converging_sequence(net, majority(net), p)
        inc, dec = seq.phase_lengths
        profiles = [p] + [s.profile for s in seq.trace.steps]
        for a, b in zip(profiles[:inc], profiles[1 : inc + 1]):
            assert profile_leq(a, b) and a != b
        for a, b in zip(profiles[inc:], profiles[inc + 1 :]):
            assert profile_leq(b, a) and a != b
        assert len(seq.schedule) <= 2 * net.n
        assert seq.verified and is_equilibrium(net, majority(net), seq.profile)

    def test_flipper_unverified(self, pair):
        seq = construct_converging_sequence(pair, FunctionFamily.uniform(pair, Flipper()), profile(pair, "10"))
        assert not seq.verified
        assert seq.trace.outcome.kind == "step_limit_reached"


class TestReachability:
    def test_k22_both_consensuses(self, k22):
        found = {str(p) for p in reachable_equilibria(k22, majority(k22), profile(k22, "1100"))}
        assert {"0000", "1111"} <= found

    def test_star(self, star3):
        found = {str(p) for p in reachable_equilibria(star3, majority(star3), profile(star3, "0111"))}
        assert "1111" in found

    def test_equilibrium_reaches_only_itself(self, path3):
        assert [str(p) for p in reachable_equilibria(path3, majority(path3), profile(path3, "110"))] == ["110"]

    def test_against_networkx(self, k22):
        fam = majority(k22)
        tg = build_transition_graph(k22, fam)
        g = nx_graph(tg)
        for p in k22.profiles():
            expected = {b for b in nx.descendants(g, p.bits) | {p.bits} if tg.is_equilibrium_node(b)}
            assert {q.bits for q in reachable_equilibria(k22, fam, p, tg)} == expected


class TestDot:
    def test_transition_dot(self, single):
        text = transition_graph_dot(build_transition_graph(single, majority(single)))
        assert text.startswith("digraph transitions {")
        assert '"0" [shape=doublecircle];' in text
        assert '"0" -> "0" [label="{}"];' in text
        no_loops = transition_graph_dot(build_transition_graph(single, majority(single)), include_self_loops=False)
        assert "->" not in no_loops

    def test_condensation_dot(self, k22):
        tg = build_transition_graph(k22, majority(k22))
        cond = condense(tg)
        text = condensation_dot(cond, tg)
        assert text.count("->") == len(cond.dag_edges)
        assert 'label="1111", shape=doublecircle, style=bold' in text
