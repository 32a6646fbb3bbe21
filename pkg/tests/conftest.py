import itertools

import pytest
from hypothesis import strategies as st

from beliefdyn.evolution import EvolutionFunction, FunctionFamily, Majority
from beliefdyn.network import (
    BeliefProfile,
    Network,
    complete_bipartite_network,
    complete_network,
    cycle_network,
    path_network,
    star_network,
)


# --------------------------------------------------------------------------
# independent oracles: dict/set based, no bit tricks


def oracle_tally(net, beliefs, agent):
    pos = sum(1 for a, b in net.ties if a == agent and beliefs[b] == 1)
    neg = sum(1 for a, b in net.ties if a == agent and beliefs[b] == 0)
    return pos, neg


def oracle_majority(net, beliefs, agent):
    pos, neg = oracle_tally(net, beliefs, agent)
    if pos > neg:
        return 1
    if pos < neg:
        return 0
    return beliefs[agent]


def oracle_profiles(agents):
    for values in itertools.product((0, 1), repeat=len(agents)):
        yield dict(zip(agents, values))


def oracle_sync(net, beliefs, rule=oracle_majority):
    return {a: rule(net, beliefs, a) for a in net.agents}


def oracle_group(net, beliefs, group, rule=oracle_majority):
    return {a: rule(net, beliefs, a) if a in group else beliefs[a] for a in net.agents}


def bits_of(beliefs, agents):
    return "".join(str(beliefs[a]) for a in agents)


def profile(net, text):
    return BeliefProfile.from_bitstring(net, text)


# --------------------------------------------------------------------------
# test-only evolution functions


class ConstantOne(EvolutionFunction):
    name = "constant-1"

    def evaluate(self, net, bits, i):
        return 1


class GlobalMajority(EvolutionFunction):
    """Tallies every agent of the network, not just the neighbourhood."""

    name = "global-majority"

    def evaluate(self, net, bits, i):
        pos = bits.bit_count()
        neg = net.n - pos
        if pos != neg:
            return int(pos > neg)
        return bits >> i & 1


# --------------------------------------------------------------------------
# fixtures


@pytest.fixture
def k22():
    return complete_bipartite_network(2, 2)


@pytest.fixture
def star3():
    return star_network(3)


@pytest.fixture
def path3():
    return path_network(3)


@pytest.fixture
def pair():
    return Network(["a", "b"], [("a", "b"), ("b", "a")])


@pytest.fixture
def single():
    return Network(["a"])


@pytest.fixture
def cycle4():
    return cycle_network(4)


@pytest.fixture
def clique3():
    return complete_network(3)


def majority(net):
    return FunctionFamily.uniform(net, Majority())


@st.composite
def networks(draw, min_agents=1, max_agents=5):
    n = draw(st.integers(min_agents, max_agents))
    names = draw(
        st.lists(st.text("abcdefghxyz0123456789_", min_size=1, max_size=3), min_size=n, max_size=n, unique=True)
    )
    pairs = [(a, b) for a in names for b in names if a != b]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Network(names, chosen, warn=False)


@st.composite
def network_and_profile(draw, min_agents=1, max_agents=5):
    net = draw(networks(min_agents, max_agents))
    bits = draw(st.integers(0, net.full_mask))
    return net, BeliefProfile(net, bits)


# --------------------------------------------------------------------------
# acceptance reporting: one line per criterion in the terminal summary

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, line = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{number}] {line}")
