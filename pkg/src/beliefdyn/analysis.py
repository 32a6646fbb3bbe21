"""Global structure of a (network, function family) pair.

Profiles are handled in their integer encoding throughout; the public
functions convert at the boundary.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

from .dynamics import Outcome, Step, Trace, is_equilibrium
from .errors import InfeasibleError
from .evolution import FunctionFamily, sync_map, update_bits
from .network import AgentId, BeliefProfile, Network

EQUILIBRIA_LIMIT = 20
TRANSITION_LIMIT = 12


def _gate(net: Network, limit: int, what: str) -> None:
    if net.n > limit:
        raise InfeasibleError(f"exhaustive check infeasible: {what} on {net.n} agents exceeds limit {limit}")


def enumerate_equilibria(net: Network, fam: FunctionFamily, *, limit: int = EQUILIBRIA_LIMIT) -> list[BeliefProfile]:
    """Every profile fixed by the synchronous update, in canonical order."""
    _gate(net, limit, "equilibrium enumeration")
    return [BeliefProfile(net, bits) for bits, out in enumerate(sync_map(net, fam)) if out == bits]


def submasks(mask: int) -> Iterator[int]:
    """All submasks of ``mask``, from ``mask`` down to 0."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


@dataclass
class TransitionGraph:
    """Every profile with its achievable one-step successors.

    ``successors[P]`` maps each successor ``P'`` to the canonical witness
    group: the set of agents whose belief actually changes (a subset of
    the disagreement set ``D(P)``). The self-loop appears with witness 0.
    """

    network: Network
    family: FunctionFamily
    image: list[int]
    successors: list[dict[int, int]]

    @property
    def n_nodes(self) -> int:
        return len(self.successors)

    def disagreement(self, bits: int) -> int:
        return bits ^ self.image[bits]

    def disagreement_set(self, p: BeliefProfile) -> frozenset[AgentId]:
        return self.network.group_from_mask(self.disagreement(p.bits))

    def successor_profiles(self, p: BeliefProfile) -> dict[BeliefProfile, frozenset[AgentId]]:
        net = self.network
        return {BeliefProfile(net, q): net.group_from_mask(g) for q, g in self.successors[p.bits].items()}

    def is_equilibrium_node(self, bits: int) -> bool:
        return self.image[bits] == bits

    def edges(self) -> Iterator[tuple[int, int, int]]:
        for src, succ in enumerate(self.successors):
            for dst, group in succ.items():
                yield src, dst, group


def build_transition_graph(net: Network, fam: FunctionFamily, *, limit: int = TRANSITION_LIMIT) -> TransitionGraph:
    """Successors of P are P with any subset of D(P) switched to its function value.

    Updating an agent outside D(P) changes nothing, so those subsets are the
    only distinct outcomes of the 2**n group updates.
    """
    _gate(net, limit, "transition graph")
    image = sync_map(net, fam)
    successors = []
    for bits, out in enumerate(image):
        d = bits ^ out
        successors.append({bits ^ s: s for s in submasks(d)})
    return TransitionGraph(net, fam, image, successors)


def all_subsets_successors(net: Network, fam: FunctionFamily, p: BeliefProfile) -> set[BeliefProfile]:
    """Definitional successor set: apply every one of the 2**n groups."""
    return {BeliefProfile(net, update_bits(net, fam, p.bits, g)) for g in range(1 << net.n)}


# --------------------------------------------------------------------------
# condensation


def strongly_connected_components(n_nodes: int, neighbors) -> list[list[int]]:
    """Tarjan's algorithm, iterative. Components come out in reverse topological order."""
    index = [-1] * n_nodes
    low = [0] * n_nodes
    on_stack = [False] * n_nodes
    stack: list[int] = []
    components: list[list[int]] = []
    counter = 0
    for root in range(n_nodes):
        if index[root] >= 0:
            continue
        work = [(root, iter(neighbors(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if index[w] < 0:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(neighbors(w))))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                components.append(sorted(comp))
    return components


@dataclass
class Condensation:
    network: Network
    components: list[frozenset[int]]
    component_of: list[int]
    dag_edges: set[tuple[int, int]]
    leaves: list[int] = field(default_factory=list)

    def leaf_components(self) -> list[frozenset[int]]:
        return [self.components[c] for c in self.leaves]

    def component_profiles(self, c: int) -> list[BeliefProfile]:
        return [BeliefProfile(self.network, b) for b in sorted(self.components[c])]

    def is_acyclic(self) -> bool:
        indegree = [0] * len(self.components)
        out: list[list[int]] = [[] for _ in self.components]
        for a, b in self.dag_edges:
            indegree[b] += 1
            out[a].append(b)
        ready = deque(c for c, d in enumerate(indegree) if d == 0)
        seen = 0
        while ready:
            c = ready.popleft()
            seen += 1
            for d in out[c]:
                indegree[d] -= 1
                if indegree[d] == 0:
                    ready.append(d)
        return seen == len(self.components)


def condense(tg: TransitionGraph) -> Condensation:
    """SCCs of the transition graph and the DAG between them.

    Self-loops never make a component a non-leaf; a leaf is a component
    with no edge into a different component. Components are numbered by
    their smallest profile.
    """
    raw = strongly_connected_components(tg.n_nodes, lambda v: (w for w in tg.successors[v] if w != v))
    raw.sort(key=lambda comp: comp[0])
    component_of = [0] * tg.n_nodes
    for c, comp in enumerate(raw):
        for v in comp:
            component_of[v] = c
    dag_edges = set()
    for src, dst, _ in tg.edges():
        a, b = component_of[src], component_of[dst]
        if a != b:
            dag_edges.add((a, b))
    has_out = {a for a, _ in dag_edges}
    leaves = [c for c in range(len(raw)) if c not in has_out]
    return Condensation(tg.network, [frozenset(c) for c in raw], component_of, dag_edges, leaves)


def leaves_are_equilibria(net: Network, fam: FunctionFamily, tg: TransitionGraph | None = None) -> bool:
    """Whether the condensation's leaves are exactly the singleton equilibrium components."""
    tg = build_transition_graph(net, fam) if tg is None else tg
    cond = condense(tg)
    leaves = set(cond.leaf_components())
    equilibria = {frozenset({b}) for b, out in enumerate(tg.image) if out == b}
    return leaves == equilibria


# --------------------------------------------------------------------------
# converging sequences and reachability


@dataclass
class ConvergingSequence:
    schedule: list[frozenset[AgentId]]
    profile: BeliefProfile
    trace: Trace
    phase_lengths: tuple[int, int]
    verified: bool  # final profile passed is_equilibrium


def construct_converging_sequence(
    net: Network, fam: FunctionFamily, p0: BeliefProfile, *, decreasing_first: bool = False
) -> ConvergingSequence:
    """Increasing phase then decreasing phase, each flipping every eligible agent per round.

    Increasing rounds switch all agents holding 0 whose function gives 1;
    decreasing rounds switch all agents holding 1 whose function gives 0.
    For a monotonic family the result is an equilibrium; otherwise
    ``verified`` reports whether it happens to be one.
    """
    fam.check(net)
    full = net.full_mask
    bits = p0.bits
    steps: list[Step] = []
    groups: list[frozenset[AgentId]] = []
    phases = (0, 1) if decreasing_first else (1, 0)
    lengths = []
    for target in phases:
        rounds = 0
        while True:
            out = update_bits(net, fam, bits, full)
            if target:
                eligible = ~bits & out & full
            else:
                eligible = bits & ~out
            if not eligible:
                break
            bits ^= eligible
            group = net.group_from_mask(eligible)
            groups.append(group)
            steps.append(Step(len(steps) + 1, group, BeliefProfile(net, bits)))
            rounds += 1
        lengths.append(rounds)
    final = BeliefProfile(net, bits)
    verified = is_equilibrium(net, fam, final)
    outcome = Outcome("converged", at_step=len(steps)) if verified else Outcome("step_limit_reached")
    trace = Trace(net, fam, p0, steps, outcome, mode="constructed")
    return ConvergingSequence(groups, final, trace, tuple(lengths), verified)


def reachable_equilibria(
    net: Network, fam: FunctionFamily, p0: BeliefProfile, tg: TransitionGraph | None = None
) -> list[BeliefProfile]:
    tg = build_transition_graph(net, fam) if tg is None else tg
    seen = {p0.bits}
    queue = deque([p0.bits])
    found = []
    while queue:
        v = queue.popleft()
        if tg.is_equilibrium_node(v):
            found.append(v)
        for w in tg.successors[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return [BeliefProfile(net, b) for b in sorted(found)]


# --------------------------------------------------------------------------
# DOT export


def _group_label(net: Network, mask: int) -> str:
    return "{" + ",".join(a for i, a in enumerate(net.agents) if mask >> i & 1) + "}"


def transition_graph_dot(tg: TransitionGraph, *, include_self_loops: bool = True) -> str:
    net = tg.network
    lines = ["digraph transitions {"]
    for bits in range(tg.n_nodes):
        shape = "doublecircle" if tg.is_equilibrium_node(bits) else "circle"
        lines.append(f'  "{BeliefProfile(net, bits)}" [shape={shape}];')
    for src, dst, group in tg.edges():
        if src == dst and not include_self_loops:
            continue
        lines.append(
            f'  "{BeliefProfile(net, src)}" -> "{BeliefProfile(net, dst)}" [label="{_group_label(net, group)}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def condensation_dot(cond: Condensation, tg: TransitionGraph) -> str:
    net = cond.network
    lines = ["digraph condensation {"]
    for c, comp in enumerate(cond.components):
        members = sorted(comp)
        name = " ".join(str(BeliefProfile(net, b)) for b in members)
        equilibrium = len(members) == 1 and tg.is_equilibrium_node(members[0])
        shape = "doublecircle" if equilibrium else "box"
        leaf = ", style=bold" if c in cond.leaves else ""
        lines.append(f'  "C{c}" [label="{name}", shape={shape}{leaf}];')
    for a, b in sorted(cond.dag_edges):
        lines.append(f'  "C{a}" -> "C{b}";')
    lines.append("}")
    return "\n".join(lines) + "\n"

