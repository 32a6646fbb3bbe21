"""Networks of agents, belief profiles and the relations between profiles.

Agents are ordered lexicographically by id. That canonical order fixes the
bit position of every agent: in a profile's integer encoding agent ``i``
occupies bit ``i``, and in its text rendering it is character ``i``.
"""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import DomainError, InfeasibleError, InputFormatError

logger = logging.getLogger(__name__)

AgentId = str

_AGENT_RE = re.compile(r"^[^\s,]+$")

#: Largest network for which brute-force isomorphism search is attempted.
ISOMORPHISM_LIMIT = 8


def validate_agent_id(agent: str) -> str:
    if not isinstance(agent, str) or not _AGENT_RE.match(agent):
        raise DomainError(f"invalid agent id {agent!r}: must be non-empty, without whitespace or commas")
    return agent


class Network:
    """Directed graph of agents in which every agent has a self-loop.

    Immutable after construction. Missing self-loops are inserted (with a
    logged warning) rather than rejected.
    """

    __slots__ = ("agents", "ties", "_index", "_out", "_out_masks", "_hash")

    def __init__(self, agents: Iterable[AgentId], ties: Iterable[tuple[AgentId, AgentId]] = (), *, warn: bool = True):
        agent_list = [validate_agent_id(a) for a in agents]
        if len(set(agent_list)) != len(agent_list):
            dupes = sorted({a for a in agent_list if agent_list.count(a) > 1})
            raise DomainError(f"duplicate agent ids: {', '.join(dupes)}")
        ordered = tuple(sorted(agent_list))
        known = set(ordered)
        tie_set = set()
        for src, dst in ties:
            for end in (src, dst):
                if end not in known:
                    raise DomainError(f"tie ({src}, {dst}) refers to undeclared agent {end!r}")
            tie_set.add((src, dst))
        missing = [a for a in ordered if (a, a) not in tie_set]
        if missing:
            if warn:
                logger.warning("inserting missing self-loops for: %s", ", ".join(missing))
            tie_set.update((a, a) for a in missing)

        object.__setattr__(self, "agents", ordered)
        object.__setattr__(self, "ties", frozenset(tie_set))
        index = {a: i for i, a in enumerate(ordered)}
        out: list[list[int]] = [[] for _ in ordered]
        for src, dst in tie_set:
            out[index[src]].append(index[dst])
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_out", tuple(tuple(sorted(o)) for o in out))
        object.__setattr__(self, "_out_masks", tuple(sum(1 << j for j in o) for o in out))
        object.__setattr__(self, "_hash", hash((ordered, self.ties)))

    def __setattr__(self, name, value):
        raise AttributeError("Network is immutable")

    def __reduce__(self):
        return (_rebuild_network, (self.agents, tuple(sorted(self.ties))))

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self is other or (self.agents == other.agents and self.ties == other.ties)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Network(agents={list(self.agents)!r}, ties={len(self.ties)})"

    def __len__(self):
        return len(self.agents)

    def __contains__(self, agent):
        return agent in self._index

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.agents)) - 1

    def index(self, agent: AgentId) -> int:
        try:
            return self._index[agent]
        except KeyError:
            raise DomainError(f"unknown agent {agent!r}") from None

    def out_neighbors(self, agent: AgentId) -> tuple[AgentId, ...]:
        """Agents ``b`` with a tie ``(agent, b)``; always includes ``agent``."""
        return tuple(self.agents[j] for j in self._out[self.index(agent)])

    def out_indices(self, i: int) -> tuple[int, ...]:
        return self._out[i]

    def out_mask(self, i: int) -> int:
        return self._out_masks[i]

    def out_degree(self, agent: AgentId) -> int:
        return len(self._out[self.index(agent)])

    def group_mask(self, group: Iterable[AgentId]) -> int:
        mask = 0
        for agent in group:
            mask |= 1 << self.index(agent)
        return mask

    def group_from_mask(self, mask: int) -> frozenset[AgentId]:
        return frozenset(a for i, a in enumerate(self.agents) if mask >> i & 1)

    def relabel(self, mapping: Mapping[AgentId, AgentId]) -> Network:
        """Copy of the network with agents renamed through ``mapping``."""
        return Network(
            (mapping[a] for a in self.agents),
            ((mapping[s], mapping[d]) for s, d in self.ties),
            warn=False,
        )

    def profiles(self) -> Iterator[BeliefProfile]:
        """All ``2**n`` profiles in canonical (integer) order."""
        for bits in range(1 << self.n):
            yield BeliefProfile(self, bits)


def _rebuild_network(agents, ties):
    return Network(agents, ties, warn=False)


@dataclass(frozen=True)
class NeighborhoodTally:
    n_pos: int
    n_neg: int


@dataclass(frozen=True)
class BeliefProfile:
    """Total assignment of a belief in {0, 1} to every agent of ``network``."""

    network: Network
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits <= self.network.full_mask:
            raise DomainError(f"profile bits {self.bits} out of range for {self.network.n} agents")

    @classmethod
    def from_bitstring(cls, network: Network, text: str) -> BeliefProfile:
        text = text.strip()
        if len(text) != network.n:
            raise DomainError(
                f"profile {text!r} has length {len(text)}, network has {network.n} agents"
            )
        if set(text) - {"0", "1"}:
            raise DomainError(f"profile {text!r} must contain only 0 and 1")
        return cls(network, sum(1 << i for i, ch in enumerate(text) if ch == "1"))

    @classmethod
    def from_mapping(cls, network: Network, beliefs: Mapping[AgentId, int]) -> BeliefProfile:
        if set(beliefs) != set(network.agents):
            missing = sorted(set(network.agents) - set(beliefs))
            extra = sorted(set(beliefs) - set(network.agents))
            raise DomainError(f"profile domain mismatch (missing={missing}, extra={extra})")
        bits = 0
        for agent, value in beliefs.items():
            if value not in (0, 1):
                raise DomainError(f"belief of {agent!r} must be 0 or 1, got {value!r}")
            bits |= value << network.index(agent)
        return cls(network, bits)

    @classmethod
    def constant(cls, network: Network, value: int) -> BeliefProfile:
        return cls(network, network.full_mask if value else 0)

    def __getitem__(self, agent: AgentId) -> int:
        return self.bits >> self.network.index(agent) & 1

    def __str__(self):
        return "".join("1" if self.bits >> i & 1 else "0" for i in range(self.network.n))

    def __repr__(self):
        return f"BeliefProfile({str(self)!r})"

    def as_dict(self) -> dict[AgentId, int]:
        return {a: self.bits >> i & 1 for i, a in enumerate(self.network.agents)}

    def count_ones(self) -> int:
        return self.bits.bit_count()

    def tally(self, agent: AgentId) -> NeighborhoodTally:
        i = self.network.index(agent)
        pos = (self.bits & self.network.out_mask(i)).bit_count()
        return NeighborhoodTally(pos, len(self.network.out_indices(i)) - pos)


def flip_profile(p: BeliefProfile) -> BeliefProfile:
    return BeliefProfile(p.network, p.bits ^ p.network.full_mask)


def _same_network(p: BeliefProfile, q: BeliefProfile) -> None:
    if p.network != q.network:
        raise DomainError("profiles belong to different networks")


def profile_leq(p: BeliefProfile, q: BeliefProfile) -> bool:
    """Pointwise order: every agent's belief in ``p`` is at most its belief in ``q``."""
    _same_network(p, q)
    return p.bits & ~q.bits == 0


def is_consensus(p: BeliefProfile) -> bool:
    return p.bits == 0 or p.bits == p.network.full_mask


def _isomorphism_perms(n1: Network, n2: Network) -> Iterator[tuple[int, ...]]:
    if n1.n != n2.n or len(n1.ties) != len(n2.ties):
        return
    n = n1.n
    if n > ISOMORPHISM_LIMIT:
        raise InfeasibleError(
            f"exhaustive check infeasible: isomorphism search over {n} agents exceeds limit {ISOMORPHISM_LIMIT}"
        )
    src = [(n1.index(a), n1.index(b)) for a, b in n1.ties]
    target = n2.out_mask
    for perm in itertools.permutations(range(n)):
        if all(target(perm[i]) >> perm[j] & 1 for i, j in src):
            yield perm


def find_isomorphisms(n1: Network, n2: Network) -> list[dict[AgentId, AgentId]]:
    """All tie-preserving bijections from ``n1``'s agents onto ``n2``'s.

    Brute force over permutations, so limited to ``ISOMORPHISM_LIMIT``
    agents. With ``n1 == n2`` the result is the automorphism group, listed
    with the identity first.
    """
    return [
        {n1.agents[i]: n2.agents[j] for i, j in enumerate(perm)}
        for perm in _isomorphism_perms(n1, n2)
    ]


def automorphism_perms(net: Network) -> list[tuple[int, ...]]:
    """Automorphisms as index permutations (``perm[i]`` is the image of agent ``i``)."""
    return list(_isomorphism_perms(net, net))


def permute_bits(bits: int, perm: tuple[int, ...]) -> int:
    """Move the belief at position ``i`` to position ``perm[i]``."""
    out = 0
    for i, j in enumerate(perm):
        out |= (bits >> i & 1) << j
    return out


# --------------------------------------------------------------------------
# text formats


def parse_network(text: str, source: str = "<string>") -> Network:
    agents = None
    ties = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, rest = line.partition(":")
        key = key.strip()
        if not sep or key not in ("agents", "edge"):
            raise InputFormatError(f"expected 'agents: a,b,...' or 'edge: a b', got {line!r}", source, lineno)
        if key == "agents":
            if agents is not None:
                raise InputFormatError("duplicate 'agents:' line", source, lineno)
            if ties:
                raise InputFormatError("'agents:' must precede all 'edge:' lines", source, lineno)
            names = [name.strip() for name in rest.split(",")]
            if not names or any(not _AGENT_RE.match(name) for name in names):
                raise InputFormatError(f"bad agent list {rest.strip()!r}", source, lineno)
            if len(set(names)) != len(names):
                raise InputFormatError("duplicate agent ids", source, lineno)
            agents = names
        else:
            if agents is None:
                raise InputFormatError("'edge:' before 'agents:'", source, lineno)
            parts = rest.split()
            if len(parts) != 2:
                raise InputFormatError(f"expected 'edge: <from> <to>', got {line!r}", source, lineno)
            for name in parts:
                if name not in agents:
                    raise InputFormatError(f"edge refers to undeclared agent {name!r}", source, lineno)
            ties.append((parts[0], parts[1]))
    if agents is None:
        raise InputFormatError("missing 'agents:' line", source)
    return Network(agents, ties)


def format_network(net: Network) -> str:
    lines = ["agents: " + ",".join(net.agents)]
    lines += [f"edge: {a} {b}" for a, b in sorted(net.ties)]
    return "\n".join(lines) + "\n"


def load_network(path: str | Path) -> Network:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputFormatError(f"cannot read network file: {exc.strerror}", str(path)) from None
    return parse_network(text, str(path))


def parse_profile(net: Network, text: str, source: str | None = None) -> BeliefProfile:
    try:
        return BeliefProfile.from_bitstring(net, text)
    except DomainError as exc:
        raise InputFormatError(str(exc), source) from None


# --------------------------------------------------------------------------
# built-in families


def _undirected(edges):
    for a, b in edges:
        yield a, b
        yield b, a


def path_network(n: int, prefix: str = "") -> Network:
    names = [f"{prefix}{chr(ord('a') + i)}" if n <= 26 else f"{prefix}v{i:03d}" for i in range(n)]
    return Network(names, _undirected(zip(names, names[1:])), warn=False)


def cycle_network(n: int) -> Network:
    names = [f"v{i}" for i in range(n)]
    edges = list(zip(names, names[1:] + names[:1])) if n > 1 else []
    return Network(names, _undirected(edges), warn=False)


def star_network(leaves: int) -> Network:
    names = [f"l{i}" for i in range(1, leaves + 1)]
    return Network(["c", *names], _undirected(("c", leaf) for leaf in names), warn=False)


def complete_network(n: int) -> Network:
    names = [f"v{i}" for i in range(n)]
    return Network(names, itertools.permutations(names, 2), warn=False)


def complete_bipartite_network(left: int, right: int) -> Network:
    a_side = [f"a{i}" for i in range(1, left + 1)]
    b_side = [f"b{i}" for i in range(1, right + 1)]
    return Network(a_side + b_side, _undirected(itertools.product(a_side, b_side)), warn=False)


def all_networks(n: int, names: Iterable[AgentId] | None = None) -> Iterator[Network]:
    """Every directed network on ``n`` agents: all ``2**(n*(n-1))`` tie subsets."""
    names = list(names) if names is not None else [chr(ord("a") + i) for i in range(n)]
    pairs = [(a, b) for a in names for b in names if a != b]
    for mask in range(1 << len(pairs)):
        yield Network(names, (pairs[k] for k in range(len(pairs)) if mask >> k & 1), warn=False)


BUILTIN_FAMILIES = {
    "path": path_network,
    "cycle": cycle_network,
    "star": star_network,
    "complete": complete_network,
    "complete-bipartite": complete_bipartite_network,
}


def builtin_network(name: str) -> Network:
    """Build from ``family:args``, e.g. ``path:3`` or ``complete-bipartite:2,2``."""
    family, _, args = name.partition(":")
    if family not in BUILTIN_FAMILIES:
        raise DomainError(f"unknown network family {family!r}; choose from {', '.join(BUILTIN_FAMILIES)}")
    try:
        values = [int(x) for x in args.split(",")] if args else []
        return BUILTIN_FAMILIES[family](*values)
    except (TypeError, ValueError):
        raise DomainError(f"bad arguments {args!r} for network family {family!r}") from None
