"""Belief evolution functions and the profile update operators."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigurationError, DomainError, InputFormatError
from .network import AgentId, BeliefProfile, Network


class EvolutionFunction:
    """A per-agent rule mapping the current profile to the agent's next belief.

    Subclasses implement :meth:`evaluate` on the integer profile encoding;
    calling the function with a :class:`BeliefProfile` and an agent id is
    the public form.
    """

    name = "abstract"

    def evaluate(self, net: Network, bits: int, i: int) -> int:
        raise NotImplementedError

    def __call__(self, net: Network, p: BeliefProfile, agent: AgentId) -> int:
        if p.network != net:
            raise DomainError("profile does not belong to the network")
        return self.evaluate(net, p.bits, net.index(agent))

    def __eq__(self, other):
        return type(self) is type(other) and self.selector == other.selector

    def __hash__(self):
        return hash((type(self), self.selector))

    def __repr__(self):
        return f"<{type(self).__name__} {self.selector}>"

    @property
    def selector(self) -> str:
        return self.name


class Majority(EvolutionFunction):
    """Strict majority over out-neighbors (self included); ties keep the current belief."""

    name = "majority"

    def evaluate(self, net, bits, i):
        pos = (bits & net.out_mask(i)).bit_count()
        neg = len(net.out_indices(i)) - pos
        if pos > neg:
            return 1
        if pos < neg:
            return 0
        return bits >> i & 1


class Stubborn(EvolutionFunction):
    name = "stubborn"

    def evaluate(self, net, bits, i):
        return bits >> i & 1


class Flipper(EvolutionFunction):
    name = "flipper"

    def evaluate(self, net, bits, i):
        return 1 - (bits >> i & 1)


class Threshold(EvolutionFunction):
    """Flip when at least ``k`` out-neighbors other than the agent hold the opposite belief."""

    name = "threshold"

    def __init__(self, k: int):
        if not isinstance(k, int) or k < 1:
            raise ConfigurationError(f"threshold requires k >= 1, got {k!r}")
        self.k = k

    @property
    def selector(self):
        return f"threshold:{self.k}"

    def evaluate(self, net, bits, i):
        own = bits >> i & 1
        others = net.out_mask(i) & ~(1 << i)
        ones = (bits & others).bit_count()
        opposing = others.bit_count() - ones if own else ones
        return 1 - own if opposing >= self.k else own


def parse_function(selector: str) -> EvolutionFunction:
    """``majority``, ``stubborn``, ``flipper`` or ``threshold:<k>``."""
    selector = selector.strip()
    kind, _, arg = selector.partition(":")
    if kind == "threshold":
        try:
            return Threshold(int(arg))
        except ValueError:
            raise ConfigurationError(f"bad threshold selector {selector!r}; expected threshold:<k>") from None
    if arg:
        raise ConfigurationError(f"function {kind!r} takes no parameter")
    try:
        return {"majority": Majority, "stubborn": Stubborn, "flipper": Flipper}[kind]()
    except KeyError:
        raise ConfigurationError(
            f"unknown function kind {selector!r}; expected majority, stubborn, flipper or threshold:<k>"
        ) from None


class FunctionFamily:
    """One evolution function per agent of a network."""

    def __init__(self, net: Network, assignment: Mapping[AgentId, EvolutionFunction]):
        if set(assignment) != set(net.agents):
            missing = sorted(set(net.agents) - set(assignment))
            extra = sorted(set(assignment) - set(net.agents))
            raise DomainError(f"function family does not cover the network (missing={missing}, extra={extra})")
        self.network = net
        self.functions = tuple(assignment[a] for a in net.agents)

    @classmethod
    def uniform(cls, net: Network, fn: EvolutionFunction | str) -> FunctionFamily:
        if isinstance(fn, str):
            fn = parse_function(fn)
        return cls(net, {a: fn for a in net.agents})

    def __getitem__(self, agent: AgentId) -> EvolutionFunction:
        return self.functions[self.network.index(agent)]

    def __eq__(self, other):
        return isinstance(other, FunctionFamily) and (self.network, self.functions) == (
            other.network,
            other.functions,
        )

    def __hash__(self):
        return hash((self.network, self.functions))

    @property
    def homogeneous(self) -> bool:
        return len(set(self.functions)) <= 1

    def describe(self) -> str:
        if self.homogeneous and self.functions:
            return self.functions[0].selector
        return ";".join(f"{a}={f.selector}" for a, f in zip(self.network.agents, self.functions))

    def relabel(self, mapping: Mapping[AgentId, AgentId]) -> FunctionFamily:
        net = self.network.relabel(mapping)
        return FunctionFamily(net, {mapping[a]: f for a, f in zip(self.network.agents, self.functions)})

    def check(self, net: Network) -> None:
        if net != self.network:
            raise DomainError("function family was built for a different network")


def parse_family(net: Network, text: str, source: str = "<string>") -> FunctionFamily:
    """Per-agent assignment, one ``agent: selector`` line per agent."""
    assignment = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        agent, sep, selector = line.partition(":")
        agent = agent.strip()
        if not sep:
            raise InputFormatError(f"expected '<agent>: <function>', got {line!r}", source, lineno)
        if agent not in net:
            raise InputFormatError(f"unknown agent {agent!r}", source, lineno)
        if agent in assignment:
            raise InputFormatError(f"agent {agent!r} assigned twice", source, lineno)
        try:
            assignment[agent] = parse_function(selector)
        except ConfigurationError as exc:
            raise InputFormatError(str(exc), source, lineno) from None
    missing = [a for a in net.agents if a not in assignment]
    if missing:
        raise InputFormatError(f"no function assigned to: {', '.join(missing)}", source)
    return FunctionFamily(net, assignment)


def load_family(net: Network, path: str | Path) -> FunctionFamily:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputFormatError(f"cannot read function file: {exc.strerror}", str(path)) from None
    return parse_family(net, text, str(path))


# --------------------------------------------------------------------------
# evaluation


def majority_rule(net: Network, p: BeliefProfile, agent: AgentId) -> int:
    return Majority()(net, p, agent)


def builtin_function(kind: str, net: Network, p: BeliefProfile, agent: AgentId) -> int:
    return parse_function(kind)(net, p, agent)


def update_bits(net: Network, fam: FunctionFamily, bits: int, group_mask: int) -> int:
    """Integer form of :func:`apply_group`: agents in ``group_mask`` take their function value."""
    out = bits
    fns = fam.functions
    i = 0
    while group_mask >> i:
        if group_mask >> i & 1:
            value = fns[i].evaluate(net, bits, i)
            out = (out | (1 << i)) if value else (out & ~(1 << i))
        i += 1
    return out


def image_bits(net: Network, fam: FunctionFamily, bits: int) -> int:
    """Integer form of :func:`apply_all`."""
    out = 0
    for i, fn in enumerate(fam.functions):
        if fn.evaluate(net, bits, i):
            out |= 1 << i
    return out


def sync_map(net: Network, fam: FunctionFamily) -> list[int]:
    """``table[bits]`` is the synchronous image of every one of the ``2**n`` profiles."""
    fam.check(net)
    return [image_bits(net, fam, bits) for bits in range(1 << net.n)]


def apply_all(net: Network, fam: FunctionFamily, p: BeliefProfile) -> BeliefProfile:
    fam.check(net)
    if p.network != net:
        raise DomainError("profile does not belong to the network")
    return BeliefProfile(net, image_bits(net, fam, p.bits))


def apply_group(net: Network, fam: FunctionFamily, p: BeliefProfile, group: Iterable[AgentId]) -> BeliefProfile:
    fam.check(net)
    if p.network != net:
        raise DomainError("profile does not belong to the network")
    return BeliefProfile(net, update_bits(net, fam, p.bits, net.group_mask(group)))
