"""Exhaustive verification of the six rationality properties of a function family.

Every check tabulates the family once over all ``2**n`` profiles (see
:func:`beliefdyn.evolution.sync_map`) and then scans the table. A failing
report carries a witness that :func:`replay_witness` re-evaluates through
the evolution functions themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InfeasibleError
from .evolution import FunctionFamily, sync_map
from .network import (
    AgentId,
    BeliefProfile,
    Network,
    _isomorphism_perms,
    flip_profile,
    permute_bits,
    profile_leq,
)

AXIOMS = ("bounded", "neutral", "congruent", "local", "monotonic", "non_slavish")


@dataclass(frozen=True)
class ExhaustiveLimits:
    """Largest network size each exhaustive check accepts."""

    profiles: int = 12
    monotonic: int = 10
    isomorphism: int = 8


DEFAULT_LIMITS = ExhaustiveLimits()


@dataclass(frozen=True)
class Witness:
    """Counterexample data. Which fields are set depends on the axiom:

    - bounded, neutral: ``profile``, ``agent``
    - local, monotonic: ``profile``, ``other_profile``, ``agent``
    - congruent: ``profile``, ``other_profile`` (the mapped profile), ``agent``,
      ``other_agent`` (its image) and ``mapping``
    - non_slavish: ``agent`` and the dominating ``other_agent``
    """

    agent: AgentId
    profile: BeliefProfile | None = None
    other_profile: BeliefProfile | None = None
    other_agent: AgentId | None = None
    mapping: dict[AgentId, AgentId] | None = field(default=None, hash=False, compare=False)

    def describe(self) -> str:
        parts = [f"agent={self.agent}"]
        if self.profile is not None:
            parts.append(f"P={self.profile}")
        if self.other_profile is not None:
            parts.append(f"Q={self.other_profile}")
        if self.other_agent is not None:
            parts.append(f"other={self.other_agent}")
        if self.mapping is not None:
            parts.append("pi=" + ",".join(f"{k}>{v}" for k, v in sorted(self.mapping.items())))
        return " ".join(parts)


@dataclass(frozen=True)
class AxiomReport:
    axiom: str
    holds: bool
    witness: Witness | None = None

    def __post_init__(self):
        if not self.holds and self.witness is None:
            raise ValueError("a failing report needs a witness")


def _require(net: Network, limit: int, what: str) -> None:
    if net.n > limit:
        raise InfeasibleError(f"exhaustive check infeasible: {what} on {net.n} agents exceeds limit {limit}")


def _table(net, fam, table):
    return sync_map(net, fam) if table is None else table


def check_bounded(net: Network, fam: FunctionFamily, *, limits=DEFAULT_LIMITS, table=None) -> AxiomReport:
    """min over all agents <= f_a(P) <= max over all agents, for every P and a."""
    _require(net, limits.profiles, "bounded")
    img = _table(net, fam, table)
    full = net.full_mask
    for bits, out in enumerate(img):
        lo = 1 if bits == full else 0
        hi = 0 if bits == 0 else 1
        for i in range(net.n):
            value = out >> i & 1
            if not lo <= value <= hi:
                return AxiomReport("bounded", False, Witness(net.agents[i], BeliefProfile(net, bits)))
    return AxiomReport("bounded", True)


def check_neutral(net: Network, fam: FunctionFamily, *, limits=DEFAULT_LIMITS, table=None) -> AxiomReport:
    _require(net, limits.profiles, "neutral")
    img = _table(net, fam, table)
    full = net.full_mask
    for bits, out in enumerate(img):
        bad = img[bits ^ full] ^ out ^ full
        if bad:
            i = (bad & -bad).bit_length() - 1
            return AxiomReport("neutral", False, Witness(net.agents[i], BeliefProfile(net, bits)))
    return AxiomReport("neutral", True)


def _congruence_scan(net1, img1, net2, img2, perms):
    for perm in perms:
        for bits, out in enumerate(img1):
            mapped = permute_bits(bits, perm)
            bad = permute_bits(out, perm) ^ img2[mapped]
            if bad:
                j = (bad & -bad).bit_length() - 1
                i = perm.index(j)
                return Witness(
                    net1.agents[i],
                    BeliefProfile(net1, bits),
                    BeliefProfile(net2, mapped),
                    net2.agents[j],
                    {net1.agents[k]: net2.agents[v] for k, v in enumerate(perm)},
                )
    return None


def check_congruent(
    net: Network,
    fam: FunctionFamily,
    other: Network | None = None,
    other_fam: FunctionFamily | None = None,
    *,
    limits=DEFAULT_LIMITS,
    table=None,
) -> AxiomReport:
    """f_a(P) == f_pi(a)(P o pi^-1) for every correspondence pi.

    Within one network the correspondences are its automorphisms. Passing
    ``other`` (and its family ``other_fam``) checks across every
    isomorphism between the two networks instead.
    """
    _require(net, min(limits.isomorphism, limits.profiles), "congruent")
    img1 = _table(net, fam, table)
    if other is None:
        other, img2 = net, img1
    else:
        if other_fam is None:
            raise ValueError("other_fam is required with other")
        img2 = sync_map(other, other_fam)
    witness = _congruence_scan(net, img1, other, img2, _isomorphism_perms(net, other))
    return AxiomReport("congruent", witness is None, witness)


def check_local(net: Network, fam: FunctionFamily, *, limits=DEFAULT_LIMITS, table=None) -> AxiomReport:
    _require(net, limits.profiles, "local")
    img = _table(net, fam, table)
    for i in range(net.n):
        mask = net.out_mask(i)
        seen: dict[int, int] = {}
        for bits, out in enumerate(img):
            key = bits & mask
            value = out >> i & 1
            first = seen.setdefault(key, bits)
            if (img[first] >> i & 1) != value:
                return AxiomReport(
                    "local",
                    False,
                    Witness(net.agents[i], BeliefProfile(net, first), BeliefProfile(net, bits)),
                )
    return AxiomReport("local", True)


def check_monotonic(net: Network, fam: FunctionFamily, *, limits=DEFAULT_LIMITS, table=None) -> AxiomReport:
    """Walks all 3**n comparable pairs (P <= Q) as submasks of each Q."""
    _require(net, limits.monotonic, "monotonic")
    img = _table(net, fam, table)
    for q, out_q in enumerate(img):
        p = q
        while True:
            bad = img[p] & ~out_q
            if bad:
                i = (bad & -bad).bit_length() - 1
                return AxiomReport(
                    "monotonic",
                    False,
                    Witness(net.agents[i], BeliefProfile(net, p), BeliefProfile(net, q)),
                )
            if p == 0:
                break
            p = (p - 1) & q
    return AxiomReport("monotonic", True)


def check_non_slavish(net: Network, fam: FunctionFamily, *, limits=DEFAULT_LIMITS, table=None) -> AxiomReport:
    """No agent's output copies a single agent's belief on every profile."""
    _require(net, limits.profiles, "non_slavish")
    img = _table(net, fam, table)
    for i in range(net.n):
        for j in range(net.n):
            if all((out >> i & 1) == (bits >> j & 1) for bits, out in enumerate(img)):
                return AxiomReport("non_slavish", False, Witness(net.agents[i], other_agent=net.agents[j]))
    return AxiomReport("non_slavish", True)


CHECKS = {
    "bounded": check_bounded,
    "neutral": check_neutral,
    "congruent": check_congruent,
    "local": check_local,
    "monotonic": check_monotonic,
    "non_slavish": check_non_slavish,
}


def parse_axioms(text: str) -> list[str]:
    if text.strip() == "all":
        return list(AXIOMS)
    names = [name.strip().replace("-", "_") for name in text.split(",") if name.strip()]
    unknown = [name for name in names if name not in CHECKS]
    if unknown or not names:
        raise ValueError(f"unknown axiom(s) {unknown or text!r}; choose from all, {', '.join(AXIOMS)}")
    return names


def check_axioms(net: Network, fam: FunctionFamily, axioms=AXIOMS, *, limits=DEFAULT_LIMITS) -> list[AxiomReport]:
    """Run the requested checks, sharing one tabulation of the family."""
    for name in axioms:
        if name not in CHECKS:
            raise ValueError(f"unknown axiom {name!r}")
    _require(net, limits.profiles, "axiom verification")
    table = sync_map(net, fam)
    return [CHECKS[name](net, fam, limits=limits, table=table) for name in axioms]


def replay_witness(
    net: Network, fam: FunctionFamily, report: AxiomReport, other_fam: FunctionFamily | None = None
) -> bool:
    """Re-evaluate a failing report's witness directly; True iff the violation reproduces.

    ``other_fam`` is the second family of a cross-network congruence check.
    """
    if report.holds:
        return False
    w = report.witness
    f = fam[w.agent]
    if report.axiom == "bounded":
        values = w.profile.as_dict().values()
        return not min(values) <= f(net, w.profile, w.agent) <= max(values)
    if report.axiom == "neutral":
        return f(net, flip_profile(w.profile), w.agent) != 1 - f(net, w.profile, w.agent)
    if report.axiom == "local":
        hood = net.out_neighbors(w.agent)
        agree = all(w.profile[b] == w.other_profile[b] for b in hood)
        return agree and f(net, w.profile, w.agent) != f(net, w.other_profile, w.agent)
    if report.axiom == "monotonic":
        return profile_leq(w.profile, w.other_profile) and f(net, w.profile, w.agent) > f(
            net, w.other_profile, w.agent
        )
    if report.axiom == "congruent":
        other = w.other_profile.network
        g = (fam if other_fam is None else other_fam)[w.other_agent]
        pi = w.mapping
        is_iso = sorted(pi.values()) == list(other.agents) and len(net.ties) == len(other.ties)
        is_iso = is_iso and all((pi[a], pi[b]) in other.ties for a, b in net.ties)
        transported = all(w.other_profile[pi[a]] == w.profile[a] for a in net.agents)
        return (
            is_iso
            and transported
            and pi[w.agent] == w.other_agent
            and f(net, w.profile, w.agent) != g(other, w.other_profile, w.other_agent)
        )
    if report.axiom == "non_slavish":
        return all(f(net, p, w.agent) == p[w.other_agent] for p in net.profiles())
    raise ValueError(f"unknown axiom {report.axiom!r}")
