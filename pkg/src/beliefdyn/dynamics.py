"""Running belief evolution: synchronous, scheduled and random-asynchronous."""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, InputFormatError
from .evolution import FunctionFamily, image_bits, parse_function, sync_map, update_bits
from .network import AgentId, BeliefProfile, Network

logger = logging.getLogger(__name__)

MAX_STEPS_CAP = 10**6


def default_max_steps(n: int) -> int:
    return min(max(1000, 4 * 2**n), MAX_STEPS_CAP)


@dataclass(frozen=True)
class Step:
    index: int
    group: frozenset[AgentId]
    profile: BeliefProfile


@dataclass(frozen=True)
class Outcome:
    kind: str  # "converged" | "cycled" | "step_limit_reached"
    at_step: int | None = None
    preperiod: int | None = None
    period: int | None = None

    def describe(self) -> str:
        if self.kind == "converged":
            return f"converged, at step {self.at_step}"
        if self.kind == "cycled":
            return f"cycled, preperiod {self.preperiod}, period {self.period}"
        return "step_limit_reached"

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class Trace:
    network: Network
    family: FunctionFamily
    initial: BeliefProfile
    steps: list[Step]
    outcome: Outcome
    mode: str = "scheduled"
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> BeliefProfile:
        return self.steps[-1].profile if self.steps else self.initial

    def profiles(self) -> list[BeliefProfile]:
        return [self.initial] + [s.profile for s in self.steps]

    @property
    def converged(self) -> bool:
        return self.outcome.kind == "converged"


@dataclass(frozen=True)
class Schedule:
    """Finite sequence of agent groups."""

    groups: tuple[frozenset[AgentId], ...]

    @classmethod
    def of(cls, net: Network, groups: Iterable[Iterable[AgentId]]) -> Schedule:
        out = []
        for group in groups:
            group = frozenset(group)
            for agent in group:
                if agent not in net:
                    raise DomainError(f"schedule group refers to unknown agent {agent!r}")
            out.append(group)
        return cls(tuple(out))

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)


@dataclass(frozen=True)
class RandomSchedule:
    """Per-agent Bernoulli activation, i.i.d. across steps."""

    probs: tuple[float, ...]
    seed: int

    @property
    def guarantees_all_subsets(self) -> bool:
        return all(0.0 < p < 1.0 for p in self.probs)


def parse_schedule(net: Network, text: str, source: str = "<string>") -> Schedule:
    """One group per line, agents comma-separated; an empty line is an empty group."""
    groups = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            continue
        names = [name.strip() for name in line.split(",")] if line else []
        for name in names:
            if name not in net:
                raise InputFormatError(f"unknown agent {name!r} in schedule group", source, lineno)
        groups.append(frozenset(names))
    return Schedule(tuple(groups))


def load_schedule(net: Network, path: str | Path) -> Schedule:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputFormatError(f"cannot read schedule file: {exc.strerror}", str(path)) from None
    return parse_schedule(net, text, str(path))


def resolve_probs(net: Network, probs: float | Mapping[AgentId, float] | Sequence[float]) -> tuple[float, ...]:
    if isinstance(probs, (int, float)):
        values = [float(probs)] * net.n
    elif isinstance(probs, Mapping):
        if set(probs) != set(net.agents):
            raise DomainError("activation probabilities must cover exactly the network's agents")
        values = [float(probs[a]) for a in net.agents]
    else:
        values = [float(p) for p in probs]
        if len(values) != net.n:
            raise DomainError(f"expected {net.n} activation probabilities, got {len(values)}")
    for agent, p in zip(net.agents, values):
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"activation probability of {agent!r} must lie in [0, 1], got {p}")
    return tuple(values)


def parse_probs(net: Network, text: str, source: str = "<string>") -> tuple[float, ...]:
    """Lines ``agent: probability``."""
    probs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        agent, sep, value = line.partition(":")
        agent = agent.strip()
        if not sep or agent not in net:
            raise InputFormatError(f"expected '<agent>: <probability>' for a known agent, got {line!r}", source, lineno)
        try:
            probs[agent] = float(value)
        except ValueError:
            raise InputFormatError(f"bad probability {value.strip()!r}", source, lineno) from None
    try:
        return resolve_probs(net, probs)
    except DomainError as exc:
        raise InputFormatError(str(exc), source) from None


# --------------------------------------------------------------------------
# equilibria


def _check_inputs(net: Network, fam: FunctionFamily, p: BeliefProfile) -> None:
    fam.check(net)
    if p.network != net:
        raise DomainError("profile does not belong to the network")


def is_equilibrium(net: Network, fam: FunctionFamily, p: BeliefProfile) -> bool:
    _check_inputs(net, fam, p)
    return image_bits(net, fam, p.bits) == p.bits


def equilibrium_subset_equivalence(net: Network, fam: FunctionFamily, p: BeliefProfile) -> bool:
    """Whether ``p`` is left unchanged by the update of every agent subset."""
    _check_inputs(net, fam, p)
    return all(update_bits(net, fam, p.bits, group) == p.bits for group in range(1 << net.n))


def unstable_subset(net: Network, fam: FunctionFamily, p: BeliefProfile) -> frozenset[AgentId] | None:
    """Smallest group (canonical order within a size) whose update moves ``p``; None if none does."""
    _check_inputs(net, fam, p)
    for size in range(1, net.n + 1):
        for combo in itertools.combinations(range(net.n), size):
            mask = sum(1 << i for i in combo)
            if update_bits(net, fam, p.bits, mask) != p.bits:
                return net.group_from_mask(mask)
    return None


# --------------------------------------------------------------------------
# runs


def run_synchronous(
    net: Network, fam: FunctionFamily, p0: BeliefProfile, max_steps: int | None = None
) -> Trace:
    _check_inputs(net, fam, p0)
    if max_steps is None:
        max_steps = default_max_steps(net.n)
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    everyone = frozenset(net.agents)
    steps: list[Step] = []
    seen = {p0.bits: 0}
    bits = p0.bits
    t = 0
    while True:
        nxt = image_bits(net, fam, bits)
        if nxt == bits:
            outcome = Outcome("converged", at_step=t)
            break
        if t == max_steps:
            outcome = Outcome("step_limit_reached")
            break
        t += 1
        steps.append(Step(t, everyone, BeliefProfile(net, nxt)))
        if nxt in seen:
            first = seen[nxt]
            outcome = Outcome("cycled", preperiod=first, period=t - first)
            break
        seen[nxt] = t
        bits = nxt
    return Trace(net, fam, p0, steps, outcome, mode="sync", meta={"max_steps": max_steps})


def run_scheduled(net: Network, fam: FunctionFamily, p0: BeliefProfile, schedule) -> Trace:
    """Apply the schedule's groups in order, stopping at the first equilibrium."""
    _check_inputs(net, fam, p0)
    if not isinstance(schedule, Schedule):
        schedule = Schedule.of(net, schedule)
    else:
        Schedule.of(net, schedule.groups)
    steps: list[Step] = []
    bits = p0.bits
    outcome = Outcome("step_limit_reached")
    if image_bits(net, fam, bits) == bits:
        outcome = Outcome("converged", at_step=0)
    else:
        for t, group in enumerate(schedule.groups, start=1):
            bits = update_bits(net, fam, bits, net.group_mask(group))
            steps.append(Step(t, group, BeliefProfile(net, bits)))
            if image_bits(net, fam, bits) == bits:
                outcome = Outcome("converged", at_step=t)
                break
    return Trace(net, fam, p0, steps, outcome, mode="scheduled", meta={"schedule_length": len(schedule)})


def run_random(
    net: Network,
    fam: FunctionFamily,
    p0: BeliefProfile,
    probs: float | Mapping[AgentId, float] | Sequence[float] = 0.5,
    seed: int = 0,
    max_steps: int | None = None,
) -> Trace:
    """Random-asynchronous evolution.

    Each step draws ``rng.random(n)`` from ``numpy.random.default_rng(seed)``
    and activates agent ``i`` iff its draw is below ``probs[i]``. The
    activation stream therefore depends only on ``seed`` and ``n``, which
    :func:`random_convergence_steps` relies on.
    """
    _check_inputs(net, fam, p0)
    values = resolve_probs(net, probs)
    if max_steps is None:
        max_steps = default_max_steps(net.n)
    if not all(0.0 < p < 1.0 for p in values):
        logger.warning("activation probabilities include 0 or 1: not every group can be drawn, convergence is not guaranteed")
    rng = np.random.default_rng(seed)
    thresholds = np.array(values)
    weights = [1 << i for i in range(net.n)]
    steps: list[Step] = []
    bits = p0.bits
    outcome = Outcome("step_limit_reached")
    t = 0
    while True:
        if image_bits(net, fam, bits) == bits:
            outcome = Outcome("converged", at_step=t)
            break
        if t == max_steps:
            break
        t += 1
        active = rng.random(net.n) < thresholds
        mask = sum(w for w, on in zip(weights, active) if on)
        bits = update_bits(net, fam, bits, mask)
        steps.append(Step(t, net.group_from_mask(mask), BeliefProfile(net, bits)))
    return Trace(
        net,
        fam,
        p0,
        steps,
        outcome,
        mode="random",
        meta={"seed": seed, "probs": list(values), "max_steps": max_steps},
    )


def activation_masks(n: int, probs: Sequence[float], seeds: Sequence[int], max_steps: int) -> np.ndarray:
    """Group bitmasks that :func:`run_random` would draw, shape ``(len(seeds), max_steps)``."""
    thresholds = np.asarray(probs, dtype=float)
    weights = np.left_shift(1, np.arange(n, dtype=np.int64))
    out = np.empty((len(seeds), max_steps), dtype=np.int64)
    for k, seed in enumerate(seeds):
        draws = np.random.default_rng(seed).random((max_steps, n)) < thresholds
        out[k] = draws.astype(np.int64) @ weights
    return out


def random_convergence_steps(
    net: Network,
    fam: FunctionFamily,
    starts: Sequence[BeliefProfile] | None,
    seeds: Sequence[int],
    probs: float | Sequence[float] = 0.5,
    max_steps: int | None = None,
    masks: np.ndarray | None = None,
) -> np.ndarray:
    """Batch form of :func:`run_random` over starts x seeds.

    Returns an int array ``(len(starts), len(seeds))`` holding the step at
    which each run converged, or -1 if it hit ``max_steps``. Each cell is
    the run ``run_random(net, fam, start, probs, seed, max_steps)`` would
    perform; ``masks`` may be passed in to reuse one draw per seed across
    networks of the same size.
    """
    fam.check(net)
    values = resolve_probs(net, probs)
    if max_steps is None:
        max_steps = default_max_steps(net.n)
    if masks is None:
        masks = activation_masks(net.n, values, seeds, max_steps)
    table = np.array(sync_map(net, fam), dtype=np.int64)
    disagree = table ^ np.arange(len(table), dtype=np.int64)
    if starts is None:
        state = np.arange(len(table), dtype=np.int64)
    else:
        state = np.array([p.bits for p in starts], dtype=np.int64)
    state = np.repeat(state[:, None], len(seeds), axis=1)
    result = np.full(state.shape, -1, dtype=np.int64)
    for t in range(max_steps + 1):
        d = disagree[state]
        hit = (d == 0) & (result < 0)
        result[hit] = t
        if t == max_steps or (result >= 0).all():
            break
        state = state ^ (d & masks[None, :, t])
    return result


# --------------------------------------------------------------------------
# trace verification and serialization


def verify_trace(trace: Trace) -> list[str]:
    """Replay every step through apply_group; return a list of inconsistencies."""
    net, fam = trace.network, trace.family
    problems = []
    prev = trace.initial
    for k, step in enumerate(trace.steps, start=1):
        if step.index != k:
            problems.append(f"step {k}: recorded index {step.index}")
        if not step.group <= set(net.agents):
            problems.append(f"step {k}: group has unknown agents")
            break
        expected = update_bits(net, fam, prev.bits, net.group_mask(step.group))
        if expected != step.profile.bits:
            problems.append(f"step {k}: recorded {step.profile}, replay gives {BeliefProfile(net, expected)}")
        if trace.mode == "sync" and step.group != frozenset(net.agents):
            problems.append(f"step {k}: synchronous step must update every agent")
        prev = step.profile
    out = trace.outcome
    profiles = trace.profiles()
    if out.kind == "converged":
        if out.at_step != len(trace.steps):
            problems.append(f"converged at {out.at_step} but trace has {len(trace.steps)} steps")
        if image_bits(net, fam, trace.final.bits) != trace.final.bits:
            problems.append("converged outcome but final profile is not an equilibrium")
    elif out.kind == "cycled":
        end = out.preperiod + out.period
        if end >= len(profiles) or profiles[out.preperiod] != profiles[end]:
            problems.append("cycled outcome does not match the recorded profiles")
    elif out.kind != "step_limit_reached":
        problems.append(f"unknown outcome {out.kind!r}")
    return problems


def _group_list(group: Iterable[AgentId]) -> list[AgentId]:
    return sorted(group)


def trace_records(trace: Trace, config: Mapping | None = None) -> list[dict]:
    net = trace.network
    header = {
        "record": "header",
        "mode": trace.mode,
        "network": {"agents": list(net.agents), "ties": [list(t) for t in sorted(net.ties)]},
        "functions": {a: f.selector for a, f in zip(net.agents, trace.family.functions)},
        "initial": str(trace.initial),
    }
    header.update(trace.meta)
    if config is not None:
        header["config"] = dict(config)
    records = [header]
    for step in trace.steps:
        records.append(
            {"record": "step", "step": step.index, "group": _group_list(step.group), "profile": str(step.profile)}
        )
    final = trace.final
    records.append(
        {
            "record": "outcome",
            **trace.outcome.as_dict(),
            "final": str(final),
            "consensus": final.bits in (0, net.full_mask),
        }
    )
    return records


def format_trace(trace: Trace, config: Mapping | None = None) -> str:
    return "".join(json.dumps(r) + "\n" for r in trace_records(trace, config))


def parse_trace(text: str, source: str = "<string>") -> Trace:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append((lineno, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"invalid JSON record: {exc.msg}", source, lineno) from None
    if not records or records[0][1].get("record") != "header":
        raise InputFormatError("trace must start with a header record", source, 1)
    header = records[0][1]
    try:
        net = Network(header["network"]["agents"], (tuple(t) for t in header["network"]["ties"]), warn=False)
        fam = FunctionFamily(net, {a: parse_function(s) for a, s in header["functions"].items()})
        initial = BeliefProfile.from_bitstring(net, header["initial"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"bad header record: {exc}", source, records[0][0]) from None
    steps = []
    outcome = None
    for lineno, rec in records[1:]:
        kind = rec.get("record")
        try:
            if kind == "step":
                steps.append(
                    Step(rec["step"], frozenset(rec["group"]), BeliefProfile.from_bitstring(net, rec["profile"]))
                )
            elif kind == "outcome":
                outcome = Outcome(
                    rec["kind"], rec.get("at_step"), rec.get("preperiod"), rec.get("period")
                )
            else:
                raise InputFormatError(f"unknown record type {kind!r}", source, lineno)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputFormatError):
                raise
            raise InputFormatError(f"bad {kind} record: {exc}", source, lineno) from None
    if outcome is None:
        raise InputFormatError("trace has no outcome record", source)
    meta = {k: v for k, v in header.items() if k not in ("record", "mode", "network", "functions", "initial")}
    return Trace(net, fam, initial, steps, outcome, mode=header.get("mode", "scheduled"), meta=meta)
