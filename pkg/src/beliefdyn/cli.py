"""Command-line entry point.

Every command prints a ``# config: {...}`` header holding the fully
resolved configuration, so any output can be regenerated from its own
first line (``beliefdyn rerun``). Exit status: 0 success, 1 verification
failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .analysis import (
    build_transition_graph,
    condensation_dot,
    condense,
    construct_converging_sequence,
    enumerate_equilibria,
    leaves_are_equilibria,
    reachable_equilibria,
    transition_graph_dot,
)
from .axioms import check_axioms, parse_axioms
from .dynamics import (
    default_max_steps,
    format_trace,
    load_schedule,
    parse_probs,
    parse_trace,
    run_random,
    run_scheduled,
    run_synchronous,
    verify_trace,
)
from .errors import BeliefDynError, InputFormatError
from .evolution import FunctionFamily, load_family, parse_function
from .network import Network, builtin_network, load_network, parse_profile

logger = logging.getLogger("beliefdyn")

WORKERS_ENV = "BELIEFDYN_WORKERS"
EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(BeliefDynError):
    pass


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one invocation."""

    command: str
    network: str | None = None
    function: str = "majority"
    function_file: str | None = None
    mode: str = "sync"
    initial: str | None = None
    schedule: str | None = None
    prob: float | None = None
    probs: str | None = None
    seed: int = 0
    max_steps: int | None = None
    trace: str | None = None
    expect_convergence: bool = False
    axioms: str = "all"
    equilibria: bool = False
    transition_graph: str | None = None
    condensation: str | None = None
    reachable_from: str | None = None
    construct_sequence: str | None = None
    decreasing_first: bool = False
    axis: str | None = None
    seeds: str | None = None
    initials: str | None = None
    network_dir: str | None = None
    trace_file: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InputFormatError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> ExperimentConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in vars(args).items() if k in names})


# --------------------------------------------------------------------------
# input resolution


def resolve_network(where: str | None) -> Network:
    if not where:
        raise UsageError("--network is required")
    if where.startswith("builtin:"):
        return builtin_network(where[len("builtin:"):])
    return load_network(where)


def resolve_family(cfg: ExperimentConfig, net: Network) -> FunctionFamily:
    if cfg.function_file:
        return load_family(net, cfg.function_file)
    return FunctionFamily.uniform(net, parse_function(cfg.function))


def resolve_probs(cfg: ExperimentConfig, net: Network):
    if cfg.probs:
        path = Path(cfg.probs)
        try:
            text = path.read_text()
        except OSError as exc:
            raise InputFormatError(f"cannot read probabilities file: {exc.strerror}", str(path)) from None
        return parse_probs(net, text, str(path))
    return 0.5 if cfg.prob is None else cfg.prob


def _bool(value: bool) -> str:
    return "yes" if value else "no"


def _emit(out, line: str = "") -> None:
    out.write(line + "\n")


def _header(out, cfg: ExperimentConfig) -> None:
    _emit(out, "# config: " + cfg.to_json())


# --------------------------------------------------------------------------
# commands


def _run_one(cfg: ExperimentConfig, net: Network, fam: FunctionFamily, initial: str):
    p0 = parse_profile(net, initial, "--initial")
    if cfg.mode == "sync":
        return run_synchronous(net, fam, p0, cfg.max_steps)
    if cfg.mode == "scheduled":
        if not cfg.schedule:
            raise UsageError("--mode scheduled requires --schedule")
        return run_scheduled(net, fam, p0, load_schedule(net, cfg.schedule))
    if cfg.mode == "random":
        return run_random(net, fam, p0, resolve_probs(cfg, net), cfg.seed, cfg.max_steps)
    raise UsageError(f"unknown mode {cfg.mode!r}")


def cmd_simulate(cfg: ExperimentConfig, out) -> int:
    net = resolve_network(cfg.network)
    fam = resolve_family(cfg, net)
    if cfg.initial is None:
        raise UsageError("--initial is required")
    if cfg.max_steps is None:
        cfg.max_steps = default_max_steps(net.n)
    trace = _run_one(cfg, net, fam, cfg.initial)
    _header(out, cfg)
    _emit(out, f"mode: {cfg.mode}")
    _emit(out, f"initial: {trace.initial}")
    _emit(out, f"outcome: {trace.outcome.describe()}")
    _emit(out, f"steps: {len(trace.steps)}")
    _emit(out, f"final: {trace.final}")
    _emit(out, f"consensus: {_bool(trace.final.bits in (0, net.full_mask))}")
    if cfg.trace:
        Path(cfg.trace).write_text(format_trace(trace, cfg.to_dict()))
        _emit(out, f"trace: {cfg.trace}")
    if cfg.expect_convergence and not trace.converged:
        return EXIT_FAILED
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, out) -> int:
    net = resolve_network(cfg.network)
    fam = resolve_family(cfg, net)
    try:
        axioms = parse_axioms(cfg.axioms)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    reports = check_axioms(net, fam, axioms)
    _header(out, cfg)
    _emit(out, f"{'axiom':<12} {'holds':<6} witness")
    for r in reports:
        witness = r.witness.describe() if r.witness else "-"
        _emit(out, f"{r.axiom:<12} {_bool(r.holds):<6} {witness}")
    return EXIT_OK if all(r.holds for r in reports) else EXIT_FAILED


def _write_sequence(out, net, fam, bits: str, decreasing_first: bool):
    p0 = parse_profile(net, bits, "--construct-sequence")
    seq = construct_converging_sequence(net, fam, p0, decreasing_first=decreasing_first)
    groups = " ".join("{" + ",".join(sorted(g)) + "}" for g in seq.schedule) or "(empty)"
    _emit(out, f"construct-sequence {p0}: schedule {groups}")
    _emit(out, f"  phases: increasing={seq.phase_lengths[0]} decreasing={seq.phase_lengths[1]}"
          if not decreasing_first else
          f"  phases: decreasing={seq.phase_lengths[0]} increasing={seq.phase_lengths[1]}")
    _emit(out, f"  final: {seq.profile} equilibrium: {_bool(seq.verified)} "
               f"consensus: {_bool(seq.profile.bits in (0, net.full_mask))}")
    return seq


def cmd_analyze(cfg: ExperimentConfig, out) -> int:
    net = resolve_network(cfg.network)
    fam = resolve_family(cfg, net)
    _header(out, cfg)
    _emit(out, f"agents: {net.n} profiles: {2 ** net.n}")
    if cfg.equilibria:
        eqs = enumerate_equilibria(net, fam)
        _emit(out, f"equilibria: {len(eqs)}")
        for p in eqs:
            _emit(out, f"  {p}{' consensus' if p.bits in (0, net.full_mask) else ''}")
    needs_graph = cfg.transition_graph or cfg.condensation or cfg.reachable_from
    tg = build_transition_graph(net, fam) if needs_graph else None
    if cfg.transition_graph:
        Path(cfg.transition_graph).write_text(transition_graph_dot(tg))
        n_edges = sum(len(s) for s in tg.successors)
        _emit(out, f"transition-graph: {cfg.transition_graph} ({tg.n_nodes} nodes, {n_edges} edges)")
    if cfg.condensation:
        cond = condense(tg)
        Path(cfg.condensation).write_text(condensation_dot(cond, tg))
        _emit(out, f"condensation: {cfg.condensation} ({len(cond.components)} components, {len(cond.leaves)} leaves)")
        _emit(out, f"leaves-are-equilibria: {_bool(leaves_are_equilibria(net, fam, tg))}")
    if cfg.reachable_from:
        p0 = parse_profile(net, cfg.reachable_from, "--reachable-from")
        found = reachable_equilibria(net, fam, p0, tg)
        _emit(out, f"reachable-from {p0}: {' '.join(str(p) for p in found)}")
    if cfg.construct_sequence:
        _write_sequence(out, net, fam, cfg.construct_sequence, cfg.decreasing_first)
    return EXIT_OK


def cmd_construct_sequence(cfg: ExperimentConfig, out) -> int:
    net = resolve_network(cfg.network)
    fam = resolve_family(cfg, net)
    if cfg.initial is None:
        raise UsageError("--initial is required")
    _header(out, cfg)
    seq = _write_sequence(out, net, fam, cfg.initial, cfg.decreasing_first)
    if cfg.trace:
        Path(cfg.trace).write_text(format_trace(seq.trace, cfg.to_dict()))
        _emit(out, f"trace: {cfg.trace}")
    return EXIT_OK if seq.verified or not cfg.expect_convergence else EXIT_FAILED


def cmd_replay(cfg: ExperimentConfig, out) -> int:
    path = Path(cfg.trace_file)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputFormatError(f"cannot read trace: {exc.strerror}", str(path)) from None
    trace = parse_trace(text, str(path))
    problems = verify_trace(trace)
    _header(out, cfg)
    for problem in problems:
        _emit(out, f"inconsistency: {problem}")
    _emit(out, f"replayed {len(trace.steps)} steps: {'ok' if not problems else f'{len(problems)} inconsistencies'}")
    return EXIT_OK if not problems else EXIT_FAILED


# --------------------------------------------------------------------------
# sweeps


def parse_seed_range(text: str) -> list[int]:
    """``A:B`` (half-open range) or a comma-separated list."""
    text = text.strip()
    if not text:
        return []
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            return list(range(int(lo), int(hi)))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad --seeds {text!r}; expected A:B or a comma-separated list") from None


def _sweep_cells(cfg: ExperimentConfig):
    """Yield (label, cell config) pairs in deterministic order."""
    if cfg.axis == "seeds":
        for seed in parse_seed_range(cfg.seeds or ""):
            yield f"seed={seed}", dataclasses.replace(cfg, seed=seed)
    elif cfg.axis == "initials":
        if cfg.initials in (None, "all"):
            net = resolve_network(cfg.network)
            initials = [str(p) for p in net.profiles()]
        else:
            initials = [s.strip() for s in cfg.initials.split(",") if s.strip()]
        for bits in initials:
            yield f"initial={bits}", dataclasses.replace(cfg, initial=bits)
    elif cfg.axis == "networks":
        if not cfg.network_dir:
            raise UsageError("--axis networks requires --network-dir")
        directory = Path(cfg.network_dir)
        if not directory.is_dir():
            raise InputFormatError("not a directory", str(directory))
        for path in sorted(directory.glob("*.net")):
            yield f"network={path.name}", dataclasses.replace(cfg, network=str(path))
    else:
        raise UsageError("--axis must be one of seeds, initials, networks")


def _sweep_cell(cell: ExperimentConfig) -> tuple[str, ...]:
    try:
        net = resolve_network(cell.network)
        fam = resolve_family(cell, net)
        if cell.initial is None:
            raise UsageError("--initial is required")
        trace = _run_one(cell, net, fam, cell.initial)
    except BeliefDynError as exc:
        return ("error", str(exc))
    final = trace.final
    return (
        trace.outcome.kind,
        str(len(trace.steps)),
        str(final),
        _bool(final.bits in (0, final.network.full_mask)),
    )


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def cmd_sweep(cfg: ExperimentConfig, out) -> int:
    if cfg.axis == "seeds" and cfg.mode != "random":
        raise UsageError("a seed sweep needs --mode random")
    if cfg.max_steps is None and cfg.network and cfg.axis != "networks":
        cfg.max_steps = default_max_steps(resolve_network(cfg.network).n)
    cells = list(_sweep_cells(cfg))
    workers = _workers()
    configs = [c for _, c in cells]
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, configs, chunksize=max(1, len(configs) // (4 * workers))))
    else:
        rows = [_sweep_cell(c) for c in configs]
    _header(out, cfg)
    _emit(out, "cell\toutcome\tsteps\tfinal\tconsensus")
    converged = errors = 0
    for (label, _), row in zip(cells, rows):
        if row[0] == "error":
            errors += 1
            _emit(out, f"{label}\terror\t-\t-\t-\t{row[1]}")
            continue
        converged += row[0] == "converged"
        _emit(out, label + "\t" + "\t".join(row))
    total = len(cells)
    rate = f"{100.0 * converged / total:.1f}%" if total else "n/a"
    _emit(out, f"# converged {converged}/{total} ({rate}), errors {errors}")
    if cfg.expect_convergence and converged < total:
        return EXIT_FAILED
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "analyze": cmd_analyze,
    "construct-sequence": cmd_construct_sequence,
    "sweep": cmd_sweep,
    "replay": cmd_replay,
}


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--network", help="network file, or builtin:<family>:<args> (e.g. builtin:path:3)")
    p.add_argument("--function", default="majority", help="majority | stubborn | flipper | threshold:<k>")
    p.add_argument("--function-file", help="per-agent assignment file with lines '<agent>: <function>'")


def _run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--initial", help="initial profile as a bitstring in canonical agent order")
    p.add_argument("--mode", choices=("sync", "scheduled", "random"), default="sync")
    p.add_argument("--schedule", help="schedule file: one comma-separated group per line")
    p.add_argument("--prob", type=float, help="activation probability for every agent (random mode, default 0.5)")
    p.add_argument("--probs", help="per-agent activation probabilities file, lines '<agent>: <p>'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, help="default max(1000, 4*2^n), capped at 10^6")
    p.add_argument("--expect-convergence", action="store_true", help="exit 1 if a run does not converge")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="beliefdyn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"beliefdyn {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run one belief evolution")
    _common(p)
    _run_options(p)
    p.add_argument("--trace", help="write a JSON-lines trace to this path")

    p = sub.add_parser("verify", help="check the rationality axioms exhaustively")
    _common(p)
    p.add_argument("--axioms", default="all", help="all, or a comma list of " "bounded,neutral,congruent,local,monotonic,non_slavish")

    p = sub.add_parser("analyze", help="equilibria, transition graph, condensation")
    _common(p)
    p.add_argument("--equilibria", action="store_true")
    p.add_argument("--transition-graph", metavar="OUT.dot")
    p.add_argument("--condensation", metavar="OUT.dot")
    p.add_argument("--reachable-from", metavar="BITS")
    p.add_argument("--construct-sequence", metavar="BITS")
    p.add_argument("--decreasing-first", action="store_true")

    p = sub.add_parser("construct-sequence", help="build a converging schedule from a profile")
    _common(p)
    p.add_argument("--initial", required=True)
    p.add_argument("--decreasing-first", action="store_true")
    p.add_argument("--trace")
    p.add_argument("--expect-convergence", action="store_true")

    p = sub.add_parser("sweep", help="batch of independent runs")
    _common(p)
    _run_options(p)
    p.add_argument("--axis", choices=("seeds", "initials", "networks"), required=True)
    p.add_argument("--seeds", help="A:B half-open range or comma list (axis seeds)")
    p.add_argument("--initials", help="'all' or comma list of bitstrings (axis initials)")
    p.add_argument("--network-dir", help="directory of *.net files (axis networks)")

    p = sub.add_parser("replay", help="re-derive every step of a trace file")
    p.add_argument("trace_file")

    p = sub.add_parser("rerun", help="rerun from a config JSON (e.g. a '# config:' header)")
    p.add_argument("config_file")
    return parser


def load_config(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputFormatError(f"cannot read config: {exc.strerror}", path) from None
    text = text.strip()
    if text.startswith("# config:"):
        text = text.splitlines()[0][len("# config:"):]
    try:
        return ExperimentConfig.from_dict(json.loads(text))
    except (json.JSONDecodeError, TypeError) as exc:
        raise InputFormatError(f"bad config: {exc}", path) from None


def run_config(cfg: ExperimentConfig, out=None) -> int:
    out = sys.stdout if out is None else out
    command = COMMANDS.get(cfg.command)
    if command is None:
        raise UsageError(f"unknown command {cfg.command!r}")
    return command(cfg, out)


def main(argv=None, out=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s: %(message)s")
    try:
        if args.command == "rerun":
            cfg = load_config(args.config_file)
        else:
            cfg = ExperimentConfig.from_args(args)
        return run_config(cfg, out)
    except (BeliefDynError, ValueError) as exc:
        print(f"beliefdyn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
