import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from beliefdyn.cli import ExperimentConfig, main, parse_seed_range

DATA = Path(__file__).resolve().parent.parent / "data"
K22 = str(DATA / "k22.net")
STAR = str(DATA / "star3.net")
PATH3 = str(DATA / "path3.net")


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def field(text, key):
    for line in text.splitlines():
        if line.startswith(key + ":"):
            return line.split(":", 1)[1].strip()
    raise KeyError(key)


class TestSimulate:
    def test_star(self):
        code, text = run("simulate", "--network", STAR, "--initial", "0111", "--mode", "sync")
        assert code == 0
        assert field(text, "outcome") == "converged, at step 1"
        assert field(text, "final") == "1111"
        assert field(text, "consensus") == "yes"

    def test_k22_cycle(self):
        code, text = run("simulate", "--network", K22, "--initial", "1100", "--mode", "sync")
        assert code == 0
        assert field(text, "outcome") == "cycled, preperiod 0, period 2"

    def test_expect_convergence_fails_on_cycle(self):
        code, _ = run("simulate", "--network", K22, "--initial", "1100", "--expect-convergence")
        assert code == 1

    def test_scheduled(self, tmp_path):
        sched = tmp_path / "s.txt"
        sched.write_text("b1\nb2\n")
        code, text = run("simulate", "--network", K22, "--initial", "1100", "--mode", "scheduled", "--schedule", str(sched))
        assert code == 0 and field(text, "final") == "1111"

    def test_random_with_trace(self, tmp_path):
        trace = tmp_path / "t.jsonl"
        code, text = run(
            "simulate", "--network", K22, "--initial", "1100", "--mode", "random", "--seed", "7", "--trace", str(trace)
        )
        assert code == 0 and field(text, "outcome").startswith("converged")
        code, text = run("replay", str(trace))
        assert code == 0
        assert text.splitlines()[-1].endswith(": ok")

    def test_builtin_network(self):
        code, text = run("simulate", "--network", "builtin:complete-bipartite:2,2", "--initial", "1100")
        assert code == 0 and field(text, "outcome") == "cycled, preperiod 0, period 2"

    def test_wrong_length(self, capsys):
        code, _ = run("simulate", "--network", K22, "--initial", "110")
        assert code == 2
        assert "length 3" in capsys.readouterr().err

    def test_missing_network_file(self, capsys):
        code, _ = run("simulate", "--network", "/nonexistent.net", "--initial", "0")
        assert code == 2

    def test_scheduled_needs_schedule(self):
        assert run("simulate", "--network", K22, "--initial", "1100", "--mode", "scheduled")[0] == 2

    def test_bad_mode_is_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["simulate", "--network", K22, "--initial", "1100", "--mode", "chaotic"])
        assert info.value.code == 2

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
        assert "beliefdyn" in capsys.readouterr().out


class TestVerify:
    def test_majority_k22(self):
        code, text = run("verify", "--network", K22)
        assert code == 0
        rows = [line.split() for line in text.splitlines()[2:]]
        assert [r[0] for r in rows] == ["bounded", "neutral", "congruent", "local", "monotonic", "non_slavish"]
        assert all(r[1] == "yes" for r in rows)

    def test_flipper_fails(self):
        code, text = run("verify", "--network", K22, "--function", "flipper")
        assert code == 1
        assert "bounded      no" in text

    def test_axiom_subset(self):
        code, text = run("verify", "--network", PATH3, "--function", "stubborn", "--axioms", "non-slavish")
        assert code == 1 and len(text.splitlines()) == 3

    def test_unknown_axiom(self):
        assert run("verify", "--network", K22, "--axioms", "pretty")[0] == 2

    def test_function_file(self, tmp_path):
        fam = tmp_path / "fam.txt"
        fam.write_text("a: majority\nb: stubborn\nc: majority\n")
        assert run("verify", "--network", PATH3, "--function-file", str(fam))[0] in (0, 1)
        fam.write_text("a: majority\n")
        assert run("verify", "--network", PATH3, "--function-file", str(fam))[0] == 2


class TestAnalyze:
    def test_path_equilibria(self):
        code, text = run("analyze", "--network", PATH3, "--equilibria")
        assert code == 0
        assert "equilibria: 6" in text

    def test_graph_outputs(self, tmp_path):
        tg, cd = tmp_path / "tg.dot", tmp_path / "cd.dot"
        code, text = run(
            "analyze", "--network", K22, "--transition-graph", str(tg), "--condensation", str(cd),
            "--reachable-from", "1100", "--construct-sequence", "1100",
        )
        assert code == 0
        assert tg.read_text().startswith("digraph transitions")
        assert cd.read_text().startswith("digraph condensation")
        assert "leaves-are-equilibria: yes" in text
        reach = field(text, "reachable-from 1100").split()
        assert "0000" in reach and "1111" in reach
        assert "schedule {b1,b2}" in text

    def test_construct_sequence_command(self, tmp_path):
        trace = tmp_path / "c.jsonl"
        code, text = run("construct-sequence", "--network", K22, "--initial", "1100", "--trace", str(trace))
        assert code == 0 and "equilibrium: yes" in text
        assert run("replay", str(trace))[0] == 0

    def test_flipper_sequence_expectation(self):
        code, _ = run(
            "construct-sequence", "--network", PATH3, "--function", "flipper", "--initial", "010", "--expect-convergence"
        )
        assert code == 1


class TestSweep:
    def test_seed_range(self):
        assert parse_seed_range("0:3") == [0, 1, 2]
        assert parse_seed_range("4, 9") == [4, 9]
        assert parse_seed_range("") == []

    def test_k22_thousand_seeds(self):
        code, text = run(
            "sweep", "--network", K22, "--initial", "1100", "--mode", "random", "--axis", "seeds", "--seeds", "0:1000"
        )
        assert code == 0
        assert text.splitlines()[-1] == "# converged 1000/1000 (100.0%), errors 0"

    def test_path_initials(self):
        code, text = run("sweep", "--network", PATH3, "--axis", "initials", "--initials", "all")
        assert code == 0
        assert text.splitlines()[-1] == "# converged 8/8 (100.0%), errors 0"

    def test_empty_axis(self):
        code, text = run(
            "sweep", "--network", K22, "--initial", "1100", "--mode", "random", "--axis", "seeds", "--seeds", ""
        )
        assert code == 0
        assert text.splitlines()[-1] == "# converged 0/0 (n/a), errors 0"

    def test_network_dir_with_bad_cell(self, tmp_path):
        for name in ("k22", "star3"):
            (tmp_path / f"{name}.net").write_text((DATA / f"{name}.net").read_text())
        (tmp_path / "broken.net").write_text("agents: a,b\nedge: a\n")
        code, text = run("sweep", "--network-dir", str(tmp_path), "--axis", "networks", "--initial", "1111")
        assert code == 0
        lines = text.splitlines()
        assert lines[2].startswith("network=broken.net\terror")
        assert lines[-1] == "# converged 2/3 (66.7%), errors 1"

    def test_seed_sweep_needs_random(self):
        assert run("sweep", "--network", K22, "--initial", "1100", "--axis", "seeds", "--seeds", "0:3")[0] == 2

    def test_workers_do_not_change_output(self, monkeypatch):
        argv = ["sweep", "--network", K22, "--initial", "1100", "--mode", "random", "--axis", "seeds", "--seeds", "0:40"]
        serial = run(*argv)
        monkeypatch.setenv("BELIEFDYN_WORKERS", "2")
        assert run(*argv) == serial


class TestReproducibility:
    ARGV = ["simulate", "--network", K22, "--initial", "1100", "--mode", "random", "--seed", "3"]

    def test_header_is_full_config(self):
        _, text = run(*self.ARGV)
        header = text.splitlines()[0]
        assert header.startswith("# config: ")
        cfg = ExperimentConfig.from_dict(json.loads(header[len("# config: "):]))
        assert cfg.seed == 3 and cfg.max_steps == 1000 and cfg.prob is None

    def test_rerun_from_output(self, tmp_path):
        _, text = run(*self.ARGV)
        saved = tmp_path / "out.txt"
        saved.write_text(text)
        code, again = run("rerun", str(saved))
        assert code == 0 and again == text

    def test_rerun_bad_config(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run("rerun", str(bad))[0] == 2

    def test_byte_identical_subprocess(self, tmp_path):
        outputs = []
        for k in range(2):
            trace = tmp_path / f"t{k}.jsonl"
            proc = subprocess.run(
                [sys.executable, "-m", "beliefdyn", *self.ARGV, "--trace", str(trace)],
                capture_output=True,
                check=True,
            )
            outputs.append((proc.stdout.replace(str(trace).encode(), b"T"), trace.read_bytes().replace(str(trace).encode(), b"T")))
        assert outputs[0] == outputs[1]

    def test_tampered_trace(self, tmp_path):
        trace = tmp_path / "t.jsonl"
        run(*self.ARGV, "--trace", str(trace))
        lines = trace.read_text().splitlines()
        record = json.loads(lines[1])
        record["profile"] = "0000" if record["profile"] != "0000" else "1111"
        lines[1] = json.dumps(record)
        trace.write_text("\n".join(lines) + "\n")
        code, text = run("replay", str(trace))
        assert code == 1 and "inconsistency" in text

    def test_replay_missing_file(self):
        assert run("replay", "/no/such/trace")[0] == 2
