import json
import subprocess
import sys

import pytest

from helpers import DATA
from waitonly.cli import parse_transition, run
from waitonly.protocol import recv, send

SAMPLE = str(DATA / "sample.bp")
TRACE = str(DATA / "sample_trace.json")


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip() else None), out.err


def test_synchro_example(capsys):
    code, out, err = call(capsys, "synchro", "--protocol", SAMPLE, "--target", "q3",
                          "--counter-cap", "8")
    assert out["answer"] in ("no", "unknown") and out["target"] == "q3"
    assert code == {"no": 1, "unknown": 2}[out["answer"]]
    assert "q3" in err


def test_replay_example(capsys):
    code, out, _ = call(capsys, "replay", "--protocol", SAMPLE, "--trace", TRACE)
    assert code == 0 and out["valid"] and out["steps"] == 5


def test_bound_example(capsys):
    code, out, _ = call(capsys, "bound", "--counters", "0", "--locations", "0")
    assert code == 0
    assert out["bound"] == str(153 * 9 ** 3645)
    assert out["format"] == 1


def test_synchro_yes_and_closed_loop(capsys, tmp_path):
    code, out, _ = call(capsys, "synchro", "--protocol", SAMPLE, "--target", "q4")
    assert code == 0 and out["answer"] == "yes"
    path = tmp_path / "verdict.json"
    path.write_text(json.dumps(out))
    code, rep, _ = call(capsys, "replay", "--protocol", SAMPLE, "--trace", str(path))
    assert code == 0 and rep["valid"]


def test_repcover_closed_loop(capsys, tmp_path):
    code, out, _ = call(capsys, "repcover", "--protocol", SAMPLE, "--transition", "q_in !!b q7")
    assert code == 0
    path = tmp_path / "lasso.json"
    path.write_text(json.dumps(out))
    code, rep, _ = call(capsys, "replay", "--protocol", SAMPLE, "--trace", str(path),
                        "--transition", "q_in !!b q7")
    assert code == 0 and rep["valid"]
    code, rep, _ = call(capsys, "replay", "--protocol", SAMPLE, "--trace", str(path),
                        "--transition", "q_in !!d q1")
    assert code == 1 and not rep["valid"]


def test_repcover_no(capsys):
    code, out, _ = call(capsys, "repcover", "--protocol", SAMPLE, "--transition", "q_in !!d q1")
    assert code == 1 and out["answer"] == "no"


def test_several_targets_combine(capsys):
    code, out, _ = call(capsys, "synchro-explicit", "--protocol", SAMPLE, "--target", "q1", "q7",
                        "--max-processes", "2")
    assert code == 0 and [r["answer"] for r in out["results"]] == ["yes", "yes"]
    code, out, _ = call(capsys, "synchro-explicit", "--protocol", SAMPLE, "--target", "q1", "q2",
                        "--max-processes", "2")
    assert code == 2
    assert out["results"][1]["detail"] == "no-within-bounds"


def test_jobs(capsys):
    code, out, _ = call(capsys, "repcover-explicit", "--protocol", SAMPLE, "--transition",
                        "q_in !!a q_in", "q_in !!c q_in", "--jobs", "2", "--max-processes", "2")
    assert code == 0 and len(out["results"]) == 2


def test_repcover_swo_rejects_sample(capsys):
    code, _, err = call(capsys, "repcover-swo", "--protocol", SAMPLE, "--transition", "q_in !!a q_in")
    assert code == 3 and "Single-Wait-Only" in err


def test_check(capsys):
    code, out, _ = call(capsys, "check", "--protocol", SAMPLE)
    assert code == 0 and out["wait_only"] and not out["single_wait_only"]
    assert out["action"] == ["q3", "q4", "q_in"]


def test_build_vass(capsys):
    code, out, _ = call(capsys, "build-vass", "--protocol", SAMPLE, "--target", "q7",
                        "--limit", "20")
    assert code == 0 and out["locations"] == 20 and not out["complete"]
    assert out["vass"].startswith("format 1\n")
    code, _, _ = call(capsys, "build-vass", "--protocol", SAMPLE, "--variant", "smiley")
    assert code == 3


@pytest.mark.parametrize("kind", ["dfa-repcover", "dfa-swo", "vass"])
def test_generate_is_deterministic(capsys, kind, tmp_path):
    extra = ["--final", "l0"] if kind == "vass" else []
    outs = []
    for _ in range(2):
        code, out, _ = call(capsys, "generate", kind, "--seed", "5",
                            "--output", str(tmp_path / "p.bp"), *extra)
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]
    assert (tmp_path / "p.bp").read_text() == outs[0]["protocol"]
    code, _, _ = call(capsys, "check", "--protocol", str(tmp_path / "p.bp"))
    assert code in (0, 1)


def test_generate_minsky(capsys, tmp_path):
    m = tmp_path / "m.txt"
    m.write_text("machine m\ninit s\nfinal f\ntrans s inc x1 a\ntrans a dec x1 f\n")
    code, out, _ = call(capsys, "generate", "minsky", "--input", str(m))
    assert code == 0 and out["target"] == "M_f"


@pytest.mark.parametrize("argv", [
    ["synchro", "--protocol", "/nonexistent.bp", "--target", "q1"],
    ["synchro", "--protocol", SAMPLE, "--target", "nope"],
    ["synchro", "--protocol", SAMPLE, "--target", "q1", "--n-max", "0"],
    ["repcover", "--protocol", SAMPLE, "--transition", "q_in -> q1"],
    ["bound", "--counters", "-1", "--locations", "0"],
    ["generate", "minsky"],
    [],
])
def test_usage_errors(capsys, argv):
    assert run(argv) == 3


def test_parse_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.bp"
    bad.write_text("protocol p\ninit a\ntrans a !m b\n")
    code, _, err = call(capsys, "check", "--protocol", str(bad))
    assert code == 3 and "3" in err


def test_replay_rejects_broken_trace(capsys, tmp_path):
    data = json.loads((DATA / "sample_trace.json").read_text())
    data["steps"][0]["sender"] = 9
    path = tmp_path / "t.json"
    path.write_text(json.dumps(data))
    code, out, _ = call(capsys, "replay", "--protocol", SAMPLE, "--trace", str(path))
    assert code == 1 and not out["valid"]


def test_parse_transition():
    assert parse_transition("q_in !!a q_in") == send("q_in", "a", "q_in")
    assert parse_transition("(q7, ?b, q_in)") == recv("q7", "b", "q_in")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "waitonly.cli", "bound", "--counters", "0",
                          "--locations", "0"], capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["bound"].startswith("25040")
