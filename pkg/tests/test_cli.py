import io
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from qunity import cli
from qunity.corpus import ENTRIES


def run(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture
def source(tmp_path):
    def write(text, name="prog.qunity"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def test_check_pure_judgment():
    code, out = run("check", "deutsch", "--entry", "deutsch(ident)")
    assert code == 0
    assert out.strip() == "⊢ deutsch(ident) : Bit (pure expression)"


def test_check_mixed_judgment():
    code, out = run("check", "coin")
    assert (code, out.strip()) == (0, "∅ ⊩ coin : Bit (mixed expression)")


def test_check_program_judgment():
    code, out = run("check", "match", "--entry", "flip")
    assert out.strip() == "⊢ flip : Bit ~> Bit (pure program)"


def test_check_show_derivation():
    code, out = run("check", "coin", "--show-derivation")
    lines = out.splitlines()
    assert code == 0 and len(lines) > 2 and lines[1].startswith("T")


def test_ill_typed_file_names_rule(source, capsys):
    code, _ = run("check", source("main := (0, 1) |> had\n"))
    assert code == 1
    assert "[T-" in capsys.readouterr().err


def test_parse_error_is_user_error(source, capsys):
    code, _ = run("check", source("main := (0, \n"))
    assert code == 1 and "error" in capsys.readouterr().err


def test_missing_file(capsys):
    assert run("check", "/nonexistent/file.qunity")[0] == 1


def test_simulate_coin_density():
    code, out = run("simulate", "coin")
    data = json.loads(out)
    m = np.array([complex(*z) for z in data["data"]]).reshape(data["rows"], data["cols"])
    assert code == 0 and np.allclose(m, np.eye(2) / 2)


def test_simulate_deutsch_identity_mixed():
    code, out = run("simulate", "deutsch", "--entry", "deutsch(ident)", "--mixed")
    data = json.loads(out)
    assert data["data"] == [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]


def test_simulate_hadamard_with_input():
    code, out = run("simulate", "deutsch", "--entry", "had", "--input", "0")
    assert code == 0
    assert out.splitlines() == ["0: +0.707107+0.000000j", "1: +0.707107+0.000000j"]


def test_simulate_pure_rejects_mixed_terms():
    assert run("simulate", "coin", "--pure")[0] == 1


def test_simulate_dump(tmp_path):
    path = tmp_path / "m.json"
    code, out = run("simulate", "match", "--entry", "flip", "--dump", str(path))
    assert json.loads(path.read_text()) == json.loads(out)


def test_compile_coin_qasm(tmp_path):
    path = tmp_path / "coin.qasm"
    code, out = run("compile", "coin", "--qasm3", str(path))
    stats = json.loads(out.splitlines()[1])
    assert code == 0
    assert (stats["totalQubits"], stats["n_prep"], stats["n_flag"], stats["n_garb"]) == (2, 2, 0, 1)
    text = path.read_text()
    assert "qubit[2] q;" in text and "h q[0];" in text and "cx q[0], q[1];" in text


def test_compile_json(tmp_path):
    path = tmp_path / "c.json"
    run("compile", "coin", "--json", str(path))
    assert json.loads(path.read_text())["totalQubits"] == 2


def test_verify_corpus_all_pass():
    code, out = run("verify", "--corpus")
    lines = out.splitlines()
    assert code == 0 and len(lines) == len(ENTRIES)
    assert all(ln.startswith("PASS ") for ln in lines)


def test_verify_corrupted_gate_fails():
    code, out = run("verify", "dsum", "--corrupt", "0")
    assert code == 2
    assert out.startswith("FAIL ") and "max deviation" in out


def test_classical_undefined(source):
    path = source("def f := lambda 0 : Bit -> 1\nmain := f\n")
    assert run("classical", path, "--input", "1")[1].strip() == "undefined"
    assert run("classical", path, "--input", "0")[1].strip() == "1"


def test_classical_fallback():
    code, out = run("classical", "classical", "--entry", "fallback")
    assert (code, out.strip()) == (0, "0")


def test_classical_pair_program():
    code, out = run("classical", "classical", "--entry", "swap", "--input", "(0, 1)")
    assert out.strip() == "(1, 0)"


def test_classical_rejects_quantum_terms():
    assert run("classical", "deutsch")[0] == 1


def test_bad_input_value():
    assert run("classical", "classical", "--entry", "swap", "--input", "0")[0] == 1


def test_internal_error_exit_code(monkeypatch):
    def boom(d):
        raise cli.CompileError("invariant broken")
    monkeypatch.setattr(cli, "compile_derivation", boom)
    assert run("compile", "coin")[0] == 2


def test_output_is_reproducible():
    assert run("compile", "qft", "--entry", "qft(2)") == run("compile", "qft", "--entry", "qft(2)")


def test_report_file(tmp_path):
    path = tmp_path / "r.json"
    run("check", "coin", "--report", str(path))
    report = json.loads(path.read_text())
    assert report["command"] == "check" and report["source"] == "corpus:coin.qunity"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qunity.cli", "check", "coin"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "coin : Bit" in proc.stdout


def test_console_script():
    exe = shutil.which("qunity")
    if exe is None:
        pytest.skip("qunity script not on PATH")
    proc = subprocess.run([exe, "check", "coin"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
