import json
import subprocess
import sys

import pytest

from paraprod.cli import run_cli


def run(capsys, *argv):
    code = run_cli(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestExitCodes:
    @pytest.mark.parametrize("argv", [[], ["bogus"], ["norm"], ["norm", "--f", "poly:1", "--weight", "w0:1"],
                                      ["norm", "--f", "poly:1", "--p", "-1"], ["verify", "nope"],
                                      ["kernel", "--a", "1.5"], ["verify", "identities", "--threads", "0"]])
    def test_argument_errors(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 2 and "error" in err

    def test_failed_gate(self, capsys, tmp_path):
        out = tmp_path / "lp.jsonl"
        code, _, err = run(capsys, "verify", "littlewood-paley", "--weight", "w1:1:1", "--p", "4",
                           "--out", str(out))
        assert code == 1 and "FAIL" in err
        assert json.loads(out.read_text().splitlines()[-1])["passed"] is False
        manifest = json.loads((tmp_path / "MANIFEST.json").read_text())
        assert manifest["experiment"] == "littlewood-paley" and manifest["seed"] == 7

    def test_passing_verify_to_stdout(self, capsys):
        code, out, err = run(capsys, "verify", "identities", "--out", "-")
        assert code == 0 and "PASS" in err
        assert json.loads(out.splitlines()[-1])["record"] == "summary"

    def test_csv_format(self, capsys):
        code, out, _ = run(capsys, "verify", "identities", "--format", "csv")
        assert code == 0 and out.splitlines()[0].startswith("experiment")


class TestCommands:
    def test_norm(self, capsys):
        code, out, err = run(capsys, "norm", "--f", "poly:1", "--weight", "w0:1:1")
        rec = json.loads(out)
        assert code == 0 and abs(rec["value"] - 0.19373761075354068) < 1e-12
        assert "converged=True" in err and "±" in err

    def test_bloch(self, capsys):
        code, out, _ = run(capsys, "bloch", "--g", "poly:0,1")
        assert code == 0 and abs(json.loads(out)["value"] - 1.0) < 1e-12

    def test_apply_word(self, capsys):
        code, out, _ = run(capsys, "apply-word", "--word", "ST", "--g", "poly:0,1", "--f", "poly:1")
        coeffs = json.loads(out)["coeffs"]
        assert code == 0 and coeffs[2] in (0.5, [0.5, 0.0])

    def test_decompose(self, capsys):
        code, out, _ = run(capsys, "decompose", "--word", "TS", "--full")
        rec = json.loads(out)
        assert code == 0 and rec["c"] == [-1] and "full" in rec

    def test_kernel_with_cache(self, capsys, tmp_path):
        code, out, _ = run(capsys, "kernel", "--a", "0.5", "--cache", str(tmp_path))
        rec = json.loads(out)
        assert code == 0 and rec["diagonal_ratio"] > 0 and len(list(tmp_path.iterdir())) == 1

    def test_check_weight(self, capsys, tmp_path):
        out = tmp_path / "w.jsonl"
        code, _, _ = run(capsys, "check-weight", "--weight", "w2:1:1", "--out", str(out))
        assert code == 0 and json.loads(out.read_text())["passed"] is True

    def test_console_script(self):
        res = subprocess.run([sys.executable, "-m", "paraprod.cli", "--version"], capture_output=True, text=True)
        assert res.returncode == 0 and "paraprod" in res.stdout
