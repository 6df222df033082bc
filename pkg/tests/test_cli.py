import csv
import json
import math

import pytest

from nonlocal_lab import __version__
from nonlocal_lab.cli import main

ROOT2 = math.sqrt(2)


def run(tmp_path, *argv):
    code = main([*argv, "--out", str(tmp_path)])
    return code


def load(path):
    with open(path) as fh:
        return json.load(fh)


class TestWave:
    def test_defaults(self, tmp_path):
        assert run(tmp_path, "wave") == 0
        doc = load(tmp_path / "wave.json")
        assert doc["version"] == __version__ and doc["command"] == "wave"
        assert doc["flags"] == {"T": 1.0, "M": 4, "N": 256, "bump_width": 0.25, "window": 0.25}
        assert doc["periodicity_residual"] <= 1e-10
        assert doc["repetition_residual"] <= 1e-10
        assert doc["window_diff"] <= 1e-10
        assert doc["energy_drift"] <= 1e-10
        with open(tmp_path / "wave_t0.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "phi", "phi_t"] and len(rows) == 257
        spec = load(tmp_path / "wave_spectrum.json")
        assert len(spec["modes"]) == 256 and spec["M"] == 4

    def test_bad_grid(self, tmp_path, capsys):
        assert run(tmp_path, "wave", "--N", "3") == 2
        assert "power of two" in capsys.readouterr().err

    def test_wide_bump(self, tmp_path):
        assert run(tmp_path, "wave", "--bump-width", "1.5") == 2


class TestBell:
    def test_quantum(self, tmp_path):
        assert run(tmp_path, "bell", "--model", "quantum", "--runs", "20000") == 0
        doc = load(tmp_path / "bell.json")
        assert doc["chsh_exact"]["S"] == pytest.approx(-2 * ROOT2, abs=1e-9)
        assert doc["si_report"] is None
        assert set(doc) >= {"version", "command", "flags", "chsh_exact", "chsh_mc", "si_report", "record"}

    def test_sawtooth(self, tmp_path):
        assert run(tmp_path, "bell", "--model", "sawtooth", "--runs", "20000") == 0
        assert load(tmp_path / "bell.json")["chsh_exact"]["S"] == pytest.approx(-2, abs=1e-4)

    def test_superdet(self, tmp_path):
        assert run(tmp_path, "bell", "--model", "superdet", "--runs", "20000") == 0
        doc = load(tmp_path / "bell.json")
        assert doc["si_report"]["tv_max"] == pytest.approx(3 * ROOT2 / 8, abs=1e-9)
        assert doc["chsh_exact"]["S"] == pytest.approx(-2 * ROOT2, abs=1e-9)

    def test_custom_menu(self, tmp_path):
        assert run(tmp_path, "bell", "--menu", "0,0,0,0", "--runs", "100") == 0
        assert load(tmp_path / "bell.json")["chsh_exact"]["S"] == pytest.approx(-2.0)

    def test_unknown_model(self, tmp_path, capsys):
        assert run(tmp_path, "bell", "--model", "bohm") == 2
        err = capsys.readouterr().err
        for name in ("quantum", "sawtooth", "toy3", "superdet"):
            assert name in err


class TestScan:
    def test_quantum_curve(self, tmp_path):
        assert run(tmp_path, "scan", "--model", "quantum", "--step", repr(math.pi / 4), "--runs", "4000") == 0
        with open(tmp_path / "scan_quantum.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["theta", "E_exact", "E_mc", "stderr", "n"]
        assert len(rows) == 5
        assert float(rows[0]["E_exact"]) == pytest.approx(-1.0)
        assert float(rows[2]["E_exact"]) == pytest.approx(0.0, abs=1e-15)

    def test_gap_at_quarter_pi(self, tmp_path):
        step = repr(math.pi / 4)
        run(tmp_path, "scan", "--model", "quantum", "--step", step, "--runs", "100")
        run(tmp_path, "scan", "--model", "sawtooth", "--step", step, "--runs", "100")
        with open(tmp_path / "scan_quantum.csv") as fh:
            q = list(csv.DictReader(fh))
        with open(tmp_path / "scan_sawtooth.csv") as fh:
            s = list(csv.DictReader(fh))
        gap = abs(float(q[1]["E_exact"])) - abs(float(s[1]["E_exact"]))
        assert gap == pytest.approx(ROOT2 / 2 - 0.5, abs=1e-12)

    def test_step_must_divide_pi(self, tmp_path):
        assert run(tmp_path, "scan", "--step", "0.3") == 2

    def test_menu_restricted_model(self, tmp_path):
        assert run(tmp_path, "scan", "--model", "superdet") == 2
        assert run(tmp_path, "scan", "--model", "bogus") == 2


class TestBound:
    def test_many_models(self, tmp_path):
        assert run(tmp_path, "bound", "--models", "10000", "--lambda-count", "8") == 0
        doc = load(tmp_path / "bound.json")
        assert doc["max_abs_S"] <= 2 + 1e-9 and doc["passed"]

    def test_single_model_reproducible(self, tmp_path):
        run(tmp_path / "a", "bound", "--models", "1", "--seed", "42")
        run(tmp_path / "b", "bound", "--models", "1", "--seed", "42")
        assert load(tmp_path / "a" / "bound.json") == load(tmp_path / "b" / "bound.json")

    def test_single_lambda(self, tmp_path):
        assert run(tmp_path, "bound", "--models", "500", "--lambda-count", "1") == 0
        assert load(tmp_path / "bound.json")["max_abs_S"] <= 2

    def test_zero_models(self, tmp_path):
        assert run(tmp_path, "bound", "--models", "0") == 2


class TestConserve:
    @pytest.mark.parametrize("system,verdict", [("particles", "conserved"), ("twopoint", "not-conserved"),
                                                ("wave", "conserved")])
    def test_expected_verdicts(self, tmp_path, system, verdict):
        assert run(tmp_path, "conserve", system) == 0
        doc = load(tmp_path / f"conserve_{system}.json")
        assert doc["report"]["verdict"] == verdict
        assert set(doc["report"]) >= {"label", "threshold", "verdict", "max_residual", "residuals"}

    def test_system_flag(self, tmp_path):
        assert run(tmp_path, "conserve", "--system", "twopoint") == 0

    def test_wrong_expectation_exits_one(self, tmp_path):
        # a huge threshold makes the two-point constraint look conserved
        assert run(tmp_path, "conserve", "twopoint", "--threshold", "100") == 1

    def test_unknown_system(self, tmp_path):
        assert run(tmp_path, "conserve", "fluid") == 2


def test_argparse_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2
