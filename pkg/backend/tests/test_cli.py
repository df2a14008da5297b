"""
Kommandolinje
=============
Exit-koder, serialisering og underkommandoene ende til ende.

Kjør: pytest tests/test_cli.py -v
"""

import io
import json

import pandas as pd
import pytest

from app.api.commands import parse_count, parse_grid, parse_range, parse_triple, to_csv
from app.main import main
from app.models.schemas import RateReport


@pytest.fixture
def keyrate_input(tmp_path, record_25):
    """Inndatafil bygget fra {25,25,25} med publisert E_X^U."""
    data = {
        "name": record_25.name,
        "block": record_25.block.model_dump(),
        "source_a": record_25.source_a.model_dump(),
        "source_b": record_25.source_b.model_dump(),
        "source_c": record_25.source_c.model_dump(),
        "config": {"N": round(record_25.N), "f": 1.06, "epsilon": 1e-10},
        "D": 16,
        "ex_override": record_25.published.ex_upper,
    }
    path = tmp_path / "input.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path, data


def _write(tmp_path, data, name="input.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


class TestArgumentHelpers:

    def test_parse_count(self):
        assert parse_count("1e14") == 10**14
        with pytest.raises(ValueError):
            parse_count("0.5")

    def test_parse_range(self):
        assert parse_range("25:100:25") == [25, 50, 75, 100]
        assert parse_range("25,60") == [25, 60]
        with pytest.raises(ValueError):
            parse_range("100:25:25")

    def test_parse_grid(self):
        assert parse_grid("75:25:75:25") == (75, [25, 50, 75])

    def test_parse_triple(self):
        assert parse_triple("50") == (50, 50, 50)
        with pytest.raises(ValueError):
            parse_triple("1,2")


class TestKeyrate:

    # -------------------------------------------------------------------------
    # TEST 1: keyrate fra fil
    # -------------------------------------------------------------------------
    def test_from_file(self, keyrate_input, capsys):
        """KRAV: Fil med publisert E_X^U gir R1 ≈ 3.15e-7 og exit 0."""
        path, _ = keyrate_input
        assert main(["keyrate", str(path)]) == 0
        out = json.loads(capsys.readouterr().out)
        report = RateReport.model_validate(out)
        assert report.r_finite == pytest.approx(3.15e-7, rel=2e-2)
        assert out["config"] == "{25,25,25}"

    def test_no_signal_counts(self, keyrate_input, tmp_path, capsys):
        _, data = keyrate_input
        data["block"]["m_mu"] = 0
        assert main(["keyrate", str(_write(tmp_path, data, "zero.json"))]) == 0
        assert json.loads(capsys.readouterr().out)["r_finite"] == 0.0

    def test_invalid_source(self, keyrate_input, tmp_path, capsys):
        """KRAV: omega > nu gir exit 2 og bruddet på stderr."""
        _, data = keyrate_input
        data["source_b"]["omega"] = 0.5
        assert main(["keyrate", str(_write(tmp_path, data, "bad.json"))]) == 2
        assert "omega < nu violated" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"block": {', encoding="utf-8")
        assert main(["keyrate", str(path)]) == 2
        assert "line" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["keyrate", str(tmp_path / "nope.json")]) == 2

    def test_unknown_flag(self):
        assert main(["keyrate", "--bogus"]) == 2

    def test_csv_notation(self, capsys):
        assert main(["keyrate", "--config", "{25,25,25}", "--published-ex", "--csv"]) == 0
        frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert frame["r_finite"].iloc[0] == pytest.approx(3.1455e-7, rel=5e-3)

    def test_out_file(self, tmp_path, capsys):
        out = tmp_path / "rate.json"
        assert main(["keyrate", "--config", "25,25,25", "--out", str(out)]) == 0
        assert capsys.readouterr().out == ""
        assert "r_finite" in json.loads(out.read_text(encoding="utf-8"))


class TestReproduce:

    # -------------------------------------------------------------------------
    # TEST 2: Exit-kode fra toleransedommer
    # -------------------------------------------------------------------------
    def test_gated_on_r1_and_k(self, capsys):
        assert main(["reproduce", "--checks", "r1,k"]) == 0
        frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert len(frame) == 9

    def test_full_gate_exit_code(self):
        """KRAV: Et toleransebrudd gir exit 4."""
        assert main(["reproduce"]) == 4

    def test_single_config(self, capsys):
        assert main(["reproduce", "--config", "{50,50,50}", "--format", "json"]) in (0, 4)
        rows = json.loads(capsys.readouterr().out)
        assert len(rows) == 1 and rows[0]["config"] == "{50,50,50}"

    def test_unknown_check(self):
        assert main(["reproduce", "--checks", "r9"]) == 2

    def test_unknown_config(self, capsys):
        assert main(["reproduce", "--config", "{1,2,3}"]) == 2
        assert "not in" in capsys.readouterr().err


class TestSimulate:

    def test_positive_rate(self, capsys):
        args = ["simulate", "--distances", "25", "--config", "{25,25,25}", "--n-rounds", "1e13"]
        assert main(args) == 0
        assert json.loads(capsys.readouterr().out)["r_finite"] > 0

    def test_missing_sources(self):
        assert main(["simulate", "--distances", "25", "--n-rounds", "1e13"]) == 2

    def test_bad_distance(self, capsys):
        args = ["simulate", "--distances", "-5", "--config", "{25,25,25}", "--n-rounds", "1e13"]
        assert main(args) == 2
        assert "distance must be >= 0" in capsys.readouterr().err

    def test_dark_count_free_long_channel(self, capsys):
        """KRAV: --dark 0 ved 300 km gir R1 = 0 og exit 0."""
        args = [
            "simulate", "--distances", "300", "--dark", "0",
            "--config", "{25,25,25}", "--n-rounds", "1e13",
        ]
        assert main(args) == 0
        assert json.loads(capsys.readouterr().out)["r_finite"] == 0.0


class TestOptimizeAndSweep:

    def test_optimize_with_trace(self, tmp_path, capsys):
        trace = tmp_path / "trace.csv"
        args = [
            "optimize", "--distances", "25", "--n-rounds", "1e13",
            "--evals", "80", "--restarts", "1", "--trace", str(trace),
        ]
        assert main(args) == 0
        row = json.loads(capsys.readouterr().out)
        assert row["mode"] == "symmetric"
        assert row["mu_a"] == pytest.approx(2 * row["mu_b"])
        frame = pd.read_csv(trace)
        assert len(frame) == row["evaluations"]
        assert "failed" in frame.columns

    def test_invalid_bounds_budget(self):
        args = ["optimize", "--distances", "25", "--n-rounds", "1e13", "--restarts", "0"]
        assert main(args) == 2

    @pytest.mark.slow
    def test_symmetric_sweep(self, capsys):
        args = [
            "sweep", "--distances", "25:100:25", "--n-rounds", "1e14",
            "--evals", "400", "--restarts", "3",
        ]
        assert main(args) == 0
        frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert list(frame["d_A"]) == [25, 50, 75, 100]
        assert frame["R1"].iloc[-1] > 0

    def test_sweep_needs_distances(self):
        assert main(["sweep", "--n-rounds", "1e13", "--evals", "10", "--restarts", "1"]) == 2


class TestMonteCarlo:

    # -------------------------------------------------------------------------
    # TEST 3: Reproduserbar utskrift
    # -------------------------------------------------------------------------
    def test_identical_output(self, capsys):
        args = ["montecarlo", "--config", "{25,25,25}", "--trials", "20000", "--seed", "7"]
        assert main(args + ["--threads", "1"]) == 0
        first = capsys.readouterr().out
        assert main(args + ["--threads", "3"]) == 0
        assert capsys.readouterr().out == first

    def test_trace_and_rate(self, tmp_path, capsys):
        trace = tmp_path / "events.csv"
        args = [
            "montecarlo", "--config", "{25,25,25}", "--trials", "5000",
            "--trace", str(trace), "--rate",
        ]
        assert main(args) == 0
        row = json.loads(capsys.readouterr().out)
        assert row["trials"] == 5000 and "R1" in row
        assert len(pd.read_csv(trace)) == 5000


class TestSerialization:

    def test_csv_uses_e_notation(self):
        text = to_csv({"x": 1.5e-7, "name": "a"})
        assert "1.500000000000e-07" in text
