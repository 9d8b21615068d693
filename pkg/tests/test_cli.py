import csv

import numpy as np
import pytest

from fermisim import cli
from fermisim.formats import parse_circuit_config
from fermisim.measure import MeasurementQuery
from fermisim.oracle import exact_probability

CIRCUIT = """\
n_modes 4
general i=0 j=3 params=0.3,0.9,-0.4,0.7,0.2,-0.5 time=1.1
preserving i=1 j=2 params=0.5,-0.2,0.8,0.1
"""


@pytest.fixture
def circuit_file(tmp_path):
    path = tmp_path / "circuit.txt"
    path.write_text(CIRCUIT)
    return str(path)


def run(capsys, *argv):
    code = cli.main([*argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_fmt_digits():
    assert cli.fmt(1.0) == "1.000000000000"
    assert cli.fmt(0.0) == "0.000000000000"
    assert cli.fmt(1.23456789012345e-5) == "1.234567890123e-05"


class TestProb:
    def test_matches_oracle(self, capsys, circuit_file):
        code, out, _ = run(capsys, "prob", "--circuit", circuit_file, "--x", "1010", "--y", "0110")
        assert code == 0
        expected = exact_probability(
            parse_circuit_config(CIRCUIT).circuit, MeasurementQuery.full("1010", "0110")
        )
        assert float(out) == pytest.approx(expected, abs=1e-12)

    def test_masked(self, capsys, circuit_file):
        code, out, _ = run(capsys, "prob", "--circuit", circuit_file, "--x", "1010",
                           "--mask", "1001", "--y", "01")
        assert code == 0 and 0.0 <= float(out) <= 1.0

    def test_empty_mask_is_certain(self, capsys, circuit_file):
        code, out, _ = run(capsys, "prob", "--circuit", circuit_file, "--x", "1010", "--mask", "0000")
        assert (code, out.strip()) == (0, "1.000000000000")

    @pytest.mark.parametrize(
        "extra",
        [["--x", "101", "--y", "0110"], ["--x", "1010", "--y", "011"],
         ["--x", "1010", "--mask", "110", "--y", "01"]],
    )
    def test_dimension_mismatch(self, capsys, circuit_file, extra):
        code, _, err = run(capsys, "prob", "--circuit", circuit_file, *extra)
        assert code == cli.EXIT_DIMENSION and "bits" in err

    def test_bad_bits(self, capsys, circuit_file):
        code, _, _ = run(capsys, "prob", "--circuit", circuit_file, "--x", "10a0")
        assert code == cli.EXIT_PARSE

    def test_parse_error_reports_position(self, capsys, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("n_modes 2\npreserving i=0 j=1 params=1,2\n")
        code, _, err = run(capsys, "prob", "--circuit", str(path), "--x", "10", "--y", "10")
        assert code == cli.EXIT_PARSE and "line 2, column 20" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "prob", "--circuit", str(tmp_path / "nope"), "--x", "1")
        assert code == cli.EXIT_PARSE


class TestCompare:
    def test_agrees(self, capsys, circuit_file):
        code, out, _ = run(capsys, "compare", "--circuit", circuit_file, "--x", "1001", "--serial")
        lines = out.strip().splitlines()
        assert code == 0 and len(lines) == 2 + 16
        assert float(lines[-1].split("\t")[1]) < 1e-9

    def test_oracle_ceiling(self, capsys, tmp_path):
        path = tmp_path / "big.txt"
        path.write_text("n_modes 16\npreserving i=0 j=1 params=1,0,0,0\n")
        code, _, _ = run(capsys, "compare", "--circuit", str(path), "--x", "1" * 16)
        assert code == cli.EXIT_ORACLE_CEILING

    def test_disagreement_is_numeric_failure(self, capsys, circuit_file, monkeypatch):
        real = cli.exact_distribution
        monkeypatch.setattr(cli, "exact_distribution", lambda c, x: real(c, x) + 1e-6)
        code, _, _ = run(capsys, "compare", "--circuit", circuit_file, "--x", "1001")
        assert code == cli.EXIT_NUMERIC


class TestPauli:
    def test_single_preserving_gate(self, capsys, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("n_modes 2\npreserving i=0 j=1 params=1,0,0,0\n")
        code, out, _ = run(capsys, "pauli", "--circuit", str(path))
        assert code == 0
        assert out.splitlines() == ["-0.5\tZI"]

    def test_string_through_interior(self, capsys, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("n_modes 3\npreserving i=0 j=2 params=0,0,0,2\n")
        code, out, _ = run(capsys, "pauli", "--circuit", str(path))
        terms = dict(line.split("\t")[::-1] for line in out.splitlines())
        assert code == 0 and set(terms) == {"XZY", "YZX"}


class TestBench:
    def test_csv(self, capsys, tmp_path):
        out = tmp_path / "bench.csv"
        code, _, _ = run(capsys, "bench", "--n-list", "4,6", "--reps", "2", "--out", str(out))
        assert code == 0
        rows = list(csv.DictReader(out.open()))
        assert list(rows[0]) == cli.BENCH_HEADER
        assert [r["n_qubits"] for r in rows] == ["4", "6"]
        assert all(float(r["wall_seconds_mean"]) > 0 and r["repetitions"] == "2" for r in rows)

    def test_odd_size(self, capsys, tmp_path):
        code, _, _ = run(capsys, "bench", "--n-list", "5", "--out", str(tmp_path / "b.csv"))
        assert code == cli.EXIT_DIMENSION

    def test_bad_list(self, capsys, tmp_path):
        code, _, _ = run(capsys, "bench", "--n-list", "4,x", "--out", str(tmp_path / "b.csv"))
        assert code == cli.EXIT_PARSE


class TestTrain:
    def test_memorize(self, capsys, tmp_path):
        pbm = tmp_path / "p.pbm"
        pbm.write_text("P1\n2 2\n1 1\n1 1\n")
        out = tmp_path / "loss.csv"
        code, stdout, _ = run(capsys, "train", "--task", "memorize", "--input", str(pbm),
                              "--iters", "40", "--lr", "0.1", "--out", str(out), "--serial")
        assert code == 0
        assert float(stdout.split("\t")[1]) >= 0.99
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["iteration", "loss"] and len(rows) == 41
        params = list(csv.reader((tmp_path / "loss.params.csv").open()))
        assert params[0] == ["index", "value"] and len(params) == 1 + 3 * 4

    def test_born_reproducible(self, capsys, tmp_path):
        pdf = tmp_path / "t.txt"
        pdf.write_text("00 0.4\n01 0.1\n10 0.1\n11 0.4\n")
        texts = []
        for name in ("a.csv", "b.csv"):
            code, _, _ = run(capsys, "train", "--task", "born", "--input", str(pdf), "--iters", "3",
                             "--seed", "5", "--out", str(tmp_path / name), "--serial")
            assert code == 0
            texts.append((tmp_path / name).read_bytes())
        assert texts[0] == texts[1]

    def test_maxcut(self, capsys, tmp_path):
        edges = tmp_path / "g.txt"
        edges.write_text("0 1 1.0\n1 2 2.0\n0 2 0.5\n")
        code, stdout, _ = run(capsys, "train", "--task", "maxcut", "--input", str(edges),
                              "--iters", "3", "--out", str(tmp_path / "m.csv"), "--serial")
        fields = dict(line.split("\t", 1) for line in stdout.splitlines())
        assert code == 0 and fields["optimum"].endswith("3.000000000000")

    def test_non_finite_loss(self, capsys, tmp_path, monkeypatch):
        pbm = tmp_path / "p.pbm"
        pbm.write_text("P1 2 1 1 0\n")

        def broken(*args, **kwargs):
            raise cli.NonFiniteLoss("objective returned nan")

        monkeypatch.setattr(cli, "train", broken)
        code, _, err = run(capsys, "train", "--task", "memorize", "--input", str(pbm),
                           "--out", str(tmp_path / "l.csv"))
        assert code == cli.EXIT_NUMERIC and "nan" in err

    def test_bad_pdf(self, capsys, tmp_path):
        pdf = tmp_path / "t.txt"
        pdf.write_text("0 0.3\n1 0.3\n")
        code, _, _ = run(capsys, "train", "--task", "born", "--input", str(pdf),
                         "--out", str(tmp_path / "l.csv"))
        assert code == cli.EXIT_PARSE
