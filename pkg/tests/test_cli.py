import filecmp
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import SQUARE_EDGES, fib_sphere
from tightcycles.cli import main
from tightcycles.io import read_cycles, read_diagram, read_table


@pytest.fixture
def square_file(tmp_path):
    p = tmp_path / "square.txt"
    p.write_text("# n=4 tau=2.75\n" + "".join(f"{u} {v} {d}\n" for u, v, d in SQUARE_EDGES))
    return p


SQUARE_ARGS = ["--tau-u", "2.5", "--epsilon", "0.25", "--dims", "1"]


@pytest.fixture(scope="module")
def void_cloud(tmp_path_factory):
    rng = np.random.default_rng(0)
    S = fib_sphere(30, 1.0)
    B = rng.uniform(-2.5, 2.5, (500, 3))
    B = B[np.linalg.norm(B, axis=1) > 1.8]
    p = tmp_path_factory.mktemp("cloud") / "pts.csv"
    np.savetxt(p, np.vstack([S, B]), delimiter=",", header="x,y,z", comments="")
    return p


VOID_ARGS = ["--format", "points", "--tau-u", "1.0", "--epsilon", "0.5", "--dims", "2",
             "--n-pert", "1", "--n-perm", "1"]


def same_outputs(a, b):
    names = sorted(p.name for p in a.iterdir() if p.name != "timing.json")
    assert names == sorted(p.name for p in b.iterdir() if p.name != "timing.json")
    return all(filecmp.cmp(a / n, b / n, shallow=False) for n in names)


class TestWorkedExample:
    def test_pd(self, square_file, tmp_path):
        assert main(["pd", str(square_file), *SQUARE_ARGS, "--out", str(tmp_path / "o")]) == 0
        pd = read_diagram(tmp_path / "o" / "diagram.tsv")
        assert sorted(pd.values(1)) == [(1, 2.5, 2.75), (1, 2.75, 2.75)]
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["significant"] == {"H1": 1}
        timing = json.loads((tmp_path / "o" / "timing.json").read_text())
        assert timing["total_seconds"] >= 0

    def test_cycles(self, square_file, tmp_path):
        assert main(["cycles", str(square_file), *SQUARE_ARGS, "--out", str(tmp_path / "o")]) == 0
        rows = read_cycles(tmp_path / "o" / "birth_cycles.txt")
        assert rows == [(1, 2.5, [(0, 1), (0, 3), (1, 2), (2, 3)]), (1, 2.75, [(0, 1), (0, 2), (1, 2)])]
        for name in ("shortened", "smoothed", "degenerate", "nonsignificant"):
            assert (tmp_path / "o" / f"{name}_cycles.txt").exists()

    def test_skip_trivial(self, square_file, tmp_path):
        assert main(["cycles", str(square_file), *SQUARE_ARGS, "--skip-trivial", "--out", str(tmp_path / "o")]) == 0
        rows = read_cycles(tmp_path / "o" / "birth_cycles.txt")
        assert [r[1] for r in rows] == [2.5]

    def test_deterministic(self, square_file, tmp_path):
        for name in ("a", "b"):
            assert main(["cycles", str(square_file), *SQUARE_ARGS, "--out", str(tmp_path / name)]) == 0
        assert same_outputs(tmp_path / "a", tmp_path / "b")


class TestErrors:
    def test_empty_input(self, tmp_path):
        p = tmp_path / "e.txt"
        p.write_text("")
        assert main(["pd", str(p), *SQUARE_ARGS, "--out", str(tmp_path / "o")]) == 0
        assert read_diagram(tmp_path / "o" / "diagram.tsv").values() == []

    def test_missing_argument(self, square_file, tmp_path):
        assert main(["pd", str(square_file), "--epsilon", "1", "--out", str(tmp_path)]) == 1

    def test_bad_threshold(self, square_file, tmp_path):
        assert main(["pd", str(square_file), "--tau-u", "-1", "--epsilon", "1", "--out", str(tmp_path)]) == 1

    def test_unknown_stage(self, square_file, tmp_path):
        assert main(["cycles", str(square_file), *SQUARE_ARGS, "--stages", "bogus", "--out", str(tmp_path)]) == 1

    def test_localize_needs_embedding(self, square_file, tmp_path):
        assert main(["localize", str(square_file), *SQUARE_ARGS, "--out", str(tmp_path)]) == 1

    def test_missing_file(self, tmp_path):
        assert main(["pd", str(tmp_path / "nope.txt"), *SQUARE_ARGS, "--out", str(tmp_path)]) == 2

    def test_parse_error(self, tmp_path, capsys):
        p = tmp_path / "bad.txt"
        p.write_text("0 1 1.0\n1 2 x\n")
        assert main(["pd", str(p), *SQUARE_ARGS, "--out", str(tmp_path / "o")]) == 2
        assert ":2:" in capsys.readouterr().err

    def test_capacity(self, tmp_path):
        p = tmp_path / "big.txt"
        p.write_text("# n=100000000\n" + "".join(f"{i} {i + 1} 1.0\n" for i in range(0, 4000, 2)))
        assert main(["pd", str(p), "--tau-u", "1", "--epsilon", "1", "--dims", "2", "--out", str(tmp_path)]) == 3

    def test_recursion_budget(self, tmp_path):
        X = np.random.default_rng(1).uniform(size=(14, 3))
        p = tmp_path / "p.csv"
        np.savetxt(p, X, delimiter=",")
        args = ["cycles", str(p), "--format", "points", "--tau-u", "0.5", "--epsilon", "0.3", "--dims", "1",
                "--recursion-budget", "0", "--out", str(tmp_path / "o")]
        assert main(args) == 3


def test_console_entry_point(square_file, tmp_path):
    out = subprocess.run([sys.executable, "-m", "tightcycles.cli", "pd", str(square_file), *SQUARE_ARGS,
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "o" / "diagram.tsv").exists()


class TestVoidPipeline:
    def test_localize_and_stats(self, void_cloud, tmp_path):
        out = tmp_path / "s"
        assert main(["stats", str(void_cloud), *VOID_ARGS, "--n-samples", "200", "--out", str(out)]) == 0
        header, rows = read_table(out / "contracted_covers.tsv")
        assert header[:5] == ["id", "lo", "hi", "n_members", "n_sig"]
        assert len(rows) == 1 and rows[0][4] == "1"
        members = list(map(int, rows[0][5].split(",")))
        assert members == list(range(30))
        minimal = read_cycles(out / "minimal_cycles.txt")
        assert len(minimal) == 1 and minimal[0][0] == 2
        _, feats = read_table(out / "void_features.tsv")
        assert float(feats[0][5]) <= 0.05
        report = json.loads((out / "stats_report.json").read_text())
        assert report["spatial_samples"] == 200

    def test_localize_deterministic(self, void_cloud, tmp_path):
        for name in ("a", "b"):
            assert main(["localize", str(void_cloud), *VOID_ARGS, "--out", str(tmp_path / name)]) == 0
        assert same_outputs(tmp_path / "a", tmp_path / "b")
