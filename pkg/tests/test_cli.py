import json

import numpy as np
import pytest

from spectral_hmm.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


class TestGenerate:
    def test_triples_format(self, tmp_path, capsys):
        out = tmp_path / "t.txt"
        assert run(capsys, "generate", "--model", "A", "--n", 1000, "--seed", 7, "-o", out)[0] == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 1000
        assert all(len(line.split()) == 3 and set(line.split()) <= {"1", "2", "3"} for line in lines)

    def test_byte_identical_rerun(self, tmp_path, capsys):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        run(capsys, "generate", "--model", "A", "--n", 200, "--seed", 7, "-o", a)
        run(capsys, "generate", "--model", "A", "--n", 200, "--seed", 7, "-o", b)
        assert a.read_bytes() == b.read_bytes()

    def test_real_valued_sequence(self, tmp_path, capsys):
        out = tmp_path / "y.txt"
        run(capsys, "generate", "--model", "A", "--sigma", 0.25, "--length", 10000, "-o", out)
        values = [float(v) for v in out.read_text().split()]
        assert len(values) == 10000

    def test_bad_model(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"T": [[0.5]], "O": [[1.0]], "pi": [1.0]}))
        assert run(capsys, "generate", "--model", bad, "--n", 3)[0] == 2

    def test_missing_model_file(self, capsys):
        assert run(capsys, "generate", "--model", "/nonexistent/model.json", "--n", 3)[0] == 4


class TestLearn:
    def test_population_moments_recover_truth(self, tmp_path, capsys):
        mom = tmp_path / "m.json"
        est = tmp_path / "est.json"
        run(capsys, "moments", "--model", "A", "-o", mom)
        code, out = run(capsys, "learn", "--moments", mom, "--k", 2, "--algo", "ahk", "--truth", "A", "-o", est)
        assert code == 0
        line = next(l for l in out.out.splitlines() if l.startswith("err_O"))
        fields = dict(item.split("=") for item in line.split())
        assert float(fields["max_abs_O"]) <= 1e-6 and float(fields["max_abs_T"]) <= 1e-6
        data = json.loads(est.read_text())
        assert (data["k"], data["d"], data["pi"]) == (2, 3, None)

    def test_baum_welch_trace(self, tmp_path, capsys):
        data = tmp_path / "t.txt"
        run(capsys, "generate", "--model", "A", "--n", 300, "-o", data)
        code, out = run(capsys, "learn", data, "--k", 2, "--d", 3, "--algo", "bw", "--iterations", 3)
        assert code == 0
        trace = next(l for l in out.out.splitlines() if l.startswith("loglik trace"))
        assert len(trace.split(":")[1].split()) == 3

    def test_hkz_writes_model_schema(self, tmp_path, capsys):
        data, est = tmp_path / "t.txt", tmp_path / "e.json"
        run(capsys, "generate", "--model", "A", "--n", 5000, "-o", data)
        assert run(capsys, "learn", data, "--k", 2, "--d", 3, "--algo", "hkz", "-o", est)[0] == 0
        model = json.loads(est.read_text())
        np.testing.assert_allclose(np.sum(model["O"], axis=0), 1)
        assert len(model["pi"]) == 2

    def test_k_above_d_is_usage_error(self, tmp_path, capsys):
        data = tmp_path / "t.txt"
        run(capsys, "generate", "--model", "A", "--n", 50, "-o", data)
        assert run(capsys, "learn", data, "--k", 4, "--d", 3, "--algo", "hkz")[0] == 2

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        data = tmp_path / "t.txt"
        data.write_text("1 1 1\n" * 10)
        assert run(capsys, "learn", data, "--k", 2, "--d", 3, "--algo", "ahk")[0] == 3

    def test_round_trip_accuracy(self, tmp_path, capsys):
        data = tmp_path / "t.txt"
        run(capsys, "generate", "--model", "A", "--n", 100000, "--seed", 1, "-o", data)
        code, out = run(capsys, "learn", data, "--k", 2, "--d", 3, "--algo", "ahk", "--truth", "A")
        line = next(l for l in out.out.splitlines() if l.startswith("err_O"))
        assert float(line.split()[0].split("=")[1]) <= 0.05


class TestBin:
    def test_four_values(self, tmp_path, capsys):
        src, out = tmp_path / "y.txt", tmp_path / "b.txt"
        src.write_text("0.1\n0.9\n0.5\n0.3\n")
        assert run(capsys, "bin", src, "--bins", 2, "-o", out)[0] == 0
        assert out.read_text().split() == ["1", "2", "2", "1"]
        spec = json.loads((tmp_path / "b.txt.bins.json").read_text())
        assert spec["bounds"] == [0.4] and spec["convention"]

    def test_fine_bins(self, tmp_path, capsys):
        y, out = tmp_path / "y.txt", tmp_path / "b.txt"
        run(capsys, "generate", "--model", "A", "--sigma", 0.25, "--length", 3000, "-o", y)
        run(capsys, "bin", y, "--bins", 12, "-o", out)
        assert len(set(out.read_text().split())) == 12

    def test_constant_input(self, tmp_path, capsys):
        src = tmp_path / "c.txt"
        src.write_text("2.0\n" * 10)
        code, out = run(capsys, "bin", src, "--bins", 2)
        assert code == 3 and "degenerate quantiles" in out.err

    def test_binned_triples_feed_learner(self, tmp_path, capsys):
        y, b = tmp_path / "y.txt", tmp_path / "b.txt"
        run(capsys, "generate", "--model", "A", "--n", 5000, "--sigma", 0.1, "-o", y)
        run(capsys, "bin", y, "--bins", 3, "-o", b)
        assert all(len(l.split()) == 3 for l in b.read_text().splitlines())
        assert run(capsys, "learn", b, "--k", 2, "--d", 3)[0] == 0


class TestBench:
    def test_grid_rows(self, tmp_path, capsys):
        code, out = run(capsys, "bench", "--preset", "thesis-k2", "--realizations", 2,
                        "--n", 1000, 2500, 5000, 10000, "--out", tmp_path)
        assert code == 0
        rows = (tmp_path / "results.csv").read_text().splitlines()
        assert len(rows) - 1 == 2 * 2 * 4 * 2
        assert "slope" in out.out

    def test_same_seed_same_csv(self, tmp_path, capsys):
        for name in ("a", "b"):
            run(capsys, "bench", "--models", "A", "--algos", "ahk", "--n", 500, "--realizations", 2,
                "--seed", 4, "--out", tmp_path / name)
        strip = lambda p: [l.rsplit(",", 5)[0].split(",")[:7] for l in p.read_text().splitlines()]
        assert strip(tmp_path / "a" / "results.csv") == strip(tmp_path / "b" / "results.csv")

    def test_binning_preset(self, tmp_path, capsys):
        code, _ = run(capsys, "bench", "--preset", "thesis-binning", "--sigma", 0.1, "--n", 2000,
                      "--realizations", 1, "--out", tmp_path)
        assert code == 0

    def test_binning_preset_needs_sigma(self, tmp_path, capsys):
        assert run(capsys, "bench", "--preset", "thesis-binning", "--out", tmp_path)[0] == 2

    def test_bw_preset(self, tmp_path, capsys):
        code, _ = run(capsys, "bench", "--preset", "thesis-bw", "--n", 1000, "--realizations", 1,
                      "--out", tmp_path)
        assert code == 0
        algs = {l.split(",")[0] for l in (tmp_path / "results.csv").read_text().splitlines()[1:]}
        assert algs == {"ahk", "ahk+bw", "bw"}

    def test_usage_error_without_models(self, tmp_path, capsys):
        assert run(capsys, "bench", "--out", tmp_path)[0] == 2

    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit):
            main(["--help"])
        text = capsys.readouterr().out
        for cmd in ("generate", "learn", "bin", "bench", "moments"):
            assert cmd in text
