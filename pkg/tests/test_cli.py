import json
import math
import subprocess
import sys

import pytest

from bell_lab import cli
from bell_lab.cli import EXIT_DATA, EXIT_OK, EXIT_REJECTED, EXIT_USAGE, main
from bell_lab.io import load_dataset


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def counts(tmp_path):
    def make(*extra, name="counts.csv"):
        path = tmp_path / name
        assert run("simulate", "-o", path, *extra) == EXIT_OK
        return path
    return make


class TestSimulate:
    def test_writes_csv(self, counts):
        path = counts("--shots", 500, "--seed", 1)
        recs = load_dataset(path).records
        assert len(recs) == 4
        assert all(r.total == 500 for r in recs)

    def test_stdout_deterministic(self, capsys):
        run("simulate", "--seed", 42, "--settings", "builtin:grid16")
        first = capsys.readouterr().out
        run("simulate", "--seed", 42, "--settings", "builtin:grid16")
        assert capsys.readouterr().out == first
        assert first.startswith("alpha_deg,beta_deg,n_pp,n_pm,n_mp,n_mm\n")
        assert first.count("\n") == 17

    def test_meta_sidecar(self, tmp_path, counts):
        meta = tmp_path / "meta.json"
        counts("--anomaly-eps1", 0.02, "--settings", "builtin:sweep16", "--meta", meta)
        data = json.loads(meta.read_text())
        assert data["seed"] == 0
        applied = {round(x["beta_deg"], 6): x["eps1"] for x in data["applied_anomaly"]}
        assert applied[0.0] == 0.02
        # at 90 degrees p_pp = 0, so a transfer into ++ is capped at p_mm = 0
        assert applied[90.0] == pytest.approx(0.0, abs=1e-12)

    def test_settings_file(self, tmp_path, counts):
        settings = tmp_path / "s.csv"
        settings.write_text("alpha_deg,beta_deg\n0,10\n5,15\n")
        recs = load_dataset(counts("--settings", settings)).records
        assert [(r.settings.alpha_deg, r.settings.beta_deg) for r in recs] == [
            pytest.approx((0, 10)), pytest.approx((5, 15))]

    def test_env_threads_do_not_change_output(self, tmp_path, monkeypatch):
        outs = []
        for threads in ("1", "7"):
            monkeypatch.setenv("BELL_LAB_THREADS", threads)
            path = tmp_path / f"t{threads}.csv"
            run("simulate", "--settings", "builtin:grid16", "--seed", 5, "-o", path)
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    @pytest.mark.parametrize("argv", [
        ("simulate", "--seed", -1),
        ("simulate", "--shots", 0),
        ("simulate", "--model", "nonmax"),
        ("simulate", "--settings", "builtin:nope"),
        ("simulate", "--visibility", 1.5),
        ("simulate", "--bogus"),
        ("frobnicate",),
    ])
    def test_usage_errors(self, argv):
        with pytest.raises(SystemExit) as info:
            code = run(*argv)
            raise SystemExit(code)
        assert info.value.code == EXIT_USAGE


class TestAnalyze:
    def test_report(self, counts, tmp_path):
        out = tmp_path / "r.json"
        assert run("analyze", counts("--shots", 10**5), "-o", out) == EXIT_OK
        report = json.loads(out.read_text())
        assert len(report["per_pair"]) == 4
        assert len(report["per_pair"][0]["tests"]) == 6
        assert report["chsh"]["S"] == pytest.approx(2 * math.sqrt(2), abs=0.05)
        assert report["verdict"]["model_rejected"] is False

    def test_fail_on_reject(self, counts, tmp_path):
        data = counts("--shots", 10**5, "--anomaly-eps1", 0.05)
        assert run("analyze", data, "-o", tmp_path / "a.json") == EXIT_OK
        assert run("analyze", data, "--fail-on-reject", "-o", tmp_path / "b.json") == EXIT_REJECTED

    def test_lhv_data_rejects_quantum_model(self, counts, tmp_path):
        data = counts("--model", "lhv", "--shots", 10**5)
        assert run("analyze", data, "--fail-on-reject", "-o", tmp_path / "r.json") == EXIT_REJECTED
        assert run("analyze", data, "--model", "lhv", "--fail-on-reject", "-o", tmp_path / "r.json") == EXIT_OK

    def test_custom_tests(self, counts, tmp_path):
        tests = tmp_path / "c.json"
        tests.write_text("[[1, 0, 0, -1]]")
        out = tmp_path / "r.json"
        run("analyze", counts(), "--tests", tests, "-o", out)
        assert [t["c"] for t in json.loads(out.read_text())["per_pair"][0]["tests"]] == [[1, 0, 0, -1]]

    def test_bad_tests_file(self, counts, tmp_path):
        tests = tmp_path / "c.json"
        tests.write_text("[[0, 0, 0, 0]]")
        assert run("analyze", counts(), "--tests", tests) == EXIT_DATA

    def test_data_errors(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("alpha_deg,beta_deg,n_pp,n_pm,n_mp,n_mm\n0,0,1,-1,0,0\n")
        assert run("analyze", bad) == EXIT_DATA
        assert run("analyze", tmp_path / "missing.csv") == EXIT_DATA
        dup = tmp_path / "dup.csv"
        dup.write_text("alpha_deg,beta_deg,n_pp,n_pm,n_mp,n_mm\n0,0,1,1,1,1\n0,0,1,1,1,1\n")
        assert run("analyze", dup, "-o", tmp_path / "r.json") == EXIT_OK
        assert run("analyze", dup, "--strict") == EXIT_DATA

    def test_calibration_smoke(self, tmp_path):
        clean = 0
        seeds = range(40)
        for seed in seeds:
            data = tmp_path / f"{seed}.csv"
            out = tmp_path / f"{seed}.json"
            run("simulate", "--shots", 10**5, "--seed", seed, "-o", data)
            run("analyze", data, "-o", out)
            zs = [abs(t["z"]) for p in json.loads(out.read_text())["per_pair"] for t in p["tests"]]
            clean += max(zs) < 4
        assert clean >= 0.95 * len(seeds)


class TestOtherCommands:
    def test_scan(self, counts, tmp_path):
        out = tmp_path / "s.json"
        data = counts("--shots", 10**5, "--anomaly-eps1", 0.02)
        assert run("scan", data, "--random-c", 300, "--include-optimal", "-o", out) == EXIT_OK
        scan = json.loads(out.read_text())["scan"]
        assert scan["n_tested"] == 304
        assert scan["max_abs_z"] > 5

    def test_chsh_model(self, capsys):
        assert run("chsh") == EXIT_OK
        assert json.loads(capsys.readouterr().out)["S"] == pytest.approx(2 * math.sqrt(2), abs=1e-11)
        assert run("chsh", "--model", "lhv") == EXIT_OK
        assert json.loads(capsys.readouterr().out)["S"] == pytest.approx(2.0, abs=1e-11)

    def test_chsh_data_missing_pair(self, counts):
        data = counts("--settings", "builtin:sweep16")
        assert run("chsh", data) == EXIT_DATA

    def test_chsh_bad_angles(self):
        assert run("chsh", "--angles", "0,45,22.5") == EXIT_USAGE

    def test_fit(self, counts, tmp_path):
        data = counts("--model", "nonmax", "--theta", 0.6, "--visibility", 0.95,
                      "--settings", "builtin:grid16", "--shots", 10**5, "--seed", 3)
        out = tmp_path / "f.json"
        assert run("fit", data, "--free", "theta,visibility", "-o", out) == EXIT_OK
        fit = json.loads(out.read_text())["fit"]
        assert fit["parameters"]["theta"] == pytest.approx(0.6, abs=0.01)
        assert fit["parameters"]["visibility"] == pytest.approx(0.95, abs=0.01)
        assert fit["dof"] == 46

    def test_fit_unknown_parameter(self, counts):
        assert run("fit", counts(), "--free", "purity") == EXIT_USAGE

    def test_curve(self, capsys):
        assert run("curve", "--step-deg", 22.5) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "delta_rad,value"
        assert len(lines) == 10
        assert float(lines[2].split(",")[1]) == pytest.approx(math.sqrt(2) / 2, abs=1e-11)

    def test_curve_bad_c(self):
        assert run("curve", "--c", "1,2") == EXIT_USAGE
        assert run("curve", "--c", "0,0,0,0") == EXIT_USAGE
        assert run("curve", "--step-deg", 0) == EXIT_USAGE


class TestEntryPoint:
    def test_module_pipe(self, tmp_path):
        sim = subprocess.run([sys.executable, "-m", "bell_lab", "simulate", "--seed", "7", "--shots", "1000"],
                             capture_output=True, text=True, check=True)
        res = subprocess.run([sys.executable, "-m", "bell_lab", "analyze", "-"], input=sim.stdout,
                             capture_output=True, text=True)
        assert res.returncode == 0
        assert json.loads(res.stdout)["meta"]["n_pairs"] == 4

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            run("--version")
        assert info.value.code == 0
        assert cli.__version__ in capsys.readouterr().out
