import json
import subprocess
import sys

import numpy as np
import pytest

from likertlvm.cutpoints import estimate_cuts
from likertlvm.io import read_dataset_csv, write_dataset_csv
from likertlvm.model import LikertDataset, simulate
from likertlvm.reconstruction import fit_frobenius, reconstruct
from likertlvm.stem import StemConfig, run_stem

SEED = 20240817

BENCH_DOC = {
    "sigma": [0.8944271909999159, 0.8366600265340756, 0.7745966692414834,
              0.7071067811865476, 0.6324555320336759],
    "tau": [0.31622776601683794, -0.3872983346207417, -0.4472135954999579,
            0.5, 0.5477225575051661],
    "cuts": [
        [-1.2, -0.5, 0.4, 0.8],
        [-0.85, -0.25, 0.25, 0.85],
        [-0.85, -0.25, 0.25, 0.85],
        [-0.85, -0.25, 0.25, 0.85],
        [-1.2, -0.5, 0.4, 0.8],
    ],
    "n": 300,
    "T": 2,
    "replicates": 1,
    "seed": SEED,
}


def run_cli(*args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "likertlvm", *map(str, args)],
        cwd=cwd,
        capture_output=True,
        text=True,
    )


def write_config(tmp_path, **extra):
    doc = dict(BENCH_DOC)
    doc.update(extra)
    path = tmp_path / "study.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def small_data(tmp_path, bench_params, bench_cuts):
    _, data = simulate(bench_params, bench_cuts, 300, 2, SEED)
    path = tmp_path / "data.csv"
    write_dataset_csv(data, path)
    return path


class TestSimulate:
    def test_writes_files(self, tmp_path):
        cfg = write_config(tmp_path)
        res = run_cli("simulate", "--config", cfg, "--out", tmp_path, cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        data = read_dataset_csv(tmp_path / "data.csv")
        assert data.responses.shape == (300, 5, 2)
        assert data.responses.min() >= 1 and data.responses.max() <= 5
        truth = json.loads((tmp_path / "truth.json").read_text())
        assert len(truth["sigma"]) == 5

    def test_deterministic_bytes(self, tmp_path):
        cfg = write_config(tmp_path)
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        assert run_cli("simulate", "--config", cfg, "--out", a_dir, cwd=tmp_path).returncode == 0
        assert run_cli("simulate", "--config", cfg, "--out", b_dir, cwd=tmp_path).returncode == 0
        assert (a_dir / "data.csv").read_bytes() == (b_dir / "data.csv").read_bytes()

    def test_seed_override_changes_data(self, tmp_path):
        cfg = write_config(tmp_path)
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        run_cli("simulate", "--config", cfg, "--out", a_dir, cwd=tmp_path)
        run_cli("simulate", "--config", cfg, "--seed", 999, "--out", b_dir, cwd=tmp_path)
        assert (a_dir / "data.csv").read_bytes() != (b_dir / "data.csv").read_bytes()

    def test_missing_config(self, tmp_path):
        res = run_cli("simulate", "--config", tmp_path / "nope.json", cwd=tmp_path)
        assert res.returncode == 2
        assert "input error" in res.stderr


class TestEstimateCr:
    def test_result_fields(self, tmp_path, small_data):
        res = run_cli("estimate", small_data, "--out", tmp_path, cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        doc = json.loads((tmp_path / "estimate.json").read_text())
        assert set(doc) == {"sigma_sq", "tau_sq_signed", "gamma_sq", "objective"}
        assert len(doc["sigma_sq"]) == 5
        assert all(v >= 0 for v in doc["sigma_sq"])
        assert all(v >= 0 for v in doc["gamma_sq"])

    def test_byte_deterministic(self, tmp_path, small_data):
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        assert run_cli("estimate", small_data, "--out", a_dir, cwd=tmp_path).returncode == 0
        assert run_cli("estimate", small_data, "--out", b_dir, cwd=tmp_path).returncode == 0
        assert (a_dir / "estimate.json").read_bytes() == (b_dir / "estimate.json").read_bytes()

    def test_consistency_large_n(self, tmp_path):
        cfg = write_config(tmp_path, n=10_000)
        sim_dir = tmp_path / "sim"
        assert run_cli("simulate", "--config", cfg, "--out", sim_dir, cwd=tmp_path).returncode == 0
        res = run_cli("estimate", sim_dir / "data.csv", "--out", tmp_path, cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        doc = json.loads((tmp_path / "estimate.json").read_text())
        assert abs(doc["sigma_sq"][0] - 0.8) < 0.03

    def test_estimation_failure_exit_code(self, tmp_path, bench_params, bench_cuts):
        _, data = simulate(bench_params, bench_cuts, 100, 2, SEED)
        resp = data.responses.copy()
        resp[:, 2, :] = 4
        path = tmp_path / "broken.csv"
        write_dataset_csv(LikertDataset(resp, 5), path)
        res = run_cli("estimate", path, "--out", tmp_path, cwd=tmp_path)
        assert res.returncode == 1
        assert "estimation failed" in res.stderr


class TestEstimateStem:
    def test_one_step_matches_library(self, tmp_path, small_data):
        res = run_cli(
            "estimate", small_data, "--method", "stem", "--iterations", 1,
            "--burn-in", 0, "--seed", 5, "--out", tmp_path, cwd=tmp_path,
        )
        assert res.returncode == 0, res.stderr
        doc = json.loads((tmp_path / "estimate.json").read_text())

        data = read_dataset_csv(small_data)
        est = estimate_cuts(data)
        fit = fit_frobenius(reconstruct(data, est), 5, 2)
        chain = run_stem(
            data,
            StemConfig(
                iterations=1,
                seed=5,
                burn_in=0,
                init_params=fit.params,
                init_cuts=est.as_cutpoints(),
            ),
        )
        p = chain.final_params
        assert doc["sigma_sq"] == (p.sigma**2).tolist()
        assert doc["tau_sq_signed"] == (np.sign(p.tau) * p.tau**2).tolist()
        assert doc["cuts"] == chain.final_cuts.cuts.tolist()
        assert doc["objective"] == chain.objective

    def test_traces_written(self, tmp_path, small_data):
        res = run_cli(
            "estimate", small_data, "--method", "stem", "--iterations", 12,
            "--seed", 3, "--out", tmp_path, cwd=tmp_path,
        )
        assert res.returncode == 0, res.stderr
        lines = (tmp_path / "traces.csv").read_text().splitlines()
        assert lines[0] == "iteration,parameter,value"
        # 12 iterations x (5 sigma + 5 tau + 20 cuts)
        assert len(lines) == 1 + 12 * 30

    def test_bad_iterations_is_input_error(self, tmp_path, small_data):
        res = run_cli(
            "estimate", small_data, "--method", "stem", "--iterations", 0,
            "--out", tmp_path, cwd=tmp_path,
        )
        assert res.returncode == 2
        assert "input error" in res.stderr

    def test_bad_burn_in_is_input_error(self, tmp_path, small_data):
        res = run_cli(
            "estimate", small_data, "--method", "stem", "--iterations", 5,
            "--burn-in", 5, "--out", tmp_path, cwd=tmp_path,
        )
        assert res.returncode == 2


class TestEstimateInputErrors:
    def test_malformed_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("subject,item,time,response\n1,1,1,oops\n")
        res = run_cli("estimate", path, cwd=tmp_path)
        assert res.returncode == 2

    def test_incomplete_panel(self, tmp_path, small_data):
        lines = small_data.read_text().splitlines()
        del lines[5]
        path = tmp_path / "partial.csv"
        path.write_text("\n".join(lines) + "\n")
        res = run_cli("estimate", path, cwd=tmp_path)
        assert res.returncode == 2
        assert "missing" in res.stderr

    def test_missing_file(self, tmp_path):
        res = run_cli("estimate", tmp_path / "nope.csv", cwd=tmp_path)
        assert res.returncode == 2

    def test_unknown_subcommand(self, tmp_path):
        res = run_cli("frobnicate", cwd=tmp_path)
        assert res.returncode == 2


class TestStudy:
    def test_small_study(self, tmp_path):
        cfg = write_config(tmp_path, replicates=2, n=120)
        res = run_cli("study", "--config", cfg, "--out", tmp_path, cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        assert "sigma_1" in res.stdout
        lines = (tmp_path / "rmse.csv").read_text().splitlines()
        assert lines[0] == "method,parameter,rmse"
        assert any(line.startswith("cr,sigma_1,") for line in lines)
        assert any(line.startswith("mm,cut_1_1,") for line in lines)

    def test_replicates_override(self, tmp_path):
        cfg = write_config(tmp_path, replicates=5, n=60)
        res = run_cli(
            "study", "--config", cfg, "--replicates", 1, "--out", tmp_path,
            cwd=tmp_path,
        )
        assert res.returncode == 0, res.stderr

    def test_all_failures_exit_one(self, tmp_path):
        cfg = write_config(
            tmp_path,
            cuts=[[-8.0]] * 5,
            replicates=2,
            n=30,
        )
        res = run_cli("study", "--config", cfg, "--out", tmp_path, cwd=tmp_path)
        assert res.returncode == 1
        assert "every replicate" in res.stderr


class TestDiagnostics:
    @pytest.fixture
    def traces(self, tmp_path, small_data):
        out = tmp_path / "stemout"
        res = run_cli(
            "estimate", small_data, "--method", "stem", "--iterations", 60,
            "--seed", 2, "--out", out, cwd=tmp_path,
        )
        assert res.returncode == 0, res.stderr
        return out / "traces.csv"

    def test_acf_output(self, tmp_path, traces):
        res = run_cli(
            "diagnostics", traces, "--max-lag", 20, "--out", tmp_path,
            cwd=tmp_path,
        )
        assert res.returncode == 0, res.stderr
        lines = (tmp_path / "acf.csv").read_text().splitlines()
        assert lines[0] == "parameter,lag,acf"
        # 30 parameters x 21 lags
        assert len(lines) == 1 + 30 * 21
        first = lines[1].split(",")
        assert first[1] == "0" and float(first[2]) == 1.0

    def test_short_trace_rejected(self, tmp_path, small_data):
        out = tmp_path / "short"
        run_cli(
            "estimate", small_data, "--method", "stem", "--iterations", 5,
            "--seed", 2, "--out", out, cwd=tmp_path,
        )
        res = run_cli("diagnostics", out / "traces.csv", cwd=tmp_path)
        assert res.returncode == 2
        assert "at least 10" in res.stderr

    def test_max_lag_bound(self, tmp_path, traces):
        res = run_cli(
            "diagnostics", traces, "--max-lag", 60, "--out", tmp_path,
            cwd=tmp_path,
        )
        assert res.returncode == 2
