import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from conftest import MODELS
from popspec import (
    EstimationConfig,
    cluster_eigenvalues,
    estimate,
    estimate_partition,
    lsd_density,
    moment_table,
    read_spec,
    run_experiment,
    support_intervals,
)
from popspec.cli import main

ROOT = Path(__file__).resolve().parents[1]
MODEL = ROOT / "experiments" / "base.psd"
BND = tuple(support_intervals(MODELS["base"], 0.32).boundaries().tolist())


@pytest.fixture
def eig_file(tmp_path, base_sample):
    path = tmp_path / "eigs.txt"
    path.write_text("".join(f"{x:.17g}\n" for x in base_sample.lambdas))
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def sample_args(eig_file):
    return ["--eigs", eig_file, "--p", 320, "--n", 1000, "--boundaries", ",".join(f"{b:.17g}" for b in BND)]


def test_support_matches_library(capsys):
    code, out, _ = run(capsys, "support", "--model", MODEL, "--c", 0.32)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "index,lower,upper,delta_lower,delta_upper"
    sup = support_intervals(MODELS["base"], 0.32)
    got = np.array([[float(x) for x in ln.split(",")[1:3]] for ln in lines[1:]])
    assert np.array_equal(got, sup.intervals)


def test_density_matches_library(capsys, tmp_path):
    out_path = tmp_path / "dens.csv"
    code, _, _ = run(capsys, "density", "--model", MODEL, "--c", 0.32, "--grid", "0.5,30,7", "--out", out_path)
    assert code == 0
    rows = np.loadtxt(out_path, delimiter=",", skiprows=1)
    assert np.array_equal(rows[:, 1], lsd_density(np.linspace(0.5, 30, 7), MODELS["base"], 0.32))


def test_moments_match_library(capsys, eig_file, base_sample):
    code, out, _ = run(capsys, "moments", *sample_args(eig_file), "--L", 3)
    assert code == 0
    assign = cluster_eigenvalues(base_sample, boundaries=BND)
    assert out == moment_table(base_sample, assign, 3).to_csv()


def test_partition_output(capsys, eig_file, base_sample):
    code, out, _ = run(capsys, "partition", *sample_args(eig_file), "--k", 4)
    assert code == 0
    lines = out.strip().splitlines()
    assign = cluster_eigenvalues(base_sample, boundaries=BND)
    best = estimate_partition(moment_table(base_sample, assign, 3), 4, 3)
    assert lines[0] == "# partition=" + "-".join(map(str, best)) == "# partition=1-1-2"
    assert lines[1] == "partition,g_hat"
    assert {ln.split(",")[0] for ln in lines[2:]} <= {"1-1-2", "1-2-1", "2-1-1"}


def test_estimate_matches_library(capsys, eig_file, base_sample, tmp_path):
    out_path = tmp_path / "theta.psd"
    code, out, _ = run(capsys, "estimate", *sample_args(eig_file), "--k", 4, "--out", out_path)
    assert code == 0
    res = estimate(base_sample, EstimationConfig(4, boundaries=BND))
    assert out_path.read_text() == res.theta_hat.to_text()
    assert "partition=1;1;2" in out and "fallback_events=" in out


def test_estimate_with_merge_and_weights(capsys, eig_file):
    code, out, _ = run(
        capsys, "estimate", *sample_args(eig_file), "--k", 4, "--merge", "1+2,3",
        "--partition", "1,1,2", "--known-weights", "0.5,0.25,-,-",
    )
    assert code == 0
    assert out.startswith("# total_mass=1") and "partition=2;2" in out


def test_simulate_matches_library(capsys, tmp_path):
    spec_path = tmp_path / "exp.cfg"
    spec_path.write_text(
        "[experiment]\nmodel_file = base.psd\ndimensions = 32x100\nreplications = 3\n\n[variant:LME]\n"
    )
    (tmp_path / "base.psd").write_text(MODEL.read_text())
    csv_path, txt_path = tmp_path / "r.csv", tmp_path / "r.txt"
    code, _, _ = run(capsys, "simulate", "--spec", spec_path, "--seed", 5, "--out", csv_path, "--text", txt_path)
    assert code == 0
    report = run_experiment(read_spec(spec_path, seed=5))
    assert csv_path.read_text() == report.to_csv()
    assert txt_path.read_text() == report.to_text()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["support", "--model", MODEL],
        ["frobnicate"],
        ["estimate", "--eigs", "x", "--p", "3", "--n", "4", "--k", "2"],
        ["simulate", "--spec", "nothing.cfg"],
    ],
)
def test_usage_errors_exit_1(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1 and "error" in err


def test_input_errors_exit_1(capsys, tmp_path, eig_file):
    code, _, err = run(capsys, "support", "--model", tmp_path / "missing.psd", "--c", 0.3)
    assert code == 1 and "popspec support" in err
    code, _, _ = run(capsys, "support", "--model", MODEL, "--c", -1)
    assert code == 1
    code, _, _ = run(capsys, "estimate", "--eigs", eig_file, "--p", 320, "--n", 1000, "--m", 3, "--k", 2)
    assert code == 1


def test_estimation_failure_exits_2(capsys, eig_file, base_sample):
    top = base_sample.lambdas[base_sample.lambdas > BND[-1]]
    cuts = ",".join(f"{b:.17g}" for b in BND + (float(np.quantile(top, 0.25)),))
    code, _, err = run(
        capsys, "estimate", "--eigs", eig_file, "--p", 320, "--n", 1000, "--boundaries", cuts,
        "--k", 5, "--partition", "1,1,2,1", "--no-fallback",
    )
    assert code == 2
    assert "failed_cluster=3" in err and "failed_stage=hankel" in err


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "popspec.cli", "support", "--model", str(MODEL), "--c", "0.32"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and proc.stdout.startswith("index,")
