import json
import math
import os
import subprocess
from pathlib import Path

import numpy as np
import pytest

import shb

DATA = Path(os.environ.get("SHB_TEST_DATA_DIR", Path(__file__).resolve().parents[1] / "data"))
CLI = os.environ.get("SHB_CLI")
CLI = str(Path(CLI).resolve()) if CLI else None


def test_gen_problem_is_consistent_and_deterministic():
    p = shb.gen_problem(40, 12, seed=3)
    assert p.shape == (40, 12)
    np.testing.assert_allclose(p.a @ p.planted_solution, p.b, atol=1e-10)
    q = shb.gen_problem(40, 12, seed=3)
    assert np.array_equal(p.a, q.a)


def test_problem_from_arrays_validates():
    p = shb.Problem(np.eye(2), np.array([1.0, 2.0]))
    assert p.planted_solution is None
    with pytest.raises(shb.ShbError) as e:
        shb.Problem(np.eye(2), np.array([1.0]))
    assert e.value.code == "DimensionMismatch"


def test_rate_at_zero_momentum():
    r = shb.l2_rate(1.0, 0.0, 0.5, 0.5)
    assert r.q == 0.5 and r.delta == 0.0 and r.admissible
    r = shb.l2_rate(0.7, 0.0, 0.2, 0.9)
    assert math.isclose(r.q, 1 - 0.7 * 1.3 * 0.2, rel_tol=0, abs_tol=1e-15)


def test_beta_bound_brackets_admissibility():
    upper = shb.beta_upper_bound(1.0, 0.1, 0.4)
    assert shb.l2_rate(1.0, upper - 1e-6, 0.1, 0.4).admissible
    assert not shb.l2_rate(1.0, upper + 1e-6, 0.1, 0.4).admissible


def test_l1_unit_stepsize():
    p = shb.l1_params("unit_stepsize", 0.5, 0.5)
    assert p["omega"] == 1.0
    assert math.isclose(p["beta"], (1 - math.sqrt(0.495)) ** 2, rel_tol=1e-15)


def test_out_of_range_raises():
    with pytest.raises(shb.ShbError) as e:
        shb.l2_rate(2.5, 0.0, 0.5, 0.5)
    assert e.value.code == "OutOfRange"


def test_solve_converges_on_toy_system():
    p = shb.Problem(np.eye(2), np.array([1.0, 2.0]), planted_solution=np.array([1.0, 2.0]))
    t = shb.solve(p, omega=1.0, beta=0.0, iters=60, seed=1)
    assert t["k"][0] == 0 and t["l2_error"][0] == 5.0
    assert t["l2_error"][-1] == 0.0
    np.testing.assert_array_equal(t["final_iterate"], [1.0, 2.0])


def test_solve_reports_divergence_position():
    p = shb.gen_problem(20, 5, seed=2)
    with pytest.raises(shb.ShbError) as e:
        shb.solve(p, omega=1.0, beta=1.5, iters=2000)
    assert e.value.code == "NonFinite"
    assert isinstance(e.value.position, int)


def test_spectrum_in_unit_interval():
    p = shb.gen_problem(30, 10, seed=4)
    for sketch in ("row", "block:3", "gaussian:2"):
        s = shb.spectrum(p, sketch=sketch)
        assert 0.0 < s["lambda_min_plus"] <= s["lambda_max"] <= 1.0 + 1e-8
        assert s["rank"] == 10


def test_analyze_and_verify_return_dicts():
    p = shb.gen_problem(30, 10, seed=1)
    a = shb.analyze(p, omegas=[1.0, 0.5])
    assert len(a["stepsizes"]) == 2
    r = shb.verify(p, 1.0, 0.0, 100, reps=200, record_every=10)
    assert r["checks"]["cesaro_bound"] is True
    assert r["checks"]["l1_below_l2"] is True


def test_bundle_round_trip(tmp_path):
    p = shb.gen_problem(9, 4, seed=5)
    shb.write_bundle(str(tmp_path / "p.json"), p, seed=5)
    q = shb.read_bundle(str(tmp_path / "p.json"))
    assert p.a.tobytes() == q.a.tobytes()
    assert p.b.tobytes() == q.b.tobytes()


def test_libsvm_corpus_file():
    a = shb.parse_libsvm(str(DATA / "libsvm" / "01_minimal.svm"))
    assert a.shape == (2, 2)
    with pytest.raises(shb.ShbError) as e:
        shb.parse_libsvm(str(DATA / "libsvm" / "17_non_monotone.svm"))
    assert e.value.code == "NonMonotoneIndices" and e.value.position == 3


# ------------------------------------------------------------------ CLI

needs_cli = pytest.mark.skipif(not CLI, reason="SHB_CLI not set")


def cli(*args, cwd):
    return subprocess.run([CLI, *map(str, args)], cwd=cwd, capture_output=True, text=True)


@needs_cli
def test_cli_exit_codes(tmp_path):
    assert cli("gen", "--rows", 50, "--cols", 20, "--seed", 1, "--out", "p.json", cwd=tmp_path).returncode == 0

    ok = cli("solve", "--input", "p.json", "--iters", 100, "--out", "t.csv", cwd=tmp_path)
    assert ok.returncode == 0
    header = (tmp_path / "t.csv").read_bytes().split(b"\r\n")[0].decode()
    assert header.startswith("k,l2_error_raw,rel_error_x0")

    bad = cli("solve", "--input", "missing.json", "--out", "t2.csv", cwd=tmp_path)
    assert bad.returncode == 1

    div = cli("solve", "--input", "p.json", "--omega", 1, "--beta", 1.5, "--iters", 5000,
              "--out", "t3.csv", cwd=tmp_path)
    assert div.returncode == 2
    assert not (tmp_path / "t3.csv").exists()

    # Choice (ii) with Monte Carlo over 100 replications fails the slope check.
    fail = cli("verify", "--input", "p.json", "--l1-choice", "inv_lmax", "--checks", "l1",
               "--iters", 40, "--reps", 100, "--out", "v.json", cwd=tmp_path)
    assert fail.returncode == 3
    report = json.loads((tmp_path / "v.json").read_text())
    assert report["passed"] is False


@needs_cli
def test_cli_analyze_matches_module(tmp_path):
    assert cli("gen", "--rows", 30, "--cols", 10, "--seed", 1, "--out", "p.json", cwd=tmp_path).returncode == 0
    out = cli("analyze", "--input", "p.json", cwd=tmp_path)
    assert out.returncode == 0
    from_cli = json.loads(out.stdout)["spectrum"]["lambda_max"]
    assert from_cli == shb.spectrum(shb.read_bundle(str(tmp_path / "p.json")))["lambda_max"]
