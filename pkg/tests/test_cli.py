import json
import subprocess
import sys
import time

import numpy as np
import pytest

from tailsel.cli import main
from tailsel.synthetic import cdc_like_frame


def run(*args, env=None):
    cmd = [sys.executable, "-m", "tailsel", *args]
    return subprocess.run(cmd, capture_output=True, text=True, env=env, timeout=300)


def strip_runtime(text: str) -> dict:
    doc = json.loads(text)
    doc.pop("runtime")
    return doc


@pytest.fixture(scope="module")
def toy_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("data") / "toy.csv"
    cdc_like_frame(1000, seed=0).to_csv(p, index=False)
    return p


@pytest.fixture(scope="module")
def planted_csv(tmp_path_factory):
    rng = np.random.default_rng(0)
    y = (rng.random(300) < 0.4).astype(int)
    noise = rng.integers(0, 5, 300)
    p = tmp_path_factory.mktemp("data") / "planted.csv"
    lines = ["noise,copy,Diabetes_012"] + [f"{a},{b * 2},{b}" for a, b in zip(noise, y)]
    p.write_text("\n".join(lines) + "\n")
    return p


# ---------------------------------------------------------------- exit codes

def test_missing_input_exit_1(tmp_path):
    res = run("rank", "--input", str(tmp_path / "absent.csv"))
    assert res.returncode == 1
    assert "absent.csv" in res.stderr and "load" in res.stderr


def test_usage_errors_exit_2(toy_csv):
    assert run().returncode == 2
    assert run("rank", "--input", str(toy_csv), "--k", "0").returncode == 2
    assert run("rank", "--input", str(toy_csv), "--method", "nope").returncode == 2
    assert run("rank", "--input", str(toy_csv), "--method", "all").returncode == 2
    assert run("rank", "--input", str(toy_csv), "--bogus").returncode == 2
    assert run("rank").returncode == 2
    assert run("fit-copula", "--input", str(toy_csv)).returncode == 2
    assert run("rank", "--input", str(toy_csv), "--k", "x").returncode == 2


def test_unknown_feature_exit_1(toy_csv):
    res = run("fit-copula", "--input", str(toy_csv), "--feature", "Nope")
    assert res.returncode == 1 and "Nope" in res.stderr


def test_bad_csv_exit_1(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,Diabetes_012\n1,x,0\n2,3,1\n")
    res = run("rank", "--input", str(p))
    assert res.returncode == 1 and "line 2" in res.stderr


def test_k_too_large_is_runtime_failure(toy_csv):
    assert main(["rank", "--input", str(toy_csv), "--k", "50"]) == 1


def test_missing_output_dir_exit_1(toy_csv, tmp_path):
    assert main(["rank", "--input", str(toy_csv), "--output", str(tmp_path / "no" / "r.json")]) == 1


# ---------------------------------------------------------------- outputs

def test_rank_planted_copy_first(planted_csv, capsys):
    assert main(["rank", "--input", str(planted_csv), "--method", "a2", "--k", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["result"]["selected"] == ["copy"]
    assert doc["result"]["entries"][0]["feature"] == "copy"


def test_rank_json_echoes_config(toy_csv, tmp_path):
    out = tmp_path / "rank.json"
    assert main(["rank", "--input", str(toy_csv), "--k", "5", "--seed", "42", "--output", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == 1
    assert doc["config"] == {
        "command": "rank", "input": str(toy_csv), "target": None, "k": 5, "method": "a2", "seed": 42,
        "estimator": "tau", "select_on": "train", "output": str(out), "format": "json", "feature": None,
        "repeats": 20,
    }
    assert len(doc["result"]["selected"]) == 5 and len(doc["result"]["entries"]) == 21
    assert {"threads", "wall_seconds"} <= set(doc["runtime"])


@pytest.mark.parametrize("method", ["mi", "ga"])
def test_rank_other_methods(toy_csv, method, capsys):
    assert main(["rank", "--input", str(toy_csv), "--method", method]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["result"]["selected"]) == 5 and doc["result"]["method"] == method


@pytest.mark.parametrize("fmt", ["text", "csv"])
def test_rank_formats(toy_csv, fmt, capsys):
    assert main(["rank", "--input", str(toy_csv), "--format", fmt]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 22
    assert out[0].startswith("rank")


def test_fit_copula_noise_and_comonotone(tmp_path, capsys):
    rng = np.random.default_rng(1)
    y = (rng.random(500) < 0.5).astype(int)
    p = tmp_path / "fc.csv"
    rows = ["noise,same,Diabetes_012"] + [f"{a:.6f},{b},{b}" for a, b in zip(rng.random(500), y)]
    p.write_text("\n".join(rows) + "\n")
    assert main(["fit-copula", "--input", str(p), "--feature", "noise"]) == 0
    r = json.loads(capsys.readouterr().out)["result"]
    assert r["clamped"] and r["theta"] == 1.0 and abs(r["lambda_u"] - 0.5858) < 1e-4
    assert main(["fit-copula", "--input", str(p), "--feature", "same", "--estimator", "mle"]) == 0
    r = json.loads(capsys.readouterr().out)["result"]
    assert r["method"] == "pseudo_mle" and r["tau_hat"] == 1.0
    assert r["diagnostics"]["distinct_u"] == 2


def test_config_file_and_flag_precedence(toy_csv, tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"input": str(toy_csv), "k": 3, "method": "mi", "threads": 2}))
    assert main(["rank", "--config", str(cfg)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["config"]["k"] == 3 and doc["config"]["method"] == "mi"
    assert doc["runtime"]["threads"] == 2
    assert main(["rank", "--config", str(cfg), "--k", "4"]) == 0
    assert json.loads(capsys.readouterr().out)["config"]["k"] == 4
    cfg.write_text(json.dumps({"input": str(toy_csv), "colour": "red"}))
    assert main(["rank", "--config", str(cfg)]) == 2


def test_threads_env_fallback(toy_csv, capsys, monkeypatch):
    monkeypatch.setenv("TAILSEL_THREADS", "3")
    assert main(["rank", "--input", str(toy_csv)]) == 0
    assert json.loads(capsys.readouterr().out)["runtime"]["threads"] == 3
    assert main(["rank", "--input", str(toy_csv), "--threads", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["runtime"]["threads"] == 1
    monkeypatch.setenv("TAILSEL_THREADS", "many")
    assert main(["rank", "--input", str(toy_csv)]) == 2


# ---------------------------------------------------------------- determinism and benchmark

@pytest.mark.parametrize("method", ["a2", "mi", "ga"])
def test_rank_deterministic_across_threads(toy_csv, method, capsys):
    docs = []
    for threads in ("1", "4", "1"):
        assert main(["rank", "--input", str(toy_csv), "--method", method, "--threads", threads]) == 0
        docs.append(json.dumps(strip_runtime(capsys.readouterr().out)))
    assert docs[0] == docs[1] == docs[2]


@pytest.mark.slow
def test_benchmark_smoke_and_determinism(toy_csv, tmp_path):
    outs = []
    for i, threads in enumerate(("1", "3")):
        out = tmp_path / f"bench{i}.json"
        t0 = time.perf_counter()
        res = run("benchmark", "--input", str(toy_csv), "--output", str(out), "--threads", threads)
        elapsed = time.perf_counter() - t0
        assert res.returncode == 0, res.stderr
        assert elapsed < 30
        outs.append(out)
    a, b = (o.read_text() for o in outs)
    da, db = strip_runtime(a), strip_runtime(b)
    da["config"].pop("output"), db["config"].pop("output")
    assert json.dumps(da) == json.dumps(db)
    assert len(da["result"]["blocks"]) == 16
    assert outs[0].with_suffix(".txt").read_text() == outs[1].with_suffix(".txt").read_text()
    csv_a = (tmp_path / "bench0_importance.csv").read_text()
    assert csv_a == (tmp_path / "bench1_importance.csv").read_text()
    assert csv_a.splitlines()[0] == "feature,mean_drop" and len(csv_a.splitlines()) == 6
