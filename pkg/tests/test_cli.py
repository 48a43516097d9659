import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from xsimtest import campaign as ca
from xsimtest.cli import main
from xsimtest.fitness import ScenarioOutcome, evaluate
from xsimtest.scene import GENES
from xsimtest.simulator import BETA

SMALL = ["--runs", "2", "--budget", "30", "--seed", "5"]


def digest(directory: Path) -> dict:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.iterdir())}


@pytest.fixture(scope="module")
def alpha_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("alpha")
    assert main(["search", "--out", str(out), *SMALL]) == 0
    return out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_search_artifacts(alpha_runs):
    names = {p.name for p in alpha_runs.iterdir()}
    assert {"config.txt", "run_000.json", "run_001.json", "scenarios.csv",
            "evaluations.csv", "summary.json"} <= names
    rows = read_csv(alpha_runs / "scenarios.csv")
    assert list(rows[0]) == list(ca.SCENARIO_COLUMNS)
    assert len(rows) == 20
    assert len(read_csv(alpha_runs / "evaluations.csv")) == 60
    summary = json.loads((alpha_runs / "summary.json").read_text())
    assert summary["schema_version"] == ca.SCHEMA_VERSION
    assert len(summary["per_run"]) == 2
    run = json.loads((alpha_runs / "run_000.json").read_text())
    assert run["frame"] == {"origin": [0.0, 0.0], "zero_heading": 0.0, "sense": 1, "speed_unit": "m/s"}


def test_population_times_runs_rows(tmp_path):
    assert main(["search", "--out", str(tmp_path), "--runs", "2", "--budget", "10"]) == 0
    assert len(read_csv(tmp_path / "scenarios.csv")) == 20


def test_search_is_byte_deterministic(tmp_path, alpha_runs):
    assert main(["search", "--out", str(tmp_path), *SMALL]) == 0
    assert digest(tmp_path) == digest(alpha_runs)


def test_search_flags_trim_output(tmp_path):
    assert main(["search", "--out", str(tmp_path), *SMALL, "--no-history", "--no-evaluations"]) == 0
    assert not (tmp_path / "evaluations.csv").exists()
    assert json.loads((tmp_path / "run_000.json").read_text())["history"] == []


def test_parallel_jobs_match_serial(tmp_path, alpha_runs):
    assert main(["search", "--out", str(tmp_path), *SMALL, "--jobs", "2"]) == 0
    assert digest(tmp_path) == digest(alpha_runs)


def test_invalid_backend_exit_code(tmp_path, capsys):
    assert main(["search", "--out", str(tmp_path), "--backend", "gamma"]) == 2
    assert "alpha, beta" in capsys.readouterr().err


def test_config_file_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.txt"
    cfg.write_text("campaign.runs = 2\ncampaign.speed = 3\n")
    assert main(["search", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "bad.txt:2:" in capsys.readouterr().err


def test_config_file_and_set_override(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("campaign.runs = 1\nsearch.budget = 10\n")
    out = tmp_path / "o"
    assert main(["search", "--config", str(cfg), "--out", str(out), "--set", "campaign.algorithm=random"]) == 0
    assert json.loads((out / "summary.json").read_text())["algorithm"] == "random"


def test_xsim_self_reproduction(tmp_path, alpha_runs):
    before = digest(alpha_runs)
    assert main(["xsim", str(alpha_runs), "--target", "alpha", "--out", str(tmp_path)]) == 0
    assert digest(alpha_runs) == before
    report = json.loads((tmp_path / "xsim_report.json").read_text())
    assert set(report["categories"]) <= {"1a", "2b"}
    assert all(d == 0 for v in report["differences"].values() for d in v)


def test_xsim_to_beta(tmp_path, alpha_runs):
    first = tmp_path / "first"
    assert main(["xsim", str(alpha_runs), "--target", "beta", "--out", str(first)]) == 0
    report = json.loads((first / "xsim_report.json").read_text())
    rows = read_csv(first / "ff_differences.csv")
    assert len(rows) == 20
    counts = report["counts"]
    assert sum(counts.values()) == report["total"] == report["source_unsafe"] + report["source_safe"]
    assert counts["1a"] + counts["1b"] + counts["1c"] == report["source_unsafe"]
    hist = read_csv(first / "histograms.csv")
    assert sum(int(r["count"]) for r in hist if r["ff"] == "ff3") == report["total"]
    again = tmp_path / "again"
    assert main(["xsim", str(alpha_runs), "--target", "beta", "--out", str(again)]) == 0
    assert digest(again) == digest(first)


def test_xsim_requires_frame(tmp_path, alpha_runs):
    broken = tmp_path / "broken"
    broken.mkdir()
    (broken / "config.txt").write_text((alpha_runs / "config.txt").read_text())
    run = json.loads((alpha_runs / "run_000.json").read_text())
    del run["frame"]
    (broken / "run_000.json").write_text(json.dumps(run))
    assert main(["xsim", str(broken), "--target", "beta", "--out", str(tmp_path / "x")]) == 3


def test_compare_self(tmp_path, alpha_runs, capsys):
    assert main(["compare", str(alpha_runs), str(alpha_runs), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "no significant difference" in out
    doc = json.loads((tmp_path / "comparison.json").read_text())
    assert doc["p"] == 1.0
    assert len(doc["a"]["hv"]) == len(doc["b"]["hv"]) == 2


def test_compare_needs_two_runs(tmp_path, alpha_runs):
    one = tmp_path / "one"
    one.mkdir()
    (one / "run_000.json").write_text((alpha_runs / "run_000.json").read_text())
    assert main(["compare", str(one), str(alpha_runs)]) == 3


def write_scenarios(path, genes, violation):
    rows = []
    for i, (g, v) in enumerate(zip(genes, violation)):
        row = dict.fromkeys(ca.SCENARIO_COLUMNS, "")
        row.update(run=0, scenario=i, violation=str(bool(v)), **{k: repr(float(x)) for k, x in zip(GENES, g)})
        rows.append([row[c] for c in ca.SCENARIO_COLUMNS])
    ca.write_csv(path, ca.SCENARIO_COLUMNS, rows)


def test_diagnose_all_safe(tmp_path):
    genes = np.random.default_rng(0).uniform(1, 25, size=(40, 5))
    write_scenarios(tmp_path / "s.csv", genes, [False] * 40)
    assert main(["diagnose", str(tmp_path / "s.csv"), "--out", str(tmp_path / "d")]) == 0
    tree = json.loads((tmp_path / "d" / "tree.json").read_text())["tree"]
    assert "gene" not in tree and tree["label"] is False
    assert (tmp_path / "d" / "tree.txt").read_text().startswith("-> False")


def test_diagnose_recovers_speed_split(tmp_path):
    rng = np.random.default_rng(1)
    genes = np.column_stack([
        rng.uniform(1, 25, 500), rng.uniform(20, 85, 500), rng.uniform(-15, -2, 500),
        rng.uniform(40, 160, 500), rng.uniform(1, 5, 500),
    ])
    write_scenarios(tmp_path / "s.csv", genes, genes[:, 0] >= 20)
    assert main(["diagnose", str(tmp_path / "s.csv"), "--out", str(tmp_path / "d")]) == 0
    tree = json.loads((tmp_path / "d" / "tree.json").read_text())["tree"]
    assert tree["gene"] == "v0c" and 19 <= tree["threshold"] <= 21

    def leaves(node):
        return [node] if "gene" not in node else leaves(node["left"]) + leaves(node["right"])

    assert sum(n["n_samples"] for n in leaves(tree)) == 500


def test_diagnose_bad_input(tmp_path):
    (tmp_path / "s.csv").write_text("run,scenario\n0,0\n")
    assert main(["diagnose", str(tmp_path / "s.csv"), "--out", str(tmp_path / "d")]) == 3
    write_scenarios(tmp_path / "few.csv", np.ones((3, 5)), [True] * 3)
    assert main(["diagnose", str(tmp_path / "few.csv"), "--out", str(tmp_path / "d")]) == 3


def test_replay_reproduces_stored_outcome(tmp_path, alpha_runs, capsys):
    run = json.loads((alpha_runs / "run_001.json").read_text())
    stored = ScenarioOutcome.from_dict(run["population"][3]["outcome"])
    trace = tmp_path / "t.csv"
    assert main(["replay", str(alpha_runs), "--run", "1", "--scenario", "3", "--out", str(trace)]) == 0
    ffs = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert (ffs["ff1"], ffs["ff2"], ffs["ff3"]) == stored.objectives
    rows = read_csv(trace)
    assert list(rows[0]) == list(ca.TRACE_COLUMNS)
    assert min(float(r["dist"]) for r in rows) == stored.ff1


def test_replay_on_other_backend_uses_its_frame(tmp_path, alpha_runs, capsys):
    trace = tmp_path / "t.csv"
    args = ["replay", str(alpha_runs), "--run", "0", "--scenario", "0", "--backend", "beta"]
    assert main([*args, "--out", str(trace)]) == 0
    first = read_csv(trace)[0]
    assert float(first["car_x"]) == BETA.frame.origin[0]
    assert float(first["car_y"]) == BETA.frame.origin[1]
    run = json.loads((alpha_runs / "run_000.json").read_text())
    v0c = run["population"][0]["outcome"]["input"]["v0c"]
    assert float(first["car_vx"]) == pytest.approx(v0c * 3.6)


def test_replay_unknown_scenario(alpha_runs):
    assert main(["replay", str(alpha_runs), "--run", "0", "--scenario", "99"]) == 3
    assert main(["replay", str(alpha_runs), "--run", "7", "--scenario", "0"]) == 3


def test_missing_artifacts_exit_code(tmp_path):
    assert main(["compare", str(tmp_path), str(tmp_path)]) == 3


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["search"])
    assert exc.value.code == 2


def test_derived_seeds_reproduce_evaluations(alpha_runs):
    cfg_text = (alpha_runs / "config.txt").read_text()
    from xsimtest.config import load_config

    cfg = load_config(cfg_text)
    run = json.loads((alpha_runs / "run_000.json").read_text())
    assert run["seed"] == ca.derive_seed(cfg.seed, 0)
    for item in run["population"]:
        o = ScenarioOutcome.from_dict(item["outcome"])
        again = evaluate(o.input, cfg.backend_config(), cfg.scene, cfg.detector, cfg.channel, o.seed)
        assert again == o
